//! Curvature tensors of metric fields.

pub mod jet;
pub mod point;
pub mod symbol;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Field, Symmetry};
use crate::metric::MetricField;
use crate::scalar::Real;
use crate::spectral::spectral_partial;
use crate::stencil::{DerivativeScheme, StencilTable};

pub use jet::{jet_at, Jet};
pub use point::{mn_from, reassemble_weyl, PointCurvature};
pub use symbol::{
    check_symbol_injectivity, hessian_symbol, sample_directions, weyl_symbol, GaugeRows, InjectivityReport,
    SymbolAssembly,
};

enum JetSource<T> {
    Stencil(StencilTable<T>),
    Spectral { d1: Vec<Field<T>>, d2: Vec<Field<T>> },
}

/// Pointwise curvature evaluator over a metric field.
pub struct Curvature<T> {
    metric: MetricField<T>,
    scheme: DerivativeScheme,
    source: JetSource<T>,
}

impl<T: Real> Curvature<T> {
    pub fn new(metric: &MetricField<T>, scheme: DerivativeScheme) -> Result<Self> {
        let source = if scheme.spectral {
            let g = metric.g();
            let n = metric.dim();
            let mut d1 = Vec::with_capacity(n);
            for a in 0..n {
                d1.push(spectral_partial(g, a)?);
            }
            let mut d2 = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    d2.push(spectral_partial(&d1[a], b)?);
                }
            }
            JetSource::Spectral { d1, d2 }
        } else {
            JetSource::Stencil(StencilTable::new(metric.chart(), scheme)?)
        };
        Ok(Self { metric: metric.clone(), scheme, source })
    }

    pub fn metric(&self) -> &MetricField<T> {
        &self.metric
    }
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
    pub fn scheme(&self) -> DerivativeScheme {
        self.scheme
    }
    /// Core margin: two stencil half-widths on non-periodic axes.
    pub fn margin(&self) -> usize {
        if self.scheme.spectral {
            0
        } else {
            self.scheme.core_margin()
        }
    }
    pub fn core_nodes(&self) -> Vec<usize> {
        self.metric.chart().core_nodes(self.margin())
    }

    pub fn jet(&self, node: usize) -> Jet<T> {
        match &self.source {
            JetSource::Stencil(t) => jet_at(self.metric.g(), t, node),
            JetSource::Spectral { d1, d2 } => jet::jet_from_fields(self.metric.g(), d1, d2, node),
        }
    }

    /// Jet of an arbitrary field on the same chart with this evaluator's scheme.
    pub fn field_jet(&self, f: &Field<T>, node: usize) -> Result<Jet<T>> {
        match &self.source {
            JetSource::Stencil(t) => Ok(jet_at(f, t, node)),
            JetSource::Spectral { .. } => Err(Error::Unsupported("field jets on the spectral path".into())),
        }
    }

    pub fn at(&self, node: usize) -> PointCurvature<T> {
        PointCurvature::from_jet(&self.jet(node))
    }

    /// Largest value of `f` over the given nodes.
    pub fn sup_over(&self, nodes: impl IntoIterator<Item = usize>, f: impl Fn(&PointCurvature<T>) -> T) -> T {
        nodes.into_iter().map(|k| f(&self.at(k))).fold(T::zero(), T::max)
    }

    fn lazy_field(
        self: &Arc<Self>,
        shape: &[usize],
        syms: &[Symmetry],
        f: impl Fn(&PointCurvature<T>, &mut [T]) + Send + Sync + 'static,
    ) -> Result<Field<T>> {
        let me = Arc::clone(self);
        Field::lazy(self.metric.chart(), shape, syms, Arc::new(move |k, _x, out: &mut [T]| f(&me.at(k), out)))
    }

    fn require_dim(&self, min: usize, what: &str) -> Result<()> {
        if self.dim() < min {
            return Err(Error::Unsupported(format!("{what} needs dimension >= {min}, got {}", self.dim())));
        }
        Ok(())
    }

    /// Γ^c_ab as a rank-3 field, symmetric in the lower pair.
    pub fn christoffel_field(self: &Arc<Self>) -> Result<Field<T>> {
        let n = self.dim();
        self.lazy_field(&[n, n, n], &[Symmetry::Symmetric(1, 2)], move |pc, o| o[..n * n * n].copy_from_slice(&pc.gamma[..n * n * n]))
    }

    pub fn riemann_field(self: &Arc<Self>) -> Result<Field<T>> {
        let n = self.dim();
        let m = n * n * n * n;
        self.lazy_field(&[n, n, n, n], &[], move |pc, o| o[..m].copy_from_slice(&pc.riemann[..m]))
    }

    pub fn ricci_field(self: &Arc<Self>) -> Result<Field<T>> {
        let n = self.dim();
        self.lazy_field(&[n, n], &[Symmetry::Symmetric(0, 1)], move |pc, o| o[..n * n].copy_from_slice(&pc.ricci[..n * n]))
    }

    pub fn scalar_field(self: &Arc<Self>) -> Result<Field<T>> {
        self.lazy_field(&[], &[], |pc, o| o[0] = pc.scalar)
    }

    pub fn schouten_field(self: &Arc<Self>) -> Result<Field<T>> {
        self.require_dim(3, "Schouten tensor")?;
        let n = self.dim();
        self.lazy_field(&[n, n], &[Symmetry::Symmetric(0, 1)], move |pc, o| o[..n * n].copy_from_slice(&pc.schouten()[..n * n]))
    }

    pub fn weyl_field(self: &Arc<Self>) -> Result<Field<T>> {
        self.require_dim(3, "Weyl tensor")?;
        let n = self.dim();
        let m = n * n * n * n;
        self.lazy_field(&[n, n, n, n], &[], move |pc, o| o[..m].copy_from_slice(&pc.weyl()[..m]))
    }

    pub fn mn_fields(self: &Arc<Self>) -> Result<(Field<T>, Field<T>)> {
        self.require_dim(3, "M/N tensors")?;
        let n = self.dim();
        let m = n * n * n * n;
        let mf = self.lazy_field(&[n, n, n, n], &[], move |pc, o| o[..m].copy_from_slice(&pc.mn().0[..m]))?;
        let nf = self.lazy_field(&[n, n, n, n], &[], move |pc, o| o[..m].copy_from_slice(&pc.mn().1[..m]))?;
        Ok((mf, nf))
    }
}

fn evaluator<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Arc<Curvature<T>>> {
    Ok(Arc::new(Curvature::new(g, scheme)?))
}

/// Christoffel symbols Γ^c_ab (lazily evaluated field).
pub fn christoffel<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.christoffel_field()
}
/// Fully lowered Riemann tensor R_abcd.
pub fn riemann<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.riemann_field()
}
pub fn ricci<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.ricci_field()
}
pub fn scalar<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.scalar_field()
}
pub fn schouten<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.schouten_field()
}
pub fn weyl<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<Field<T>> {
    evaluator(g, scheme)?.weyl_field()
}
pub fn mn_tensors<T: Real>(g: &MetricField<T>, scheme: DerivativeScheme) -> Result<(Field<T>, Field<T>)> {
    evaluator(g, scheme)?.mn_fields()
}

/// Sup-norm discrepancies of the conformal-change identities for `e^{2f} g`.
#[derive(Clone, Debug)]
pub struct ConformalIdentityReport<T> {
    pub ricci_discrepancy: T,
    pub scalar_discrepancy: T,
    pub nodes: usize,
}

/// Compares Ricci and scalar curvature of `e^{2f} g` computed directly against the
/// transformation formulas, over the interior core.
pub fn conformal_ricci_identity_check<T: Real>(
    g: &MetricField<T>,
    f: &Field<T>,
    scheme: DerivativeScheme,
) -> Result<ConformalIdentityReport<T>> {
    let nodes = g.chart().core_nodes(scheme.core_margin());
    conformal_ricci_identity_check_at(g, f, scheme, &nodes)
}

/// As [`conformal_ricci_identity_check`] on an explicit node list.
pub fn conformal_ricci_identity_check_at<T: Real>(
    g: &MetricField<T>,
    f: &Field<T>,
    scheme: DerivativeScheme,
    nodes: &[usize],
) -> Result<ConformalIdentityReport<T>> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::Unsupported("conformal identity check needs n >= 3".into()));
    }
    if f.ncomp() != 1 || f.chart() != g.chart() {
        return Err(Error::Config("f must be a scalar field on the metric chart".into()));
    }
    let two = T::lit(2.0);
    let fc = f.clone();
    let e2f = Field::lazy(g.chart(), &[], &[], Arc::new(move |k, _x, o: &mut [T]| o[0] = (two * fc.get(k, 0)).exp()))?;
    let gt = g.conformal_scale(&e2f)?;
    let base = Curvature::new(g, scheme)?;
    let conf = Curvature::new(&gt, scheme)?;
    let nf = T::from_usize_lossy(n);
    let mut rd = T::zero();
    let mut sd = T::zero();
    for &k in nodes {
        let pc = base.at(k);
        let pt = conf.at(k);
        let jf = base.field_jet(f, k)?;
        let mut hess = [T::zero(); 16];
        for i in 0..n {
            for j in 0..n {
                let mut v = jf.d2(i, j, 0);
                for c in 0..n {
                    v -= pc.gamma[(c * n + i) * n + j] * jf.d1(c, 0);
                }
                hess[i * n + j] = v;
            }
        }
        let mut lap = T::zero();
        let mut grad2 = T::zero();
        for i in 0..n {
            for j in 0..n {
                lap -= pc.ginv[i * n + j] * hess[i * n + j];
                grad2 += pc.ginv[i * n + j] * jf.d1(i, 0) * jf.d1(j, 0);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let rhs = pc.ricci[i * n + j] - (nf - two) * (hess[i * n + j] - jf.d1(i, 0) * jf.d1(j, 0))
                    + (lap - (nf - two) * grad2) * pc.g[i * n + j];
                rd = rd.max((pt.ricci[i * n + j] - rhs).abs());
            }
        }
        let srhs = (-two * jf.v[0]).exp()
            * (pc.scalar + two * (nf - T::one()) * lap - (nf - two) * (nf - T::one()) * grad2);
        sd = sd.max((pt.scalar - srhs).abs());
    }
    Ok(ConformalIdentityReport { ricci_discrepancy: rd, scalar_discrepancy: sd, nodes: nodes.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;

    #[test]
    fn flat_metric_vanishes() {
        let c = Chart::<f64>::cube(3, -1.0, 1.0, 9).unwrap();
        let g = MetricField::identity(&c).unwrap();
        let s = DerivativeScheme::order2();
        assert_eq!(christoffel(&g, s).unwrap().sup_norm(), 0.0);
        assert_eq!(weyl(&g, s).unwrap().sup_norm(), 0.0);
        assert_eq!(schouten(&g, s).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn polar_christoffel() {
        let c = Chart::<f64>::new(&[1.0, 0.0], &[2.0, 1.0], &[33, 9], &[false, false]).unwrap();
        let g = MetricField::from_fn(&c, |x, o| o.copy_from_slice(&[1.0, 0.0, 0.0, x[0] * x[0]])).unwrap();
        let gam = christoffel(&g, DerivativeScheme::order2()).unwrap();
        for k in c.core_nodes(2) {
            let r = c.coords_of(k)[0];
            // Γ^2_12 and Γ^1_22
            assert!((gam.get(k, 4 + 1) - 1.0 / r).abs() < 1e-3);
            assert!((gam.get(k, 3) + r).abs() < 1e-12);
        }
    }

    #[test]
    fn schouten_rejects_dimension_two() {
        let c = Chart::<f64>::cube(2, -1.0, 1.0, 9).unwrap();
        let g = MetricField::identity(&c).unwrap();
        assert!(matches!(schouten(&g, DerivativeScheme::order2()), Err(Error::Unsupported(_))));
        assert!(weyl(&g, DerivativeScheme::order2()).is_err());
    }

    #[test]
    fn conformal_identity_zero_factor() {
        let c = Chart::<f64>::cube(3, -0.5, 0.5, 11).unwrap();
        let g = MetricField::from_fn(&c, |x, o| {
            let s = 1.0 + 0.2 * x[0] * x[1];
            o.copy_from_slice(&[s, 0.05 * x[2], 0.0, 0.05 * x[2], 1.0, 0.0, 0.0, 0.0, 1.0 + 0.1 * x[2] * x[2]]);
        })
        .unwrap();
        let f = Field::scalar(&c, |_| 0.0).unwrap();
        let r = conformal_ricci_identity_check(&g, &f, DerivativeScheme::order2()).unwrap();
        assert!(r.ricci_discrepancy <= 1e-12 && r.scalar_discrepancy <= 1e-12);
    }

    #[test]
    fn conformal_identity_pins_laplacian_sign() {
        // Δf ≠ 0 here, so a sign error in the Laplacian term would show up at O(1)
        let c = Chart::<f64>::cube(3, -0.5, 0.5, 17).unwrap();
        let g = MetricField::identity(&c).unwrap();
        let f = Field::scalar(&c, |x| 0.1 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let r = conformal_ricci_identity_check(&g, &f, DerivativeScheme::order2()).unwrap();
        assert!(r.ricci_discrepancy < 1e-2, "{}", r.ricci_discrepancy);
        assert!(r.scalar_discrepancy < 1e-2, "{}", r.scalar_discrepancy);
    }
}
