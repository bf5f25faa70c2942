//! Riemannian metric fields and structural constants.

use std::sync::Arc;

use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::{Field, Symmetry};
use crate::linalg;
use crate::scalar::Real;

/// Symmetric positive-definite matrix field with cached inverse and determinant.
#[derive(Clone)]
pub struct MetricField<T> {
    g: Field<T>,
    g_inv: Field<T>,
    det_g: Field<T>,
    lambda_min: T,
}

impl<T: Real> std::fmt::Debug for MetricField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField").field("g", &self.g).field("lambda_min", &self.lambda_min).finish()
    }
}

/// Relative asymmetry tolerated before an input is rejected.
const SYM_TOL: f64 = 1e-12;

fn check_node<T: Real>(n: usize, g: &[T], chart: &Chart<T>, node: usize) -> Result<T> {
    for (i, v) in g[..n * n].iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "non-finite metric component g[{}][{}] at x = {:?}",
                i / n + 1,
                i % n + 1,
                coords_f64(chart, node)
            )));
        }
    }
    let scale = g[..n * n].iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            if (g[i * n + j] - g[j * n + i]).abs() > T::lit(SYM_TOL) * scale {
                return Err(Error::Validation(format!(
                    "metric not symmetric: g[{}][{}] != g[{}][{}] at x = {:?}",
                    i + 1,
                    j + 1,
                    j + 1,
                    i + 1,
                    coords_f64(chart, node)
                )));
            }
        }
    }
    for (k, m) in linalg::leading_minors(n, g).into_iter().enumerate() {
        if !(m > T::zero()) {
            return Err(Error::NotPositiveDefinite {
                coords: coords_f64(chart, node),
                minor: k + 1,
                value: m.as_f64(),
            });
        }
    }
    Ok(min_eigenvalue(n, g))
}

fn coords_f64<T: Real>(chart: &Chart<T>, node: usize) -> Vec<f64> {
    chart.coords_of(node).iter().map(|v| v.as_f64()).collect()
}

/// Smallest eigenvalue of a symmetric matrix (diagonal matrices skip the Jacobi sweep).
pub fn min_eigenvalue<T: Real>(n: usize, g: &[T]) -> T {
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || g[i * n + j] == T::zero()));
    if diagonal {
        return (0..n).map(|i| g[i * n + i]).fold(T::infinity(), T::min);
    }
    linalg::sym_eigen(n, &g[..n * n]).0[0]
}

impl<T: Real> MetricField<T> {
    /// Validates a rank-2 field and caches inverse and determinant.
    ///
    /// Dense input gives dense caches; lazy input stays lazy and is validated by a full sweep.
    pub fn from_field(g: Field<T>) -> Result<Self> {
        let chart = g.chart().clone();
        let n = chart.dim();
        if g.shape() != [n, n] {
            return Err(Error::Validation(format!("metric field must have shape [{n}, {n}]")));
        }
        let mut buf = [T::zero(); 16];
        let mut lambda_min = T::infinity();
        for k in 0..chart.len() {
            g.value_at(k, &mut buf);
            lambda_min = lambda_min.min(check_node(n, &buf, &chart, k)?);
        }
        let sym = [Symmetry::Symmetric(0, 1)];
        if g.is_dense() {
            let vals = g.values().unwrap();
            let g = Field::from_values(chart.clone(), &[n, n], &sym, vals.to_vec())?;
            let vals = g.values().unwrap();
            let mut inv = vec![T::zero(); vals.len()];
            let mut det = vec![T::zero(); chart.len()];
            for k in 0..chart.len() {
                det[k] = linalg::inverse(n, &vals[k * n * n..(k + 1) * n * n], &mut inv[k * n * n..(k + 1) * n * n]);
            }
            let g_inv = Field::from_values(chart.clone(), &[n, n], &sym, inv)?;
            let det_g = Field::from_values(chart, &[], &[], det)?;
            Ok(Self { g, g_inv, det_g, lambda_min })
        } else {
            let g = Field::lazy(&chart, &[n, n], &sym, {
                let g = g.clone();
                Arc::new(move |k, _x, out: &mut [T]| g.value_at(k, out))
            })?;
            let gi = g.clone();
            let g_inv = Field::lazy(&chart, &[n, n], &[], Arc::new(move |k, _x, out: &mut [T]| {
                let mut b = [T::zero(); 16];
                gi.value_at(k, &mut b);
                linalg::inverse(n, &b[..n * n], out);
            }))?;
            let gd = g.clone();
            let det_g = Field::lazy(&chart, &[], &[], Arc::new(move |k, _x, out: &mut [T]| {
                let mut b = [T::zero(); 16];
                gd.value_at(k, &mut b);
                out[0] = linalg::det(n, &b[..n * n]);
            }))?;
            Ok(Self { g, g_inv, det_g, lambda_min })
        }
    }

    /// Dense metric sampled from a coordinate function filling `n × n` row-major entries.
    pub fn from_fn(chart: &Chart<T>, f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let n = chart.dim();
        let mut values = vec![T::zero(); chart.len() * n * n];
        let mut x = [T::zero(); MAX_DIM];
        for (k, out) in values.chunks_mut(n * n).enumerate() {
            chart.node_coords(k, &mut x);
            f(&x[..n], out);
        }
        let chart_c = chart.clone();
        // validate before symmetrizing so asymmetric input is reported
        let mut lambda_min = T::infinity();
        for (k, block) in values.chunks(n * n).enumerate() {
            lambda_min = lambda_min.min(check_node(n, block, &chart_c, k)?);
        }
        let _ = lambda_min;
        Self::from_field(Field::from_values(chart_c, &[n, n], &[], values)?)
    }

    /// Metric evaluated on demand from a coordinate function; nothing is stored.
    pub fn lazy(chart: &Chart<T>, f: impl Fn(&[T], &mut [T]) + Send + Sync + 'static) -> Result<Self> {
        let n = chart.dim();
        let mut buf = [T::zero(); 16];
        let mut x = [T::zero(); MAX_DIM];
        for k in 0..chart.len() {
            chart.node_coords(k, &mut x);
            f(&x[..n], &mut buf);
            check_node(n, &buf, chart, k)?;
        }
        Self::from_field(Field::analytic(chart, &[n, n], &[], f)?)
    }

    /// Constant metric `g0` on every node.
    pub fn constant(chart: &Chart<T>, g0: &[T]) -> Result<Self> {
        let g0 = g0.to_vec();
        Self::from_fn(chart, move |_, o| o.copy_from_slice(&g0))
    }

    /// Euclidean metric.
    pub fn identity(chart: &Chart<T>) -> Result<Self> {
        let n = chart.dim();
        Self::from_fn(chart, |_, o| {
            for i in 0..n * n {
                o[i] = if i % (n + 1) == 0 { T::one() } else { T::zero() };
            }
        })
    }

    pub fn chart(&self) -> &Chart<T> {
        self.g.chart()
    }
    pub fn dim(&self) -> usize {
        self.g.chart().dim()
    }
    pub fn g(&self) -> &Field<T> {
        &self.g
    }
    pub fn g_inv(&self) -> &Field<T> {
        &self.g_inv
    }
    pub fn det_g(&self) -> &Field<T> {
        &self.det_g
    }
    /// Smallest eigenvalue over all nodes, recorded at build time.
    pub fn lambda_min(&self) -> T {
        self.lambda_min
    }
    pub fn is_dense(&self) -> bool {
        self.g.is_dense()
    }

    #[inline]
    pub fn g_at(&self, node: usize, out: &mut [T]) {
        self.g.value_at(node, out)
    }
    #[inline]
    pub fn inv_at(&self, node: usize, out: &mut [T]) {
        self.g_inv.value_at(node, out)
    }
    #[inline]
    pub fn det_at(&self, node: usize) -> T {
        self.det_g.get(node, 0)
    }

    /// Metric components at an arbitrary point by multilinear interpolation of node values.
    pub fn g_at_point(&self, x: &[T], out: &mut [T]) -> Result<()> {
        self.g.interpolate_into(x, out)
    }

    fn combine(&self, c: &Field<T>, f: impl Fn(&[T], T, &mut [T]) + Send + Sync + Clone + 'static) -> Result<Self> {
        let chart = self.chart().clone();
        let n = chart.dim();
        if c.chart() != &chart || c.ncomp() != 1 {
            return Err(Error::Config("conformal factor must be a scalar field on the metric chart".into()));
        }
        if self.is_dense() && c.is_dense() {
            let gv = self.g.values().unwrap();
            let cv = c.values().unwrap();
            let mut out = vec![T::zero(); gv.len()];
            for k in 0..chart.len() {
                f(&gv[k * n * n..(k + 1) * n * n], cv[k], &mut out[k * n * n..(k + 1) * n * n]);
            }
            Self::from_field(Field::from_values(chart, &[n, n], &[], out)?)
        } else {
            let g = self.g.clone();
            let c = c.clone();
            Self::from_field(Field::lazy(&chart, &[n, n], &[], Arc::new(move |k, _x, out: &mut [T]| {
                let mut b = [T::zero(); 16];
                g.value_at(k, &mut b);
                f(&b[..n * n], c.get(k, 0), out);
            }))?)
        }
    }

    /// `c · g` for a positive scalar field `c`.
    pub fn conformal_scale(&self, c: &Field<T>) -> Result<Self> {
        let mut bad = None;
        c.for_each(|k, v| {
            if bad.is_none() && !(v[0] > T::zero()) {
                bad = Some(k);
            }
        });
        if let Some(k) = bad {
            return Err(Error::Domain(format!(
                "conformal factor not positive at x = {:?}",
                coords_f64(self.chart(), k)
            )));
        }
        self.combine(c, |g, c, o| {
            for i in 0..g.len() {
                o[i] = c * g[i];
            }
        })
    }

    /// `|g|^{-1/n} g`, the determinant-one representative of the conformal class.
    pub fn normalize_determinant(&self) -> Result<Self> {
        let n = self.dim();
        let inv_n = T::one() / T::from_usize_lossy(n);
        self.combine(&self.det_g, move |g, d, o| {
            let s = d.powf(-inv_n);
            for i in 0..g.len() {
                o[i] = s * g[i];
            }
        })
    }

    /// Largest `|g g^{-1} - I|` component over all nodes.
    pub fn inverse_defect(&self) -> T {
        let n = self.dim();
        let mut a = [T::zero(); 16];
        let mut b = [T::zero(); 16];
        let mut p = [T::zero(); 16];
        let mut worst = T::zero();
        for k in 0..self.chart().len() {
            self.g_at(k, &mut a);
            self.inv_at(k, &mut b);
            linalg::matmul(n, n, n, &a, &b, &mut p);
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { T::one() } else { T::zero() };
                    worst = worst.max((p[i * n + j] - e).abs());
                }
            }
        }
        worst
    }
}

/// Constants of the structural conditions on an A-harmonic operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructuralConstants<T> {
    pub p: T,
    pub alpha: T,
    pub delta: T,
    pub m: T,
}

impl<T: Real> StructuralConstants<T> {
    pub fn new(p: T, alpha: T, delta: T, m: T) -> Result<Self> {
        let s = Self { p, alpha, delta, m };
        s.validate()?;
        Ok(s)
    }

    /// Only `p` given; the remaining constants take permissive placeholder values.
    pub fn with_p(p: T) -> Result<Self> {
        Self::new(p, T::lit(0.5), T::lit(1e-3), T::lit(1e3))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > T::one()) {
            return Err(Error::Validation(format!("p = {} must exceed 1", self.p)));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::Validation(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if !(self.delta > T::zero() && self.m > T::zero() && self.delta <= self.m) {
            return Err(Error::Validation("need 0 < delta <= M".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64], o: &mut [f64]) {
        let n = x.len();
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let c = 4.0 / ((1.0 + r2) * (1.0 + r2));
        for i in 0..n * n {
            o[i] = if i % (n + 1) == 0 { c } else { 0.0 };
        }
    }

    #[test]
    fn identity_metric() {
        let c = Chart::<f64>::cube(3, -1.0, 1.0, 5).unwrap();
        let g = MetricField::identity(&c).unwrap();
        assert_eq!(g.det_g().sup_norm(), 1.0);
        assert_eq!(g.inverse_defect(), 0.0);
        assert_eq!(g.lambda_min(), 1.0);
    }

    #[test]
    fn sphere_determinant() {
        let c = Chart::<f64>::cube(2, -0.5, 0.5, 9).unwrap();
        let g = MetricField::from_fn(&c, sphere).unwrap();
        for k in 0..c.len() {
            let x = c.coords_of(k);
            let f = 4.0 / (1.0 + x[0] * x[0] + x[1] * x[1]).powi(2);
            assert!((g.det_at(k) - f * f).abs() < 1e-14);
        }
        assert!(g.inverse_defect() < 1e-12);
    }

    #[test]
    fn asymmetric_and_indefinite_rejected() {
        let c = Chart::<f64>::cube(2, -1.0, 1.0, 5).unwrap();
        let e = MetricField::from_fn(&c, |_, o| o.copy_from_slice(&[1.0, 0.1, 0.2, 1.0])).unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let e = MetricField::from_fn(&c, |x, o| o.copy_from_slice(&[x[0], 0.0, 0.0, 1.0])).unwrap_err();
        match e {
            Error::NotPositiveDefinite { coords, minor, .. } => {
                assert_eq!(minor, 1);
                assert!(coords[0] <= 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn conformal_scale_cases() {
        let c = Chart::<f64>::cube(2, -1.0, 1.0, 5).unwrap();
        let g = MetricField::identity(&c).unwrap();
        let four = Field::scalar(&c, |_| 4.0).unwrap();
        let g4 = g.conformal_scale(&four).unwrap();
        assert!(g4.det_g().values().unwrap().iter().all(|&d| d == 16.0));
        let ex = Field::scalar(&c, |x| x[0].exp()).unwrap();
        let ge = g.conformal_scale(&ex).unwrap();
        for k in 0..c.len() {
            let x = c.coords_of(k);
            assert!((ge.g_inv().get(k, 0) - (-x[0]).exp()).abs() < 1e-15);
            assert_eq!(ge.g_inv().get(k, 1), 0.0);
        }
        let neg = Field::scalar(&c, |x| x[0]).unwrap();
        assert!(matches!(g.conformal_scale(&neg), Err(Error::Domain(_))));
    }

    #[test]
    fn normalization() {
        let c = Chart::<f64>::cube(2, -1.0, 1.0, 5).unwrap();
        let g = MetricField::constant(&c, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let h = g.normalize_determinant().unwrap();
        assert_eq!(&h.g().values().unwrap()[..4], &[2.0, 0.0, 0.0, 0.5]);
        let cg = MetricField::from_fn(&c, |x, o| {
            let s = 1.5 + x[0] * x[1];
            o.copy_from_slice(&[s, 0.0, 0.0, s]);
        })
        .unwrap();
        let hn = cg.normalize_determinant().unwrap();
        let id = MetricField::identity(&c).unwrap();
        assert!(hn.g().sub(id.g()).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn lazy_metric_matches_dense() {
        let c = Chart::<f64>::cube(3, -0.4, 0.4, 7).unwrap();
        let d = MetricField::from_fn(&c, sphere).unwrap();
        let l = MetricField::lazy(&c, sphere).unwrap();
        assert!(!l.is_dense());
        assert_eq!(d.g_inv().sub(l.g_inv()).unwrap().sup_norm(), 0.0);
        assert!((d.lambda_min() - l.lambda_min()).abs() == 0.0);
    }

    #[test]
    fn structural_constants_validate() {
        assert!(StructuralConstants::new(2.0, 0.5, 1.0, 1.0).is_ok());
        assert!(StructuralConstants::new(1.0, 0.5, 1.0, 1.0).is_err());
        assert!(StructuralConstants::new(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(StructuralConstants::new(2.0, 0.5, 2.0, 1.0).is_err());
    }
}
