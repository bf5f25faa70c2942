//! Conformal flatness: n-harmonic coordinates turn a conformally flat metric into `c δ`.

use std::fmt::Write as _;

use crate::aharmonic::{build_coordinates_with, AOperator, CoordinateMap, SolverOptions};
use crate::chart::MAX_DIM;
use crate::conformal::map::{transform_metric_with, MapField, TransformOptions, Transformed};
use crate::curvature::Curvature;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::metric::MetricField;
use crate::scalar::Real;
use crate::stencil::DerivativeScheme;

#[derive(Clone, Debug)]
pub struct FlatnessOptions<T> {
    /// Largest admissible sup-norm of the Weyl tensor near the center.
    pub weyl_threshold: T,
    /// Bound on `‖DU(x₀) − I‖` for the coordinate construction.
    pub eps: T,
    pub scheme: DerivativeScheme,
    pub solver: SolverOptions<T>,
    pub transform: TransformOptions<T>,
}

impl<T: Real> Default for FlatnessOptions<T> {
    fn default() -> Self {
        Self {
            weyl_threshold: T::lit(1e-2),
            eps: T::lit(0.1),
            scheme: DerivativeScheme::order2(),
            solver: SolverOptions::default(),
            transform: TransformOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlatnessReport<T: Real> {
    pub weyl_norm: T,
    /// Set when the Weyl tensor exceeds the threshold; nothing else is computed then.
    pub weyl_nonzero: bool,
    /// `(1/n) tr g̃` on the image grid.
    pub c: Option<Field<T>>,
    /// `sup |g̃_ab − c δ_ab|` over the image grid.
    pub residual: T,
    pub radius_used: T,
    pub coordinates: Option<CoordinateMap<T>>,
    pub transformed: Option<Transformed<T>>,
}

impl<T: Real> FlatnessReport<T> {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "weyl_norm = {:e}", self.weyl_norm.as_f64());
        let _ = writeln!(s, "weyl_nonzero = {}", self.weyl_nonzero);
        if let Some(c) = &self.c {
            let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
            c.for_each(|_, v| {
                lo = lo.min(v[0]);
                hi = hi.max(v[0]);
            });
            let _ = writeln!(s, "c_min = {:e}", lo.as_f64());
            let _ = writeln!(s, "c_max = {:e}", hi.as_f64());
            let _ = writeln!(s, "residual = {:e}", self.residual.as_f64());
            let _ = writeln!(s, "radius_used = {:e}", self.radius_used.as_f64());
        }
        if let Some(m) = &self.coordinates {
            let _ = writeln!(s, "deviation = {:e}", m.deviation.as_f64());
            let _ = writeln!(s, "min_det = {:e}", m.min_det.as_f64());
        }
        s
    }
}

/// Largest Weyl component over core nodes within `r` of `x0`.
pub fn weyl_norm_near<T: Real>(g: &MetricField<T>, x0: &[T], r: T, scheme: DerivativeScheme) -> Result<T> {
    let n = g.dim();
    if n < 3 {
        return Err(Error::Unsupported("Weyl tensor needs dimension >= 3".into()));
    }
    let cur = Curvature::new(g, scheme)?;
    let chart = g.chart();
    let mut x = [T::zero(); MAX_DIM];
    let nodes: Vec<usize> = cur
        .core_nodes()
        .into_iter()
        .filter(|&k| {
            chart.node_coords(k, &mut x);
            (0..n).map(|a| (x[a] - x0[a]).powi(2)).sum::<T>() < r * r
        })
        .collect();
    if nodes.is_empty() {
        return Err(Error::Domain("no core nodes near the center".into()));
    }
    Ok(cur.sup_over(nodes, |pc| pc.weyl().iter().fold(T::zero(), |m, v| m.max(v.abs()))))
}

/// Checks the Weyl tensor near `x0`, builds n-harmonic coordinates there and reads off the
/// conformal factor of the transformed metric.
pub fn flatness_pipeline<T: Real>(g: &MetricField<T>, x0: &[T], r: T, opts: &FlatnessOptions<T>) -> Result<FlatnessReport<T>> {
    let n = g.dim();
    if x0.len() != n {
        return Err(Error::Config("center dimension mismatch".into()));
    }
    let weyl_norm = weyl_norm_near(g, x0, r, opts.scheme)?;
    if !(weyl_norm <= opts.weyl_threshold) {
        return Ok(FlatnessReport {
            weyl_norm,
            weyl_nonzero: true,
            c: None,
            residual: T::zero(),
            radius_used: r,
            coordinates: None,
            transformed: None,
        });
    }
    // p = n: the operator is the same for every metric in the conformal class
    let op = AOperator::with_p(g, T::from_usize_lossy(n))?;
    let mut s = vec![T::zero(); n * n];
    for i in 0..n {
        s[i * n + i] = T::one();
    }
    let coords = build_coordinates_with(&op, x0, r, &s, opts.eps, &opts.solver)?;
    let v = MapField::from_coordinates(&coords)?;
    let tr = transform_metric_with(g, &v, &opts.transform)?;
    let image = tr.metric.chart().clone();
    let mut cv = vec![T::zero(); image.len()];
    let mut residual = T::zero();
    let mut b = [T::zero(); MAX_DIM * MAX_DIM];
    for k in 0..image.len() {
        tr.metric.g_at(k, &mut b);
        let c = (0..n).map(|a| b[a * n + a]).sum::<T>() / T::from_usize_lossy(n);
        if !(c > T::zero()) {
            return Err(Error::Pipeline(format!("conformal factor {:e} not positive", c.as_f64())));
        }
        for a in 0..n {
            for bb in 0..n {
                let e = if a == bb { c } else { T::zero() };
                residual = residual.max((b[a * n + bb] - e).abs());
            }
        }
        cv[k] = c;
    }
    Ok(FlatnessReport {
        weyl_norm,
        weyl_nonzero: false,
        c: Some(Field::from_values(image, &[], &[], cv)?),
        residual,
        radius_used: coords.radius(),
        coordinates: Some(coords),
        transformed: Some(tr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;

    #[test]
    fn flat_metric() {
        let c = Chart::<f64>::cube(3, -0.5, 0.5, 17).unwrap();
        let g = MetricField::identity(&c).unwrap();
        let r = flatness_pipeline(&g, &[0.0; 3], 0.25, &FlatnessOptions::default()).unwrap();
        assert!(!r.weyl_nonzero);
        assert!(r.residual <= 1e-10);
        r.c.unwrap().for_each(|_, v| assert!((v[0] - 1.0).abs() < 1e-10));
    }
}
