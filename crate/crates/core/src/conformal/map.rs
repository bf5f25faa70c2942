//! Maps between charts, metric pull-back and conformality checks.

use std::fmt::Write as _;

use crate::aharmonic::{residual_a, AOperator, CoordinateMap};
use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg;
use crate::metric::MetricField;
use crate::scalar::Real;
use crate::stencil::DerivativeScheme;

/// A map `φ` sampled on a chart, with its Jacobian `∂_a φ^j` at component `j*n + a`.
#[derive(Clone, Debug)]
pub struct MapField<T: Real> {
    pub phi: Field<T>,
    pub jacobian: Field<T>,
    /// Nodes on which the map is meaningful (the whole chart, or a ball interior).
    pub domain: Vec<usize>,
    pub invertible: bool,
}

impl<T: Real> MapField<T> {
    pub fn new(phi: Field<T>, jacobian: Field<T>, domain: Vec<usize>) -> Result<Self> {
        let n = phi.chart().dim();
        if phi.shape() != [n] || jacobian.shape() != [n, n] || phi.chart() != jacobian.chart() {
            return Err(Error::Config("map needs an n-vector field and an n×n Jacobian on one chart".into()));
        }
        if domain.is_empty() {
            return Err(Error::Config("map domain is empty".into()));
        }
        Ok(Self { phi, jacobian, domain, invertible: false })
    }

    /// Samples `f` and differentiates it on the grid.
    pub fn from_fn(chart: &Chart<T>, f: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let n = chart.dim();
        let phi = Field::from_fn(chart, &[n], f)?;
        Self::from_phi(phi, DerivativeScheme::order2())
    }

    /// Map with a closed-form Jacobian.
    pub fn analytic(chart: &Chart<T>, f: impl Fn(&[T], &mut [T]), df: impl Fn(&[T], &mut [T])) -> Result<Self> {
        let n = chart.dim();
        let phi = Field::from_fn(chart, &[n], f)?;
        let jac = Field::from_fn(chart, &[n, n], df)?;
        Self::new(phi, jac, (0..chart.len()).collect())
    }

    pub fn from_phi(phi: Field<T>, scheme: DerivativeScheme) -> Result<Self> {
        let chart = phi.chart().clone();
        let n = chart.dim();
        let mut jac = vec![T::zero(); chart.len() * n * n];
        for a in 0..n {
            let d = phi.partial(a, scheme)?;
            for k in 0..chart.len() {
                for j in 0..n {
                    jac[k * n * n + j * n + a] = d.get(k, j);
                }
            }
        }
        let jacobian = Field::from_values(chart.clone(), &[n, n], &[], jac)?;
        Self::new(phi, jacobian, (0..chart.len()).collect())
    }

    /// `U` from a coordinate construction, restricted to the ball interior.
    pub fn from_coordinates(map: &CoordinateMap<T>) -> Result<Self> {
        Self::new(map.u.clone(), map.jacobian.clone(), map.problem.interior_nodes())
    }

    pub fn affine(chart: &Chart<T>, s: &[T], b: &[T]) -> Result<Self> {
        let n = chart.dim();
        let (s1, s2) = (s.to_vec(), s.to_vec());
        let b = b.to_vec();
        Self::analytic(
            chart,
            move |x, o| {
                for j in 0..n {
                    o[j] = b[j] + (0..n).map(|a| s1[j * n + a] * x[a]).sum::<T>();
                }
            },
            move |_, o| o.copy_from_slice(&s2),
        )
    }

    pub fn identity(chart: &Chart<T>) -> Result<Self> {
        let n = chart.dim();
        let mut s = vec![T::zero(); n * n];
        for i in 0..n {
            s[i * n + i] = T::one();
        }
        Self::affine(chart, &s, &vec![T::zero(); n])
    }

    pub fn chart(&self) -> &Chart<T> {
        self.phi.chart()
    }

    /// Smallest `|det Dφ|` over the domain; sets the invertibility flag against `floor`.
    pub fn check_invertible(&mut self, floor: T) -> T {
        let n = self.chart().dim();
        let mut b = [T::zero(); MAX_DIM * MAX_DIM];
        let mut worst = T::infinity();
        let mut sign = None;
        let mut consistent = true;
        for &k in &self.domain {
            self.jacobian.value_at(k, &mut b);
            let d = linalg::det(n, &b[..n * n]);
            let s = d > T::zero();
            if *sign.get_or_insert(s) != s {
                consistent = false;
            }
            worst = worst.min(d.abs());
        }
        self.invertible = consistent && worst >= floor;
        worst
    }
}

#[derive(Clone, Debug)]
pub struct TransformOptions<T> {
    pub det_floor: T,
    /// Nodes per axis of the image grid; defaults to matching the source spacing.
    pub resolution: Option<usize>,
    pub newton_tol: T,
}

impl<T: Real> Default for TransformOptions<T> {
    fn default() -> Self {
        Self { det_floor: T::lit(1e-3), resolution: None, newton_tol: T::lit(1e-12) }
    }
}

/// Pulled-back metric on the image grid together with the inverse map there.
#[derive(Clone, Debug)]
pub struct Transformed<T: Real> {
    pub metric: MetricField<T>,
    /// `V⁻¹(y)` at every image node.
    pub preimage: Field<T>,
    /// `D(V⁻¹)(y) = (DV(V⁻¹ y))⁻¹`.
    pub inverse_jacobian: Field<T>,
    pub newton_steps_max: usize,
}

impl<T: Real> Transformed<T> {
    pub fn inverse_map(&self) -> Result<MapField<T>> {
        let chart = self.preimage.chart();
        MapField::new(self.preimage.clone(), self.inverse_jacobian.clone(), (0..chart.len()).collect())
    }
}

/// `g̃ = D(V⁻¹)ᵀ g∘V⁻¹ D(V⁻¹)` on a regular grid inside the image of `V`.
pub fn transform_metric<T: Real>(g: &MetricField<T>, v: &MapField<T>) -> Result<MetricField<T>> {
    Ok(transform_metric_with(g, v, &TransformOptions::default())?.metric)
}

pub fn transform_metric_with<T: Real>(g: &MetricField<T>, v: &MapField<T>, opts: &TransformOptions<T>) -> Result<Transformed<T>> {
    let chart = v.chart();
    let n = chart.dim();
    if g.dim() != n {
        return Err(Error::Config("metric and map dimensions differ".into()));
    }
    let mut v = v.clone();
    let min_det = v.check_invertible(opts.det_floor);
    if !v.invertible {
        return Err(Error::Domain(format!(
            "map Jacobian determinant {:e} below floor {:e} or changes sign",
            min_det.as_f64(),
            opts.det_floor.as_f64()
        )));
    }
    let image = image_chart(&v, opts.resolution)?;
    let mut pre = vec![T::zero(); image.len() * n];
    let mut ijac = vec![T::zero(); image.len() * n * n];
    let mut gt = vec![T::zero(); image.len() * n * n];
    let mut failed = Vec::new();
    let mut max_steps = 0;
    let mut y = [T::zero(); MAX_DIM];
    let mut gx = [T::zero(); MAX_DIM * MAX_DIM];
    let mut dv = [T::zero(); MAX_DIM * MAX_DIM];
    let mut inv = [T::zero(); MAX_DIM * MAX_DIM];
    let mut tmp = [T::zero(); MAX_DIM * MAX_DIM];
    let mut seed_hint = v.domain[v.domain.len() / 2];
    for k in 0..image.len() {
        image.node_coords(k, &mut y);
        let Some((x, steps, hint)) = invert_point(&v, &y[..n], seed_hint, opts.newton_tol) else {
            failed.push(k);
            continue;
        };
        seed_hint = hint;
        max_steps = max_steps.max(steps);
        v.jacobian.interpolate_into(&x, &mut dv[..n * n])?;
        linalg::inverse(n, &dv[..n * n], &mut inv[..n * n]);
        g.g_at_point(&x, &mut gx[..n * n])?;
        // Dᵀ g D with D = inv
        linalg::matmul(n, n, n, &gx[..n * n], &inv[..n * n], &mut tmp[..n * n]);
        let out = &mut gt[k * n * n..(k + 1) * n * n];
        for a in 0..n {
            for b in 0..n {
                out[a * n + b] = (0..n).map(|c| inv[c * n + a] * tmp[c * n + b]).sum();
            }
        }
        pre[k * n..(k + 1) * n].copy_from_slice(&x);
        ijac[k * n * n..(k + 1) * n * n].copy_from_slice(&inv[..n * n]);
    }
    if !failed.is_empty() {
        return Err(Error::Transform { nodes: failed });
    }
    let metric = MetricField::from_field(Field::from_values(image.clone(), &[n, n], &[], gt)?)?;
    Ok(Transformed {
        metric,
        preimage: Field::from_values(image.clone(), &[n], &[], pre)?,
        inverse_jacobian: Field::from_values(image, &[n, n], &[], ijac)?,
        newton_steps_max: max_steps,
    })
}

/// Largest cube around the image of the domain's central node that avoids the images of
/// the domain boundary, shrunk by one cell.
fn image_chart<T: Real>(v: &MapField<T>, resolution: Option<usize>) -> Result<Chart<T>> {
    let chart = v.chart();
    let n = chart.dim();
    let mut in_dom = vec![false; chart.len()];
    for &k in &v.domain {
        in_dom[k] = true;
    }
    let mut lo = [T::infinity(); MAX_DIM];
    let mut hi = [T::neg_infinity(); MAX_DIM];
    let mut pv = [T::zero(); MAX_DIM];
    let mut boundary = Vec::new();
    for &k in &v.domain {
        v.phi.value_at(k, &mut pv);
        for a in 0..n {
            lo[a] = lo[a].min(pv[a]);
            hi[a] = hi[a].max(pv[a]);
        }
        let edge = (0..n).any(|a| [-1isize, 1].iter().any(|&o| chart.shifted(k, a, o).map(|j| !in_dom[j]).unwrap_or(true)));
        if edge {
            boundary.push(pv);
        }
    }
    let mut center = [T::zero(); MAX_DIM];
    for a in 0..n {
        center[a] = (lo[a] + hi[a]) / T::lit(2.0);
    }
    let mut half = boundary
        .iter()
        .map(|b| (0..n).map(|a| (b[a] - center[a]).abs()).fold(T::zero(), T::max))
        .fold(T::infinity(), T::min);
    let h = chart.spacing()[..n].iter().copied().fold(T::infinity(), T::min);
    // image spacing comparable to the source spacing
    let det_scale = {
        let mut b = [T::zero(); MAX_DIM * MAX_DIM];
        v.jacobian.value_at(v.domain[v.domain.len() / 2], &mut b);
        linalg::det(n, &b[..n * n]).abs().powf(T::one() / T::from_usize_lossy(n))
    };
    let hi_img = h * det_scale;
    half = half - hi_img;
    if !(half > T::zero()) {
        return Err(Error::Domain("image of the map domain is too small for a grid".into()));
    }
    let res = resolution.unwrap_or_else(|| ((T::lit(2.0) * half / hi_img).round().to_usize().unwrap_or(4) + 1).max(5));
    let lower: Vec<T> = (0..n).map(|a| center[a] - half).collect();
    let upper: Vec<T> = (0..n).map(|a| center[a] + half).collect();
    Chart::new(&lower, &upper, &vec![res; n], &vec![false; n])
}

/// Damped Newton for `V(x) = y`, seeded from the nearest forward-image node.
fn invert_point<T: Real>(v: &MapField<T>, y: &[T], hint: usize, tol: T) -> Option<(Vec<T>, usize, usize)> {
    let chart = v.chart();
    let n = chart.dim();
    let mut pv = [T::zero(); MAX_DIM];
    let dist = |k: usize, pv: &mut [T]| -> T {
        v.phi.value_at(k, pv);
        (0..n).map(|a| (pv[a] - y[a]).powi(2)).sum::<T>()
    };
    // greedy walk over image nodes towards y
    let mut node = hint;
    let mut best = dist(node, &mut pv);
    loop {
        let mut moved = false;
        for a in 0..n {
            for o in [-1isize, 1] {
                if let Some(j) = chart.shifted(node, a, o) {
                    let d = dist(j, &mut pv);
                    if d < best {
                        best = d;
                        node = j;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            break;
        }
    }
    let mut x = chart.coords_of(node);
    let mut f = vec![T::zero(); n];
    let mut dv = vec![T::zero(); n * n];
    let resid = |x: &[T], f: &mut [T]| -> Option<T> {
        v.phi.interpolate_into(x, f).ok()?;
        let mut s = T::zero();
        for a in 0..n {
            f[a] -= y[a];
            s += f[a] * f[a];
        }
        Some(s.sqrt())
    };
    let scale = T::one() + y.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let mut r = resid(&x, &mut f)?;
    for step in 0..50 {
        if r <= tol * scale {
            return Some((x, step, node));
        }
        v.jacobian.interpolate_into(&x, &mut dv).ok()?;
        let dx = linalg::solve(n, &dv, &f)?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let xt: Vec<T> = (0..n).map(|a| x[a] - t * dx[a]).collect();
            let mut ft = vec![T::zero(); n];
            if let Some(rt) = resid(&xt, &mut ft) {
                if rt < r {
                    x = xt;
                    f = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            t = t * T::lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if r <= tol * scale {
        Some((x, 50, node))
    } else {
        None
    }
}

/// Result of comparing `φ*h` with `g`.
#[derive(Clone, Debug)]
pub struct ConformalReport<T: Real> {
    /// `(1/n) tr(g⁻¹ φ*h)`.
    pub c: Field<T>,
    /// `sup|φ*h − c g| / sup|c g|` over the domain.
    pub residual: T,
    /// Linear distortion `sqrt(λ_max/λ_min)` of `g⁻¹ φ*h`.
    pub distortion: Field<T>,
    pub max_distortion: T,
    pub nodes: usize,
}

impl<T: Real> ConformalReport<T> {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let (mut cmin, mut cmax) = (T::infinity(), T::neg_infinity());
        self.c.for_each(|_, v| {
            cmin = cmin.min(v[0]);
            cmax = cmax.max(v[0]);
        });
        let _ = writeln!(s, "nodes = {}", self.nodes);
        let _ = writeln!(s, "residual = {:e}", self.residual.as_f64());
        let _ = writeln!(s, "max_distortion = {:e}", self.max_distortion.as_f64());
        let _ = writeln!(s, "c_min = {:e}", cmin.as_f64());
        let _ = writeln!(s, "c_max = {:e}", cmax.as_f64());
        s
    }
}

/// Pull-back `φ*h` against `g` on the domain of `φ`; off-domain nodes carry `c = 0`, `K = 1`.
pub fn conformal_check<T: Real>(g: &MetricField<T>, h: &MetricField<T>, phi: &MapField<T>) -> Result<ConformalReport<T>> {
    let chart = g.chart();
    let n = chart.dim();
    if phi.chart() != chart || h.dim() != n {
        return Err(Error::Config("map must live on the chart of g and target a chart of the same dimension".into()));
    }
    let mut cv = vec![T::zero(); chart.len()];
    let mut kv = vec![T::one(); chart.len()];
    let mut y = [T::zero(); MAX_DIM];
    let mut j = [T::zero(); MAX_DIM * MAX_DIM];
    let mut hy = [T::zero(); MAX_DIM * MAX_DIM];
    let mut gx = [T::zero(); MAX_DIM * MAX_DIM];
    let mut gi = [T::zero(); MAX_DIM * MAX_DIM];
    let mut pb = [T::zero(); MAX_DIM * MAX_DIM];
    let mut tmp = [T::zero(); MAX_DIM * MAX_DIM];
    let (mut num, mut den) = (T::zero(), T::zero());
    let mut kmax = T::one();
    for &k in &phi.domain {
        phi.phi.value_at(k, &mut y);
        if !h.chart().contains(&y[..n]) {
            return Err(Error::Domain(format!(
                "image point {:?} leaves the target chart",
                y[..n].iter().map(|v| v.as_f64()).collect::<Vec<_>>()
            )));
        }
        h.g_at_point(&y[..n], &mut hy[..n * n])?;
        phi.jacobian.value_at(k, &mut j);
        linalg::matmul(n, n, n, &hy[..n * n], &j[..n * n], &mut tmp[..n * n]);
        for a in 0..n {
            for b in 0..n {
                pb[a * n + b] = (0..n).map(|c| j[c * n + a] * tmp[c * n + b]).sum();
            }
        }
        g.g_at(k, &mut gx);
        g.inv_at(k, &mut gi);
        let c = (0..n).map(|a| (0..n).map(|b| gi[a * n + b] * pb[b * n + a]).sum::<T>()).sum::<T>() / T::from_usize_lossy(n);
        for i in 0..n * n {
            num = num.max((pb[i] - c * gx[i]).abs());
            den = den.max((c * gx[i]).abs());
        }
        cv[k] = c;
        // eigenvalues of g^{-1/2} P g^{-1/2}
        let (lam, vecs) = linalg::sym_eigen(n, &gx[..n * n]);
        let mut w = [T::zero(); MAX_DIM * MAX_DIM];
        for a in 0..n {
            for b in 0..n {
                w[a * n + b] = (0..n).map(|c| vecs[a * n + c] * vecs[b * n + c] / lam[c].sqrt()).sum();
            }
        }
        linalg::matmul(n, n, n, &w[..n * n], &pb[..n * n], &mut tmp[..n * n]);
        let mut m = [T::zero(); MAX_DIM * MAX_DIM];
        linalg::matmul(n, n, n, &tmp[..n * n], &w[..n * n], &mut m[..n * n]);
        let (mu, _) = linalg::sym_eigen(n, &m[..n * n]);
        let kk = if mu[0] > T::zero() { (mu[n - 1] / mu[0]).sqrt() } else { T::infinity() };
        kv[k] = kk;
        kmax = kmax.max(kk);
    }
    let residual = if den > T::zero() { num / den } else { T::infinity() };
    Ok(ConformalReport {
        c: Field::from_values(chart.clone(), &[], &[], cv)?,
        residual,
        distortion: Field::lazy(chart, &[], &[], std::sync::Arc::new(move |k, _x, o: &mut [T]| o[0] = kv[k]))?,
        max_distortion: kmax,
        nodes: phi.domain.len(),
    })
}

#[derive(Clone, Debug)]
pub struct CompositionReport<T> {
    /// Sup of the discrete `div A(x, ∇(v∘φ))` for `(g, p = n)` over the core.
    pub residual: T,
    /// Same quantity for `v` itself with respect to `(h, p = n)`.
    pub v_residual: T,
    pub conformal_residual: T,
}

/// Composes `v` (given as a function of target coordinates) with `φ` and measures how far
/// `v∘φ` is from n-harmonic for `g`.
pub fn nharmonic_composition_check<T: Real>(
    g: &MetricField<T>,
    h: &MetricField<T>,
    phi: &MapField<T>,
    v: impl Fn(&[T]) -> T,
) -> Result<CompositionReport<T>> {
    let n = g.dim();
    let p = T::from_usize_lossy(n);
    let conf = conformal_check(g, h, phi)?;
    let vf = Field::scalar(h.chart(), &v)?;
    let v_residual = residual_a(&AOperator::with_p(h, p)?, &vf)?.sup_norm();
    let chart = g.chart();
    let mut y = [T::zero(); MAX_DIM];
    let mut uv = vec![T::zero(); chart.len()];
    for k in 0..chart.len() {
        phi.phi.value_at(k, &mut y);
        uv[k] = v(&y[..n]);
    }
    let u = Field::from_values(chart.clone(), &[], &[], uv)?;
    let res = residual_a(&AOperator::with_p(g, p)?, &u)?;
    Ok(CompositionReport { residual: res.sup_norm(), v_residual, conformal_residual: conf.residual })
}
