//! The A-harmonic vector field `A^j(x, ξ) = |g|^{1/2} g^{jk} (g^{ab} ξ_a ξ_b)^{(p−2)/2} ξ_k`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::MAX_DIM;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::metric::{MetricField, StructuralConstants};
use crate::scalar::Real;

/// A-harmonic operator built from a metric and exponent `p`.
#[derive(Clone, Debug)]
pub struct AOperator<T: Real> {
    metric: MetricField<T>,
    constants: StructuralConstants<T>,
    epsilon_reg: T,
}

/// Pointwise `A(ξ)` for given `g^{-1}`, `|g|^{1/2}`; writes into `out` and returns `|ξ|²_g`.
#[inline]
pub fn a_pointwise<T: Real>(n: usize, ginv: &[T], sqrt_det: T, p: T, eps: T, xi: &[T], out: &mut [T]) -> T {
    let mut up = [T::zero(); MAX_DIM];
    let mut q = T::zero();
    for j in 0..n {
        let mut s = T::zero();
        for k in 0..n {
            s += ginv[j * n + k] * xi[k];
        }
        up[j] = s;
        q += s * xi[j];
    }
    let two = T::lit(2.0);
    let w = if p == two { T::one() } else { (q + eps * eps).powf((p - two) / two) };
    for j in 0..n {
        out[j] = sqrt_det * w * up[j];
    }
    q
}

impl<T: Real> AOperator<T> {
    pub fn new(metric: &MetricField<T>, constants: StructuralConstants<T>, epsilon_reg: T) -> Result<Self> {
        constants.validate()?;
        if !(epsilon_reg >= T::zero()) {
            return Err(Error::Validation("regularization must be non-negative".into()));
        }
        Ok(Self { metric: metric.clone(), constants, epsilon_reg })
    }

    /// Operator with exponent `p` and default placeholder constants.
    pub fn with_p(metric: &MetricField<T>, p: T) -> Result<Self> {
        Self::new(metric, StructuralConstants::with_p(p)?, T::zero())
    }

    pub fn metric(&self) -> &MetricField<T> {
        &self.metric
    }
    pub fn constants(&self) -> &StructuralConstants<T> {
        &self.constants
    }
    pub fn p(&self) -> T {
        self.constants.p
    }
    pub fn epsilon_reg(&self) -> T {
        self.epsilon_reg
    }
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }
    pub fn with_epsilon(&self, eps: T) -> Self {
        Self { epsilon_reg: eps, ..self.clone() }
    }
    pub fn with_metric(&self, metric: &MetricField<T>) -> Self {
        Self { metric: metric.clone(), ..self.clone() }
    }

    /// `A(x_node, ξ)`; fails at singular points (`p < 2`, `ξ = 0`, no regularization).
    pub fn a_at(&self, node: usize, xi: &[T], out: &mut [T]) -> Result<()> {
        let n = self.dim();
        let mut ginv = [T::zero(); 16];
        self.metric.inv_at(node, &mut ginv);
        let sd = self.metric.det_at(node).sqrt();
        let q = a_pointwise(n, &ginv, sd, self.p(), self.epsilon_reg, xi, out);
        if q == T::zero() && self.epsilon_reg == T::zero() && self.p() < T::lit(2.0) {
            return Err(Error::SingularPoint {
                node,
                coords: self.metric.chart().coords_of(node).iter().map(|v| v.as_f64()).collect(),
                reason: "xi = 0 with p < 2 and no regularization".into(),
            });
        }
        Ok(())
    }

    /// Constant-coefficient operator with the metric frozen at `x0`.
    pub fn frozen(&self, x0: &[T]) -> Result<Self> {
        let n = self.dim();
        let mut g0 = vec![T::zero(); n * n];
        self.metric.g_at_point(x0, &mut g0)?;
        let m = MetricField::constant(self.metric.chart(), &g0)?;
        Ok(self.with_metric(&m))
    }
}

/// Pointwise `A(x, ξ(x))` for a covector field `ξ`.
pub fn apply_a<T: Real>(op: &AOperator<T>, xi: &Field<T>) -> Result<Field<T>> {
    let n = op.dim();
    if xi.shape() != [n] || xi.chart() != op.metric().chart() {
        return Err(Error::Config("covector field must have n components on the metric chart".into()));
    }
    let mut out = vec![T::zero(); xi.chart().len() * n];
    let mut buf = [T::zero(); MAX_DIM];
    for k in 0..xi.chart().len() {
        xi.value_at(k, &mut buf);
        op.a_at(k, &buf[..n], &mut out[k * n..(k + 1) * n])?;
    }
    Field::from_values(xi.chart().clone(), &[n], &[], out)
}

/// Sampled estimates of the structural constants.
#[derive(Clone, Debug)]
pub struct StructuralReport<T> {
    pub delta_est: T,
    pub m_est: T,
    pub alpha_est: T,
    pub holder_constant: T,
    pub homogeneity_max_violation: T,
    pub samples: usize,
}

fn euclid<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

/// Random-sample verification of homogeneity, growth, Hölder continuity in `x` and monotonicity.
pub fn check_structural<T: Real>(op: &AOperator<T>, samples: usize, seed: u64) -> Result<StructuralReport<T>> {
    if samples < 1000 {
        return Err(Error::Config(format!("structural check needs >= 1000 samples, got {samples}")));
    }
    let op = op.with_epsilon(T::zero());
    let n = op.dim();
    let p = op.p();
    let two = T::lit(2.0);
    let chart = op.metric().chart().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rvec = |rng: &mut ChaCha8Rng| -> [T; MAX_DIM] {
        let mag = (rng.gen::<f64>() * 4.0 - 2.0).exp();
        let mut v = [T::zero(); MAX_DIM];
        loop {
            let mut s = 0.0;
            for a in 0..n {
                let x: f64 = rng.gen::<f64>() * 2.0 - 1.0;
                v[a] = T::lit(x);
                s += x * x;
            }
            if s > 1e-4 && s <= 1.0 {
                let s = s.sqrt();
                for a in 0..n {
                    v[a] = v[a] * T::lit(mag / s);
                }
                return v;
            }
        }
    };
    let (mut hom, mut m_est, mut delta) = (T::zero(), T::zero(), T::infinity());
    let mut a1 = [T::zero(); MAX_DIM];
    let mut a2 = [T::zero(); MAX_DIM];
    let mut tmp = [T::zero(); MAX_DIM];
    let scales = [1usize, 2, 4, 8];
    let mut holder_q = vec![T::zero(); scales.len()];
    for _ in 0..samples {
        let node = rng.gen_range(0..chart.len());
        let xi = rvec(&mut rng);
        let zeta = rvec(&mut rng);
        let t = T::lit((rng.gen::<f64>() * 4.0 - 2.0).exp());
        // homogeneity
        op.a_at(node, &xi[..n], &mut a1)?;
        for a in 0..n {
            tmp[a] = t * xi[a];
        }
        op.a_at(node, &tmp[..n], &mut a2)?;
        let tp = t.powf(p - T::one());
        let mut diff = T::zero();
        let mut base = T::zero();
        for a in 0..n {
            diff += (a2[a] - tp * a1[a]).powi(2);
            base += (tp * a1[a]).powi(2);
        }
        hom = hom.max((diff / base).sqrt());
        // growth: Frobenius norm of ∂_ξ A by central differences
        let xn = euclid(&xi[..n]);
        let hstep = T::lit(1e-6) * xn;
        let mut jac2 = T::zero();
        for b in 0..n {
            tmp[..n].copy_from_slice(&xi[..n]);
            tmp[b] += hstep;
            op.a_at(node, &tmp[..n], &mut a2)?;
            let mut am = [T::zero(); MAX_DIM];
            tmp[b] -= two * hstep;
            op.a_at(node, &tmp[..n], &mut am)?;
            for a in 0..n {
                jac2 += ((a2[a] - am[a]) / (two * hstep)).powi(2);
            }
        }
        m_est = m_est.max(jac2.sqrt() / xn.powf(p - two));
        // monotonicity
        op.a_at(node, &zeta[..n], &mut a2)?;
        let mut inner = T::zero();
        let mut d2 = T::zero();
        for a in 0..n {
            inner += (a1[a] - a2[a]) * (xi[a] - zeta[a]);
            d2 += (xi[a] - zeta[a]).powi(2);
        }
        let ratio = inner / ((xn + euclid(&zeta[..n])).powf(p - two) * d2);
        if ratio < T::zero() {
            return Err(Error::Structural(format!(
                "negative monotonicity ratio {:e} at node {node}",
                ratio.as_f64()
            )));
        }
        delta = delta.min(ratio);
        // Hölder in x along a random axis at dyadic node distances
        let axis = rng.gen_range(0..n);
        for (si, &s) in scales.iter().enumerate() {
            if let Some(other) = chart.shifted(node, axis, s as isize).or_else(|| chart.shifted(node, axis, -(s as isize))) {
                op.a_at(other, &xi[..n], &mut a2)?;
                let dd: T = (0..n).map(|a| (a1[a] - a2[a]).powi(2)).sum::<T>().sqrt();
                holder_q[si] = holder_q[si].max(dd / xn.powf(p - T::one()));
            }
        }
    }
    // fit log q against log distance
    let h = chart.spacing()[0];
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(&holder_q)
        .filter(|(_, &q)| q > T::lit(1e-13))
        .map(|(&s, &q)| ((T::from_usize_lossy(s) * h).as_f64().ln(), q.as_f64().ln()))
        .collect();
    let (alpha, cst) = if pts.len() >= 2 {
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = (sxy / sxx).clamp(0.0, 1.0);
        let c = pts.iter().map(|p| (p.1 - slope * p.0).exp()).fold(0.0, f64::max);
        (T::lit(slope), T::lit(c))
    } else {
        (T::one(), T::zero())
    };
    Ok(StructuralReport { delta_est: delta, m_est, alpha_est: alpha, holder_constant: cst, homogeneity_max_violation: hom, samples })
}
