//! Hölder exponent estimates from mean-square oscillation decay and difference quotients.

use std::fmt::Write as _;

use crate::chart::MAX_DIM;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct HolderReport<T> {
    pub alpha_est: T,
    /// `(r, max over cubes Q of half-width r of ∫_Q |u − ū|²)`.
    pub campanato_table: Vec<(T, T)>,
    /// Exponent from the decay of `max |u(x + k h e_a) − u(x)|` over dyadic `k`.
    pub dyadic_alpha: T,
    pub saturated: bool,
}

impl<T: Real> HolderReport<T> {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "alpha_est = {:.6}", self.alpha_est.as_f64());
        let _ = writeln!(s, "dyadic_alpha = {:.6}", self.dyadic_alpha.as_f64());
        let _ = writeln!(s, "saturated = {}", self.saturated);
        for (r, p) in &self.campanato_table {
            let _ = writeln!(s, "campanato[{:e}] = {:e}", r.as_f64(), p.as_f64());
        }
        s
    }
}

fn slope<T: Real>(pts: &[(T, T)]) -> T {
    let m = T::from_usize_lossy(pts.len());
    let sx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let sy = pts.iter().map(|p| p.1).sum::<T>() / m;
    let num: T = pts.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum();
    let den: T = pts.iter().map(|p| (p.0 - sx) * (p.0 - sx)).sum();
    num / den
}

/// Hölder exponent of a scalar field from Campanato-type oscillation decay over `scales`.
///
/// Balls are taken in the max norm (cubes), with radii rounded to whole grid steps.
pub fn holder_estimate<T: Real>(f: &Field<T>, scales: &[T]) -> Result<HolderReport<T>> {
    let chart = f.chart();
    let n = chart.dim();
    if f.ncomp() != 1 {
        return Err(Error::Config("Hölder estimate needs a scalar field".into()));
    }
    if scales.len() < 3 {
        return Err(Error::Config("need at least three scales".into()));
    }
    let h = &chart.spacing()[..n];
    let hmin = h.iter().copied().fold(T::infinity(), T::min);
    if let Some(r) = scales.iter().find(|&&r| !(r >= T::lit(2.0) * hmin)) {
        return Err(Error::Config(format!("scale {:e} is below two grid spacings", r.as_f64())));
    }
    let u = f.materialize()?;
    let uv = u.values().unwrap();
    let res = chart.resolution();
    let vol = chart.cell_volume();
    let mut table = Vec::with_capacity(scales.len());
    for &r in scales {
        let mut reach = [0usize; MAX_DIM];
        for a in 0..n {
            reach[a] = (r / h[a]).round().to_usize().unwrap_or(0);
            if 2 * reach[a] + 1 > res[a] {
                return Err(Error::Config(format!("scale {:e} does not fit the chart", r.as_f64())));
            }
        }
        // cube of half-width r in the max norm, trapezoidal weights on its faces
        let mut offsets: Vec<([isize; MAX_DIM], T)> = Vec::new();
        let span: Vec<usize> = (0..n).map(|a| 2 * reach[a] + 1).collect();
        let total: usize = span.iter().product();
        let half = T::lit(0.5);
        for t in 0..total {
            let mut d = [0isize; MAX_DIM];
            let mut tt = t;
            let mut w = T::one();
            for a in 0..n {
                d[a] = (tt % span[a]) as isize - reach[a] as isize;
                tt /= span[a];
                if d[a].unsigned_abs() == reach[a] {
                    w *= half;
                }
            }
            offsets.push((d, w));
        }
        let wsum: T = offsets.iter().map(|o| o.1).sum();
        // centers on a strided sublattice through the middle node
        let ncent: usize = (0..n).map(|a| res[a] - 2 * reach[a]).product();
        let stride = ((ncent as f64 / 4096.0).powf(1.0 / n as f64).ceil() as usize).max(1);
        let mut best = T::zero();
        let mut idx = [0usize; MAX_DIM];
        let lists: Vec<Vec<usize>> = (0..n)
            .map(|a| {
                let mid = res[a] / 2;
                (reach[a]..res[a] - reach[a]).filter(|i| (*i as isize - mid as isize).rem_euclid(stride as isize) == 0).collect()
            })
            .collect();
        let counts: Vec<usize> = lists.iter().map(|l| l.len()).collect();
        let nc: usize = counts.iter().product();
        let mut vals = vec![T::zero(); offsets.len()];
        for c in 0..nc {
            let mut cc = c;
            for a in 0..n {
                idx[a] = lists[a][cc % counts[a]];
                cc /= counts[a];
            }
            for (i, (d, _)) in offsets.iter().enumerate() {
                let mut j = [0usize; MAX_DIM];
                for a in 0..n {
                    j[a] = (idx[a] as isize + d[a]) as usize;
                }
                vals[i] = uv[chart.node_index(&j)];
            }
            let mean = vals.iter().zip(&offsets).map(|(&v, o)| o.1 * v).sum::<T>() / wsum;
            let osc = vals.iter().zip(&offsets).map(|(&v, o)| o.1 * (v - mean) * (v - mean)).sum::<T>() * vol;
            best = best.max(osc);
        }
        table.push((r, best));
    }
    // dyadic difference quotients
    let mut dy = Vec::new();
    let mut k = 1usize;
    let maxk = (0..n).map(|a| res[a] / 4).min().unwrap_or(1).max(1);
    while k <= maxk {
        let mut m = T::zero();
        for node in 0..chart.len() {
            for a in 0..n {
                if let Some(j) = shifted_plain(chart.multi_index(node), a, k, res) {
                    m = m.max((uv[chart.node_index(&j)] - uv[node]).abs());
                }
            }
        }
        dy.push((T::from_usize_lossy(k) * hmin, m));
        k *= 2;
    }
    let scale = uv.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let tiny = T::lit(1e-26) * (T::one() + scale * scale);
    if table.iter().any(|p| !(p.1 > tiny)) {
        return Ok(HolderReport { alpha_est: T::one(), campanato_table: table, dyadic_alpha: T::one(), saturated: true });
    }
    let logs: Vec<(T, T)> = table.iter().map(|p| (p.0.ln(), p.1.ln())).collect();
    let nn = T::from_usize_lossy(n);
    let raw = (slope(&logs) - nn) / T::lit(2.0);
    let dlogs: Vec<(T, T)> = dy.iter().filter(|p| p.1 > T::zero()).map(|p| (p.0.ln(), p.1.ln())).collect();
    let dyadic_alpha = if dlogs.len() >= 2 { slope(&dlogs) } else { T::one() };
    let saturated = raw >= T::lit(0.98);
    Ok(HolderReport {
        alpha_est: if saturated { T::one() } else { raw },
        campanato_table: table,
        dyadic_alpha,
        saturated,
    })
}

fn shifted_plain(mut idx: [usize; MAX_DIM], axis: usize, k: usize, res: &[usize]) -> Option<[usize; MAX_DIM]> {
    idx[axis] += k;
    (idx[axis] < res[axis]).then_some(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;

    fn power(alpha: f64) -> HolderReport<f64> {
        let c = Chart::cube(2, -1.0, 1.0, 257).unwrap();
        let f = Field::scalar(&c, |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(alpha)).unwrap();
        holder_estimate(&f, &[0.125, 0.25, 0.5]).unwrap()
    }

    #[test]
    fn power_laws() {
        for a in [0.5, 0.3] {
            let r = power(a);
            assert!((r.alpha_est - a).abs() < 0.05, "{a}: {}", r.alpha_est);
            assert!((r.dyadic_alpha - a).abs() < 0.05, "{a}: {}", r.dyadic_alpha);
        }
    }

    #[test]
    fn affine_saturates() {
        let c = Chart::cube(2, -1.0, 1.0, 65).unwrap();
        let f = Field::scalar(&c, |x| 2.0 * x[0] - x[1]).unwrap();
        let r = holder_estimate(&f, &[0.125, 0.25, 0.5]).unwrap();
        assert!(r.saturated);
        assert_eq!(r.alpha_est, 1.0);
        let k = Field::scalar(&c, |_| 3.0).unwrap();
        assert!(holder_estimate(&k, &[0.125, 0.25, 0.5]).unwrap().saturated);
    }

    #[test]
    fn invariant_under_sign_and_shift() {
        let c = Chart::cube(2, -1.0, 1.0, 65).unwrap();
        let f = Field::scalar(&c, |x: &[f64]| (x[0].abs() + 0.1).sqrt() * x[1].cos()).unwrap();
        let base = holder_estimate(&f, &[0.125, 0.25, 0.5]).unwrap();
        let neg = holder_estimate(&f.scale(-1.0).unwrap(), &[0.125, 0.25, 0.5]).unwrap();
        let shifted = holder_estimate(&f.map(&[], |v, o| o[0] = v[0] + 7.0).unwrap(), &[0.125, 0.25, 0.5]).unwrap();
        assert_eq!(base.alpha_est, neg.alpha_est);
        assert!((base.alpha_est - shifted.alpha_est).abs() < 1e-9);
    }
}
