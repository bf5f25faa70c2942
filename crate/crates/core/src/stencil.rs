//! Finite-difference weights and per-axis stencil tables.

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Accuracy order and kind of a derivative approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DerivativeScheme {
    pub order: usize,
    pub spectral: bool,
}

impl Default for DerivativeScheme {
    fn default() -> Self {
        Self::order2()
    }
}

impl DerivativeScheme {
    pub fn order2() -> Self {
        Self { order: 2, spectral: false }
    }
    pub fn order4() -> Self {
        Self { order: 4, spectral: false }
    }
    pub fn spectral() -> Self {
        Self { order: 2, spectral: true }
    }
    pub fn with_order(order: usize) -> Result<Self> {
        match order {
            2 | 4 => Ok(Self { order, spectral: false }),
            _ => Err(Error::Config(format!("derivative order {order} not in {{2, 4}}"))),
        }
    }
    /// Half-width of the central first-derivative stencil.
    pub fn half_width(&self) -> usize {
        self.order / 2
    }
    /// Trusted-core margin for quantities built from two derivatives.
    pub fn core_margin(&self) -> usize {
        2 * self.half_width()
    }
}

/// Fornberg's algorithm: weights for derivatives `0..=m` at `x0` from nodes `xs`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Maximum number of points in a 1-D stencil.
pub const MAX_POINTS: usize = 6;

/// One-dimensional stencil: offsets and weights already divided by `h^k`.
#[derive(Clone, Copy, Debug)]
pub struct Stencil1<T> {
    pub len: usize,
    pub offsets: [isize; MAX_POINTS],
    pub weights: [T; MAX_POINTS],
}

impl<T: Real> Stencil1<T> {
    fn build(offsets: &[isize], deriv: usize, h: T) -> Self {
        let xs: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
        let w = fornberg(0.0, &xs, deriv);
        let scale = h.powi(deriv as i32);
        let mut s = Stencil1 { len: offsets.len(), offsets: [0; MAX_POINTS], weights: [T::zero(); MAX_POINTS] };
        for (k, &o) in offsets.iter().enumerate() {
            s.offsets[k] = o;
            s.weights[k] = T::lit(w[deriv][k]) / scale;
        }
        s
    }
    pub fn iter(&self) -> impl Iterator<Item = (isize, T)> + '_ {
        (0..self.len).map(move |k| (self.offsets[k], self.weights[k]))
    }
}

/// Window of `npts` consecutive offsets around index `i`, shifted to stay in `[0, n)`.
fn window(i: usize, n: usize, npts: usize, left: usize) -> Vec<isize> {
    let mut start = i as isize - left as isize;
    start = start.max(0).min(n as isize - npts as isize);
    (0..npts as isize).map(|k| start + k - i as isize).collect()
}

/// First- and second-derivative stencils for each grid position on every axis.
#[derive(Clone, Debug)]
pub struct StencilTable<T> {
    d1: Vec<Vec<Stencil1<T>>>,
    d2: Vec<Vec<Stencil1<T>>>,
    periodic: Vec<bool>,
}

impl<T: Real> StencilTable<T> {
    pub fn new(chart: &Chart<T>, scheme: DerivativeScheme) -> Result<Self> {
        if scheme.order != 2 && scheme.order != 4 {
            return Err(Error::Config(format!("derivative order {} not in {{2, 4}}", scheme.order)));
        }
        let q = scheme.order;
        let hw = q / 2;
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for a in 0..chart.dim() {
            let n = chart.resolution()[a];
            let h = chart.spacing()[a];
            let per = chart.periodic()[a];
            let need = if per { q + 1 } else { q + 2 };
            if n < need {
                return Err(Error::Config(format!(
                    "stencil of {need} points wider than grid axis {} ({n} points)",
                    a + 1
                )));
            }
            let central: Vec<isize> = (-(hw as isize)..=hw as isize).collect();
            let mut a1 = Vec::with_capacity(n);
            let mut a2 = Vec::with_capacity(n);
            for i in 0..n {
                if per || (i >= hw && i + hw < n) {
                    a1.push(Stencil1::build(&central, 1, h));
                    a2.push(Stencil1::build(&central, 2, h));
                } else {
                    a1.push(Stencil1::build(&window(i, n, q + 1, hw), 1, h));
                    a2.push(Stencil1::build(&window(i, n, q + 2, hw), 2, h));
                }
            }
            d1.push(a1);
            d2.push(a2);
        }
        Ok(Self { d1, d2, periodic: chart.periodic().to_vec() })
    }

    #[inline]
    pub fn d1(&self, axis: usize, i: usize) -> &Stencil1<T> {
        &self.d1[axis][i]
    }
    #[inline]
    pub fn d2(&self, axis: usize, i: usize) -> &Stencil1<T> {
        &self.d2[axis][i]
    }
    pub fn is_periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_central_weights() {
        let w = fornberg(0.0, &[-1.0, 0.0, 1.0], 2);
        assert_eq!(w[1], vec![-0.5, 0.0, 0.5]);
        assert_eq!(w[2], vec![1.0, -2.0, 1.0]);
        let w4 = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w4[1].iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn one_sided_reproduces_polynomials() {
        for q in [2usize, 4] {
            let chart = Chart::<f64>::cube(2, 0.0, 1.0, 11).unwrap();
            let t = StencilTable::new(&chart, DerivativeScheme::with_order(q).unwrap()).unwrap();
            let h = chart.spacing()[0];
            let p = |x: f64| (0..=q).fold(0.0, |acc, k| acc + x.powi(k as i32) * (k as f64 + 1.0));
            let dp = |x: f64| (1..=q).fold(0.0, |acc, k| acc + (k as f64) * x.powi(k as i32 - 1) * (k as f64 + 1.0));
            let ddp = |x: f64| {
                (2..=q).fold(0.0, |acc, k| acc + (k * (k - 1)) as f64 * x.powi(k as i32 - 2) * (k as f64 + 1.0))
            };
            for i in 0..11 {
                let x = i as f64 * h;
                let s1: f64 = t.d1(0, i).iter().map(|(o, w)| w * p((i as isize + o) as f64 * h)).sum();
                let s2: f64 = t.d2(0, i).iter().map(|(o, w)| w * p((i as isize + o) as f64 * h)).sum();
                assert!((s1 - dp(x)).abs() < 1e-9, "q={q} i={i}");
                assert!((s2 - ddp(x)).abs() < 1e-7, "q={q} i={i}");
            }
        }
    }

    #[test]
    fn too_small_grid_is_config_error() {
        let chart = Chart::<f64>::cube(2, 0.0, 1.0, 5).unwrap();
        assert!(StencilTable::new(&chart, DerivativeScheme::order4()).is_err());
        assert!(StencilTable::new(&chart, DerivativeScheme::order2()).is_ok());
    }
}
