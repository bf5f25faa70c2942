//! Corner-quadrature discretization of the A-harmonic energy.
//!
//! Each grid cell contributes, at every one of its `2^n` corners, the energy density
//! evaluated on the one-sided gradient pointing into the cell, with weight `h^n / 2^n`.
//! The negative gradient of the discrete energy divided by `h^n` is the discrete
//! `div A(x, ∇u)`; it is exact for affine `u` under constant coefficients.

use crate::aharmonic::operator::a_pointwise;
use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::MetricField;
use crate::scalar::Real;

pub(crate) struct Discretization<T> {
    pub chart: Chart<T>,
    pub n: usize,
    pub p: T,
    ginv: Vec<T>,
    sqrt_det: Vec<T>,
    /// Min-corner nodes of the cells in the energy.
    pub cells: Vec<usize>,
    wt: T,
}

impl<T: Real> Discretization<T> {
    /// Coefficients at every node of `chart`, read from `metric` at `node_map(node)`.
    pub fn new(chart: &Chart<T>, metric: &MetricField<T>, p: T, node_map: impl Fn(usize) -> usize, cells: Vec<usize>) -> Self {
        let n = chart.dim();
        let nn = n * n;
        let mut ginv = vec![T::zero(); chart.len() * nn];
        let mut sqrt_det = vec![T::zero(); chart.len()];
        let mut g = [T::zero(); 16];
        for k in 0..chart.len() {
            let pk = node_map(k);
            metric.g_at(pk, &mut g);
            let d = linalg::inverse(n, &g[..nn], &mut ginv[k * nn..(k + 1) * nn]);
            sqrt_det[k] = d.sqrt();
        }
        let wt = chart.cell_volume() / T::from_usize_lossy(1 << n);
        Self { chart: chart.clone(), n, p, ginv, sqrt_det, cells, wt }
    }

    /// All cells of the chart.
    pub fn all_cells(chart: &Chart<T>) -> Vec<usize> {
        let n = chart.dim();
        (0..chart.len())
            .filter(|&k| {
                let idx = chart.multi_index(k);
                (0..n).all(|a| idx[a] + 1 < chart.resolution()[a])
            })
            .collect()
    }

    /// Corner node and its in-cell neighbours (index 0 is the corner itself), plus `σ_j / h_j`.
    #[inline]
    pub fn pair(&self, cell: usize, b: usize, nodes: &mut [usize; MAX_DIM + 1], s: &mut [T; MAX_DIM]) {
        let st = self.chart.strides();
        let mut c = cell;
        for j in 0..self.n {
            if b >> j & 1 == 1 {
                c += st[j];
            }
        }
        nodes[0] = c;
        for j in 0..self.n {
            let h = self.chart.spacing()[j];
            if b >> j & 1 == 1 {
                nodes[j + 1] = c - st[j];
                s[j] = -T::one() / h;
            } else {
                nodes[j + 1] = c + st[j];
                s[j] = T::one() / h;
            }
        }
    }

    #[inline]
    fn gradient(&self, u: &[T], nodes: &[usize; MAX_DIM + 1], s: &[T; MAX_DIM], out: &mut [T; MAX_DIM]) {
        let u0 = u[nodes[0]];
        for j in 0..self.n {
            out[j] = s[j] * (u[nodes[j + 1]] - u0);
        }
    }

    #[inline]
    fn ginv_at(&self, k: usize) -> &[T] {
        let nn = self.n * self.n;
        &self.ginv[k * nn..(k + 1) * nn]
    }

    /// Regularized discrete energy `Σ w (1/p) |g|^{1/2} (|∇u|²_g + ε²)^{p/2}`.
    pub fn energy(&self, u: &[T], eps: T) -> T {
        let mut nodes = [0usize; MAX_DIM + 1];
        let mut s = [T::zero(); MAX_DIM];
        let mut gr = [T::zero(); MAX_DIM];
        let half_p = self.p / T::lit(2.0);
        let mut e = T::zero();
        for &cell in &self.cells {
            for b in 0..(1usize << self.n) {
                self.pair(cell, b, &mut nodes, &mut s);
                self.gradient(u, &nodes, &s, &mut gr);
                let gi = self.ginv_at(nodes[0]);
                let mut q = T::zero();
                for j in 0..self.n {
                    for k in 0..self.n {
                        q += gr[j] * gi[j * self.n + k] * gr[k];
                    }
                }
                e += self.sqrt_det[nodes[0]] * (q + eps * eps).powf(half_p);
            }
        }
        e * self.wt / self.p
    }

    /// Discrete `div A(x, ∇u)` at every node (`-(1/h^n) ∂E/∂u`); only nodes whose
    /// adjacent cells are all in the energy carry the full divergence.
    pub fn divergence(&self, u: &[T], eps: T) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.chart.len()];
        let mut nodes = [0usize; MAX_DIM + 1];
        let mut s = [T::zero(); MAX_DIM];
        let mut gr = [T::zero(); MAX_DIM];
        let mut a = [T::zero(); MAX_DIM];
        let vol = self.chart.cell_volume();
        for &cell in &self.cells {
            for b in 0..(1usize << self.n) {
                self.pair(cell, b, &mut nodes, &mut s);
                self.gradient(u, &nodes, &s, &mut gr);
                let q = a_pointwise(self.n, self.ginv_at(nodes[0]), self.sqrt_det[nodes[0]], self.p, eps, &gr[..self.n], &mut a);
                if q == T::zero() && eps == T::zero() && self.p < T::lit(2.0) {
                    return Err(Error::SingularPoint {
                        node: nodes[0],
                        coords: self.chart.coords_of(nodes[0]).iter().map(|v| v.as_f64()).collect(),
                        reason: "vanishing gradient with p < 2 and no regularization".into(),
                    });
                }
                for j in 0..self.n {
                    let f = self.wt * a[j] * s[j] / vol;
                    out[nodes[0]] += f;
                    out[nodes[j + 1]] -= f;
                }
            }
        }
        Ok(out)
    }

    /// Lagged weight `(|∇u|²_g + ε²)^{(p−2)/2}` per (cell, corner) pair.
    pub fn weights(&self, u: &[T], eps: T) -> Result<Vec<T>> {
        let two = T::lit(2.0);
        let nb = 1usize << self.n;
        let mut w = vec![T::one(); self.cells.len() * nb];
        if self.p == two {
            return Ok(w);
        }
        let mut nodes = [0usize; MAX_DIM + 1];
        let mut s = [T::zero(); MAX_DIM];
        let mut gr = [T::zero(); MAX_DIM];
        let e = (self.p - two) / two;
        for (ci, &cell) in self.cells.iter().enumerate() {
            for b in 0..nb {
                self.pair(cell, b, &mut nodes, &mut s);
                self.gradient(u, &nodes, &s, &mut gr);
                let gi = self.ginv_at(nodes[0]);
                let mut q = T::zero();
                for j in 0..self.n {
                    for k in 0..self.n {
                        q += gr[j] * gi[j * self.n + k] * gr[k];
                    }
                }
                let v = (q + eps * eps).powf(e);
                if !v.is_finite() || !(v > T::zero()) {
                    return Err(Error::Regularization(format!(
                        "lagged weight {:e} at node {} (eps = {:e})",
                        v.as_f64(),
                        nodes[0],
                        eps.as_f64()
                    )));
                }
                w[ci * nb + b] = v;
            }
        }
        Ok(w)
    }

    /// Local stiffness entries `w · wt · Gᵀ K G` for one pair, `(n+1)²` row-major.
    #[inline]
    pub fn local_matrix(&self, corner: usize, s: &[T; MAX_DIM], w: T, out: &mut [T]) {
        let n = self.n;
        let gi = self.ginv_at(corner);
        let sd = self.sqrt_det[corner] * w * self.wt;
        let m = n + 1;
        let mut ks = [T::zero(); MAX_DIM];
        for j in 0..n {
            let mut v = T::zero();
            for k in 0..n {
                v += gi[j * n + k] * s[k];
            }
            ks[j] = v;
        }
        let mut d00 = T::zero();
        for j in 0..n {
            d00 += s[j] * ks[j];
        }
        out[0] = sd * d00;
        for k in 0..n {
            // (0, k+1) = −Σ_j s_j K_jk s_k
            let v = -sd * ks[k] * s[k];
            out[k + 1] = v;
            out[(k + 1) * m] = v;
            for j in 0..n {
                out[(j + 1) * m + k + 1] = sd * s[j] * gi[j * n + k] * s[k];
            }
        }
    }
}
