//! Divergence-form systems `P u = D_l(A^{lm} D_m u)` with `D = −i∇` on periodic charts.

use std::sync::Arc;

use crate::chart::{Chart, MAX_DIM};
use crate::curvature::{check_symbol_injectivity, InjectivityReport};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;
use crate::spectral::FftGrid;

/// Coefficients at a point: `n·n·M·N` entries, `A^{lm}[row][col]` at `((l·n + m)·M + row)·N + col`.
pub type CoefficientFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub struct DivergenceSystem<T> {
    chart: Chart<T>,
    unknowns: usize,
    equations: usize,
    coeff: CoefficientFn<T>,
    /// Largest entrywise spread `max A − min A` over the chart nodes.
    pub oscillation: T,
}

impl<T: Real> std::fmt::Debug for DivergenceSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DivergenceSystem")
            .field("N", &self.unknowns)
            .field("M", &self.equations)
            .field("oscillation", &self.oscillation)
            .finish()
    }
}

impl<T: Real> DivergenceSystem<T> {
    pub fn new(chart: &Chart<T>, unknowns: usize, equations: usize, coeff: CoefficientFn<T>) -> Result<Self> {
        if !chart.is_fully_periodic() {
            return Err(Error::Unsupported("divergence systems live on fully periodic charts".into()));
        }
        if unknowns == 0 || equations < unknowns {
            return Err(Error::Validation(format!("need M >= N >= 1, got M = {equations}, N = {unknowns}")));
        }
        let n = chart.dim();
        let len = n * n * equations * unknowns;
        let mut lo = vec![T::infinity(); len];
        let mut hi = vec![T::neg_infinity(); len];
        let mut buf = vec![T::zero(); len];
        let mut x = [T::zero(); MAX_DIM];
        for k in 0..chart.len() {
            chart.node_coords(k, &mut x);
            coeff(&x[..n], &mut buf);
            for i in 0..len {
                if !buf[i].is_finite() {
                    return Err(Error::Validation(format!(
                        "coefficient {i} not finite at x = {:?}",
                        x[..n].iter().map(|v| v.as_f64()).collect::<Vec<_>>()
                    )));
                }
                lo[i] = lo[i].min(buf[i]);
                hi[i] = hi[i].max(buf[i]);
            }
        }
        let oscillation = (0..len).map(|i| hi[i] - lo[i]).fold(T::zero(), T::max);
        Ok(Self { chart: chart.clone(), unknowns, equations, coeff, oscillation })
    }

    /// `A^{lm} = a(x) δ^{lm}`, the scalar operator `−div(a ∇u)`.
    pub fn scalar_laplacian(chart: &Chart<T>, a: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Result<Self> {
        let n = chart.dim();
        Self::new(chart, 1, 1, Arc::new(move |x, o| {
            let v = a(x);
            for l in 0..n {
                for m in 0..n {
                    o[l * n + m] = if l == m { v } else { T::zero() };
                }
            }
        }))
    }

    /// All second derivatives `D_l D_m u` with `l ≤ m` (N = 1, M = n(n+1)/2), scaled by `a(x)`.
    pub fn hessian(chart: &Chart<T>, a: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Result<Self> {
        let n = chart.dim();
        let rows = n * (n + 1) / 2;
        Self::new(chart, 1, rows, Arc::new(move |x, o| {
            let v = a(x);
            for e in o[..n * n * rows].iter_mut() {
                *e = T::zero();
            }
            let mut row = 0;
            for l in 0..n {
                for m in l..n {
                    o[(l * n + m) * rows + row] = v;
                    row += 1;
                }
            }
        }))
    }

    pub fn chart(&self) -> &Chart<T> {
        &self.chart
    }
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }
    /// N.
    pub fn unknowns(&self) -> usize {
        self.unknowns
    }
    /// M.
    pub fn equations(&self) -> usize {
        self.equations
    }
    pub fn coeff_len(&self) -> usize {
        let n = self.dim();
        n * n * self.equations * self.unknowns
    }
    pub fn coeff_at(&self, x: &[T], out: &mut [T]) {
        (self.coeff)(x, out)
    }
    pub fn coefficients(&self) -> CoefficientFn<T> {
        Arc::clone(&self.coeff)
    }

    /// Constant-coefficient system with `A(x₀)`.
    pub fn frozen(&self, x0: &[T]) -> Result<Self> {
        let mut a0 = vec![T::zero(); self.coeff_len()];
        self.coeff_at(x0, &mut a0);
        Self::new(&self.chart, self.unknowns, self.equations, Arc::new(move |_, o| o[..a0.len()].copy_from_slice(&a0)))
    }

    pub fn symbol(&self, x0: &[T]) -> SymbolMatrix {
        let mut a0 = vec![T::zero(); self.coeff_len()];
        self.coeff_at(x0, &mut a0);
        SymbolMatrix {
            x0: x0.iter().map(|v| v.as_f64()).collect(),
            n: self.dim(),
            rows: self.equations,
            cols: self.unknowns,
            a0: a0.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// `P u = −∂_l(A^{lm} ∂_m u)` with spectral derivatives.
    pub fn apply(&self, u: &Field<T>) -> Result<Field<T>> {
        if u.chart() != &self.chart || u.ncomp() != self.unknowns {
            return Err(Error::Config("field does not match the system's chart and unknowns".into()));
        }
        let grid = FftGrid::new(&self.chart)?;
        let n = self.dim();
        let len = self.chart.len();
        let mut a = vec![0.0; len * self.coeff_len()];
        let mut buf = vec![T::zero(); self.coeff_len()];
        let mut x = [T::zero(); MAX_DIM];
        for k in 0..len {
            self.chart.node_coords(k, &mut x);
            self.coeff_at(&x[..n], &mut buf);
            for (i, v) in buf.iter().enumerate() {
                a[k * buf.len() + i] = v.as_f64();
            }
        }
        let comps: Vec<Vec<f64>> = (0..self.unknowns).map(|c| (0..len).map(|k| u.get(k, c).as_f64()).collect()).collect();
        let out = apply_divergence(&grid, n, self.equations, self.unknowns, &a, &comps);
        let mut vals = vec![T::zero(); len * self.equations];
        for (r, col) in out.iter().enumerate() {
            for k in 0..len {
                vals[k * self.equations + r] = T::lit(col[k]);
            }
        }
        let shape: Vec<usize> = if self.equations == 1 { vec![] } else { vec![self.equations] };
        Field::from_values(self.chart.clone(), &shape, &[], vals)
    }
}

/// `−Σ ∂_l(A^{lm} ∂_m u)` on sampled coefficients (node-major, `n·n·M·N` per node).
pub(crate) fn apply_divergence(grid: &FftGrid, n: usize, rows: usize, cols: usize, a: &[f64], u: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let len = grid.len();
    let per = n * n * rows * cols;
    let du: Vec<Vec<Vec<f64>>> = (0..cols).map(|c| (0..n).map(|m| grid.partial_real(&u[c], m)).collect()).collect();
    let mut out = vec![vec![0.0; len]; rows];
    for l in 0..n {
        for r in 0..rows {
            let mut flux = vec![0.0; len];
            let mut any = false;
            for m in 0..n {
                for c in 0..cols {
                    let idx = ((l * n + m) * rows + r) * cols + c;
                    for k in 0..len {
                        let w = a[k * per + idx];
                        if w != 0.0 {
                            flux[k] += w * du[c][m][k];
                            any = true;
                        }
                    }
                }
            }
            if any {
                let d = grid.partial_real(&flux, l);
                for k in 0..len {
                    out[r][k] -= d[k];
                }
            }
        }
    }
    out
}

/// Frozen principal symbol `p(x₀, ξ) = A^{lm}(x₀) ξ_l ξ_m`, an `M × N` real matrix.
#[derive(Clone, Debug)]
pub struct SymbolMatrix {
    pub x0: Vec<f64>,
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub a0: Vec<f64>,
}

impl SymbolMatrix {
    pub fn eval(&self, xi: &[f64], out: &mut [f64]) {
        let (n, rc) = (self.n, self.rows * self.cols);
        for v in out[..rc].iter_mut() {
            *v = 0.0;
        }
        for l in 0..n {
            for m in 0..n {
                let s = xi[l] * xi[m];
                if s == 0.0 {
                    continue;
                }
                let base = (l * n + m) * rc;
                for i in 0..rc {
                    out[i] += self.a0[base + i] * s;
                }
            }
        }
    }

    pub fn at(&self, xi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        self.eval(xi, &mut out);
        out
    }
}

/// Minimum over sampled unit covectors of the smallest singular value of `p(x₀, ξ)`.
pub fn check_ellipticity<T: Real>(sys: &DivergenceSystem<T>, x0: &[T], n_directions: usize) -> Result<InjectivityReport<f64>> {
    let sym = sys.symbol(x0);
    check_symbol_injectivity(sys.dim(), n_directions, 1e-8, |xi: &[f64]| Ok((sym.rows, sym.cols, sym.at(xi))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(n: usize, res: usize) -> Chart<f64> {
        let pi = std::f64::consts::PI;
        Chart::periodic_cube(n, -pi, pi, res).unwrap()
    }

    #[test]
    fn ellipticity_examples() {
        let c = torus(2, 8);
        let lap = DivergenceSystem::scalar_laplacian(&c, |_| 1.0).unwrap();
        let r = check_ellipticity(&lap, &[0.0, 0.0], 64).unwrap();
        assert!((r.min_singular_value - 1.0).abs() < 1e-12);
        let hess = DivergenceSystem::hessian(&c, |_| 1.0).unwrap();
        let r = check_ellipticity(&hess, &[0.0, 0.0], 64).unwrap();
        assert!(r.min_singular_value > 0.5 && !r.flagged);
        let degenerate = DivergenceSystem::new(&c, 1, 2, Arc::new(|_, o: &mut [f64]| {
            for v in o[..8].iter_mut() {
                *v = 0.0;
            }
            o[0] = 1.0; // row 0 gets ξ₁²
        }))
        .unwrap();
        let r = check_ellipticity(&degenerate, &[0.0, 0.0], 64).unwrap();
        assert!(r.flagged);
        assert!(r.worst_direction[0].abs() < 1e-12);
    }

    #[test]
    fn symbol_is_even_and_quadratic() {
        let c = torus(3, 8);
        let s = DivergenceSystem::hessian(&c, |x| 2.0 + x[0].sin()).unwrap().symbol(&[0.3, 0.1, 0.0]);
        let xi = [0.7, -1.1, 0.4];
        let p1 = s.at(&xi);
        let p2 = s.at(&xi.map(|v| 2.0 * v));
        let pm = s.at(&xi.map(|v| -v));
        for i in 0..p1.len() {
            assert_eq!(p2[i], 4.0 * p1[i]);
            assert_eq!(pm[i], p1[i]);
        }
    }

    #[test]
    fn laplacian_of_cosine() {
        let c = torus(2, 32);
        let lap = DivergenceSystem::scalar_laplacian(&c, |_| 1.0).unwrap();
        let u = Field::scalar(&c, |x| (3.0 * x[0]).cos()).unwrap();
        let pu = lap.apply(&u).unwrap();
        let want = u.scale(9.0).unwrap();
        assert!(pu.sub(&want).unwrap().sup_norm() < 1e-10);
    }
}
