//! Cutoffs, lattice Fourier multipliers and the frozen-coefficient parametrix.

use rustfft::num_complex::Complex64;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg;
use crate::parametrix::system::SymbolMatrix;
use crate::scalar::Real;
use crate::spectral::FftGrid;

/// `0` for `t ≤ 0`, `1` for `t ≥ 1`, smooth in between (built from `e^{−1/t}`).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let f = |s: f64| (-1.0 / s).exp();
    f(t) / (f(t) + f(1.0 - t))
}

/// Radial cutoffs: `ψ` in frequency, `χ` and `χ₂(y) = χ(y/2)` in space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSpec {
    pub psi_plateau: f64,
    pub psi_support: f64,
    pub chi_plateau: f64,
    pub chi_support: f64,
}

impl Default for CutoffSpec {
    fn default() -> Self {
        Self { psi_plateau: 0.5, psi_support: 1.0, chi_plateau: 0.5, chi_support: 0.75 }
    }
}

impl CutoffSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.psi_plateau && self.psi_plateau < self.psi_support && 0.0 < self.chi_plateau && self.chi_plateau < self.chi_support) {
            return Err(Error::Config("cutoff radii must satisfy 0 < plateau < support".into()));
        }
        Ok(())
    }
    fn ramp(rho: f64, a: f64, b: f64) -> f64 {
        1.0 - smooth_step((rho - a) / (b - a))
    }
    pub fn psi(&self, xi_norm: f64) -> f64 {
        Self::ramp(xi_norm, self.psi_plateau, self.psi_support)
    }
    pub fn chi(&self, y_norm: f64) -> f64 {
        Self::ramp(y_norm, self.chi_plateau, self.chi_support)
    }
    pub fn chi2(&self, y_norm: f64) -> f64 {
        self.chi(y_norm / 2.0)
    }
}

/// A matrix-valued function on the Fourier lattice of a periodic chart.
pub trait LatticeMultiplier {
    /// `(output components, input components)`.
    fn shape(&self) -> (usize, usize);
    /// Matrix at lattice bin `bin` with angular wavevector `xi`, row-major.
    fn eval(&self, bin: usize, xi: &[f64], out: &mut [f64]);
    /// Bound on the pointwise operator norm, if known.
    fn op_norm_bound(&self) -> Option<f64> {
        None
    }
}

impl LatticeMultiplier for SymbolMatrix {
    fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    fn eval(&self, _bin: usize, xi: &[f64], out: &mut [f64]) {
        SymbolMatrix::eval(self, xi, out)
    }
}

/// `ψ(D)` acting componentwise on `dim`-vector fields.
#[derive(Clone, Debug)]
pub struct PsiMultiplier {
    pub cutoffs: CutoffSpec,
    pub dim: usize,
}

impl LatticeMultiplier for PsiMultiplier {
    fn shape(&self) -> (usize, usize) {
        (self.dim, self.dim)
    }
    fn eval(&self, _bin: usize, xi: &[f64], out: &mut [f64]) {
        let s = self.cutoffs.psi(xi.iter().map(|v| v * v).sum::<f64>().sqrt());
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i * self.dim + j] = if i == j { s } else { 0.0 };
            }
        }
    }
    fn op_norm_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `e(ξ) = (1 − ψ(ξ)) (pᵀp)⁻¹ pᵀ` tabulated on the lattice of a periodic chart.
#[derive(Clone, Debug)]
pub struct MultiplierKernel {
    pub symbol: SymbolMatrix,
    pub cutoffs: CutoffSpec,
    /// `N × M` per bin.
    e: Vec<f64>,
    pub psi: Vec<f64>,
    /// `max ‖e(ξ)‖ |ξ|²` over `|ξ| ≥ 1`.
    pub decay_constant: f64,
    pub max_norm: f64,
}

impl MultiplierKernel {
    pub fn new<T: Real>(symbol: &SymbolMatrix, chart: &Chart<T>, cutoffs: CutoffSpec) -> Result<Self> {
        cutoffs.validate()?;
        let grid = FftGrid::new(chart)?;
        let (m, nn) = (symbol.rows, symbol.cols);
        let mut e = vec![0.0; grid.len() * nn * m];
        let mut psi = vec![0.0; grid.len()];
        let mut xi = vec![0.0; grid.dim()];
        let mut p = vec![0.0; m * nn];
        let mut ptp = vec![0.0; nn * nn];
        let mut inv = vec![0.0; nn * nn];
        let (mut decay, mut max_norm) = (0.0f64, 0.0f64);
        for k in 0..grid.len() {
            grid.wavevector(k, &mut xi);
            let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ps = cutoffs.psi(r);
            psi[k] = ps;
            if ps == 1.0 {
                continue;
            }
            symbol.eval(&xi, &mut p);
            for i in 0..nn {
                for j in 0..nn {
                    ptp[i * nn + j] = (0..m).map(|a| p[a * nn + i] * p[a * nn + j]).sum();
                }
            }
            let d = if nn <= 4 {
                linalg::inverse(nn, &ptp, &mut inv)
            } else {
                invert_general(nn, &ptp, &mut inv)
            };
            if !(d.abs() > 0.0) || !d.is_finite() {
                return Err(Error::Validation(format!("symbol not injective at ξ = {xi:?}")));
            }
            let blk = &mut e[k * nn * m..(k + 1) * nn * m];
            for i in 0..nn {
                for a in 0..m {
                    blk[i * m + a] = (1.0 - ps) * (0..nn).map(|j| inv[i * nn + j] * p[a * nn + j]).sum::<f64>();
                }
            }
            let s = linalg::singular_values(nn, m, blk)[0];
            max_norm = max_norm.max(s);
            if r >= 1.0 {
                decay = decay.max(s * r * r);
            }
        }
        Ok(Self { symbol: symbol.clone(), cutoffs, e, psi, decay_constant: decay, max_norm })
    }

    pub fn at_bin(&self, bin: usize) -> &[f64] {
        let s = self.symbol.rows * self.symbol.cols;
        &self.e[bin * s..(bin + 1) * s]
    }
}

fn invert_general(n: usize, a: &[f64], out: &mut [f64]) -> f64 {
    let d = linalg::det(n, a);
    for j in 0..n {
        let mut b = vec![0.0; n];
        b[j] = 1.0;
        match linalg::solve(n, a, &b) {
            Some(x) => {
                for i in 0..n {
                    out[i * n + j] = x[i];
                }
            }
            None => return 0.0,
        }
    }
    d
}

impl LatticeMultiplier for MultiplierKernel {
    fn shape(&self) -> (usize, usize) {
        (self.symbol.cols, self.symbol.rows)
    }
    fn eval(&self, bin: usize, _xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.at_bin(bin));
    }
    fn op_norm_bound(&self) -> Option<f64> {
        Some(self.max_norm)
    }
}

/// Applies `m(D)` to real component arrays (one `Vec` per input component).
pub(crate) fn apply_multiplier_raw(grid: &FftGrid, mu: &dyn LatticeMultiplier, v: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (rows, cols) = mu.shape();
    if v.len() != cols {
        return Err(Error::Config(format!("multiplier expects {cols} components, got {}", v.len())));
    }
    let len = grid.len();
    let mut hat: Vec<Vec<Complex64>> = v
        .iter()
        .map(|c| {
            let mut b: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            grid.forward(&mut b);
            b
        })
        .collect();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); len]; rows];
    let mut m = vec![0.0; rows * cols];
    let mut xi = vec![0.0; grid.dim()];
    for k in 0..len {
        grid.wavevector(k, &mut xi);
        mu.eval(k, &xi, &mut m);
        for i in 0..rows {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..cols {
                let w = m[i * cols + j];
                if w != 0.0 {
                    s += w * hat[j][k];
                }
            }
            out[i][k] = s;
        }
    }
    hat.clear();
    let mut res = Vec::with_capacity(rows);
    let vmax = v.iter().flat_map(|c| c.iter()).fold(0.0f64, |a, &b| a.max(b.abs()));
    for mut o in out {
        grid.inverse(&mut o);
        let re: Vec<f64> = o.iter().map(|c| c.re).collect();
        let im = o.iter().fold(0.0f64, |a, c| a.max(c.im.abs()));
        let scale = 1.0 + vmax * mu.op_norm_bound().unwrap_or(1.0).max(1.0);
        if im > 1e-12 * scale {
            return Err(Error::Validation(format!("multiplier output has imaginary residue {im:e}")));
        }
        res.push(re);
    }
    if let Some(bound) = mu.op_norm_bound() {
        let l2 = |c: &[Vec<f64>]| c.iter().flat_map(|x| x.iter()).map(|x| x * x).sum::<f64>().sqrt();
        let (a, b) = (l2(&res), l2(v));
        assert!(a <= bound * b * (1.0 + 1e-10) + 1e-300, "Parseval bound violated: {a:e} > {bound:e} * {b:e}");
    }
    Ok(res)
}

/// `m(D) v` on a fully periodic chart.
pub fn apply_multiplier<T: Real>(mu: &dyn LatticeMultiplier, v: &Field<T>) -> Result<Field<T>> {
    let grid = FftGrid::new(v.chart())?;
    let len = grid.len();
    let comps: Vec<Vec<f64>> = (0..v.ncomp()).map(|c| (0..len).map(|k| v.get(k, c).as_f64()).collect()).collect();
    let out = apply_multiplier_raw(&grid, mu, &comps)?;
    let rows = out.len();
    let mut vals = vec![T::zero(); len * rows];
    for (i, col) in out.iter().enumerate() {
        for k in 0..len {
            vals[k * rows + i] = T::lit(col[k]);
        }
    }
    let shape: Vec<usize> = if rows == 1 { vec![] } else { vec![rows] };
    Field::from_values(v.chart().clone(), &shape, &[], vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parametrix::system::DivergenceSystem;

    #[test]
    fn cutoff_plateaus() {
        let c = CutoffSpec::default();
        assert_eq!(c.psi(0.5), 1.0);
        assert_eq!(c.psi(1.0), 0.0);
        assert_eq!(c.chi(0.5), 1.0);
        assert_eq!(c.chi(0.75), 0.0);
        assert_eq!(c.chi2(1.0), 1.0);
        assert!((c.psi(0.75) - 0.5).abs() < 1e-15);
        for i in 0..=100 {
            let v = c.chi(i as f64 / 100.0);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn inverse_laplacian_on_cosine() {
        let pi = std::f64::consts::PI;
        let chart = Chart::periodic_cube(2, -pi, pi, 32).unwrap();
        let sys = DivergenceSystem::scalar_laplacian(&chart, |_| 1.0).unwrap();
        let k = MultiplierKernel::new(&sys.symbol(&[0.0, 0.0]), &chart, CutoffSpec::default()).unwrap();
        let v = Field::scalar(&chart, |x| (3.0 * x[0]).cos()).unwrap();
        let ev = apply_multiplier(&k, &v).unwrap();
        assert!(ev.sub(&v.scale(1.0 / 9.0).unwrap()).unwrap().sup_norm() < 1e-14);
        assert!(k.decay_constant <= 1.0 + 1e-12);
    }

    #[test]
    fn plane_waves() {
        let pi = std::f64::consts::PI;
        // period 8π: lattice frequencies are multiples of 1/4
        let chart = Chart::periodic_cube(2, -4.0 * pi, 4.0 * pi, 32).unwrap();
        let sys = DivergenceSystem::hessian(&chart, |_| 1.0).unwrap();
        let sym = sys.symbol(&[0.0, 0.0]);
        let k = MultiplierKernel::new(&sym, &chart, CutoffSpec::default()).unwrap();
        let psi = PsiMultiplier { cutoffs: CutoffSpec::default(), dim: 1 };
        for (kx, ky, high) in [(1.0, 0.75, true), (0.25, 0.0, false), (2.0, -3.0, true)] {
            let v = Field::scalar(&chart, move |x| (kx * x[0] + ky * x[1]).cos()).unwrap();
            let pv = apply_multiplier(&sym, &v).unwrap();
            let epv = apply_multiplier(&k, &pv).unwrap();
            let pv_psi = apply_multiplier(&psi, &v).unwrap();
            if high {
                assert!(epv.sub(&v).unwrap().sup_norm() < 1e-12);
            } else {
                assert!(epv.sup_norm() < 1e-12);
                assert!(pv_psi.sub(&v).unwrap().sup_norm() < 1e-12);
            }
        }
    }
}
