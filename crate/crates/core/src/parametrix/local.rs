//! Rescaled local operators around a point, the local representation and its Neumann solve.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use crate::chart::{Chart, MAX_DIM};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::parametrix::multiplier::{apply_multiplier_raw, CutoffSpec, MultiplierKernel, PsiMultiplier};
use crate::parametrix::system::{apply_divergence, DivergenceSystem};
use crate::scalar::Real;
use crate::spectral::FftGrid;

type Comps = Vec<Vec<f64>>;

/// Real band-limited random field: Fourier modes with every axis index `|i| ≤ max_index`.
pub fn random_band_limited<T: Real>(chart: &Chart<T>, ncomp: usize, max_index: usize, seed: u64) -> Result<Field<T>> {
    let grid = FftGrid::new(chart)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let mut vals = vec![T::zero(); len * ncomp];
    for c in 0..ncomp {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, b) in buf.iter_mut().enumerate() {
            let inside = (0..grid.dim()).all(|a| {
                let m = grid.dims()[a];
                let i = grid.axis_index(k, a);
                let signed = if i <= m / 2 { i } else { m - i };
                signed <= max_index && !(m % 2 == 0 && i == m / 2)
            });
            if inside {
                *b = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        grid.inverse(&mut buf);
        let peak = buf.iter().fold(0.0f64, |a, z| a.max(z.re.abs())).max(1e-300);
        for k in 0..len {
            vals[k * ncomp + c] = T::lit(buf[k].re / peak);
        }
    }
    let shape: Vec<usize> = if ncomp == 1 { vec![] } else { vec![ncomp] };
    Field::from_values(chart.clone(), &shape, &[], vals)
}

/// Frozen parametrix and oscillation operator in the rescaled variable `y = (x − x₀)/r`.
pub struct LocalOperators<T> {
    pub chart: Chart<T>,
    grid: FftGrid,
    n: usize,
    rows: usize,
    cols: usize,
    /// `Ã(y)` per node.
    a: Vec<f64>,
    /// `χ₂(Ã − Ã(0))` per node.
    q: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi2: Vec<f64>,
    pub kernel: MultiplierKernel,
    pub cutoffs: CutoffSpec,
}

impl<T: Real> LocalOperators<T> {
    /// `chart` is the periodic `y`-grid; `B(x₀, 2r)` must lie inside the system chart.
    pub fn new(sys: &DivergenceSystem<T>, x0: &[T], r: T, chart: &Chart<T>, cutoffs: CutoffSpec) -> Result<Self> {
        let n = sys.dim();
        if x0.len() != n || chart.dim() != n {
            return Err(Error::Config("dimension mismatch".into()));
        }
        if !(r > T::zero()) {
            return Err(Error::Config("radius must be positive".into()));
        }
        let sc = sys.chart();
        for a in 0..n {
            let two_r = T::lit(2.0) * r;
            if x0[a] - two_r < sc.lower()[a] || x0[a] + two_r > sc.upper()[a] {
                return Err(Error::Domain(format!("ball B(x0, 2r) leaves the chart on axis {}", a + 1)));
            }
        }
        let grid = FftGrid::new(chart)?;
        let (rows, cols) = (sys.equations(), sys.unknowns());
        let per = sys.coeff_len();
        let len = chart.len();
        let mut a = vec![0.0; len * per];
        let mut a0t = vec![T::zero(); per];
        sys.coeff_at(x0, &mut a0t);
        let a0: Vec<f64> = a0t.iter().map(|v| v.as_f64()).collect();
        let mut q = vec![0.0; len * per];
        let mut chi = vec![0.0; len];
        let mut chi2 = vec![0.0; len];
        let mut y = [T::zero(); MAX_DIM];
        let mut x = [T::zero(); MAX_DIM];
        let mut buf = vec![T::zero(); per];
        for k in 0..len {
            chart.node_coords(k, &mut y);
            for d in 0..n {
                x[d] = x0[d] + r * y[d];
            }
            sys.coeff_at(&x[..n], &mut buf);
            let rho = (0..n).map(|d| y[d].as_f64().powi(2)).sum::<f64>().sqrt();
            chi[k] = cutoffs.chi(rho);
            chi2[k] = cutoffs.chi2(rho);
            for i in 0..per {
                let v = buf[i].as_f64();
                a[k * per + i] = v;
                q[k * per + i] = chi2[k] * (v - a0[i]);
            }
        }
        let kernel = MultiplierKernel::new(&sys.symbol(x0), chart, cutoffs)?;
        Ok(Self { chart: chart.clone(), grid, n, rows, cols, a, q, chi, chi2, kernel, cutoffs })
    }

    /// `Q w = D_l(χ₂(Ã − Ã(0)) D_m w)`.
    pub fn q_apply(&self, w: &[Vec<f64>]) -> Comps {
        apply_divergence(&self.grid, self.n, self.rows, self.cols, &self.q, w)
    }
    /// `D_l(Ã D_m w)`.
    pub fn p_apply(&self, w: &[Vec<f64>]) -> Comps {
        apply_divergence(&self.grid, self.n, self.rows, self.cols, &self.a, w)
    }
    pub fn e_apply(&self, f: &[Vec<f64>]) -> Result<Comps> {
        apply_multiplier_raw(&self.grid, &self.kernel, f)
    }
    pub fn psi_apply(&self, w: &[Vec<f64>]) -> Result<Comps> {
        apply_multiplier_raw(&self.grid, &PsiMultiplier { cutoffs: self.cutoffs, dim: w.len() }, w)
    }
    pub fn eq_apply(&self, w: &[Vec<f64>]) -> Result<Comps> {
        self.e_apply(&self.q_apply(w))
    }

    fn partial(&self, w: &[f64], axis: usize) -> Vec<f64> {
        self.grid.partial_real(w, axis)
    }
}

fn sup(c: &[Vec<f64>]) -> f64 {
    c.iter().flat_map(|x| x.iter()).fold(0.0f64, |a, &b| a.max(b.abs()))
}

fn to_field<T: Real>(chart: &Chart<T>, c: &[Vec<f64>]) -> Result<Field<T>> {
    let len = chart.len();
    let nc = c.len();
    let mut vals = vec![T::zero(); len * nc];
    for (i, col) in c.iter().enumerate() {
        for k in 0..len {
            vals[k * nc + i] = T::lit(col[k]);
        }
    }
    let shape: Vec<usize> = if nc == 1 { vec![] } else { vec![nc] };
    Field::from_values(chart.clone(), &shape, &[], vals)
}

fn from_field<T: Real>(f: &Field<T>) -> Comps {
    let len = f.chart().len();
    (0..f.ncomp()).map(|c| (0..len).map(|k| f.get(k, c).as_f64()).collect()).collect()
}

/// Pieces of the local representation `T(v) = G` for `v = χ ũ`.
#[derive(Clone, Debug)]
pub struct LocalRepresentation<T: Real> {
    pub v: Field<T>,
    pub f_rhs: Field<T>,
    pub g: Field<T>,
    pub t_of_v: Field<T>,
    /// `sup |T(v) − G|`.
    pub identity_residual: T,
}

/// Rescales around `x₀` onto `y_chart`, builds `v = χ ũ`, `F`, `G` and `T(v)`.
///
/// `u` is sampled as `ũ(y) = χ₂(y) u(x₀ + r y)`; the factor `χ₂` equals one on the support of `χ`
/// and keeps every sampled quantity periodic. Without `f`, the source is manufactured on the grid
/// as `r² f̃ = D_l(Ã D_m ũ)`.
pub fn local_representation<T: Real>(
    sys: &DivergenceSystem<T>,
    u: &dyn Fn(&[T], &mut [T]),
    f: Option<&dyn Fn(&[T], &mut [T])>,
    x0: &[T],
    r: T,
    cutoffs: CutoffSpec,
    y_chart: &Chart<T>,
) -> Result<LocalRepresentation<T>> {
    let ops = LocalOperators::new(sys, x0, r, y_chart, cutoffs)?;
    let n = ops.n;
    let len = y_chart.len();
    let (rows, cols) = (ops.rows, ops.cols);
    let mut ut = vec![vec![0.0; len]; cols];
    let mut r2f = vec![vec![0.0; len]; rows];
    let mut y = [T::zero(); MAX_DIM];
    let mut x = [T::zero(); MAX_DIM];
    let mut ub = vec![T::zero(); cols];
    let mut fb = vec![T::zero(); rows];
    for k in 0..len {
        y_chart.node_coords(k, &mut y);
        for d in 0..n {
            x[d] = x0[d] + r * y[d];
        }
        if ops.chi2[k] > 0.0 {
            u(&x[..n], &mut ub);
            for c in 0..cols {
                ut[c][k] = ops.chi2[k] * ub[c].as_f64();
            }
        }
        if let Some(f) = f {
            f(&x[..n], &mut fb);
            for i in 0..rows {
                r2f[i][k] = (r * r * fb[i]).as_f64();
            }
        }
    }
    if f.is_none() {
        r2f = ops.p_apply(&ut);
    }
    let v: Comps = ut.iter().map(|c| c.iter().zip(&ops.chi).map(|(a, b)| a * b).collect()).collect();
    let dchi: Vec<Vec<f64>> = (0..n).map(|a| ops.partial(&ops.chi, a)).collect();
    let dut: Vec<Vec<Vec<f64>>> = ut.iter().map(|c| (0..n).map(|a| ops.partial(c, a)).collect()).collect();
    let per = n * n * rows * cols;
    let mut big_f: Comps = r2f.iter().map(|c| c.iter().zip(&ops.chi).map(|(a, b)| a * b).collect()).collect();
    for row in 0..rows {
        for l in 0..n {
            let mut flux = vec![0.0; len];
            for m in 0..n {
                for c in 0..cols {
                    let idx = ((l * n + m) * rows + row) * cols + c;
                    for k in 0..len {
                        let a = ops.a[k * per + idx];
                        if a == 0.0 {
                            continue;
                        }
                        // Ã D_lχ D_m ũ = −Ã ∂_lχ ∂_m ũ
                        big_f[row][k] -= a * dchi[l][k] * dut[c][m][k];
                        flux[k] += a * ut[c][k] * dchi[m][k];
                    }
                }
            }
            // D_l(Ã ũ D_mχ) = −∂_l(Ã ũ ∂_mχ)
            let d = ops.partial(&flux, l);
            for k in 0..len {
                big_f[row][k] -= d[k];
            }
        }
    }
    let chi2v: Comps = v.iter().map(|c| c.iter().zip(&ops.chi2).map(|(a, b)| a * b).collect()).collect();
    let ef = ops.e_apply(&big_f)?;
    let pv = ops.psi_apply(&chi2v)?;
    let g: Comps = ef.iter().zip(&pv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    let eqv = ops.eq_apply(&v)?;
    let tv: Comps = v.iter().zip(&eqv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
    let diff: Comps = tv.iter().zip(&g).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    Ok(LocalRepresentation {
        v: to_field(y_chart, &v)?,
        f_rhs: to_field(y_chart, &big_f)?,
        g: to_field(y_chart, &g)?,
        t_of_v: to_field(y_chart, &tv)?,
        identity_residual: T::lit(sup(&diff)),
    })
}

#[derive(Clone, Debug)]
pub struct NeumannReport<T: Real> {
    pub v: Field<T>,
    /// Probed bound on `E∘Q` in the sup norm.
    pub kappa: T,
    pub iterations: usize,
    pub update_history: Vec<T>,
    /// Ratios of consecutive updates.
    pub ratio_history: Vec<T>,
    /// `sup |(I + EQ)v − G|`.
    pub residual: T,
}

impl<T: Real> NeumannReport<T> {
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kappa = {:e}", self.kappa.as_f64());
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "residual = {:e}", self.residual.as_f64());
        let list: Vec<String> = self.ratio_history.iter().map(|r| format!("{:.4}", r.as_f64())).collect();
        let _ = writeln!(s, "ratio_history = {}", list.join(","));
        s
    }
}

/// Sup-norm gain of `E∘Q` over ten seeded band-limited probes, each followed for a few powers.
pub fn probe_contraction<T: Real>(ops: &LocalOperators<T>, seed: u64) -> Result<f64> {
    let mut kappa = 0.0f64;
    for i in 0..10 {
        let w = random_band_limited(&ops.chart, ops.cols, 6, seed.wrapping_add(i))?;
        let mut w = from_field(&w);
        for _ in 0..4 {
            let nw = sup(&w);
            if nw == 0.0 {
                break;
            }
            let z = ops.eq_apply(&w)?;
            kappa = kappa.max(sup(&z) / nw);
            w = z;
        }
    }
    Ok(kappa)
}

/// Solves `(I + E Q) v = G` by the Neumann series `v_{k+1} = G − E Q v_k`.
pub fn neumann_solve<T: Real>(
    sys: &DivergenceSystem<T>,
    x0: &[T],
    r: T,
    g: &Field<T>,
    tol: T,
    max_iter: usize,
    cutoffs: CutoffSpec,
) -> Result<NeumannReport<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Config("tol must be positive".into()));
    }
    let ops = LocalOperators::new(sys, x0, r, g.chart(), cutoffs)?;
    if g.ncomp() != ops.cols {
        return Err(Error::Config("G must have N components".into()));
    }
    let kappa = probe_contraction(&ops, 0x5eed)?;
    if kappa >= 1.0 {
        return Err(Error::Refused(format!("oscillation too large; reduce r (probed kappa = {kappa:.4})")));
    }
    let gv = from_field(g);
    let tol = tol.as_f64();
    let mut v = gv.clone();
    let mut updates = Vec::new();
    let mut ratios = Vec::new();
    let mut iterations = 0;
    loop {
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                last_residual: updates.last().copied().unwrap_or(f64::NAN),
                history: updates,
            });
        }
        iterations += 1;
        let eq = ops.eq_apply(&v)?;
        let next: Comps = gv.iter().zip(&eq).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        let upd = next.iter().zip(&v).flat_map(|(a, b)| a.iter().zip(b)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        if let Some(&prev) = updates.last() {
            if prev > 0.0 {
                ratios.push(upd / prev);
            }
        }
        updates.push(upd);
        v = next;
        if upd <= tol {
            break;
        }
    }
    let eq = ops.eq_apply(&v)?;
    let residual = v
        .iter()
        .zip(&eq)
        .zip(&gv)
        .flat_map(|((a, b), c)| a.iter().zip(b).zip(c))
        .fold(0.0f64, |m, ((x, y), z)| m.max((x + y - z).abs()));
    Ok(NeumannReport {
        v: to_field(g.chart(), &v)?,
        kappa: T::lit(kappa),
        iterations,
        update_history: updates.into_iter().map(T::lit).collect(),
        ratio_history: ratios.into_iter().map(T::lit).collect(),
        residual: T::lit(residual),
    })
}
