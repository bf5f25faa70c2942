//! Numerically assembled principal symbols and injectivity sampling.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::curvature::jet::Jet;
use crate::curvature::point::PointCurvature;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Perturbation amplitude for the linearization.
const EPS: f64 = 1e-5;
/// Points on the periodic line carrying the plane wave.
const LINE_POINTS: usize = 16;

/// Which constraint rows are stacked under the Weyl symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeRows {
    None,
    DetOnly,
    Full,
}

/// Linearized Weyl, M and N symbols plus gauge rows at one covector.
///
/// Matrices are row-major with `N = n(n+1)/2` columns, one per orthonormal symmetric
/// basis element; Weyl/M/N rows are indexed `((a*n+b)*n+c)*n+d`.
#[derive(Clone, Debug)]
pub struct SymbolAssembly<T> {
    pub n: usize,
    pub xi: Vec<T>,
    pub background: Vec<T>,
    pub weyl_symbol: Vec<T>,
    pub m_symbol: Vec<T>,
    pub n_symbol: Vec<T>,
    /// `n` contracted-Christoffel gauge rows followed by the determinant row.
    pub gauge_rows: Vec<T>,
    pub min_singular_value: T,
}

/// Values of `cos(κ s)` and its first two spectral derivatives at line points.
fn line_profile(kappa: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let m = LINE_POINTS;
    let period = 2.0 * std::f64::consts::PI / kappa;
    let f: Vec<f64> = (0..m).map(|j| (kappa * period * j as f64 / m as f64).cos()).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut spec: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let deriv = |order: i32| {
        let mut d: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if i == m / 2 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = crate::spectral::wavenumber(i, m, period);
                c * Complex64::new(0.0, k).powi(order)
            })
            .collect();
        inv.process(&mut d);
        d.iter().map(|c| c.re / m as f64).collect::<Vec<f64>>()
    };
    let d1 = deriv(1);
    let d2 = deriv(2);
    (f, d1, d2)
}

fn basis<T: Real>(n: usize) -> Vec<[T; 16]> {
    let r = T::one() / T::lit(2.0).sqrt();
    let mut out = Vec::new();
    for p in 0..n {
        for q in p..n {
            let mut h = [T::zero(); 16];
            if p == q {
                h[p * n + p] = T::one();
            } else {
                h[p * n + q] = r;
                h[q * n + p] = r;
            }
            out.push(h);
        }
    }
    out
}

/// Jet of `g0 + e H f(s)` with `s = ξ·x`, given `f, f', f''` at the evaluation point.
fn wave_jet<T: Real>(n: usize, g0: &[T], h: &[T], e: T, xi: &[T], f: T, f1: T, f2: T) -> Jet<T> {
    let nn = n * n;
    let mut j = Jet::zero(n, nn);
    for i in 0..nn {
        j.v[i] = g0[i] + e * h[i] * f;
        for a in 0..n {
            j.d1[a * nn + i] = e * h[i] * xi[a] * f1;
            for b in 0..n {
                j.d2[(a * n + b) * nn + i] = e * h[i] * xi[a] * xi[b] * f2;
            }
        }
    }
    j
}

/// Contracted-Christoffel gauge defect `g^{ab}Γ^k_ab − (n−2)/2 g^{ka} ∂_a log g^{kk}`.
fn gauge_defect<T: Real>(jet: &Jet<T>) -> [T; 4] {
    let n = jet.n;
    let nn = n * n;
    let pc = PointCurvature::from_jet(jet);
    let ginv = &pc.ginv;
    let mut out = [T::zero(); 4];
    let nf = T::from_usize_lossy(n);
    for k in 0..n {
        let mut gk = T::zero();
        for a in 0..n {
            for b in 0..n {
                gk += ginv[a * n + b] * pc.gamma[(k * n + a) * n + b];
            }
        }
        let mut corr = T::zero();
        for a in 0..n {
            // ∂_a g^{kk} = −(g^{-1} ∂_a g g^{-1})^{kk}
            let mut d = T::zero();
            for s in 0..n {
                for t in 0..n {
                    d -= ginv[k * n + s] * jet.d1[a * nn + s * n + t] * ginv[t * n + k];
                }
            }
            corr += ginv[k * n + a] * d / ginv[k * n + k];
        }
        out[k] = gk - (nf - T::lit(2.0)) / T::lit(2.0) * corr;
    }
    out
}

/// Assembles the linearized Weyl symbol and gauge rows at background `g0` and covector `xi`.
pub fn weyl_symbol<T: Real>(background: &[T], xi: &[T]) -> Result<SymbolAssembly<T>> {
    let n = xi.len();
    if !(3..=4).contains(&n) || background.len() != n * n {
        return Err(Error::Config("weyl_symbol needs n in {3, 4} and an n×n background".into()));
    }
    for (k, m) in linalg::leading_minors(n, background).into_iter().enumerate() {
        if !(m > T::zero()) {
            return Err(Error::NotPositiveDefinite { coords: vec![], minor: k + 1, value: m.as_f64() });
        }
    }
    let norm = xi.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !(norm > T::zero()) {
        return Err(Error::Domain("covector must be nonzero".into()));
    }
    let xi: Vec<T> = xi.iter().map(|&v| v / norm).collect();
    let det = linalg::det(n, background);
    let s = det.powf(-T::one() / T::from_usize_lossy(n));
    let g0: Vec<T> = background.iter().map(|&v| v * s).collect();

    let nn = n * n;
    let n4 = nn * nn;
    let basis = basis::<T>(n);
    let cols = basis.len();
    let e = T::lit(EPS);
    let two = T::lit(2.0);
    let mut weyl = vec![T::zero(); n4 * cols];
    let mut msym = vec![T::zero(); n4 * cols];
    let mut nsym = vec![T::zero(); n4 * cols];
    let mut gauge = vec![T::zero(); (n + 1) * cols];

    let kappas = [2.0, 4.0];
    let profiles: Vec<_> = kappas.iter().map(|&k| line_profile(k)).collect();
    for (col, h) in basis.iter().enumerate() {
        let mut a_w = [[T::zero(); 256]; 2];
        let mut a_m = [[T::zero(); 256]; 2];
        let mut a_n = [[T::zero(); 256]; 2];
        let mut b_g = [[T::zero(); 4]; 2];
        for (ki, (f, f1, f2)) in profiles.iter().enumerate() {
            // s = 0: second-derivative part; s = quarter period: first-derivative part
            let jp = wave_jet(n, &g0, h, e, &xi, T::lit(f[0]), T::lit(f1[0]), T::lit(f2[0]));
            let jm = wave_jet(n, &g0, h, -e, &xi, T::lit(f[0]), T::lit(f1[0]), T::lit(f2[0]));
            let (pp, pm) = (PointCurvature::from_jet(&jp), PointCurvature::from_jet(&jm));
            let (wp, wm) = (pp.weyl(), pm.weyl());
            let ((mp, np), (mm, nm)) = (pp.mn(), pm.mn());
            let q = LINE_POINTS / 4;
            let gp = gauge_defect(&wave_jet(n, &g0, h, e, &xi, T::lit(f[q]), T::lit(f1[q]), T::lit(f2[q])));
            let gm = gauge_defect(&wave_jet(n, &g0, h, -e, &xi, T::lit(f[q]), T::lit(f1[q]), T::lit(f2[q])));
            for i in 0..n4 {
                a_w[ki][i] = -(wp[i] - wm[i]) / (two * e);
                a_m[ki][i] = -(mp[i] - mm[i]) / (two * e);
                a_n[ki][i] = -(np[i] - nm[i]) / (two * e);
            }
            for k in 0..n {
                b_g[ki][k] = -(gp[k] - gm[k]) / (two * e);
            }
        }
        // κ = 2, 4: a₂ from (A₄/4 − A₂/2)/2, b₁ from (B₄ − B₂)/2
        for i in 0..n4 {
            weyl[i * cols + col] = (a_w[1][i] / T::lit(4.0) - a_w[0][i] / two) / two;
            msym[i * cols + col] = (a_m[1][i] / T::lit(4.0) - a_m[0][i] / two) / two;
            nsym[i * cols + col] = (a_n[1][i] / T::lit(4.0) - a_n[0][i] / two) / two;
        }
        for k in 0..n {
            gauge[k * cols + col] = (b_g[1][k] - b_g[0][k]) / two;
        }
        let mut gp = [T::zero(); 16];
        let mut gm = [T::zero(); 16];
        for i in 0..nn {
            gp[i] = g0[i] + e * h[i];
            gm[i] = g0[i] - e * h[i];
        }
        gauge[n * cols + col] = (linalg::det(n, &gp[..nn]).ln() - linalg::det(n, &gm[..nn]).ln()) / (two * e);
    }
    let mut sa = SymbolAssembly {
        n,
        xi,
        background: g0,
        weyl_symbol: weyl,
        m_symbol: msym,
        n_symbol: nsym,
        gauge_rows: gauge,
        min_singular_value: T::zero(),
    };
    let (r, c, m) = sa.stacked(GaugeRows::Full);
    sa.min_singular_value = *linalg::singular_values(r, c, &m).last().unwrap();
    Ok(sa)
}

impl<T: Real> SymbolAssembly<T> {
    pub fn columns(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    /// Weyl symbol with the requested constraint rows appended.
    pub fn stacked(&self, gauge: GaugeRows) -> (usize, usize, Vec<T>) {
        let cols = self.columns();
        let n4 = self.n.pow(4);
        let mut m = self.weyl_symbol.clone();
        let extra: &[T] = match gauge {
            GaugeRows::None => &[],
            GaugeRows::DetOnly => &self.gauge_rows[self.n * cols..],
            GaugeRows::Full => &self.gauge_rows,
        };
        m.extend_from_slice(extra);
        (n4 + extra.len() / cols, cols, m)
    }

    fn xi_up(&self) -> Vec<T> {
        let n = self.n;
        let mut inv = [T::zero(); 16];
        linalg::inverse(n, &self.background, &mut inv);
        (0..n).map(|d| (0..n).map(|e| inv[d * n + e] * self.xi[e]).sum()).collect()
    }

    /// `max |ξ^d σ(M)_abcd| / max |σ(M)|` over all basis columns.
    pub fn bianchi_m_residual(&self) -> T {
        let n = self.n;
        let up = self.xi_up();
        let cols = self.columns();
        let scale = self.m_symbol.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let mut worst = T::zero();
        for col in 0..cols {
            for abc in 0..n * n * n {
                let s: T = (0..n).map(|d| up[d] * self.m_symbol[(abc * n + d) * cols + col]).sum();
                worst = worst.max(s.abs());
            }
        }
        worst / scale
    }

    /// `max |ξ^a σ(N)_abcd| / max |σ(N)|` over all basis columns.
    pub fn bianchi_n_residual(&self) -> T {
        let n = self.n;
        let up = self.xi_up();
        let cols = self.columns();
        let scale = self.n_symbol.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        let n3 = n * n * n;
        let mut worst = T::zero();
        for col in 0..cols {
            for bcd in 0..n3 {
                let s: T = (0..n).map(|a| up[a] * self.n_symbol[(a * n3 + bcd) * cols + col]).sum();
                worst = worst.max(s.abs());
            }
        }
        worst / scale
    }

    /// Number of singular values of the stacked matrix below `floor`.
    pub fn kernel_dimension(&self, gauge: GaugeRows, floor: T) -> usize {
        let (r, c, m) = self.stacked(gauge);
        linalg::singular_values(r, c, &m).into_iter().filter(|&s| s < floor).count()
    }
}

/// Hessian-type symbol `(ξ₁², ξ₁ξ₂, ξ₂²)` (or the full four-entry Hessian) for n = 2.
pub fn hessian_symbol<T: Real>(xi: &[T], full: bool) -> (usize, usize, Vec<T>) {
    let (a, b) = (xi[0], xi[1]);
    if full {
        (4, 1, vec![a * a, a * b, b * a, b * b])
    } else {
        (3, 1, vec![a * a, a * b, b * b])
    }
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Quasi-uniform unit covectors: equally spaced angles for n = 2; axes, diagonals and
/// Halton-driven Gaussian points otherwise.
pub fn sample_directions<T: Real>(n: usize, count: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    if n == 2 {
        for k in 0..count {
            let t = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
            out.push(vec![t.cos(), t.sin()]);
        }
    } else {
        for a in 0..n {
            let mut v = vec![0.0; n];
            v[a] = 1.0;
            out.push(v);
        }
        let r = 1.0 / (n as f64).sqrt();
        out.push(vec![r; n]);
        out.push((0..n).map(|i| if i % 2 == 0 { r } else { -r }).collect());
        const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
        let mut i = 1;
        while out.len() < count {
            let mut v = vec![0.0; n];
            for a in 0..n {
                let u1 = halton(i, PRIMES[2 * a]).max(1e-12);
                let u2 = halton(i, PRIMES[2 * a + 1]);
                v[a] = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            }
            i += 1;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                out.push(v.iter().map(|x| x / norm).collect());
            }
        }
        out.truncate(count);
    }
    out.into_iter().map(|v| v.into_iter().map(T::lit).collect()).collect()
}

/// Result of sampling a symbol over unit covectors.
#[derive(Clone, Debug)]
pub struct InjectivityReport<T> {
    pub min_singular_value: T,
    pub worst_direction: Vec<T>,
    pub directions: usize,
    pub floor: T,
    /// True when the minimum falls below `floor` (not injective / not elliptic).
    pub flagged: bool,
}

/// Minimum over sampled unit covectors of the smallest singular value of `symbol(ξ)`.
pub fn check_symbol_injectivity<T: Real>(
    n: usize,
    n_directions: usize,
    floor: T,
    symbol: impl Fn(&[T]) -> Result<(usize, usize, Vec<T>)>,
) -> Result<InjectivityReport<T>> {
    if n_directions < 10 {
        return Err(Error::Config(format!("need at least 10 directions, got {n_directions}")));
    }
    let mut best = T::infinity();
    let mut worst_dir = vec![];
    for xi in sample_directions::<T>(n, n_directions) {
        let (r, c, m) = symbol(&xi)?;
        let s = if r < c { T::zero() } else { *linalg::singular_values(r, c, &m).last().unwrap() };
        if s < best {
            best = s;
            worst_dir = xi;
        }
    }
    Ok(InjectivityReport { min_singular_value: best, worst_direction: worst_dir, directions: n_directions, floor, flagged: best < floor })
}
