//! Lagged-diffusivity (Kačanov) Dirichlet solver with regularization continuation.

use std::fmt::Write as _;

use crate::aharmonic::ball::BallProblem;
use crate::aharmonic::discrete::Discretization;
use crate::aharmonic::operator::AOperator;
use crate::chart::MAX_DIM;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SolverOptions<T> {
    /// Target l2 norm of the discrete residual at the final regularization.
    pub tol: T,
    /// Maximum number of outer (lagged-weight) iterations over all stages.
    pub max_iter: usize,
    /// Regularization schedule, applied in order; the last entry is the reported one.
    pub eps_schedule: Vec<T>,
    pub cg_max_iter: usize,
}

impl<T: Real> SolverOptions<T> {
    pub fn new(tol: T, max_iter: usize) -> Self {
        let eps_schedule = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6].iter().map(|&e| T::lit(e)).collect();
        Self { tol, max_iter, eps_schedule, cg_max_iter: 20_000 }
    }
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-8), 500)
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport<T> {
    pub iterations: usize,
    pub cg_iterations: usize,
    /// Residual after every outer iteration, measured at that iteration's regularization.
    pub residual_history: Vec<T>,
    pub energy_history: Vec<T>,
    /// Regularization of each stage actually run.
    pub eps_schedule: Vec<T>,
    pub final_eps: T,
    pub final_residual: T,
}

impl<T: Real> SolveReport<T> {
    /// Key-value rendering for reports.
    pub fn to_kv(&self, prefix: &str) -> String {
        let list = |v: &[T]| v.iter().map(|x| format!("{:e}", x.as_f64())).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "{prefix}iterations = {}", self.iterations);
        let _ = writeln!(s, "{prefix}cg_iterations = {}", self.cg_iterations);
        let _ = writeln!(s, "{prefix}residual_history = {}", list(&self.residual_history));
        let _ = writeln!(s, "{prefix}eps_schedule = {}", list(&self.eps_schedule));
        let _ = writeln!(s, "{prefix}final_eps = {:e}", self.final_eps.as_f64());
        let _ = writeln!(s, "{prefix}final_residual = {:e}", self.final_residual.as_f64());
        s
    }
}

struct Csr<T> {
    rowptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> Csr<T> {
    fn pos(&self, r: usize, c: usize) -> usize {
        let s = &self.cols[self.rowptr[r]..self.rowptr[r + 1]];
        self.rowptr[r] + s.binary_search(&c).expect("entry in sparsity pattern")
    }
    fn matvec(&self, x: &[T], y: &mut [T]) {
        for r in 0..self.rowptr.len() - 1 {
            let mut s = T::zero();
            for i in self.rowptr[r]..self.rowptr[r + 1] {
                s += self.vals[i] * x[self.cols[i]];
            }
            y[r] = s;
        }
    }
}

struct System<'a, T> {
    disc: Discretization<T>,
    prob: &'a BallProblem<T>,
    unk: Vec<usize>,
    csr: Option<Csr<T>>,
}

impl<'a, T: Real> System<'a, T> {
    fn pattern(&self) -> Csr<T> {
        let chart = &self.disc.chart;
        let n = chart.dim();
        let n3 = 3usize.pow(n as u32);
        let mut rowptr = vec![0];
        let mut cols = Vec::new();
        for &k in &self.prob.unknowns {
            let idx = chart.multi_index(k);
            let mut row = Vec::new();
            for t in 0..n3 {
                let mut j = [0usize; MAX_DIM];
                let mut tt = t;
                let mut nz = 0;
                for a in 0..n {
                    let d = (tt % 3) as isize - 1;
                    tt /= 3;
                    if d != 0 {
                        nz += 1;
                    }
                    j[a] = (idx[a] as isize + d) as usize;
                }
                if nz > 2 {
                    continue;
                }
                let c = self.unk[chart.node_index(&j)];
                if c != usize::MAX {
                    row.push(c);
                }
            }
            row.sort_unstable();
            cols.extend(row);
            rowptr.push(cols.len());
        }
        let nnz = cols.len();
        Csr { rowptr, cols, vals: vec![T::zero(); nnz] }
    }

    /// Assembles the weighted linear system; returns the right-hand side.
    fn assemble(&mut self, w: &[T], u: &[T]) -> Vec<T> {
        if self.csr.is_none() {
            self.csr = Some(self.pattern());
        }
        let n = self.disc.n;
        let m = n + 1;
        let nb = 1usize << n;
        let mut rhs = vec![T::zero(); self.prob.unknowns.len()];
        let csr = self.csr.as_mut().unwrap();
        for v in csr.vals.iter_mut() {
            *v = T::zero();
        }
        let mut nodes = [0usize; MAX_DIM + 1];
        let mut s = [T::zero(); MAX_DIM];
        let mut loc = [T::zero(); (MAX_DIM + 1) * (MAX_DIM + 1)];
        for (ci, &cell) in self.disc.cells.iter().enumerate() {
            for b in 0..nb {
                self.disc.pair(cell, b, &mut nodes, &mut s);
                self.disc.local_matrix(nodes[0], &s, w[ci * nb + b], &mut loc);
                for al in 0..m {
                    let r = self.unk[nodes[al]];
                    if r == usize::MAX {
                        continue;
                    }
                    for be in 0..m {
                        let v = loc[al * m + be];
                        let c = self.unk[nodes[be]];
                        if c == usize::MAX {
                            rhs[r] -= v * u[nodes[be]];
                        } else {
                            let p = csr.pos(r, c);
                            csr.vals[p] += v;
                        }
                    }
                }
            }
        }
        rhs
    }

    /// Jacobi-preconditioned CG; `tol` is an absolute bound on `‖b − Ax‖₂`.
    fn cg(&self, b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<usize> {
        let a = self.csr.as_ref().unwrap();
        let nr = b.len();
        let mut diag = vec![T::one(); nr];
        for r in 0..nr {
            diag[r] = a.vals[a.pos(r, r)];
        }
        let mut r = vec![T::zero(); nr];
        a.matvec(x, &mut r);
        for i in 0..nr {
            r[i] = b[i] - r[i];
        }
        let mut z: Vec<T> = (0..nr).map(|i| r[i] / diag[i]).collect();
        let mut p = z.clone();
        let mut rz: T = (0..nr).map(|i| r[i] * z[i]).sum();
        let mut ap = vec![T::zero(); nr];
        for it in 0..max_iter {
            let rn = r.iter().map(|&v| v * v).sum::<T>().sqrt();
            if rn <= tol {
                return Ok(it);
            }
            a.matvec(&p, &mut ap);
            let pap: T = (0..nr).map(|i| p[i] * ap[i]).sum();
            if !(pap > T::zero()) {
                return Err(Error::Regularization("linear system lost positive definiteness".into()));
            }
            let alpha = rz / pap;
            for i in 0..nr {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
                z[i] = r[i] / diag[i];
            }
            let rz_new: T = (0..nr).map(|i| r[i] * z[i]).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..nr {
                p[i] = z[i] + beta * p[i];
            }
        }
        let rn = r.iter().map(|&v| v * v).sum::<T>().sqrt();
        if rn <= tol * T::lit(10.0) {
            return Ok(max_iter);
        }
        Err(Error::NonConvergence { iterations: max_iter, last_residual: rn.as_f64(), history: vec![] })
    }

    /// Approximate minimizer of the energy along `dir`, by secant steps on its derivative.
    fn step_length(&self, u: &[T], dir: &[T], eps: T) -> Result<T> {
        let unk = &self.prob.unknowns;
        let mut trial = u.to_vec();
        let mut slope = |t: T| -> Result<T> {
            for (i, &k) in unk.iter().enumerate() {
                trial[k] = u[k] + t * dir[i];
            }
            let d = self.disc.divergence(&trial, eps)?;
            Ok(-unk.iter().enumerate().map(|(i, &k)| d[k] * dir[i]).sum::<T>())
        };
        let (mut t0, mut s0) = (T::zero(), slope(T::zero())?);
        if !(s0 < T::zero()) {
            return Ok(T::one());
        }
        let (mut t1, mut s1) = (T::one(), slope(T::one())?);
        for _ in 0..8 {
            if s1.abs() <= T::lit(1e-3) * s0.abs().max(s1.abs()) || s1 == s0 {
                break;
            }
            let t2 = (t1 - s1 * (t1 - t0) / (s1 - s0)).max(T::lit(1e-3)).min(T::lit(10.0));
            t0 = t1;
            s0 = s1;
            t1 = t2;
            s1 = slope(t1)?;
        }
        Ok(if t1.is_finite() && t1 > T::zero() { t1 } else { T::one() })
    }

    /// l2 norm of the discrete divergence over the unknowns.
    fn residual(&self, u: &[T], eps: T) -> Result<T> {
        let d = self.disc.divergence(u, eps)?;
        let s: T = self.prob.unknowns.iter().map(|&k| d[k] * d[k]).sum();
        Ok((s * self.disc.chart.cell_volume()).sqrt())
    }
}

/// Solves `div A(x, ∇u) = 0` on the ball with the problem's Dirichlet data.
pub fn solve_dirichlet<T: Real>(op: &AOperator<T>, prob: &BallProblem<T>, tol: T, max_iter: usize) -> Result<(Field<T>, SolveReport<T>)> {
    solve_dirichlet_with(op, prob, &SolverOptions::new(tol, max_iter))
}

pub fn solve_dirichlet_with<T: Real>(op: &AOperator<T>, prob: &BallProblem<T>, opts: &SolverOptions<T>) -> Result<(Field<T>, SolveReport<T>)> {
    if !(opts.tol > T::zero()) || opts.eps_schedule.is_empty() {
        return Err(Error::Config("solver needs tol > 0 and a non-empty regularization schedule".into()));
    }
    if op.metric().chart() != prob.parent() {
        return Err(Error::Config("operator metric and ball problem use different charts".into()));
    }
    let chart = prob.chart.clone();
    let n = chart.dim();
    let p = op.p();
    let two = T::lit(2.0);
    let disc = Discretization::new(&chart, op.metric(), p, |k| prob.parent_node(k), prob.cells.clone());
    let mut unk = vec![usize::MAX; chart.len()];
    for (i, &k) in prob.unknowns.iter().enumerate() {
        unk[k] = i;
    }
    let mut sys = System { disc, prob, unk, csr: None };
    let mut x = [T::zero(); MAX_DIM];
    let mut u: Vec<T> = (0..chart.len())
        .map(|k| {
            chart.node_coords(k, &mut x);
            (prob.boundary_data)(&x[..n])
        })
        .collect();
    let eps_final = *opts.eps_schedule.last().unwrap();
    let sqrt_vol = chart.cell_volume().sqrt();
    let mut rep = SolveReport { final_eps: eps_final, ..Default::default() };
    let mut res_final = sys.residual(&u, eps_final)?;
    rep.residual_history.push(res_final);

    let stages: Vec<T> = if p == two { vec![eps_final] } else { opts.eps_schedule.clone() };
    for (si, &eps) in stages.iter().enumerate() {
        if res_final <= opts.tol {
            break;
        }
        let last_stage = si + 1 == stages.len();
        let stage_tol = if last_stage { opts.tol } else { opts.tol.max(T::lit(1e-6)) };
        rep.eps_schedule.push(eps);
        let mut res = sys.residual(&u, eps)?;
        let mut energy = sys.disc.energy(&u, eps);
        rep.energy_history.push(energy);
        while res > stage_tol {
            if rep.iterations >= opts.max_iter {
                return Err(Error::NonConvergence {
                    iterations: rep.iterations,
                    last_residual: res.as_f64(),
                    history: rep.residual_history.iter().map(|v| v.as_f64()).collect(),
                });
            }
            rep.iterations += 1;
            let w = sys.disc.weights(&u, eps)?;
            let rhs = sys.assemble(&w, &u);
            let mut xu: Vec<T> = prob.unknowns.iter().map(|&k| u[k]).collect();
            let cg_tol = T::lit(0.05) * stage_tol * sqrt_vol;
            rep.cg_iterations += sys.cg(&rhs, &mut xu, cg_tol, opts.cg_max_iter)?;
            let old: Vec<T> = prob.unknowns.iter().map(|&k| u[k]).collect();
            let dir: Vec<T> = (0..old.len()).map(|i| xu[i] - old[i]).collect();
            let t0 = sys.step_length(&u, &dir, eps)?;
            // backtracking keeps the energy non-increasing
            let mut t = t0;
            let mut trial = u.clone();
            let slack = T::lit(1e-13);
            let accepted = loop {
                for (i, &k) in prob.unknowns.iter().enumerate() {
                    trial[k] = old[i] + t * dir[i];
                }
                let e = sys.disc.energy(&trial, eps);
                if e <= energy + slack * energy.abs() {
                    break Some(e);
                }
                t = t / two;
                if t < T::lit(1e-10) {
                    break None;
                }
            };
            let Some(e_new) = accepted else {
                break;
            };
            assert!(e_new <= energy + slack * energy.abs(), "energy increased in lagged-diffusivity step");
            energy = e_new;
            u.copy_from_slice(&trial);
            rep.energy_history.push(energy);
            res = sys.residual(&u, eps)?;
            rep.residual_history.push(res);
            if p == two {
                break;
            }
        }
        res_final = sys.residual(&u, eps_final)?;
    }
    rep.final_residual = res_final;
    if res_final > opts.tol {
        return Err(Error::NonConvergence {
            iterations: rep.iterations,
            last_residual: res_final.as_f64(),
            history: rep.residual_history.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok((Field::from_values(chart, &[], &[], u)?, rep))
}

/// Discrete `div A(x, ∇u)` over the whole chart; zero on the outermost node layer.
pub fn residual_a<T: Real>(op: &AOperator<T>, u: &Field<T>) -> Result<Field<T>> {
    let chart = u.chart().clone();
    if op.metric().chart() != &chart || u.ncomp() != 1 {
        return Err(Error::Config("u must be a scalar field on the operator chart".into()));
    }
    let disc = Discretization::new(&chart, op.metric(), op.p(), |k| k, Discretization::all_cells(&chart));
    let uv: Vec<T> = (0..chart.len()).map(|k| u.get(k, 0)).collect();
    let mut d = disc.divergence(&uv, op.epsilon_reg())?;
    for k in 0..chart.len() {
        if !chart.in_core(&chart.multi_index(k), 1) {
            d[k] = T::zero();
        }
    }
    Field::from_values(chart, &[], &[], d)
}
