//! p-harmonic coordinates on small balls.

use std::fmt::Write as _;

use crate::aharmonic::ball::BallProblem;
use crate::aharmonic::operator::AOperator;
use crate::aharmonic::solver::{solve_dirichlet_with, SolveReport, SolverOptions};
use crate::chart::MAX_DIM;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::linalg;
use crate::scalar::Real;
use crate::stencil::DerivativeScheme;

/// Outcome of one radius tried by [`build_coordinates`].
#[derive(Clone, Debug)]
pub struct CoordinateAttempt<T> {
    pub radius: T,
    pub deviation: T,
    pub min_det: T,
}

/// Solution map `U` of the n coordinate problems with its Jacobian on the ball sub-box.
#[derive(Clone, Debug)]
pub struct CoordinateMap<T: Real> {
    pub problem: BallProblem<T>,
    /// n components; boundary data outside the mask.
    pub u: Field<T>,
    /// `∂_a U^j` stored at component `j*n + a`.
    pub jacobian: Field<T>,
    pub det_jacobian: Field<T>,
    pub target: Vec<T>,
    /// Frobenius norm of `DU(x₀) − S`.
    pub deviation: T,
    pub min_det: T,
    pub attempts: Vec<CoordinateAttempt<T>>,
    pub reports: Vec<SolveReport<T>>,
}

impl<T: Real> CoordinateMap<T> {
    pub fn radius(&self) -> T {
        self.problem.radius
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "radius = {:e}", self.radius().as_f64());
        let _ = writeln!(s, "deviation = {:e}", self.deviation.as_f64());
        let _ = writeln!(s, "min_det = {:e}", self.min_det.as_f64());
        for (j, r) in self.reports.iter().enumerate() {
            s.push_str(&r.to_kv(&format!("solve{}.", j + 1)));
        }
        s
    }
}

/// Builds `U` with `U^j = (S(x − x₀))^j` on the boundary, halving the radius up to five times.
pub fn build_coordinates<T: Real>(op: &AOperator<T>, x0: &[T], r: T, s: &[T], eps: T) -> Result<CoordinateMap<T>> {
    build_coordinates_with(op, x0, r, s, eps, &SolverOptions::default())
}

pub fn build_coordinates_with<T: Real>(
    op: &AOperator<T>,
    x0: &[T],
    r: T,
    s: &[T],
    eps: T,
    opts: &SolverOptions<T>,
) -> Result<CoordinateMap<T>> {
    let n = op.dim();
    if s.len() != n * n {
        return Err(Error::Config(format!("S must have {} entries", n * n)));
    }
    let det_s = linalg::det(n, s);
    if !(det_s.abs() > T::lit(1e-14)) {
        return Err(Error::Config("S is not invertible".into()));
    }
    if !(eps > T::zero()) {
        return Err(Error::Config("eps must be positive".into()));
    }
    let mut attempts = Vec::new();
    let mut radius = r;
    for _ in 0..6 {
        let map = attempt(op, x0, radius, s, opts)?;
        let ok = map.deviation < eps && map.min_det > T::zero();
        attempts.push(CoordinateAttempt { radius, deviation: map.deviation, min_det: map.min_det });
        if ok {
            return Ok(CoordinateMap { attempts, ..map });
        }
        radius = radius / T::lit(2.0);
    }
    let list = attempts
        .iter()
        .map(|a| format!("r={:e}: |DU(x0)-S|={:e}, min det={:e}", a.radius.as_f64(), a.deviation.as_f64(), a.min_det.as_f64()))
        .collect::<Vec<_>>()
        .join("; ");
    Err(Error::Coordinates(format!("no radius met the tolerance ({list})")))
}

fn attempt<T: Real>(op: &AOperator<T>, x0: &[T], r: T, s: &[T], opts: &SolverOptions<T>) -> Result<CoordinateMap<T>> {
    let n = op.dim();
    let parent = op.metric().chart();
    let mut comps = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(n);
    let mut problem = None;
    for j in 0..n {
        let prob = BallProblem::affine(parent, x0, r, &s[j * n..(j + 1) * n])?;
        let (u, rep) = solve_dirichlet_with(op, &prob, opts)?;
        comps.push(u);
        reports.push(rep);
        problem = Some(prob);
    }
    let problem = problem.unwrap();
    let chart = problem.chart.clone();
    let len = chart.len();
    let mut uv = vec![T::zero(); len * n];
    for (j, f) in comps.iter().enumerate() {
        for k in 0..len {
            uv[k * n + j] = f.get(k, 0);
        }
    }
    let u = Field::from_values(chart.clone(), &[n], &[], uv)?;
    let scheme = DerivativeScheme::order2();
    let mut jac = vec![T::zero(); len * n * n];
    for a in 0..n {
        let d = u.partial(a, scheme)?;
        for k in 0..len {
            for j in 0..n {
                jac[k * n * n + j * n + a] = d.get(k, j);
            }
        }
    }
    let jacobian = Field::from_values(chart.clone(), &[n, n], &[], jac)?;
    let mut buf = [T::zero(); MAX_DIM * MAX_DIM];
    let dets: Vec<T> = (0..len)
        .map(|k| {
            jacobian.value_at(k, &mut buf);
            linalg::det(n, &buf[..n * n])
        })
        .collect();
    let min_det = problem.unknowns.iter().map(|&k| dets[k]).fold(T::infinity(), T::min);
    let det_jacobian = Field::from_values(chart, &[], &[], dets)?;
    let du0 = jacobian.interpolate(x0)?;
    let diff: Vec<T> = du0.iter().zip(s).map(|(&a, &b)| a - b).collect();
    let deviation = linalg::frobenius(&diff);
    Ok(CoordinateMap {
        problem,
        u,
        jacobian,
        det_jacobian,
        target: s.to_vec(),
        deviation,
        min_det,
        attempts: Vec::new(),
        reports,
    })
}
