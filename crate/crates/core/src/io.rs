//! Line-oriented metric and system definition files.
//!
//! ```text
//! # round sphere, stereographic chart
//! dim = 3
//! lower = -0.4, -0.4, -0.4
//! upper = 0.4, 0.4, 0.4
//! resolution = 33
//! periodic = 0
//! g[1][1] = 4/(1+x1^2+x2^2+x3^2)^2
//! ```
//!
//! Indices are 1-based. A metric entry given only as `g[i][j]` also fills `g[j][i]`;
//! missing diagonal entries default to 1 and missing off-diagonal entries to 0.
//! System files replace the `g` lines by `N = ..`, `M = ..` and `A[l][m][row][col] = ..`
//! (missing entries are 0). `resolution` and `periodic` accept one value for every axis.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::expr::{parse_expression_in, Expr};
use crate::metric::MetricField;
use crate::parametrix::DivergenceSystem;
use crate::scalar::Real;

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

#[derive(Clone, Debug)]
struct Entry {
    line: usize,
    key_col: usize,
    val_col: usize,
    value: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Metric,
    System,
}

struct Raw {
    scalars: HashMap<String, Entry>,
    indexed: Vec<(String, Vec<(usize, usize)>, Entry)>,
    end_line: usize,
}

fn split_lines(text: &str) -> Result<Raw> {
    let mut scalars: HashMap<String, Entry> = HashMap::new();
    let mut indexed = Vec::new();
    let mut end_line = 1;
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        end_line = line + 1;
        let body = raw_line.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            let col = body.len() - body.trim_start().len() + 1;
            return Err(perr(line, col, "expected 'key = value'"));
        };
        let key_part = &body[..eq];
        let key = key_part.trim();
        let key_col = key_part.len() - key_part.trim_start().len() + 1;
        let val_part = &body[eq + 1..];
        let value = val_part.trim().to_string();
        let val_col = eq + 2 + (val_part.len() - val_part.trim_start().len());
        if key.is_empty() {
            return Err(perr(line, key_col, "missing key before '='"));
        }
        if value.is_empty() {
            return Err(perr(line, val_col, format!("missing value for '{key}'")));
        }
        let entry = Entry { line, key_col, val_col, value };
        if let Some(b) = key.find('[') {
            let name = key[..b].trim().to_string();
            let mut idx = Vec::new();
            let mut rest = &key[b..];
            let mut off = key_col + b;
            while !rest.is_empty() {
                let Some(close) = rest.find(']').filter(|_| rest.starts_with('[')) else {
                    return Err(perr(line, off, "malformed index, expected '[k]'"));
                };
                let txt = rest[1..close].trim();
                let k: usize = txt.parse().map_err(|_| perr(line, off + 1, format!("index '{txt}' is not a positive integer")))?;
                idx.push((k, off + 1));
                off += close + 1;
                rest = &rest[close + 1..];
            }
            indexed.push((name, idx, entry));
        } else {
            if scalars.contains_key(key) {
                return Err(perr(line, key_col, format!("duplicate key '{key}'")));
            }
            scalars.insert(key.to_string(), entry);
        }
    }
    Ok(Raw { scalars, indexed, end_line })
}

impl Raw {
    fn require(&self, key: &str) -> Result<&Entry> {
        self.scalars.get(key).ok_or_else(|| perr(self.end_line, 1, format!("missing required key '{key}'")))
    }

    fn integer(&self, key: &str) -> Result<usize> {
        let e = self.require(key)?;
        e.value.parse().map_err(|_| perr(e.line, e.val_col, format!("'{key}' must be a positive integer")))
    }
}

/// Comma-separated list of constant expressions, `n` long or a single broadcast value.
fn list(e: &Entry, key: &str, n: usize, broadcast: bool) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut col = e.val_col;
    for item in e.value.split(',') {
        let expr = parse_expression_in(item, Some(0)).map_err(|err| shift(err, e.line, col))?;
        out.push(expr.eval::<f64>(&[]));
        col += item.len() + 1;
    }
    if out.len() == 1 && broadcast {
        out = vec![out[0]; n];
    }
    if out.len() != n {
        return Err(perr(e.line, e.val_col, format!("dimension mismatch: '{key}' has {} values, dim = {n}", out.len())));
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(perr(e.line, e.val_col, format!("'{key}' entry {} is not finite", i + 1)));
    }
    Ok(out)
}

/// Moves an expression error from its own line 1 to the file position of the value.
fn shift(err: Error, line: usize, col: usize) -> Error {
    match err {
        Error::Parse { column, message, .. } => perr(line, col + column - 1, message),
        other => other,
    }
}

fn header<T: Real>(raw: &Raw, kind: Kind) -> Result<(Chart<T>, usize)> {
    let n = raw.integer("dim")?;
    if !(1..=4).contains(&n) {
        let e = raw.require("dim")?;
        return Err(perr(e.line, e.val_col, format!("dim must be 1..4, got {n}")));
    }
    let allowed: &[&str] = match kind {
        Kind::Metric => &["dim", "lower", "upper", "resolution", "periodic"],
        Kind::System => &["dim", "lower", "upper", "resolution", "periodic", "N", "M"],
    };
    let mut keys: Vec<_> = raw.scalars.iter().collect();
    keys.sort_by_key(|(_, e)| e.line);
    for (k, e) in keys {
        if !allowed.contains(&k.as_str()) {
            return Err(perr(e.line, e.key_col, format!("unknown key '{k}'")));
        }
    }
    let lower = list(raw.require("lower")?, "lower", n, false)?;
    let upper = list(raw.require("upper")?, "upper", n, false)?;
    let re = raw.require("resolution")?;
    let res = list(re, "resolution", n, true)?;
    if res.iter().any(|&r| r.fract() != 0.0 || r < 2.0) {
        return Err(perr(re.line, re.val_col, "resolution entries must be integers >= 2"));
    }
    let periodic = match raw.scalars.get("periodic") {
        Some(e) => {
            let v = list(e, "periodic", n, true)?;
            if v.iter().any(|&p| p != 0.0 && p != 1.0) {
                return Err(perr(e.line, e.val_col, "periodic entries must be 0 or 1"));
            }
            v.into_iter().map(|p| p == 1.0).collect()
        }
        None => vec![false; n],
    };
    let lo: Vec<T> = lower.iter().map(|&v| T::lit(v)).collect();
    let hi: Vec<T> = upper.iter().map(|&v| T::lit(v)).collect();
    let rs: Vec<usize> = res.iter().map(|&r| r as usize).collect();
    let chart = Chart::new(&lo, &hi, &rs, &periodic).map_err(|err| {
        let e = raw.require("upper").unwrap();
        perr(e.line, e.val_col, err.to_string())
    })?;
    Ok((chart, n))
}

fn component(e: &Entry, n: usize) -> Result<Expr> {
    parse_expression_in(&e.value, Some(n)).map_err(|err| shift(err, e.line, e.val_col))
}

fn check_indices(name: &str, idx: &[(usize, usize)], bounds: &[usize], line: usize, key_col: usize) -> Result<()> {
    if idx.len() != bounds.len() {
        return Err(perr(line, key_col, format!("'{name}' takes {} indices, found {}", bounds.len(), idx.len())));
    }
    for (&(k, col), &b) in idx.iter().zip(bounds) {
        if k == 0 || k > b {
            return Err(perr(line, col, format!("index {k} out of range 1..{b}")));
        }
    }
    Ok(())
}

/// Parsed metric file: chart plus one expression per matrix entry (row-major).
#[derive(Clone, Debug)]
pub struct MetricFile<T> {
    pub chart: Chart<T>,
    pub components: Vec<Expr>,
}

impl<T: Real> MetricFile<T> {
    pub fn parse(text: &str) -> Result<Self> {
        let raw = split_lines(text)?;
        let (chart, n) = header::<T>(&raw, Kind::Metric)?;
        let mut comps: Vec<Option<(Expr, bool)>> = vec![None; n * n];
        for (name, idx, e) in &raw.indexed {
            if name != "g" {
                return Err(perr(e.line, e.key_col, format!("unknown key '{name}'")));
            }
            check_indices(name, idx, &[n, n], e.line, e.key_col)?;
            let (i, j) = (idx[0].0 - 1, idx[1].0 - 1);
            if matches!(comps[i * n + j], Some((_, true))) {
                return Err(perr(e.line, e.key_col, format!("duplicate entry g[{}][{}]", i + 1, j + 1)));
            }
            let ex = component(e, n)?;
            comps[i * n + j] = Some((ex.clone(), true));
            if i != j && !matches!(comps[j * n + i], Some((_, true))) {
                comps[j * n + i] = Some((ex, false));
            }
        }
        let components = (0..n * n)
            .map(|k| match comps[k].take() {
                Some((e, _)) => e,
                None => Expr::Num(if k % (n + 1) == 0 { 1.0 } else { 0.0 }),
            })
            .collect();
        Ok(Self { chart, components })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn eval(&self, x: &[T], out: &mut [T]) {
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(x);
        }
    }

    /// Samples the expressions on the chart; fails on asymmetric or non positive-definite values.
    pub fn metric(&self) -> Result<MetricField<T>> {
        MetricField::from_fn(&self.chart, |x, o| self.eval(x, o))
    }
}

/// Reads a metric file and samples it on its chart.
pub fn load_metric_file<T: Real>(path: impl AsRef<Path>) -> Result<(Chart<T>, MetricField<T>)> {
    let f = MetricFile::<T>::load(path)?;
    let g = f.metric()?;
    Ok((f.chart, g))
}

/// Parsed system file.
#[derive(Clone, Debug)]
pub struct SystemFile<T> {
    pub chart: Chart<T>,
    pub unknowns: usize,
    pub equations: usize,
    /// Indexed like [`crate::parametrix::CoefficientFn`].
    pub coefficients: Vec<Expr>,
}

impl<T: Real> SystemFile<T> {
    pub fn parse(text: &str) -> Result<Self> {
        let raw = split_lines(text)?;
        let (chart, n) = header::<T>(&raw, Kind::System)?;
        let nn = raw.integer("N")?;
        let mm = raw.integer("M")?;
        if nn == 0 || mm < nn {
            let e = raw.require("M")?;
            return Err(perr(e.line, e.val_col, format!("need M >= N >= 1, got M = {mm}, N = {nn}")));
        }
        let mut coefficients = vec![Expr::Num(0.0); n * n * mm * nn];
        let mut seen = vec![false; coefficients.len()];
        for (name, idx, e) in &raw.indexed {
            if name != "A" {
                return Err(perr(e.line, e.key_col, format!("unknown key '{name}'")));
            }
            check_indices(name, idx, &[n, n, mm, nn], e.line, e.key_col)?;
            let (l, m, r, c) = (idx[0].0 - 1, idx[1].0 - 1, idx[2].0 - 1, idx[3].0 - 1);
            let k = ((l * n + m) * mm + r) * nn + c;
            if seen[k] {
                return Err(perr(e.line, e.key_col, "duplicate coefficient entry"));
            }
            seen[k] = true;
            coefficients[k] = component(e, n)?;
        }
        Ok(Self { chart, unknowns: nn, equations: mm, coefficients })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn system(&self) -> Result<DivergenceSystem<T>> {
        let coeffs = Arc::new(self.coefficients.clone());
        DivergenceSystem::new(
            &self.chart,
            self.unknowns,
            self.equations,
            Arc::new(move |x: &[T], o: &mut [T]| {
                for (v, e) in o.iter_mut().zip(coeffs.iter()) {
                    *v = e.eval(x);
                }
            }),
        )
    }
}

pub fn load_system_file<T: Real>(path: impl AsRef<Path>) -> Result<DivergenceSystem<T>> {
    SystemFile::<T>::load(path)?.system()
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAD: &str = "dim = 2\nlower = -1, -1\nupper = 1, 1\nresolution = 9\n";

    fn pos(r: Result<MetricFile<f64>>) -> (usize, usize) {
        match r {
            Err(Error::Parse { line, column, .. }) => (line, column),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn identity_and_symmetry_fill() {
        let f = MetricFile::<f64>::parse(HEAD).unwrap();
        let g = f.metric().unwrap();
        assert_eq!(g.lambda_min(), 1.0);
        let f = MetricFile::<f64>::parse(&format!("{HEAD}g[1][2] = 0.1*x1\n")).unwrap();
        let mut o = [0.0; 4];
        f.eval(&[1.0, 0.0], &mut o);
        assert_eq!(o, [1.0, 0.1, 0.1, 1.0]);
    }

    #[test]
    fn positions() {
        assert_eq!(pos(MetricFile::parse("dim = 2\nlower = -1, -1\nupper = 1, 1\n")), (4, 1));
        assert_eq!(pos(MetricFile::parse(&format!("{HEAD}g[1][3] = 1\n"))), (5, 6));
        assert_eq!(pos(MetricFile::parse(&format!("{HEAD}g[1][1] = 1 + x3\n"))), (5, 15));
        assert_eq!(pos(MetricFile::parse(&format!("{HEAD}g[1][1] = (1 + x1\n"))), (5, 18));
        assert_eq!(pos(MetricFile::parse("dim = 2\nlower = -1\nupper = 1, 1\nresolution = 9\n")), (2, 9));
        assert_eq!(pos(MetricFile::parse(&format!("{HEAD}  foo = 1\n"))), (5, 3));
        assert_eq!(pos(MetricFile::parse(&format!("{HEAD}just words\n"))), (5, 1));
    }

    #[test]
    fn not_positive_definite() {
        let r = MetricFile::<f64>::parse(&format!("{HEAD}g[1][1] = x1\n")).unwrap().metric();
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn system_file() {
        let text = "dim = 2\nlower = -pi, -pi\nupper = pi, pi\nresolution = 16\nperiodic = 1\nN = 1\nM = 1\n\
                    A[1][1][1][1] = 1 + 0.1*sin(x1)\nA[2][2][1][1] = 1 + 0.1*sin(x1)\n";
        let sys = SystemFile::<f64>::parse(text).unwrap().system().unwrap();
        assert_eq!((sys.unknowns(), sys.equations()), (1, 1));
        let mut a = [0.0; 4];
        sys.coeff_at(&[std::f64::consts::FRAC_PI_2, 0.0], &mut a);
        assert!((a[0] - 1.1).abs() < 1e-15 && a[1] == 0.0 && (a[3] - 1.1).abs() < 1e-15);
    }
}
