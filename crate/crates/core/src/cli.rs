//! Command-line front end: argument parsing, dispatch and report files.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aharmonic::{build_coordinates_with, check_structural, AOperator, SolverOptions};
use crate::chart::Chart;
use crate::conformal::{conformal_check, flatness_pipeline, holder_estimate, FlatnessOptions, MapField};
use crate::curvature::{check_symbol_injectivity, weyl_symbol, Curvature, GaugeRows};
use crate::error::{Error, Result};
use crate::field::{index_labels, Field};
use crate::io::{MetricFile, SystemFile};
use crate::metric::MetricField;
use crate::parametrix::{
    check_ellipticity, local_representation, neumann_solve, random_band_limited, representation_identity_check,
    CutoffSpec, DivergenceSystem,
};
use crate::stencil::DerivativeScheme;

#[derive(Parser, Debug)]
#[command(name = "pharmonic", version, about = "Curvature, p-harmonic coordinates and conformal flatness on gridded metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature tensors of a metric file, written as CSV.
    Curvature(CurvatureArgs),
    /// p-harmonic coordinates on a ball.
    Pharm(PharmArgs),
    /// Weyl precheck, n-harmonic coordinates and recovered conformal factor.
    Flatness(FlatnessArgs),
    /// Distortion and conformal factor of a demo map.
    ConformalCheck(ConformalArgs),
    /// Sampled structural constants of the p-harmonic operator.
    StructuralCheck(StructuralArgs),
    /// Hölder exponent estimate of metric components or a demo field.
    Holder(HolderArgs),
    /// Parametrix demos for a divergence-form system.
    Parametrix(ParametrixArgs),
    /// Smallest singular value of a principal symbol over sampled directions.
    SymbolEllipticity(SymbolArgs),
}

#[derive(Args, Debug)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "pharmonic-out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum TensorKind {
    Christoffel,
    Riemann,
    Ricci,
    Scalar,
    Schouten,
    Weyl,
}

#[derive(Args, Debug)]
pub struct CurvatureArgs {
    #[arg(long)]
    pub metric: PathBuf,
    #[arg(long, value_enum, default_value = "weyl")]
    pub tensor: TensorKind,
    /// Finite-difference order (2 or 4).
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct PharmArgs {
    #[arg(long)]
    pub metric: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct FlatnessArgs {
    #[arg(long)]
    pub metric: PathBuf,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MapDemo {
    /// `φ(x) = 2x`.
    Dilation,
    /// `φ(x) = (2x₁, x₂, ..)`.
    Stretch,
    /// `z ↦ z²` in the plane.
    Square,
}

#[derive(Args, Debug)]
pub struct ConformalArgs {
    /// Source metric; defaults to the Euclidean metric on a demo chart.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dilation")]
    pub demo: MapDemo,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct StructuralArgs {
    #[arg(long)]
    pub metric: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum HolderDemo {
    /// `|x|^{1/2}` on `[−1, 1]²`.
    Sqrt,
    /// `|x|^{0.3}` on `[−1, 1]²`.
    Power03,
}

#[derive(Args, Debug)]
pub struct HolderArgs {
    #[arg(long, required_unless_present = "demo")]
    pub metric: Option<PathBuf>,
    /// Metric component such as `g12`; all components when omitted.
    #[arg(long)]
    pub tensor: Option<String>,
    #[arg(long, value_enum, conflicts_with = "metric")]
    pub demo: Option<HolderDemo>,
    /// Largest averaging radius; smaller scales are halvings of it.
    #[arg(long)]
    pub radius: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ParametrixDemo {
    Identity,
    Local,
    Neumann,
}

#[derive(Args, Debug)]
pub struct ParametrixArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, value_enum, default_value = "identity")]
    pub demo: ParametrixDemo,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug)]
pub struct SymbolArgs {
    #[arg(long, required_unless_present = "metric", conflicts_with = "metric")]
    pub system: Option<PathBuf>,
    /// Linearized Weyl symbol at the metric value at `--center`.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    #[command(flatten)]
    pub out: OutArgs,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(&cli.command) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Curvature(a) => curvature(a),
        Command::Pharm(a) => pharm(a),
        Command::Flatness(a) => flatness(a),
        Command::ConformalCheck(a) => conformal(a),
        Command::StructuralCheck(a) => structural(a),
        Command::Holder(a) => holder(a),
        Command::Parametrix(a) => parametrix(a),
        Command::SymbolEllipticity(a) => symbol(a),
    }
}

fn prepare(out: &OutArgs) -> Result<&Path> {
    fs::create_dir_all(&out.out)?;
    Ok(&out.out)
}

fn write_field(dir: &Path, name: &str, f: &Field<f64>, labels: Option<&[String]>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(dir.join(name))?);
    f.write_csv(&mut w, labels)
}

fn finish(dir: &Path, report: String) -> Result<String> {
    fs::write(dir.join("report.txt"), &report)?;
    Ok(report)
}

fn load_metric(path: &Path) -> Result<(MetricFile<f64>, MetricField<f64>)> {
    let file = MetricFile::<f64>::load(path)?;
    let g = file.metric()?;
    Ok((file, g))
}

fn center_or_middle(center: &Option<Vec<f64>>, chart: &Chart<f64>) -> Result<Vec<f64>> {
    let n = chart.dim();
    match center {
        Some(c) if c.len() != n => Err(Error::Validation(format!("--center needs {n} coordinates, got {}", c.len()))),
        Some(c) => Ok(c.clone()),
        None => Ok((0..n).map(|a| 0.5 * (chart.lower()[a] + chart.upper()[a])).collect()),
    }
}

/// Half the distance from the center to the nearest chart face.
fn default_radius(x0: &[f64], chart: &Chart<f64>) -> f64 {
    (0..chart.dim()).map(|a| (x0[a] - chart.lower()[a]).min(chart.upper()[a] - x0[a])).fold(f64::INFINITY, f64::min) * 0.5
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("--{name} must be positive, got {v}")))
    }
}

fn curvature(a: &CurvatureArgs) -> Result<String> {
    let scheme = DerivativeScheme::with_order(a.order)?;
    let (_, g) = load_metric(&a.metric)?;
    let dir = prepare(&a.out)?;
    let curv = Arc::new(Curvature::new(&g, scheme)?);
    let (name, field, prefix) = match a.tensor {
        TensorKind::Christoffel => ("christoffel", curv.christoffel_field()?, "Gamma"),
        TensorKind::Riemann => ("riemann", curv.riemann_field()?, "R"),
        TensorKind::Ricci => ("ricci", curv.ricci_field()?, "Ric"),
        TensorKind::Scalar => ("scalar", curv.scalar_field()?, "S"),
        TensorKind::Schouten => ("schouten", curv.schouten_field()?, "P"),
        TensorKind::Weyl => ("weyl", curv.weyl_field()?, "W"),
    };
    let margin = curv.margin();
    let labels = index_labels(prefix, field.shape());
    write_field(dir, &format!("{name}.csv"), &field, Some(&labels))?;
    let mut s = String::new();
    let _ = writeln!(s, "tensor = {name}");
    let _ = writeln!(s, "order = {}", a.order);
    let _ = writeln!(s, "lambda_min = {:e}", g.lambda_min());
    let _ = writeln!(s, "core_margin = {margin}");
    let _ = writeln!(s, "sup_norm_core = {:e}", field.sup_norm_core(margin));
    finish(dir, s)
}

fn pharm(a: &PharmArgs) -> Result<String> {
    let (file, g) = load_metric(&a.metric)?;
    let x0 = center_or_middle(&a.center, &file.chart)?;
    let r = positive("radius", a.radius.unwrap_or_else(|| default_radius(&x0, &file.chart)))?;
    let tol = positive("tol", a.tol)?;
    let op = AOperator::with_p(&g, a.p)?;
    let n = g.dim();
    let s_id: Vec<f64> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let map = build_coordinates_with(&op, &x0, r, &s_id, 0.1, &SolverOptions::new(tol, 500))?;
    let dir = prepare(&a.out)?;
    write_field(dir, "coordinates.csv", &map.u, Some(&index_labels("U", &[n])))?;
    write_field(dir, "det_jacobian.csv", &map.det_jacobian, Some(&["detDU".to_string()]))?;
    let mut s = String::new();
    let _ = writeln!(s, "p = {}", a.p);
    let _ = writeln!(s, "lambda_min = {:e}", g.lambda_min());
    s.push_str(&map.summary());
    finish(dir, s)
}

fn flatness(a: &FlatnessArgs) -> Result<String> {
    let (file, g) = load_metric(&a.metric)?;
    let x0 = center_or_middle(&a.center, &file.chart)?;
    let r = positive("radius", a.radius.unwrap_or_else(|| default_radius(&x0, &file.chart)))?;
    let mut opts = FlatnessOptions::default();
    opts.solver = SolverOptions::new(positive("tol", a.tol)?, 500);
    let rep = flatness_pipeline(&g, &x0, r, &opts)?;
    let dir = prepare(&a.out)?;
    if let Some(c) = &rep.c {
        write_field(dir, "conformal_factor.csv", c, Some(&["c".to_string()]))?;
    }
    let mut s = String::new();
    let _ = writeln!(s, "conformally_flat = {}", !rep.weyl_nonzero);
    s.push_str(&rep.to_kv());
    finish(dir, s)
}

fn conformal(a: &ConformalArgs) -> Result<String> {
    let g = match &a.metric {
        Some(p) => load_metric(p)?.1,
        None => {
            let chart = match a.demo {
                MapDemo::Square => Chart::cube(2, 0.5, 1.5, 33)?,
                _ => Chart::cube(2, -1.0, 1.0, 33)?,
            };
            MetricField::identity(&chart)?
        }
    };
    let chart = g.chart().clone();
    let n = chart.dim();
    let phi = match a.demo {
        MapDemo::Dilation => MapField::analytic(&chart, |x, o| {
            for i in 0..x.len() {
                o[i] = 2.0 * x[i];
            }
        }, move |_, o| {
            for i in 0..n * n {
                o[i] = if i % (n + 1) == 0 { 2.0 } else { 0.0 };
            }
        })?,
        MapDemo::Stretch => MapField::analytic(&chart, |x, o| {
            o.copy_from_slice(x);
            o[0] = 2.0 * x[0];
        }, move |_, o| {
            for i in 0..n * n {
                o[i] = if i == 0 { 2.0 } else if i % (n + 1) == 0 { 1.0 } else { 0.0 };
            }
        })?,
        MapDemo::Square => {
            if n != 2 {
                return Err(Error::Validation("the square map needs a 2-dimensional metric".into()));
            }
            MapField::analytic(&chart, |x, o| {
                o[0] = x[0] * x[0] - x[1] * x[1];
                o[1] = 2.0 * x[0] * x[1];
            }, |x, o| {
                o.copy_from_slice(&[2.0 * x[0], -2.0 * x[1], 2.0 * x[1], 2.0 * x[0]]);
            })?
        }
    };
    // Euclidean target metric on a box covering the image
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    phi.phi.for_each(|_, y| {
        for i in 0..n {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    });
    for i in 0..n {
        let pad = 0.05 * (hi[i] - lo[i]).max(1e-3);
        lo[i] -= pad;
        hi[i] += pad;
    }
    let target = Chart::new(&lo, &hi, chart.resolution(), &vec![false; n])?;
    let h = MetricField::identity(&target)?;
    let rep = conformal_check(&g, &h, &phi)?;
    let dir = prepare(&a.out)?;
    write_field(dir, "distortion.csv", &rep.distortion, Some(&["K".to_string()]))?;
    write_field(dir, "conformal_factor.csv", &rep.c, Some(&["c".to_string()]))?;
    finish(dir, rep.to_kv())
}

fn structural(a: &StructuralArgs) -> Result<String> {
    let (_, g) = load_metric(&a.metric)?;
    let op = AOperator::with_p(&g, a.p)?;
    let rep = check_structural(&op, 1000, 7)?;
    let dir = prepare(&a.out)?;
    let mut s = String::new();
    let _ = writeln!(s, "p = {}", a.p);
    let _ = writeln!(s, "samples = {}", rep.samples);
    let _ = writeln!(s, "delta_est = {:e}", rep.delta_est);
    let _ = writeln!(s, "m_est = {:e}", rep.m_est);
    let _ = writeln!(s, "alpha_est = {:.6}", rep.alpha_est);
    let _ = writeln!(s, "holder_constant = {:e}", rep.holder_constant);
    let _ = writeln!(s, "homogeneity_max_violation = {:e}", rep.homogeneity_max_violation);
    finish(dir, s)
}

fn scales_for(chart: &Chart<f64>, radius: Option<f64>) -> Result<Vec<f64>> {
    let side = (0..chart.dim()).map(|a| chart.upper()[a] - chart.lower()[a]).fold(f64::INFINITY, f64::min);
    let r = positive("radius", radius.unwrap_or(side / 4.0))?;
    Ok(vec![r / 4.0, r / 2.0, r])
}

fn holder(a: &HolderArgs) -> Result<String> {
    let mut s = String::new();
    if let Some(demo) = a.demo {
        let chart = Chart::cube(2, -1.0, 1.0, 257)?;
        let alpha = match demo {
            HolderDemo::Sqrt => 0.5,
            HolderDemo::Power03 => 0.3,
        };
        let f = Field::scalar(&chart, |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt().powf(alpha))?;
        let rep = holder_estimate(&f, &scales_for(&chart, a.radius)?)?;
        let _ = writeln!(s, "field = |x|^{alpha}");
        s.push_str(&rep.to_kv());
        let dir = prepare(&a.out)?;
        return finish(dir, s);
    }
    let (file, _) = load_metric(a.metric.as_ref().unwrap())?;
    let n = file.chart.dim();
    let scales = scales_for(&file.chart, a.radius)?;
    let wanted: Option<(usize, usize)> = match &a.tensor {
        None => None,
        Some(t) => {
            let b = t.as_bytes();
            let ok = b.len() == 3 && b[0] == b'g' && (b'1'..=b'0' + n as u8).contains(&b[1]) && (b'1'..=b'0' + n as u8).contains(&b[2]);
            if !ok {
                return Err(Error::Validation(format!("--tensor must name a metric component g<i><j> with indices 1..{n}")));
            }
            Some(((b[1] - b'1') as usize, (b[2] - b'1') as usize))
        }
    };
    let mut worst = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            if wanted.is_some_and(|w| w != (i, j) && w != (j, i)) {
                continue;
            }
            let e = &file.components[i * n + j];
            let f = Field::scalar(&file.chart, |x| e.eval(x))?;
            let rep = holder_estimate(&f, &scales)?;
            worst = worst.min(rep.alpha_est);
            for line in rep.to_kv().lines() {
                let _ = writeln!(s, "g{}{}.{line}", i + 1, j + 1);
            }
        }
    }
    let _ = writeln!(s, "alpha_min = {worst:.6}");
    let dir = prepare(&a.out)?;
    finish(dir, s)
}

/// Smooth test solution with `N` components.
fn manufactured(n: usize, cols: usize) -> impl Fn(&[f64], &mut [f64]) {
    move |x, o| {
        for c in 0..cols {
            o[c] = (0..n).map(|a| ((a + 1) as f64 * x[a] + 0.7 * c as f64).sin()).sum::<f64>() + 0.3;
        }
    }
}

fn parametrix(a: &ParametrixArgs) -> Result<String> {
    let file = SystemFile::<f64>::load(&a.system)?;
    let sys: DivergenceSystem<f64> = file.system()?;
    let chart = sys.chart().clone();
    let x0 = center_or_middle(&a.center, &chart)?;
    let n = chart.dim();
    let cutoffs = CutoffSpec::default();
    let dir = prepare(&a.out)?;
    let mut s = String::new();
    let _ = writeln!(s, "N = {}", sys.unknowns());
    let _ = writeln!(s, "M = {}", sys.equations());
    match a.demo {
        ParametrixDemo::Identity => {
            let mut worst = 0.0f64;
            for seed in 0..10 {
                let v = random_band_limited(&chart, sys.unknowns(), 6, seed)?;
                worst = worst.max(representation_identity_check(&sys, &x0, &v, cutoffs)?);
            }
            let _ = writeln!(s, "fields = 10");
            let _ = writeln!(s, "identity_residual = {worst:e}");
        }
        ParametrixDemo::Local | ParametrixDemo::Neumann => {
            let r = positive("radius", a.radius)?;
            let y_chart = Chart::periodic_cube(n, -2.0, 2.0, chart.resolution()[0])?;
            let u = manufactured(n, sys.unknowns());
            let rep = local_representation(&sys, &u, None, &x0, r, cutoffs, &y_chart)?;
            let _ = writeln!(s, "radius = {r:e}");
            let _ = writeln!(s, "identity_residual = {:e}", rep.identity_residual);
            if let ParametrixDemo::Neumann = a.demo {
                let sol = neumann_solve(&sys, &x0, r, &rep.g, positive("tol", a.tol)?, 200, cutoffs)?;
                let _ = writeln!(s, "solution_error = {:e}", sol.v.sub(&rep.v)?.sup_norm());
                s.push_str(&sol.to_kv());
                write_field(dir, "v.csv", &sol.v, None)?;
            } else {
                write_field(dir, "v.csv", &rep.v, None)?;
                write_field(dir, "G.csv", &rep.g, None)?;
            }
        }
    }
    finish(dir, s)
}

fn symbol(a: &SymbolArgs) -> Result<String> {
    let mut s = String::new();
    if let Some(path) = &a.system {
        let sys = SystemFile::<f64>::load(path)?.system()?;
        let x0 = center_or_middle(&a.center, sys.chart())?;
        let rep = check_ellipticity(&sys, &x0, a.directions)?;
        let _ = writeln!(s, "directions = {}", rep.directions);
        let _ = writeln!(s, "min_singular_value = {:e}", rep.min_singular_value);
        let _ = writeln!(s, "worst_direction = {:?}", rep.worst_direction);
        let _ = writeln!(s, "elliptic = {}", !rep.flagged);
    } else {
        let (file, g) = load_metric(a.metric.as_ref().unwrap())?;
        let x0 = center_or_middle(&a.center, &file.chart)?;
        let n = g.dim();
        let mut g0 = vec![0.0; n * n];
        g.g_at_point(&x0, &mut g0)?;
        for (label, gauge) in [("weyl", GaugeRows::None), ("weyl_gauged", GaugeRows::Full)] {
            let rep = check_symbol_injectivity(n, a.directions, 1e-8, |xi| Ok(weyl_symbol(&g0, xi)?.stacked(gauge)))?;
            let _ = writeln!(s, "{label}.min_singular_value = {:e}", rep.min_singular_value);
            let _ = writeln!(s, "{label}.injective = {}", !rep.flagged);
        }
    }
    let dir = prepare(&a.out)?;
    finish(dir, s)
}
