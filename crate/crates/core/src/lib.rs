//! Numerical workbench for p-harmonic coordinates and conformal geometry of gridded metrics.
//!
//! The crate computes curvature tensors of metric fields sampled on rectangular charts,
//! builds p-harmonic coordinates by solving regularized Dirichlet problems on balls,
//! detects conformal flatness through n-harmonic coordinates, and provides a Fourier
//! multiplier parametrix for overdetermined divergence-form systems on periodic charts.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`.

pub mod aharmonic;
pub mod chart;
pub mod cli;
pub mod conformal;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod field;
pub mod io;
pub mod linalg;
pub mod metric;
pub mod parametrix;
pub mod scalar;
pub mod spectral;
pub mod stencil;

pub use aharmonic::{
    apply_a, build_coordinates, check_structural, residual_a, solve_dirichlet, AOperator, BallProblem, CoordinateMap,
    SolveReport, SolverOptions, StructuralReport,
};
pub use chart::Chart;
pub use conformal::{
    conformal_check, flatness_pipeline, holder_estimate, nharmonic_composition_check, transform_metric,
    ConformalReport, FlatnessReport, HolderReport, MapField,
};
pub use curvature::{christoffel, mn_tensors, ricci, riemann, scalar as scalar_curvature, schouten, weyl, Curvature};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use field::Field;
pub use io::{load_metric_file, load_system_file};
pub use metric::{MetricField, StructuralConstants};
pub use parametrix::{
    apply_multiplier, check_ellipticity, local_representation, neumann_solve, representation_identity_check,
    CutoffSpec, DivergenceSystem, MultiplierKernel, SymbolMatrix,
};
pub use scalar::Real;
pub use stencil::DerivativeScheme;

pub type Chart64 = Chart<f64>;
pub type Field64 = Field<f64>;
pub type MetricField64 = MetricField<f64>;
pub type AOperator64 = AOperator<f64>;
pub type MapField64 = MapField<f64>;
pub type DivergenceSystem64 = DivergenceSystem<f64>;
pub type Chart32 = Chart<f32>;
pub type Field32 = Field<f32>;
pub type MetricField32 = MetricField<f32>;
