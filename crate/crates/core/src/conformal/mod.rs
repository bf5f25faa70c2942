//! Coordinate changes of metrics, conformal flatness and regularity diagnostics.

pub mod flatness;
pub mod holder;
pub mod map;

pub use flatness::{flatness_pipeline, weyl_norm_near, FlatnessOptions, FlatnessReport};
pub use holder::{holder_estimate, HolderReport};
pub use map::{
    conformal_check, nharmonic_composition_check, transform_metric, transform_metric_with, CompositionReport,
    ConformalReport, MapField, TransformOptions, Transformed,
};
