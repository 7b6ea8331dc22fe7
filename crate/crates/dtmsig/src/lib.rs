//! Compare metric-measure spaces up to measure-preserving isometry.
//!
//! The pipeline: compute distance-to-measure (DTM) fields over finite
//! weighted point sets or distance matrices, push them forward into
//! DTM-signatures (distributions on the half-line), measure signature
//! discrepancy with the exact 1-D Wasserstein-1 distance, and decide
//! isomorphism with a bootstrap two-sample test, including Monte Carlo
//! level/power estimation and a Kolmogorov-Smirnov baseline.
//!
//! All randomized steps are driven by named counter-based RNG streams, so
//! every result is reproducible bit-for-bit for a fixed seed, independent
//! of thread count.

#![forbid(unsafe_code)]

pub mod analytic;
pub mod dtm;
pub mod error;
pub mod isotest;
pub mod knn;
pub mod seeding;
pub mod signature;
pub mod space;
pub mod synth;
pub mod wasserstein;

pub use analytic::{
    dilation_distance, dtm_min, epsilon_m, standardness_constant, unit_ball_volume,
    uniform_volume_lower_bound, UniformShape,
};
pub use dtm::{dtm_at, dtm_field, dtm_field_at_points, pseudo_distance_at, DtmField, QueryPoint};
pub use error::{Error, Result};
pub use isotest::{
    bootstrap_distribution, estimate_level_power, ks_baseline, recommend_subsample, run_test,
    test_statistic, KsOutcome, LevelPowerReport, Regularity, TestParams, TestReport,
};
pub use signature::{signature_full, signature_subsample, Signature1D};
pub use space::{
    load_distance_matrix, load_point_cloud, load_weight_vector, FiniteMeasureSpace, SubsampleIndex,
};
pub use synth::{graph_pair, sample, GeneratorKind, GeneratorSpec, GraphSide};
pub use wasserstein::{transport_lp_oracle, w1, Discrete1D};
