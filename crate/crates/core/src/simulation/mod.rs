//! Synthetic functional data and Monte Carlo experiments.

pub mod bspline;
pub mod experiment;
pub mod mvn;
pub mod scenario;

pub use bspline::{bspline_basis, BSplineBasis};
pub use experiment::{
    coverage_law_frequency, empirical_conditional_coverage, envelope_modulation_gap, pointwise_coverage_curve,
    replication_rng, run_experiment, theoretical_coverage, theoretical_coverage_smoothed, validity_sandwich_holds,
    CoverageLawConfig, CoverageLawEstimate, CoverageReport, ExperimentConfig, ExperimentOutcome, MethodCoverage,
    MethodOutcome, MethodSize, MethodSpec, ReplicationFailure, ReplicationRecord, SizeReport,
};
pub use mvn::{mvn_sample, Mvn};
pub use scenario::{default_grid, gen_scenario, Scenario, ScenarioConfig, ScenarioGenerator, DEFAULT_BETA};
