//! Brute-force oracles and property batteries for small instances.

mod average;
mod flat;
mod suites;

pub use average::{average_case_check, extractor_error, joint_error, random_joint, AverageCaseReport, AvgOptimum, SizeProfile};
pub use flat::{structured_supports, worst_flat_error, FlatOracle, SourceFamily, WorstReport, DEFAULT_CAP, MAX_TABLE_BITS};
pub use suites::{
    disperser_check, dpi_counterexample, inequality_suite, random_distribution, random_function_kl_tail, CheckOutcome,
    DisperserReport, DpiRow, InequalityReport, TailReport, EXACT_TOL, SOLVER_TOL,
};
