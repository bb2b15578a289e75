//! Phase-transition cutoffs, minimax lower bounds, and exact oracles.

pub mod minimax;
pub mod oracle;
pub mod thresholds;

pub use minimax::{
    lb_length_floor, lb_noncoverage_g, lb_noncoverage_g_two_sided, lb_support_escape_one_sided,
    lb_support_escape_two_sided, BoundValue,
};
pub use oracle::{
    exact_coverage_one_sided, exact_coverage_two_sided, expected_distance_one_sided,
    expected_selection_count,
};
pub use thresholds::{thresholds, BarRegime, Regime, ThresholdReport};
