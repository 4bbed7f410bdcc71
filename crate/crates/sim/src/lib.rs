//! Monte Carlo harness for the two-way fixed effects network estimators:
//! probit designs with equally spaced fixed effects, a strategic-transitivity
//! alternative, replication runner and summary tables.

pub mod alternative;
pub mod design;
pub mod runner;
pub mod table;

pub use alternative::{generate_transitive, Transitive};
pub use design::{generate_design, FeMode, FeSetting, SimDesign, Truth};
pub use runner::{run_monte_carlo, Estimator, EstimatorSummary, RepRow, SimSummary};
pub use table::{emit_table, Layout, Table};
