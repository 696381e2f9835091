//! Scenario files, replication runner, aggregation, output files, figure
//! data and re-grading of stored runs.

pub mod aggregate;
pub mod builtin;
pub mod check;
pub mod figures;
pub mod output;
pub mod runner;
pub mod scenario;

pub use aggregate::{aggregate, AggregateRow, AggregateSeries};
pub use check::{check_outputs, CheckReport};
pub use figures::{reproduce_figure, Figure};
pub use output::write_run;
pub use runner::{run_replication, run_scenario, Replication, RunOptions, RunOutput};
pub use scenario::{RunMode, Scenario, SCHEMA_VERSION};
