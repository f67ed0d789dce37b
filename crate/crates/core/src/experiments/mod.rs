//! Manufactured solutions, error norms, convergence studies and the
//! experiment drivers behind the CLI subcommands.

pub mod errors;
pub mod exp1;
pub mod exp2;
pub mod mms;
pub mod oracle;
pub mod selftest;
pub mod stokes_mms;

pub use errors::{compute_errors, slope_fit, ErrorNorms, ErrorReport, SlopeTable};
pub use exp1::{run_experiment1, Experiment1Config, Experiment1Output};
pub use exp2::{run_experiment2, Experiment2Config, Experiment2Output};
pub use oracle::{reference_oracle, OracleConfig};
pub use selftest::{run_selftest, CheckResult};
pub use stokes_mms::{run_stokes_mms, StokesMmsConfig, StokesMmsOutput};
