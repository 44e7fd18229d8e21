//! Scenario-driven front end shared by the `bayesgi` binary and tests.

pub mod run;
pub mod scenario;

pub use run::{run, RunError, RunReport, Status};
pub use scenario::{parse_scenario, FieldError, Mode, Scenario};
