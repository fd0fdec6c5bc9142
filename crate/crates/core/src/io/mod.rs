pub mod output;
pub mod scenario;

pub use output::{emit_outputs, fmt_num, OutputError};
pub use scenario::{parse_scenario, parse_scenario_str, Scenario, ScenarioError, ScenarioFile};
