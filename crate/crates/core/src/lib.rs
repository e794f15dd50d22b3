pub mod allocation;
pub mod analysis;
pub mod cli;
pub mod experiment;
pub mod ingest;
pub mod lp;
pub mod planner;
pub mod reliability;
pub mod rng;
pub mod scenario;

pub use allocation::RuleKind;
pub use planner::{BatteryConfig, PlannerParams};
pub use scenario::ScenarioSet;
