//! Deterministic kinematic traffic simulation and the prediction noise model.

mod agent;
mod format;
pub mod perturb;
pub mod rng;
mod scenario;

pub use agent::{step_agent, AgentState};
pub use format::{format_scenario, parse_scenario, read_scenario, write_scenario};
pub use perturb::{perturb, NoiseConfig, Prediction};
pub use rng::DetRng;
pub use scenario::{simulate, EgoProfile, Frame, Scenario, ScenarioConfig};
