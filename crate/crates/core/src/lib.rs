//! Policy optimisation and simulation for a two-client quantum switch that
//! can wait, swap stored link-level Bell pairs into end-to-end pairs, or
//! distill two pairs on the same link.

pub mod error;
pub mod experiment;
pub mod mdp;
pub mod planner;
pub mod simulator;
pub mod werner;

pub use error::{Error, Result};
pub use mdp::{Action, Client, ClientBuffer, ModelParams, SwitchDynamics, SwitchModel, SwitchState, TransitionEntry};
pub use planner::{policy_iteration, value_iteration, PlannerConfig, Policy, Solution, ValueFunction};
pub use simulator::{simulate, FidelityMode, MetricsReport, SimConfig};
pub use werner::{DecayModel, Fidelity};
