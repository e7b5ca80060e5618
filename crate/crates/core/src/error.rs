use thiserror::Error;

use crate::mdp::{Action, SwitchState};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("distillation success probability is zero for inputs ({0}, {1})")]
    ZeroSuccessProbability(f64, f64),

    #[error("action {action} is not available in state {state}")]
    UnavailableAction { state: SwitchState, action: Action },

    #[error("policy has no action for state {0}")]
    MissingPolicyState(SwitchState),

    #[error("state {0} is not part of the model state space")]
    UnknownState(SwitchState),

    #[error("policy evaluation did not converge in {sweeps} sweeps (residual {residual:e})")]
    EvaluationDiverged { sweeps: usize, residual: f64 },

    #[error("value iteration did not converge in {sweeps} sweeps (last change {change:e})")]
    ValueIterationDiverged { sweeps: usize, change: f64 },

    #[error("policy iteration still changing after {rounds} improvement rounds")]
    ImprovementLimit { rounds: usize },

    #[error("success times must be strictly increasing within [1, {steps}]")]
    UnsortedSuccessTimes { steps: u64 },

    #[error("success times and delivered fidelities differ in length ({times} vs {fidelities})")]
    MismatchedMetrics { times: usize, fidelities: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain { name, value, expected }
    }
}
