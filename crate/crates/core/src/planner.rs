//! Discounted-reward planning over a [`SwitchModel`].
//!
//! [`policy_iteration`] is the primary solver; [`value_iteration`] solves the
//! same fixed point by a different route and is used to cross-check it.
//! Evaluation uses synchronous sweeps in canonical state order, so results do
//! not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionEntry, SwitchModel, SwitchState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub gamma: f64,
    pub eval_tolerance: f64,
    pub max_eval_sweeps: usize,
    pub max_improvement_rounds: usize,
    /// Q-values within this distance of the best count as tied; ties go to
    /// the earliest action in canonical order.
    pub tie_tolerance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            gamma: 0.9,
            eval_tolerance: 1e-10,
            max_eval_sweeps: 1_000_000,
            max_improvement_rounds: 1_000,
            tie_tolerance: 1e-8,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::domain("gamma", self.gamma, "[0, 1)"));
        }
        if self.eval_tolerance.is_nan() || self.eval_tolerance <= 0.0 {
            return Err(Error::domain("eval_tolerance", self.eval_tolerance, "> 0"));
        }
        if self.tie_tolerance.is_nan() || self.tie_tolerance < 0.0 {
            return Err(Error::domain("tie_tolerance", self.tie_tolerance, ">= 0"));
        }
        Ok(())
    }
}

/// Deterministic stationary policy keyed by canonical state.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Policy {
    actions: BTreeMap<SwitchState, Action>,
}

impl Policy {
    pub fn new() -> Self {
        Policy::default()
    }

    /// The policy that waits in every model state.
    pub fn all_wait(model: &SwitchModel) -> Self {
        model.states().iter().map(|s| (s.clone(), Action::Wait)).collect()
    }

    pub fn insert(&mut self, state: SwitchState, action: Action) -> Option<Action> {
        self.actions.insert(state, action)
    }

    pub fn get(&self, state: &SwitchState) -> Option<&Action> {
        self.actions.get(state)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&SwitchState, &Action)> {
        self.actions.iter()
    }

    /// Resolves the policy to one action-table index per model state.
    pub fn action_indices(&self, model: &SwitchModel) -> Result<Vec<usize>> {
        model
            .states()
            .iter()
            .enumerate()
            .map(|(i, state)| {
                let action = self
                    .get(state)
                    .ok_or_else(|| Error::MissingPolicyState(state.clone()))?;
                model
                    .actions(i)
                    .iter()
                    .position(|e| e.action == *action)
                    .ok_or_else(|| Error::UnavailableAction {
                        state: state.clone(),
                        action: *action,
                    })
            })
            .collect()
    }

    /// Writes one `A=[..] B=[..] -> ACTION` line per state in canonical order.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (state, action) in &self.actions {
            writeln!(out, "{state} -> {action}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (state, action) in &self.actions {
            let _ = writeln!(s, "{state} -> {action}");
        }
        s
    }

    /// Parses the line format written by [`Policy::write_text`]. Blank lines
    /// and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut policy = Policy::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: n + 1, message };
            let (state, action) = line
                .split_once("->")
                .ok_or_else(|| parse_err("expected `<state> -> <action>`".into()))?;
            let state: SwitchState = state.parse().map_err(parse_err)?;
            let action: Action = action.parse().map_err(parse_err)?;
            if policy.insert(state.clone(), action).is_some() {
                return Err(parse_err(format!("duplicate state {state}")));
            }
        }
        Ok(policy)
    }
}

impl FromIterator<(SwitchState, Action)> for Policy {
    fn from_iter<I: IntoIterator<Item = (SwitchState, Action)>>(iter: I) -> Self {
        Policy {
            actions: iter.into_iter().collect(),
        }
    }
}

/// State values aligned with [`SwitchModel::states`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    values: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(len: usize) -> Self {
        ValueFunction { values: vec![0.0; len] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        ValueFunction { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, model: &SwitchModel, state: &SwitchState) -> Option<f64> {
        model.index_of(state).map(|i| self.values[i])
    }

    pub fn max_abs_diff(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
fn q_value(entry: &ActionEntry, values: &[f64], gamma: f64) -> f64 {
    let future: f64 = entry.next.iter().map(|&(j, p)| p * values[j]).sum();
    entry.reward + gamma * future
}

fn evaluate_from(
    model: &SwitchModel,
    choice: &[usize],
    config: &PlannerConfig,
    mut values: Vec<f64>,
) -> Result<Vec<f64>> {
    let mut next = vec![0.0; values.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..config.max_eval_sweeps {
        residual = 0.0;
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = q_value(&model.actions(s)[choice[s]], &values, config.gamma);
            residual = f64::max(residual, (*slot - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if residual <= config.eval_tolerance {
            return Ok(values);
        }
    }
    Err(Error::EvaluationDiverged {
        sweeps: config.max_eval_sweeps,
        residual,
    })
}

/// Value of a fixed policy, to Bellman residual `eval_tolerance`.
pub fn policy_evaluation(policy: &Policy, model: &SwitchModel, config: &PlannerConfig) -> Result<ValueFunction> {
    config.validate()?;
    let choice = policy.action_indices(model)?;
    evaluate_from(model, &choice, config, vec![0.0; model.len()]).map(ValueFunction::from_vec)
}

fn greedy_indices(values: &[f64], model: &SwitchModel, config: &PlannerConfig) -> Vec<usize> {
    (0..model.len())
        .map(|s| {
            let qs: Vec<f64> = model
                .actions(s)
                .iter()
                .map(|e| q_value(e, values, config.gamma))
                .collect();
            let best = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            qs.iter()
                .position(|&q| q >= best - config.tie_tolerance)
                .expect("every state has at least Wait")
        })
        .collect()
}

fn policy_from_indices(model: &SwitchModel, choice: &[usize]) -> Policy {
    model
        .states()
        .iter()
        .zip(choice)
        .enumerate()
        .map(|(s, (state, &a))| (state.clone(), model.actions(s)[a].action))
        .collect()
}

/// Greedy one-step lookahead policy with respect to `values`.
pub fn policy_improvement(values: &ValueFunction, model: &SwitchModel, config: &PlannerConfig) -> Policy {
    policy_from_indices(model, &greedy_indices(&values.values, model, config))
}

/// Max-norm residual of the optimal Bellman operator at `values`.
pub fn bellman_residual(values: &ValueFunction, model: &SwitchModel, gamma: f64) -> f64 {
    (0..model.len())
        .map(|s| {
            let best = model
                .actions(s)
                .iter()
                .map(|e| q_value(e, &values.values, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            (best - values.values[s]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub policy: Policy,
    pub values: ValueFunction,
    /// Improvement rounds until the policy stopped changing.
    pub iterations: usize,
    pub residual: f64,
}

/// Howard policy iteration from the all-Wait policy.
pub fn policy_iteration(model: &SwitchModel, config: &PlannerConfig) -> Result<Solution> {
    config.validate()?;
    let mut choice = vec![0usize; model.len()];
    let mut values = vec![0.0; model.len()];
    for round in 1..=config.max_improvement_rounds {
        values = evaluate_from(model, &choice, config, values)?;
        let improved = greedy_indices(&values, model, config);
        if improved == choice {
            let values = ValueFunction::from_vec(values);
            let residual = bellman_residual(&values, model, config.gamma);
            return Ok(Solution {
                policy: policy_from_indices(model, &choice),
                values,
                iterations: round,
                residual,
            });
        }
        choice = improved;
    }
    Err(Error::ImprovementLimit {
        rounds: config.max_improvement_rounds,
    })
}

/// Optimal values by repeated Bellman backups, stopped once successive
/// sweeps differ by at most `eval_tolerance * (1 - gamma) / gamma`.
pub fn value_iteration(model: &SwitchModel, config: &PlannerConfig) -> Result<ValueFunction> {
    config.validate()?;
    let gamma = config.gamma;
    let stop = if gamma == 0.0 {
        f64::INFINITY
    } else {
        config.eval_tolerance * (1.0 - gamma) / gamma
    };
    let mut values = vec![0.0; model.len()];
    let mut next = vec![0.0; model.len()];
    let mut change = f64::INFINITY;
    for _ in 0..config.max_eval_sweeps {
        change = 0.0;
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = model
                .actions(s)
                .iter()
                .map(|e| q_value(e, &values, gamma))
                .fold(f64::NEG_INFINITY, f64::max);
            change = f64::max(change, (*slot - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if change <= stop {
            return Ok(ValueFunction::from_vec(values));
        }
    }
    Err(Error::ValueIterationDiverged {
        sweeps: config.max_eval_sweeps,
        change,
    })
}
