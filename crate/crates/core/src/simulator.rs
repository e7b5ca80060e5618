//! Seeded Monte Carlo simulation of the switch under a fixed policy.
//!
//! The policy sees the quantized state (age labels) while each stored pair
//! also carries its actual fidelity. Pairs that were never distilled sit
//! exactly on the age grid. A distilled pair keeps the fidelity the protocol
//! produced, decays by `e^{-alpha}` per step from there like any stored
//! pair, and is labelled with the nearest grid age so the policy can look
//! it up.
//!
//! A time step is: Bernoulli arrivals on both links (drop-oldest when a
//! memory is full), one policy action on the resulting decision state, then
//! aging and cutoff. A run that starts from empty memories therefore follows
//! the MDP chain started from the empty decision state, one epoch later.
//!
//! Random draws per step, in order: arrival on link A, arrival on link B,
//! then the distillation outcome when the action is a distillation.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, Client, ModelParams, SwitchDynamics, SwitchState};
use crate::planner::Policy;
use crate::werner::{self, Fidelity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FidelityMode {
    /// Track actual fidelities, including off-grid distilled pairs.
    #[default]
    Exact,
    /// Force every pair onto the grid fidelity of its label, reproducing
    /// the MDP transition law exactly.
    Quantized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub steps: u64,
    pub mode: FidelityMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 1,
            steps: 10_000,
            mode: FidelityMode::Exact,
        }
    }
}

/// A stored link-level pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LivePair {
    pub exact_fidelity: f64,
    pub age_label: u32,
    born_with: f64,
    steps_alive: u32,
}

impl LivePair {
    fn fresh() -> Self {
        LivePair {
            exact_fidelity: 1.0,
            age_label: 0,
            born_with: 1.0,
            steps_alive: 0,
        }
    }
}

/// Per-client pairs ordered youngest label first, best fidelity first among
/// equal labels.
#[derive(Debug, Clone, Default)]
pub struct SimState {
    a: Vec<LivePair>,
    b: Vec<LivePair>,
}

impl SimState {
    pub fn pairs(&self, client: Client) -> &[LivePair] {
        match client {
            Client::A => &self.a,
            Client::B => &self.b,
        }
    }

    fn pairs_mut(&mut self, client: Client) -> &mut Vec<LivePair> {
        match client {
            Client::A => &mut self.a,
            Client::B => &mut self.b,
        }
    }

    pub fn quantized(&self) -> SwitchState {
        SwitchState::new(
            self.a.iter().map(|p| p.age_label).collect(),
            self.b.iter().map(|p| p.age_label).collect(),
        )
    }
}

fn sort_pairs(pairs: &mut [LivePair]) {
    pairs.sort_by(|x, y| {
        x.age_label
            .cmp(&y.age_label)
            .then(y.exact_fidelity.total_cmp(&x.exact_fidelity))
    });
}

// Takes the best-fidelity pair carrying `label`.
fn take(pairs: &mut Vec<LivePair>, label: u32) -> Option<LivePair> {
    let i = pairs.iter().position(|p| p.age_label == label)?;
    Some(pairs.remove(i))
}

/// What happened in one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    pub step: u64,
    /// Decision state the action was taken in.
    pub state: SwitchState,
    pub action: Action,
    pub reward: f64,
    pub success: bool,
    pub delivered_fidelity: Option<f64>,
}

/// Line-delimited JSON form of a [`StepEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub state: String,
    pub action: String,
    pub reward: f64,
    pub success: bool,
    pub delivered_fidelity: Option<f64>,
}

impl From<&StepEvent> for TraceRecord {
    fn from(e: &StepEvent) -> Self {
        TraceRecord {
            step: e.step,
            state: e.state.to_string(),
            action: e.action.to_string(),
            reward: e.reward,
            success: e.success,
            delivered_fidelity: e.delivered_fidelity,
        }
    }
}

/// Hash lookup from quantized state to action, built once per policy.
#[derive(Debug, Clone)]
pub struct PolicyLookup {
    map: HashMap<SwitchState, Action>,
}

impl PolicyLookup {
    pub fn new(policy: &Policy) -> Self {
        PolicyLookup {
            map: policy.iter().map(|(s, a)| (s.clone(), *a)).collect(),
        }
    }

    pub fn get(&self, state: &SwitchState) -> Option<Action> {
        self.map.get(state).copied()
    }
}

pub struct Simulator<'a> {
    dynamics: &'a SwitchDynamics,
    policy: &'a PolicyLookup,
    mode: FidelityMode,
    rng: ChaCha8Rng,
    state: SimState,
    step: u64,
}

impl<'a> Simulator<'a> {
    /// Starts from empty memories.
    pub fn new(dynamics: &'a SwitchDynamics, policy: &'a PolicyLookup, seed: u64, mode: FidelityMode) -> Self {
        Simulator {
            dynamics,
            policy,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: SimState::default(),
            step: 0,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    fn grid(&self, age: u32) -> f64 {
        self.dynamics.decay().grid()[age as usize]
    }

    fn fidelity_of(&self, pair: &LivePair) -> f64 {
        match self.mode {
            FidelityMode::Exact => pair.exact_fidelity,
            FidelityMode::Quantized => self.grid(pair.age_label),
        }
    }

    /// Advances one time step: arrivals, one action on the resulting
    /// decision state, then aging.
    pub fn step(&mut self) -> Result<StepEvent> {
        let params = self.dynamics.params();
        self.step += 1;
        let arrive_a = self.rng.gen::<f64>() < params.lambda1;
        let arrive_b = self.rng.gen::<f64>() < params.lambda2;
        let cap = params.buffer_capacity;
        for (client, arrived) in [(Client::A, arrive_a), (Client::B, arrive_b)] {
            if arrived {
                let pairs = self.state.pairs_mut(client);
                if pairs.len() >= cap {
                    pairs.pop();
                }
                pairs.insert(0, LivePair::fresh());
            }
        }

        let quantized = self.state.quantized();
        let action = self
            .policy
            .get(&quantized)
            .ok_or_else(|| Error::MissingPolicyState(quantized.clone()))?;
        if !self.dynamics.is_available(&quantized, &action) {
            return Err(Error::UnavailableAction {
                state: quantized,
                action,
            });
        }

        let mut event = StepEvent {
            step: self.step,
            state: quantized,
            action,
            reward: 0.0,
            success: false,
            delivered_fidelity: None,
        };

        match action {
            Action::Wait => {}
            Action::Swap { age_a, age_b } => {
                let pa = take(&mut self.state.a, age_a).expect("checked available");
                let pb = take(&mut self.state.b, age_b).expect("checked available");
                let out = werner::swap_fidelity(
                    Fidelity::new(self.fidelity_of(&pa))?,
                    Fidelity::new(self.fidelity_of(&pb))?,
                )
                .value();
                if out >= params.f_th {
                    event.success = true;
                    event.reward = 1.0;
                    event.delivered_fidelity = Some(out);
                }
            }
            Action::Distill { client, age_x, age_y } => {
                let pairs = self.state.pairs_mut(client);
                let px = take(pairs, age_x).expect("checked available");
                let py = take(pairs, age_y).expect("checked available");
                let fx = Fidelity::new(self.fidelity_of(&px))?;
                let fy = Fidelity::new(self.fidelity_of(&py))?;
                let p_succ = werner::distill_success_prob(fx, fy);
                if self.rng.gen::<f64>() < p_succ {
                    let out = werner::distill_output_fidelity(fx, fy)?;
                    let label = self.dynamics.decay().nearest_age(out);
                    let pairs = self.state.pairs_mut(client);
                    pairs.push(LivePair {
                        exact_fidelity: out.value(),
                        age_label: label,
                        born_with: out.value(),
                        steps_alive: 0,
                    });
                    sort_pairs(pairs);
                }
            }
        }

        self.age_pairs();
        Ok(event)
    }

    fn age_pairs(&mut self) {
        let m_star = self.dynamics.params().m_star;
        let grid = self.dynamics.decay().grid().to_vec();
        for client in [Client::A, Client::B] {
            self.state.pairs_mut(client).retain_mut(|p| {
                p.age_label += 1;
                p.steps_alive += 1;
                if p.age_label > m_star {
                    return false;
                }
                p.exact_fidelity = p.born_with * grid[p.steps_alive as usize];
                true
            });
        }
    }
}

/// Summary metrics for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub steps: u64,
    pub success_count: usize,
    /// Successful deliveries per time step.
    pub throughput: f64,
    /// Mean delivered fidelity; absent without deliveries.
    pub avg_fidelity: Option<f64>,
    /// Population standard deviation of gaps between deliveries; absent with
    /// fewer than two deliveries.
    pub jitter: Option<f64>,
    pub success_times: Vec<u64>,
}

pub fn compute_metrics(success_times: &[u64], delivered_fidelities: &[f64], steps: u64) -> Result<MetricsReport> {
    if success_times.len() != delivered_fidelities.len() {
        return Err(Error::MismatchedMetrics {
            times: success_times.len(),
            fidelities: delivered_fidelities.len(),
        });
    }
    let ordered = success_times.windows(2).all(|w| w[0] < w[1])
        && success_times.first().is_none_or(|&t| t >= 1)
        && success_times.last().is_none_or(|&t| t <= steps);
    if !ordered {
        return Err(Error::UnsortedSuccessTimes { steps });
    }
    let count = success_times.len();
    let avg_fidelity = (count > 0).then(|| delivered_fidelities.iter().sum::<f64>() / count as f64);
    let jitter = (count >= 2).then(|| {
        let gaps: Vec<f64> = success_times.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
        var.sqrt()
    });
    Ok(MetricsReport {
        steps,
        success_count: count,
        throughput: if steps == 0 { 0.0 } else { count as f64 / steps as f64 },
        avg_fidelity,
        jitter,
        success_times: success_times.to_vec(),
    })
}

/// `sum_t gamma^t r_t` over a reward trace.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, &r| r + gamma * acc)
}

/// Runs `sim.steps` steps from empty memories and summarises them.
pub fn simulate(policy: &Policy, params: &ModelParams, sim: &SimConfig) -> Result<MetricsReport> {
    simulate_traced(policy, params, sim, None)
}

/// As [`simulate`], optionally writing one JSON record per step to `trace`.
pub fn simulate_traced(
    policy: &Policy,
    params: &ModelParams,
    sim: &SimConfig,
    mut trace: Option<&mut dyn Write>,
) -> Result<MetricsReport> {
    if sim.steps < 1 {
        return Err(Error::domain("steps", sim.steps as f64, ">= 1"));
    }
    let dynamics = SwitchDynamics::new(params.clone())?;
    let lookup = PolicyLookup::new(policy);
    let mut simulator = Simulator::new(&dynamics, &lookup, sim.seed, sim.mode);
    let mut times = Vec::new();
    let mut fidelities = Vec::new();
    for _ in 0..sim.steps {
        let event = simulator.step()?;
        if let Some(f) = event.delivered_fidelity {
            times.push(event.step);
            fidelities.push(f);
        }
        if let Some(out) = trace.as_deref_mut() {
            let line = serde_json::to_string(&TraceRecord::from(&event)).expect("trace record serializes");
            writeln!(out, "{line}").map_err(|e| Error::Config {
                field: "trace".into(),
                message: e.to_string(),
            })?;
        }
    }
    compute_metrics(&times, &fidelities, sim.steps)
}
