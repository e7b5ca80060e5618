//! Finite MDP of a two-client switch.
//!
//! A state is the pair of age multisets held in the switch's memories for
//! client A and client B. Each time step the switch takes one action on the
//! current state (wait, swap one A pair with one B pair, or distill two pairs
//! on the same client), then every stored pair ages by one step and pairs
//! older than the cutoff are discarded, then each client link independently
//! delivers a fresh age-0 pair. The state after arrivals is the next
//! decision epoch.
//!
//! A successful distillation replaces its two inputs by one pair labelled
//! with the grid age whose fidelity is nearest the protocol output; that
//! pair then ages with the others.
//!
//! # Model dump format
//!
//! [`SwitchModel::write_dump`] emits line-oriented text:
//!
//! ```text
//! # <comment lines, including the parameters>
//! S <state-index> A=[..] B=[..]
//!   A <action> <reward>
//!     T <next-state-index> <probability>
//! ```
//!
//! `S` lines appear in canonical state order; each is followed by its
//! available actions in action order, each action by its merged transition
//! entries sorted by next-state index. Floats use Rust's shortest
//! round-trip formatting.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::werner::{self, DecayModel, Fidelity};

/// Success probability of the Bell-state measurement at the switch.
pub const SWAP_SUCCESS_PROB: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub m_star: u32,
    pub f_star: f64,
    /// Memory slots per client (`L`).
    pub buffer_capacity: usize,
    pub f_th: f64,
    pub allow_distill: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            lambda1: 0.7,
            lambda2: 0.7,
            m_star: 3,
            f_star: 0.85,
            buffer_capacity: 3,
            f_th: 0.9,
            allow_distill: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::domain(name, v, "[0, 1]"))
            }
        };
        unit("lambda1", self.lambda1)?;
        unit("lambda2", self.lambda2)?;
        unit("f_th", self.f_th)?;
        if self.buffer_capacity < 1 {
            return Err(Error::domain("buffer_capacity", self.buffer_capacity as f64, ">= 1"));
        }
        self.decay().map(|_| ())
    }

    pub fn decay(&self) -> Result<DecayModel> {
        let f_star = Fidelity::new(self.f_star).map_err(|_| Error::domain("f_star", self.f_star, "(0, 1)"))?;
        DecayModel::new(f_star, self.m_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Client {
    A,
    B,
}

impl fmt::Display for Client {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Client::A => f.write_str("A"),
            Client::B => f.write_str("B"),
        }
    }
}

/// Ages of the pairs stored for one client, kept sorted ascending.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClientBuffer(Vec<u32>);

impl ClientBuffer {
    pub fn new(mut ages: Vec<u32>) -> Self {
        ages.sort_unstable();
        ClientBuffer(ages)
    }

    pub fn empty() -> Self {
        ClientBuffer(Vec::new())
    }

    pub fn ages(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, age: u32) -> usize {
        self.0.iter().filter(|&&a| a == age).count()
    }

    pub fn oldest(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// Removes one pair of the given age; returns whether one was present.
    pub fn remove(&mut self, age: u32) -> bool {
        match self.0.iter().position(|&a| a == age) {
            Some(i) => {
                self.0.remove(i);
                true
            }
            None => false,
        }
    }

    pub fn insert(&mut self, age: u32) {
        let at = self.0.partition_point(|&a| a < age);
        self.0.insert(at, age);
    }

    /// Distinct ages in ascending order.
    pub fn distinct(&self) -> impl Iterator<Item = u32> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|&(i, a)| i == 0 || self.0[i - 1] != *a)
            .map(|(_, &a)| a)
    }

    /// Ages every pair by one step and drops those now older than `m_star`.
    pub fn age(&mut self, m_star: u32) {
        self.0.retain_mut(|a| {
            *a += 1;
            *a <= m_star
        });
    }

    /// Admits a fresh pair, evicting the oldest one if the buffer is full.
    pub fn admit_fresh(&mut self, capacity: usize) {
        if self.0.len() >= capacity {
            self.0.pop();
        }
        self.0.insert(0, 0);
    }
}

impl fmt::Display for ClientBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("]")
    }
}

impl FromStr for ClientBuffer {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| format!("expected [..], got {s:?}"))?;
        if inner.trim().is_empty() {
            return Ok(ClientBuffer::empty());
        }
        inner
            .split(',')
            .map(|t| t.trim().parse::<u32>().map_err(|e| format!("bad age {t:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ClientBuffer::new)
    }
}

/// Decision-epoch state: the stored pair ages for both clients.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SwitchState {
    pub a: ClientBuffer,
    pub b: ClientBuffer,
}

impl SwitchState {
    pub fn new(a: Vec<u32>, b: Vec<u32>) -> Self {
        SwitchState {
            a: ClientBuffer::new(a),
            b: ClientBuffer::new(b),
        }
    }

    pub fn empty() -> Self {
        SwitchState::default()
    }

    pub fn buffer(&self, client: Client) -> &ClientBuffer {
        match client {
            Client::A => &self.a,
            Client::B => &self.b,
        }
    }

    pub fn buffer_mut(&mut self, client: Client) -> &mut ClientBuffer {
        match client {
            Client::A => &mut self.a,
            Client::B => &mut self.b,
        }
    }
}

impl fmt::Display for SwitchState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A={} B={}", self.a, self.b)
    }
}

impl FromStr for SwitchState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let rest = s.strip_prefix("A=").ok_or("state must start with A=")?;
        let split = rest.find(" B=").ok_or("state is missing B=")?;
        Ok(SwitchState {
            a: rest[..split].parse()?,
            b: rest[split + 3..].parse()?,
        })
    }
}

/// One switch decision. Actions name ages, not individual pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Wait,
    Swap {
        age_a: u32,
        age_b: u32,
    },
    /// `age_x <= age_y`.
    Distill {
        client: Client,
        age_x: u32,
        age_y: u32,
    },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Wait => f.write_str("WAIT"),
            Action::Swap { age_a, age_b } => write!(f, "SWAP({age_a},{age_b})"),
            Action::Distill { client, age_x, age_y } => write!(f, "DISTILL({client},{age_x},{age_y})"),
        }
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "WAIT" {
            return Ok(Action::Wait);
        }
        let (name, args) = s
            .strip_suffix(')')
            .and_then(|r| r.split_once('('))
            .ok_or_else(|| format!("unrecognised action {s:?}"))?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let age = |t: &str| t.parse::<u32>().map_err(|e| format!("bad age {t:?}: {e}"));
        match (name, args.as_slice()) {
            ("SWAP", [a, b]) => Ok(Action::Swap {
                age_a: age(a)?,
                age_b: age(b)?,
            }),
            ("DISTILL", [c, x, y]) => {
                let client = match *c {
                    "A" => Client::A,
                    "B" => Client::B,
                    other => return Err(format!("bad client {other:?}")),
                };
                Ok(Action::Distill {
                    client,
                    age_x: age(x)?,
                    age_y: age(y)?,
                })
            }
            _ => Err(format!("unrecognised action {s:?}")),
        }
    }
}

/// Probability mass on one successor state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub next_state: SwitchState,
    pub probability: f64,
}

fn merge(branches: impl IntoIterator<Item = (SwitchState, f64)>) -> Vec<TransitionEntry> {
    let mut acc: BTreeMap<SwitchState, f64> = BTreeMap::new();
    for (s, p) in branches {
        if p > 0.0 {
            *acc.entry(s).or_insert(0.0) += p;
        }
    }
    acc.into_iter()
        .map(|(next_state, probability)| TransitionEntry {
            next_state,
            probability,
        })
        .collect()
}

/// State-level dynamics of the switch for one parameter set.
#[derive(Debug, Clone)]
pub struct SwitchDynamics {
    params: ModelParams,
    decay: DecayModel,
}

impl SwitchDynamics {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let decay = params.decay()?;
        Ok(SwitchDynamics { params, decay })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn decay(&self) -> &DecayModel {
        &self.decay
    }

    fn fidelity(&self, age: u32) -> Fidelity {
        Fidelity::new(self.decay.grid()[age as usize]).expect("grid fidelity")
    }

    /// Every canonical state, in ascending canonical order.
    pub fn enumerate_states(&self) -> Vec<SwitchState> {
        let buffers = enumerate_buffers(self.params.m_star, self.params.buffer_capacity);
        let mut states = Vec::with_capacity(buffers.len() * buffers.len());
        for a in &buffers {
            for b in &buffers {
                states.push(SwitchState {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
        }
        states
    }

    /// Wait, then swaps ascending by `(age_a, age_b)`, then distillations
    /// ascending by `(client, age_x, age_y)`.
    pub fn available_actions(&self, state: &SwitchState) -> Vec<Action> {
        let mut actions = vec![Action::Wait];
        for age_a in state.a.distinct() {
            for age_b in state.b.distinct() {
                actions.push(Action::Swap { age_a, age_b });
            }
        }
        if self.params.allow_distill {
            for client in [Client::A, Client::B] {
                let buf = state.buffer(client);
                let distinct: Vec<u32> = buf.distinct().collect();
                for (i, &x) in distinct.iter().enumerate() {
                    if buf.count(x) >= 2 {
                        actions.push(Action::Distill {
                            client,
                            age_x: x,
                            age_y: x,
                        });
                    }
                    for &y in &distinct[i + 1..] {
                        actions.push(Action::Distill {
                            client,
                            age_x: x,
                            age_y: y,
                        });
                    }
                }
            }
        }
        actions
    }

    pub fn is_available(&self, state: &SwitchState, action: &Action) -> bool {
        match *action {
            Action::Wait => true,
            Action::Swap { age_a, age_b } => state.a.count(age_a) >= 1 && state.b.count(age_b) >= 1,
            Action::Distill { client, age_x, age_y } => {
                let buf = state.buffer(client);
                self.params.allow_distill
                    && age_x <= age_y
                    && if age_x == age_y {
                        buf.count(age_x) >= 2
                    } else {
                        buf.count(age_x) >= 1 && buf.count(age_y) >= 1
                    }
            }
        }
    }

    fn check(&self, state: &SwitchState, action: &Action) -> Result<()> {
        if self.is_available(state, action) {
            Ok(())
        } else {
            Err(Error::UnavailableAction {
                state: state.clone(),
                action: *action,
            })
        }
    }

    /// Whether swapping pairs of these ages clears the threshold.
    pub fn swap_meets_threshold(&self, age_a: u32, age_b: u32) -> bool {
        werner::swap_fidelity(self.fidelity(age_a), self.fidelity(age_b)).value() >= self.params.f_th
    }

    /// Immediate reward: only a swap clearing `f_th` earns anything.
    pub fn reward(&self, state: &SwitchState, action: &Action) -> Result<f64> {
        self.check(state, action)?;
        Ok(match *action {
            Action::Swap { age_a, age_b } if self.swap_meets_threshold(age_a, age_b) => SWAP_SUCCESS_PROB,
            _ => 0.0,
        })
    }

    /// Success probability and grid age of the output pair for a distillation
    /// of two pairs with the given ages.
    pub fn distill_outcome(&self, age_x: u32, age_y: u32) -> (f64, u32) {
        let (fx, fy) = (self.fidelity(age_x), self.fidelity(age_y));
        let p = werner::distill_success_prob(fx, fy);
        let out = werner::distill_output_fidelity(fx, fy).expect("grid fidelities lie in [0,1]");
        (p, self.decay.nearest_age(out))
    }

    /// Post-action distribution, before aging and arrivals.
    pub fn apply_action(&self, state: &SwitchState, action: &Action) -> Result<Vec<TransitionEntry>> {
        self.check(state, action)?;
        let mut next = state.clone();
        Ok(match *action {
            Action::Wait => merge([(next, 1.0)]),
            Action::Swap { age_a, age_b } => {
                next.a.remove(age_a);
                next.b.remove(age_b);
                merge([(next, 1.0)])
            }
            Action::Distill { client, age_x, age_y } => {
                let buf = next.buffer_mut(client);
                buf.remove(age_x);
                buf.remove(age_y);
                let (p, out_age) = self.distill_outcome(age_x, age_y);
                let failed = next.clone();
                next.buffer_mut(client).insert(out_age);
                merge([(next, p), (failed, 1.0 - p)])
            }
        })
    }

    pub fn age_and_discard(&self, state: &SwitchState) -> SwitchState {
        let mut next = state.clone();
        next.a.age(self.params.m_star);
        next.b.age(self.params.m_star);
        next
    }

    /// Independent Bernoulli arrivals on both links with drop-oldest on a
    /// full buffer.
    pub fn arrival_distribution(&self, state: &SwitchState) -> Vec<TransitionEntry> {
        let (l1, l2) = (self.params.lambda1, self.params.lambda2);
        let cap = self.params.buffer_capacity;
        let branch = |arrive_a: bool, arrive_b: bool| {
            let mut s = state.clone();
            if arrive_a {
                s.a.admit_fresh(cap);
            }
            if arrive_b {
                s.b.admit_fresh(cap);
            }
            s
        };
        merge([
            (branch(true, true), l1 * l2),
            (branch(true, false), l1 * (1.0 - l2)),
            (branch(false, true), (1.0 - l1) * l2),
            (branch(false, false), (1.0 - l1) * (1.0 - l2)),
        ])
    }

    /// Full one-step law: action, then aging, then arrivals.
    pub fn transition(&self, state: &SwitchState, action: &Action) -> Result<Vec<TransitionEntry>> {
        let post = self.apply_action(state, action)?;
        let mut branches = Vec::with_capacity(post.len() * 4);
        for entry in post {
            let aged = self.age_and_discard(&entry.next_state);
            for arrival in self.arrival_distribution(&aged) {
                branches.push((arrival.next_state, entry.probability * arrival.probability));
            }
        }
        Ok(merge(branches))
    }
}

fn enumerate_buffers(m_star: u32, capacity: usize) -> Vec<ClientBuffer> {
    fn extend(prefix: &mut Vec<u32>, min: u32, m_star: u32, capacity: usize, out: &mut Vec<ClientBuffer>) {
        out.push(ClientBuffer(prefix.clone()));
        if prefix.len() == capacity {
            return;
        }
        for age in min..=m_star {
            prefix.push(age);
            extend(prefix, age, m_star, capacity, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 0, m_star, capacity, &mut out);
    out.sort();
    out
}

/// One available action of a state, with its reward and successor indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionEntry {
    pub action: Action,
    pub reward: f64,
    pub next: Vec<(usize, f64)>,
}

/// The fully tabulated MDP. Immutable after construction.
#[derive(Debug, Clone)]
pub struct SwitchModel {
    dynamics: SwitchDynamics,
    states: Vec<SwitchState>,
    index: HashMap<SwitchState, usize>,
    table: Vec<Vec<ActionEntry>>,
}

impl SwitchModel {
    pub fn build(params: ModelParams) -> Result<Self> {
        let dynamics = SwitchDynamics::new(params)?;
        let states = dynamics.enumerate_states();
        let index: HashMap<SwitchState, usize> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut table = Vec::with_capacity(states.len());
        for state in &states {
            let mut row = Vec::new();
            for action in dynamics.available_actions(state) {
                let reward = dynamics.reward(state, &action)?;
                let next = dynamics
                    .transition(state, &action)?
                    .into_iter()
                    .map(|e| {
                        index
                            .get(&e.next_state)
                            .map(|&i| (i, e.probability))
                            .ok_or(Error::UnknownState(e.next_state))
                    })
                    .collect::<Result<Vec<_>>>()?;
                row.push(ActionEntry { action, reward, next });
            }
            table.push(row);
        }
        Ok(SwitchModel {
            dynamics,
            states,
            index,
            table,
        })
    }

    pub fn dynamics(&self) -> &SwitchDynamics {
        &self.dynamics
    }

    pub fn params(&self) -> &ModelParams {
        self.dynamics.params()
    }

    pub fn states(&self) -> &[SwitchState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &SwitchState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn actions(&self, state: usize) -> &[ActionEntry] {
        &self.table[state]
    }

    pub fn action_entry(&self, state: usize, action: &Action) -> Option<&ActionEntry> {
        self.table[state].iter().find(|e| e.action == *action)
    }

    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        let p = self.params();
        writeln!(out, "# qswitch model dump")?;
        writeln!(
            out,
            "# lambda1={} lambda2={} m_star={} f_star={} buffer_capacity={} f_th={} allow_distill={}",
            p.lambda1, p.lambda2, p.m_star, p.f_star, p.buffer_capacity, p.f_th, p.allow_distill
        )?;
        writeln!(out, "# states={}", self.states.len())?;
        for (i, state) in self.states.iter().enumerate() {
            writeln!(out, "S {i} {state}")?;
            for entry in &self.table[i] {
                writeln!(out, "  A {} {}", entry.action, entry.reward)?;
                for (j, prob) in &entry.next {
                    writeln!(out, "    T {j} {prob}")?;
                }
            }
        }
        Ok(())
    }
}
