//! Run configuration and the solve / simulate / sweep drivers behind the
//! command-line front end.
//!
//! Configuration is a TOML document with optional sections `[model]`,
//! `[planner]`, `[simulation]`, `[sweep]` and `[output]`. Every key has a
//! default, unknown keys are rejected, and command-line flags override file
//! values. Precedence is therefore flags > file > defaults.
//!
//! ```toml
//! [model]
//! lambda1 = 0.7
//! lambda2 = 0.7
//! m_star = 3
//! f_star = 0.85
//! buffer_capacity = 3
//! f_th = 0.9
//! allow_distill = true
//!
//! [planner]
//! gamma = 0.9
//! eval_tolerance = 1e-10
//!
//! [simulation]
//! seed = 1
//! steps = 10000
//! mode = "exact"          # or "quantized"
//!
//! [sweep]
//! thresholds = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95]
//! policy_modes = ["distill", "no_distill"]
//!
//! [output]
//! out = "results.csv"
//! trace = "trace.jsonl"
//! ```

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ModelParams, SwitchModel};
use crate::planner::{policy_iteration, PlannerConfig, Policy, Solution};
use crate::simulator::{simulate, simulate_traced, FidelityMode, MetricsReport, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Distill,
    NoDistill,
}

impl PolicyMode {
    pub fn allows_distill(self) -> bool {
        self == PolicyMode::Distill
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyMode::Distill => "distill",
            PolicyMode::NoDistill => "no_distill",
        })
    }
}

/// The 0.70, 0.75, ..., 0.95 threshold grid.
pub fn default_thresholds() -> Vec<f64> {
    (0..6).map(|i| (70 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub thresholds: Vec<f64>,
    pub policy_modes: Vec<PolicyMode>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            thresholds: default_thresholds(),
            policy_modes: vec![PolicyMode::Distill, PolicyMode::NoDistill],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub planner: PlannerConfig,
    pub simulation: SimConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

/// Values given on the command line; each one that is set replaces the
/// corresponding file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub f_th: Option<f64>,
    pub no_distill: bool,
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub mode: Option<FidelityMode>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn scoped(section: &str, err: Error) -> Error {
    match err {
        Error::Domain { name, value, expected } => {
            config_err(format!("{section}.{name}"), format!("{value} is outside {expected}"))
        }
        other => other,
    }
}

fn toml_err(source: &str, text: &str, e: toml::de::Error) -> Error {
    match e.span() {
        Some(span) => {
            let line = text[..span.start].matches('\n').count() + 1;
            config_err(format!("{source}:{line}"), e.message())
        }
        None => config_err(source, e.message()),
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| toml_err("config", text, e))?;
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(f) = o.f_th {
            self.model.f_th = f;
        }
        if o.no_distill {
            self.model.allow_distill = false;
            self.sweep.policy_modes = vec![PolicyMode::NoDistill];
        }
        if let Some(seed) = o.seed {
            self.simulation.seed = seed;
        }
        if let Some(steps) = o.steps {
            self.simulation.steps = steps;
        }
        if let Some(mode) = o.mode {
            self.simulation.mode = mode;
        }
        if o.out.is_some() {
            self.output.out = o.out.clone();
        }
        if o.trace.is_some() {
            self.output.trace = o.trace.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| scoped("model", e))?;
        self.planner.validate().map_err(|e| scoped("planner", e))?;
        if self.simulation.steps < 1 {
            return Err(config_err("simulation.steps", "must be >= 1"));
        }
        let t = &self.sweep.thresholds;
        if let Some(bad) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(config_err("sweep.thresholds", format!("{bad} is outside [0, 1]")));
        }
        if t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("sweep.thresholds", "must be strictly increasing"));
        }
        let modes = &self.sweep.policy_modes;
        if modes.is_empty() {
            return Err(config_err("sweep.policy_modes", "must name at least one mode"));
        }
        if modes.len() == 2 && modes[0] == modes[1] || modes.len() > 2 {
            return Err(config_err("sweep.policy_modes", "modes must be distinct"));
        }
        Ok(())
    }
}

/// Builds the effective configuration from an optional file plus overrides.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config_err("config", format!("{}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| toml_err(&p.display().to_string(), &text, e))?
        }
        None => RunConfig::default(),
    };
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}

/// Policy artifact: a `#` metadata header followed by the policy lines.
#[derive(Debug, Clone)]
pub struct SolveArtifact {
    pub solution: Solution,
    pub text: String,
}

fn write_header(out: &mut String, params: &ModelParams, planner: &PlannerConfig) {
    let _ = writeln!(out, "# lambda1 = {}", params.lambda1);
    let _ = writeln!(out, "# lambda2 = {}", params.lambda2);
    let _ = writeln!(out, "# m_star = {}", params.m_star);
    let _ = writeln!(out, "# f_star = {}", params.f_star);
    let _ = writeln!(out, "# buffer_capacity = {}", params.buffer_capacity);
    let _ = writeln!(out, "# f_th = {}", params.f_th);
    let _ = writeln!(out, "# allow_distill = {}", params.allow_distill);
    let _ = writeln!(out, "# gamma = {}", planner.gamma);
    let _ = writeln!(out, "# eval_tolerance = {:e}", planner.eval_tolerance);
}

pub fn solve(params: &ModelParams, planner: &PlannerConfig) -> Result<(SwitchModel, Solution)> {
    let model = SwitchModel::build(params.clone())?;
    let solution = policy_iteration(&model, planner)?;
    Ok((model, solution))
}

pub fn run_solve(config: &RunConfig) -> Result<SolveArtifact> {
    let (model, solution) = solve(&config.model, &config.planner)?;
    let mut text = String::from("# qswitch policy\n");
    write_header(&mut text, &config.model, &config.planner);
    let _ = writeln!(text, "# states = {}", model.len());
    let _ = writeln!(text, "# iterations = {}", solution.iterations);
    let _ = writeln!(text, "# bellman_residual = {:e}", solution.residual);
    text.push_str(&solution.policy.to_text());
    Ok(SolveArtifact { solution, text })
}

/// Solves (or takes `policy`) and simulates once, writing the trace if one
/// is configured.
pub fn run_simulate(config: &RunConfig, policy: Option<Policy>) -> Result<MetricsReport> {
    let policy = match policy {
        Some(p) => p,
        None => solve(&config.model, &config.planner)?.1.policy,
    };
    match &config.output.trace {
        Some(path) => {
            let file =
                std::fs::File::create(path).map_err(|e| config_err("trace", format!("{}: {e}", path.display())))?;
            let mut writer = std::io::BufWriter::new(file);
            simulate_traced(&policy, &config.model, &config.simulation, Some(&mut writer))
        }
        None => simulate(&policy, &config.model, &config.simulation),
    }
}

pub const SWEEP_HEADER: &str = "f_th,policy_mode,seed,steps,success_count,throughput,avg_fidelity,jitter";

/// One sweep cell, solved and simulated.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub f_th: f64,
    pub mode: PolicyMode,
    pub seed: u64,
    pub steps: u64,
    pub outcome: std::result::Result<MetricsReport, String>,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        match &self.outcome {
            Ok(r) => format!(
                "{},{},{},{},{},{},{},{}",
                self.f_th,
                self.mode,
                self.seed,
                self.steps,
                r.success_count,
                r.throughput,
                opt(r.avg_fidelity),
                opt(r.jitter)
            ),
            Err(msg) => {
                let msg: String = msg
                    .chars()
                    .map(|c| if c == ',' || c == '\n' { ';' } else { c })
                    .collect();
                format!(
                    "{},{},{},{},error: {msg},,,",
                    self.f_th, self.mode, self.seed, self.steps
                )
            }
        }
    }
}

/// Solves and simulates every (threshold, mode) cell. Cell `i` in
/// (threshold, mode) order uses seed `base + i`.
pub fn sweep_rows(config: &RunConfig) -> Vec<SweepRow> {
    let cells: Vec<(usize, f64, PolicyMode)> = config
        .sweep
        .thresholds
        .iter()
        .flat_map(|&t| config.sweep.policy_modes.iter().map(move |&m| (t, m)))
        .enumerate()
        .map(|(i, (t, m))| (i, t, m))
        .collect();
    cells
        .into_par_iter()
        .map(|(i, f_th, mode)| {
            let params = ModelParams {
                f_th,
                allow_distill: mode.allows_distill(),
                ..config.model.clone()
            };
            let sim = SimConfig {
                seed: config.simulation.seed.wrapping_add(i as u64),
                ..config.simulation.clone()
            };
            let outcome = solve(&params, &config.planner)
                .and_then(|(_, sol)| simulate(&sol.policy, &params, &sim))
                .map_err(|e| e.to_string());
            SweepRow {
                f_th,
                mode,
                seed: sim.seed,
                steps: sim.steps,
                outcome,
            }
        })
        .collect()
}

pub fn run_sweep(config: &RunConfig) -> String {
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    for row in sweep_rows(config) {
        table.push_str(&row.to_csv());
        table.push('\n');
    }
    table
}

/// Human-readable summary of a policy artifact.
pub fn inspect_policy(text: &str) -> Result<String> {
    let policy = Policy::parse(text)?;
    let (mut wait, mut swap, mut distill) = (0usize, 0usize, 0usize);
    for (_, action) in policy.iter() {
        match action {
            Action::Wait => wait += 1,
            Action::Swap { .. } => swap += 1,
            Action::Distill { .. } => distill += 1,
        }
    }
    let mut out = String::new();
    for line in text.lines().filter(|l| l.starts_with('#')) {
        let _ = writeln!(out, "{line}");
    }
    let _ = writeln!(out, "states: {}", policy.len());
    let _ = writeln!(out, "wait: {wait}");
    let _ = writeln!(out, "swap: {swap}");
    let _ = writeln!(out, "distill: {distill}");
    Ok(out)
}
