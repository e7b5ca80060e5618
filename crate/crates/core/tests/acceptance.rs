//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qswitch::experiment::{self, PolicyMode, RunConfig};
use qswitch::planner::{policy_evaluation, policy_improvement};
use qswitch::simulator::{discounted_return, PolicyLookup, Simulator};
use qswitch::werner::{distill_output_fidelity, distill_success_prob, swap_fidelity};
use qswitch::{
    policy_iteration, simulate, value_iteration, Action, Client, DecayModel, Fidelity, FidelityMode, ModelParams,
    PlannerConfig, Policy, SimConfig, SwitchDynamics, SwitchModel, SwitchState,
};

const THRESHOLDS: [f64; 6] = [0.70, 0.75, 0.80, 0.85, 0.90, 0.95];
const INTERMEDIATE: [f64; 4] = [0.75, 0.80, 0.85, 0.90];
const GAMMA: f64 = 0.9;

type Check = Result<String, String>;

fn params(f_th: f64, allow_distill: bool) -> ModelParams {
    ModelParams {
        f_th,
        allow_distill,
        ..ModelParams::default()
    }
}

fn solved(f_th: f64, allow_distill: bool) -> (SwitchModel, Policy, f64) {
    let model = SwitchModel::build(params(f_th, allow_distill)).expect("model builds");
    let sol = policy_iteration(&model, &PlannerConfig::default()).expect("policy iteration converges");
    let v0 = sol
        .values
        .get(&model, &SwitchState::empty())
        .expect("empty state enumerated");
    (model, sol.policy, v0)
}

fn fid(v: f64) -> Fidelity {
    Fidelity::new(v).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(started: Instant, budget: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took <= budget, || format!("took {took:.1?}, budget {budget:?}"))
}

struct Stats {
    mean: f64,
    se: f64,
}

fn stats(xs: &[f64]) -> Stats {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Stats {
        mean,
        se: (var / n).sqrt(),
    }
}

fn se_diff(a: &Stats, b: &Stats) -> f64 {
    (a.se * a.se + b.se * b.se).sqrt()
}

// Swap output written as the Werner-parameter product.
fn swap_oracle(f1: f64, f2: f64) -> f64 {
    ((4.0 * f1 - 1.0) * (4.0 * f2 - 1.0) / 3.0 + 1.0) / 4.0
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn c1_formulas() -> Check {
    let started = Instant::now();
    let cases = [
        ("swap(0.85,0.85)", swap_fidelity(fid(0.85), fid(0.85)).value(), 0.73),
        ("p_succ(0.85,0.85)", distill_success_prob(fid(0.85), fid(0.85)), 0.82),
        // (10 f^2 - 2f + 1) / 9 = 0.725 over p = 0.82.
        (
            "distill(0.85,0.85)",
            distill_output_fidelity(fid(0.85), fid(0.85)).unwrap().value(),
            0.7250 / 0.82,
        ),
        (
            "distill(0.5,0.5)",
            distill_output_fidelity(fid(0.5), fid(0.5)).unwrap().value(),
            0.5,
        ),
    ];
    let mut worst: f64 = 0.0;
    for (name, got, want) in cases {
        let err = (got - want).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("{name} = {got}, expected {want}"))?;
    }
    let rounded = distill_output_fidelity(fid(0.85), fid(0.85)).unwrap().value();
    ensure((rounded - 0.884146).abs() < 5e-7, || {
        format!("distill(0.85,0.85) = {rounded}")
    })?;
    within_budget(started, Duration::from_secs(1))?;
    Ok(format!("max error {worst:.1e}"))
}

fn c2_state_space() -> Check {
    let started = Instant::now();
    let dynamics = SwitchDynamics::new(ModelParams::default()).map_err(|e| e.to_string())?;
    let states = dynamics.enumerate_states();
    // Multisets of size k over m*+1 ages: C(k + m*, m*).
    let per_client: u64 = (0..=3).map(|k| binomial(k + 3, 3)).sum();
    let expected = (per_client * per_client) as usize;
    ensure(states.len() == expected, || {
        format!("{} states, expected {expected}", states.len())
    })?;
    let set: HashSet<&SwitchState> = states.iter().collect();
    ensure(set.len() == states.len(), || "duplicate states".into())?;
    let mut targets = 0usize;
    for s in &states {
        for a in dynamics.available_actions(s) {
            for t in dynamics.transition(s, &a).map_err(|e| e.to_string())? {
                targets += 1;
                ensure(set.contains(&t.next_state), || {
                    format!("{s} --{a}--> {} escapes", t.next_state)
                })?;
            }
        }
    }
    within_budget(started, Duration::from_secs(1))?;
    Ok(format!("{} states, {targets} transition targets closed", states.len()))
}

fn c3_planner_agreement() -> Check {
    let started = Instant::now();
    let config = PlannerConfig::default();
    let mut worst: f64 = 0.0;
    for f_th in THRESHOLDS {
        for distill in [true, false] {
            let model = SwitchModel::build(params(f_th, distill)).map_err(|e| e.to_string())?;
            let pi = policy_iteration(&model, &config).map_err(|e| e.to_string())?;
            let vi = value_iteration(&model, &config).map_err(|e| e.to_string())?;
            let diff = pi.values.max_abs_diff(&vi);
            worst = worst.max(diff);
            ensure(diff <= 1e-6, || {
                format!("f_th={f_th} distill={distill}: |PI-VI| = {diff:e}")
            })?;
        }
    }
    within_budget(started, Duration::from_secs(60))?;
    Ok(format!("max |V_PI - V_VI| = {worst:.1e} over 12 models"))
}

fn c4_mode_consistency() -> Check {
    let started = Instant::now();
    const EPISODES: u64 = 100_000;
    let horizon = (1e-6f64.ln() / GAMMA.ln()).ceil() as usize;
    ensure(GAMMA.powi(horizon as i32) < 1e-6, || "horizon too short".into())?;
    let mut report = Vec::new();
    for f_th in [0.75, 0.90] {
        for distill in [true, false] {
            let (model, policy, v0) = solved(f_th, distill);
            let lookup = PolicyLookup::new(&policy);
            let dynamics = model.dynamics();
            let base = 1_000_000 * (1 + distill as u64) + (f_th * 100.0) as u64 * 10_000_000;
            let returns: Vec<f64> = (0..EPISODES)
                .into_par_iter()
                .map(|i| {
                    let mut sim = Simulator::new(dynamics, &lookup, base + i, FidelityMode::Quantized);
                    // The empty decision state always waits; simulator steps
                    // supply the rewards from the next epoch on.
                    let mut rewards = vec![0.0; horizon];
                    for r in rewards.iter_mut().skip(1) {
                        *r = sim.step().expect("policy covers visited states").reward;
                    }
                    discounted_return(&rewards, GAMMA)
                })
                .collect();
            let s = stats(&returns);
            let z = (s.mean - v0) / s.se;
            report.push(format!("f_th={f_th} distill={distill}: z={z:+.2}"));
            ensure(z.abs() <= 3.0, || {
                format!(
                    "f_th={f_th} distill={distill}: mean {:.5} vs V(empty) {v0:.5}, se {:.5}",
                    s.mean, s.se
                )
            })?;
        }
    }
    within_budget(started, Duration::from_secs(300))?;
    Ok(format!("H={horizon}; {}", report.join(", ")))
}

/// Long-run reward rate of the chain induced by `policy`, from the lazy
/// chain's stationary distribution reached from the empty state.
fn stationary_reward_rate(model: &SwitchModel, policy: &Policy) -> f64 {
    let n = model.len();
    let mut rows = Vec::with_capacity(n);
    let mut reward = vec![0.0; n];
    for (i, s) in model.states().iter().enumerate() {
        let action = policy.get(s).expect("total policy");
        let entry = model.action_entry(i, action).expect("available action");
        reward[i] = entry.reward;
        rows.push(entry.next.clone());
    }
    let mut pi = vec![0.0; n];
    pi[model.index_of(&SwitchState::empty()).unwrap()] = 1.0;
    for _ in 0..1_000_000 {
        let mut next: Vec<f64> = pi.iter().map(|p| 0.5 * p).collect();
        for (i, row) in rows.iter().enumerate() {
            for &(j, p) in row {
                next[j] += 0.5 * pi[i] * p;
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < 1e-15 {
            break;
        }
    }
    pi.iter().zip(&reward).map(|(p, r)| p * r).sum()
}

fn c5_stationary_throughput() -> Check {
    let started = Instant::now();
    let (model, policy, _) = solved(0.70, false);
    let rate = stationary_reward_rate(&model, &policy);
    let sim = SimConfig {
        seed: 2024,
        steps: 100_000,
        mode: FidelityMode::Exact,
    };
    let report = simulate(&policy, model.params(), &sim).map_err(|e| e.to_string())?;
    let rel = (report.throughput - rate).abs() / rate;
    ensure(rel <= 0.01, || {
        format!(
            "stationary rate {rate:.5} vs simulated {:.5} (rel {rel:.4})",
            report.throughput
        )
    })?;
    within_budget(started, Duration::from_secs(60))?;
    Ok(format!(
        "stationary {rate:.5}, simulated {:.5}, rel error {:.3}%",
        report.throughput,
        100.0 * rel
    ))
}

struct Cell {
    throughput: Stats,
    fidelity: Stats,
    jitter: Stats,
}

const SEEDS: u64 = 20;

fn replicate(f_th: f64, distill: bool) -> Cell {
    let (model, policy, _) = solved(f_th, distill);
    let runs: Vec<_> = (0..SEEDS)
        .into_par_iter()
        .map(|seed| {
            let sim = SimConfig {
                seed: 500 + seed,
                steps: 10_000,
                mode: FidelityMode::Exact,
            };
            simulate(&policy, model.params(), &sim).expect("simulation runs")
        })
        .collect();
    let pick = |f: &dyn Fn(&qswitch::MetricsReport) -> f64| stats(&runs.iter().map(f).collect::<Vec<_>>());
    Cell {
        throughput: pick(&|r| r.throughput),
        fidelity: pick(&|r| r.avg_fidelity.expect("deliveries at default arrival rates")),
        jitter: pick(&|r| r.jitter.expect("deliveries at default arrival rates")),
    }
}

struct Trends {
    cells: Vec<(f64, Cell, Cell)>,
    elapsed: Duration,
}

fn trend_cells() -> Trends {
    let started = Instant::now();
    let cells = THRESHOLDS
        .iter()
        .map(|&f| (f, replicate(f, true), replicate(f, false)))
        .collect();
    Trends {
        cells,
        elapsed: started.elapsed(),
    }
}

fn c6_throughput_trend(t: &Trends) -> Check {
    let mut table = String::new();
    let mut problems = Vec::new();
    let mut strict = Vec::new();
    for (f, d, nd) in &t.cells {
        let (d, nd) = (&d.throughput, &nd.throughput);
        let se = se_diff(d, nd);
        let _ = write!(table, " {f:.2}:{:.4}/{:.4}", d.mean, nd.mean);
        if d.mean < nd.mean - 2.0 * se {
            problems.push(format!("distill below no-distill at f_th={f:.2}"));
        }
        if (*f == 0.70 || *f == 0.95) && (d.mean - nd.mean).abs() > 2.0 * se {
            problems.push(format!("modes differ at f_th={f:.2}"));
        }
        if INTERMEDIATE.contains(f) && d.mean - nd.mean > 2.0 * se {
            strict.push(*f);
        }
    }
    if strict.is_empty() {
        problems.push("no intermediate threshold where distillation strictly improves throughput".into());
    }
    if t.elapsed > Duration::from_secs(600) {
        problems.push(format!("took {:.1?}", t.elapsed));
    }
    let detail = format!("distill/no-distill means{table}");
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", problems.join("; ")))
    }
}

fn c7_fidelity_trend(t: &Trends) -> Check {
    for (f, d, nd) in t.cells.iter().filter(|(f, ..)| INTERMEDIATE.contains(f)) {
        let (d, nd) = (&d.fidelity, &nd.fidelity);
        ensure(nd.mean >= d.mean - 2.0 * se_diff(d, nd), || {
            format!("f_th={f:.2}: no-distill {:.5} < distill {:.5}", nd.mean, d.mean)
        })?;
    }
    Ok("no-distill fidelity >= distill - 2 SE at 0.75..0.90".into())
}

fn c8_jitter_trend(t: &Trends) -> Check {
    for (f, d, nd) in t.cells.iter().filter(|(f, ..)| INTERMEDIATE.contains(f)) {
        let (d, nd) = (&d.jitter, &nd.jitter);
        ensure(d.mean <= nd.mean + 2.0 * se_diff(d, nd), || {
            format!("f_th={f:.2}: distill jitter {:.4} > no-distill {:.4}", d.mean, nd.mean)
        })?;
    }
    Ok("distill jitter <= no-distill + 2 SE at 0.75..0.90".into())
}

fn werner_properties(rng: &mut ChaCha8Rng) -> Result<(), String> {
    const CASES: usize = 10_000;
    let draw = |rng: &mut ChaCha8Rng| rng.gen_range(0.25..=1.0);
    for _ in 0..CASES {
        let (a, b) = (draw(rng), draw(rng));
        let (fa, fb) = (fid(a), fid(b));
        let s = swap_fidelity(fa, fb).value();
        ensure((0.25..=1.0).contains(&s), || format!("swap({a},{b}) = {s}"))?;
        ensure((s - swap_oracle(a, b)).abs() <= 1e-12, || {
            format!("swap({a},{b}) off oracle")
        })?;
        ensure(s == swap_fidelity(fb, fa).value(), || "swap asymmetric".into())?;
        let bump = (a + 1e-3).min(1.0);
        if b > 0.25 {
            ensure(swap_fidelity(fid(bump), fb).value() >= s, || {
                format!("swap not monotone at ({a},{b})")
            })?;
        }
        let p = distill_success_prob(fa, fb);
        ensure((0.5..=1.0).contains(&p), || format!("p_succ({a},{b}) = {p}"))?;
        ensure(p == distill_success_prob(fb, fa), || "p_succ asymmetric".into())?;
        let out = distill_output_fidelity(fa, fb).map_err(|e| e.to_string())?.value();
        ensure((0.25..=1.0).contains(&out), || format!("distill({a},{b}) = {out}"))?;
        ensure(out == distill_output_fidelity(fb, fa).unwrap().value(), || {
            "distill asymmetric".into()
        })?;
        let joint = 10.0 / 9.0 * a * b - (a + b) / 9.0 + 1.0 / 9.0;
        ensure((p * out - joint).abs() <= 1e-12, || {
            format!("decomposition fails at ({a},{b})")
        })?;
        let f = rng.gen_range(0.5..1.0);
        if f > 0.5 {
            let d = distill_output_fidelity(fid(f), fid(f)).unwrap().value();
            ensure(d > f, || format!("distill({f},{f}) = {d} does not improve"))?;
        }
        let f_star = rng.gen_range(0.3..0.99);
        let m_star = rng.gen_range(1..=8);
        let decay = DecayModel::new(fid(f_star), m_star).map_err(|e| e.to_string())?;
        ensure((decay.alpha() + f_star.ln() / m_star as f64).abs() <= 1e-12, || {
            "alpha".into()
        })?;
        ensure((decay.grid()[m_star as usize] - f_star).abs() <= 1e-12, || {
            "F(m*)".into()
        })?;
        ensure(decay.grid().windows(2).all(|w| w[0] > w[1]), || {
            "grid not decreasing".into()
        })?;
        for m in 0..=m_star {
            ensure(decay.nearest_age(decay.fidelity_at_age(m).unwrap()) == m, || {
                "nearest_age".into()
            })?;
        }
    }
    ensure(
        distill_output_fidelity(fid(0.5), fid(0.5)).unwrap().value() == 0.5,
        || "fixed point 1/2".into(),
    )?;
    ensure(
        distill_output_fidelity(Fidelity::ONE, Fidelity::ONE).unwrap().value() == 1.0,
        || "fixed point 1".into(),
    )
}

fn mdp_properties() -> Result<usize, String> {
    let with = SwitchDynamics::new(params(0.85, true)).map_err(|e| e.to_string())?;
    let without = SwitchDynamics::new(params(0.85, false)).map_err(|e| e.to_string())?;
    let states = with.enumerate_states();
    ensure(states == without.enumerate_states(), || {
        "no-distill changes the state space".into()
    })?;
    let grid = with.decay().grid().to_vec();
    let mut pairs = 0;
    for s in &states {
        ensure(s.a.len() <= 3 && s.b.len() <= 3, || format!("{s} exceeds capacity"))?;
        let all = with.available_actions(s);
        let swap_only = without.available_actions(s);
        ensure(swap_only.iter().all(|a| !matches!(a, Action::Distill { .. })), || {
            "distill offered".into()
        })?;
        let kept: Vec<Action> = all
            .iter()
            .copied()
            .filter(|a| !matches!(a, Action::Distill { .. }))
            .collect();
        ensure(kept == swap_only, || format!("{s}: no-distill actions differ"))?;
        let reversed = SwitchState::new(
            s.a.ages().iter().rev().copied().collect(),
            s.b.ages().iter().rev().copied().collect(),
        );
        ensure(&reversed == s, || "canonical form not permutation invariant".into())?;
        for a in &all {
            pairs += 1;
            let t = with.transition(s, a).map_err(|e| e.to_string())?;
            ensure(t.iter().all(|e| e.probability >= 0.0), || {
                format!("{s} {a}: negative mass")
            })?;
            let total: f64 = t.iter().map(|e| e.probability).sum();
            ensure((total - 1.0).abs() <= 1e-12, || format!("{s} {a}: mass {total}"))?;
            ensure(
                t.iter().all(|e| e.next_state.a.len() <= 3 && e.next_state.b.len() <= 3),
                || "overflow".into(),
            )?;
            ensure(with.transition(&reversed, a).map_err(|e| e.to_string())? == t, || {
                "permutation".into()
            })?;
            if let Action::Swap { age_a, age_b } = a {
                let want = (swap_oracle(grid[*age_a as usize], grid[*age_b as usize]) >= 0.85) as u8 as f64;
                let got = with.reward(s, a).map_err(|e| e.to_string())?;
                ensure(got == want, || format!("{s} {a}: reward {got}, oracle {want}"))?;
            }
            if !matches!(a, Action::Distill { .. }) {
                ensure(without.transition(s, a).map_err(|e| e.to_string())? == t, || {
                    "swap-only dynamics differ".into()
                })?;
            }
        }
    }
    Ok(pairs)
}

fn planner_properties() -> Result<(), String> {
    let config = PlannerConfig::default();
    let bound = 1.0 / (1.0 - config.gamma);
    for f_th in [0.80, 0.90] {
        let model = SwitchModel::build(params(f_th, true)).map_err(|e| e.to_string())?;
        let mut policy = Policy::all_wait(&model);
        let mut values = policy_evaluation(&policy, &model, &config).map_err(|e| e.to_string())?;
        for _ in 0..config.max_improvement_rounds {
            let next = policy_improvement(&values, &model, &config);
            if next == policy {
                break;
            }
            let next_values = policy_evaluation(&next, &model, &config).map_err(|e| e.to_string())?;
            let monotone = values
                .as_slice()
                .iter()
                .zip(next_values.as_slice())
                .all(|(v, w)| *w >= v - 1e-9);
            ensure(monotone, || format!("f_th={f_th}: improvement lowered a value"))?;
            policy = next;
            values = next_values;
        }
        ensure(
            values.as_slice().iter().all(|v| (-1e-12..=bound + 1e-9).contains(v)),
            || "value bound".into(),
        )?;

        let first = policy_iteration(&model, &config).map_err(|e| e.to_string())?;
        let again = policy_iteration(&model, &config).map_err(|e| e.to_string())?;
        ensure(first.policy == again.policy && first.values == again.values, || {
            "nondeterministic".into()
        })?;
        ensure(first.policy == policy, || "replayed iteration disagrees".into())?;

        let swap_only = SwitchModel::build(params(f_th, false)).map_err(|e| e.to_string())?;
        let base = policy_iteration(&swap_only, &config).map_err(|e| e.to_string())?;
        let dominated = first
            .values
            .as_slice()
            .iter()
            .zip(base.values.as_slice())
            .all(|(d, n)| *d >= n - 1e-6);
        ensure(dominated, || {
            format!("f_th={f_th}: distill optimum below swap-only optimum")
        })?;
    }
    Ok(())
}

fn simulator_properties() -> Result<(), String> {
    for distill in [true, false] {
        let (model, policy, _) = solved(0.85, distill);
        let lookup = PolicyLookup::new(&policy);
        let mut sim = Simulator::new(model.dynamics(), &lookup, 99, FidelityMode::Exact);
        let grid = model.dynamics().decay().grid().to_vec();
        let (mut times, mut fids) = (Vec::new(), Vec::new());
        for _ in 0..10_000 {
            let event = sim.step().map_err(|e| e.to_string())?;
            if let Some(f) = event.delivered_fidelity {
                ensure(f >= 0.85, || format!("delivered {f} below threshold"))?;
                times.push(event.step);
                fids.push(f);
            }
            for client in [Client::A, Client::B] {
                for p in sim.state().pairs(client) {
                    ensure(p.exact_fidelity <= 1.0, || "fidelity above 1".into())?;
                    if !distill {
                        let want = grid[p.age_label as usize];
                        ensure((p.exact_fidelity - want).abs() <= 1e-9, || "off-grid pair".into())?;
                    }
                }
            }
        }
        let sim_config = SimConfig {
            seed: 99,
            steps: 10_000,
            mode: FidelityMode::Exact,
        };
        let report = simulate(&policy, model.params(), &sim_config).map_err(|e| e.to_string())?;
        ensure(report.success_times == times, || {
            "success times differ from stepped run".into()
        })?;
        ensure(report.success_count == times.len() && times.len() == fids.len(), || {
            "counters".into()
        })?;
        ensure(report.throughput == report.success_count as f64 / 10_000.0, || {
            "throughput".into()
        })?;
        ensure(
            report == simulate(&policy, model.params(), &sim_config).unwrap(),
            || "not reproducible".into(),
        )?;
    }
    Ok(())
}

fn experiment_properties() -> Result<(), String> {
    let mut config = RunConfig::default();
    let artifact = experiment::run_solve(&config).map_err(|e| e.to_string())?;
    let parsed = Policy::parse(&artifact.text).map_err(|e| e.to_string())?;
    ensure(parsed == artifact.solution.policy, || "artifact round-trip".into())?;
    config.simulation.steps = 500;
    config.sweep.thresholds = vec![0.8, 0.9];
    config.sweep.policy_modes = vec![PolicyMode::Distill, PolicyMode::NoDistill];
    let table = experiment::run_sweep(&config);
    ensure(table.lines().count() == 1 + 4, || "sweep row count".into())?;
    ensure(table == experiment::run_sweep(&config), || {
        "sweep not deterministic".into()
    })
}

fn c9_properties() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    werner_properties(&mut rng).map_err(|e| format!("werner: {e}"))?;
    let pairs = mdp_properties().map_err(|e| format!("mdp: {e}"))?;
    planner_properties().map_err(|e| format!("planner: {e}"))?;
    simulator_properties().map_err(|e| format!("simulator: {e}"))?;
    experiment_properties().map_err(|e| format!("experiment: {e}"))?;
    within_budget(started, Duration::from_secs(120))?;
    Ok(format!(
        "10000 werner cases, {pairs} state-action pairs, planner/simulator/experiment invariants"
    ))
}

fn c10_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, "[simulation]\nseed = 11\nsteps = 2000\n").map_err(|e| e.to_string())?;
    let run = || -> Result<Vec<u8>, String> {
        let out = Command::new(env!("CARGO_BIN_EXE_qswitch"))
            .arg("sweep")
            .arg("--config")
            .arg(&config)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || {
            String::from_utf8_lossy(&out.stderr).into_owned()
        })?;
        Ok(out.stdout)
    };
    let (first, second) = (run()?, run()?);
    ensure(first == second, || "sweep tables differ".into())?;
    let rows = first.iter().filter(|&&b| b == b'\n').count();
    ensure(rows == 13, || format!("{rows} lines, expected header + 12 rows"))?;
    Ok(format!("{} identical bytes, 12 rows", first.len()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, started: Instant, outcome: Check| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {id:>2} {name} [{secs:.1}s] {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {id:>2} {name} [{secs:.1}s] {detail}");
            }
        }
    };
    let t = Instant::now();
    report(1, "formula suite", t, c1_formulas());
    let t = Instant::now();
    report(2, "state-space oracle", t, c2_state_space());
    let t = Instant::now();
    report(3, "planner cross-validation", t, c3_planner_agreement());
    let t = Instant::now();
    report(4, "simulator/MDP consistency", t, c4_mode_consistency());
    let t = Instant::now();
    report(5, "stationary throughput oracle", t, c5_stationary_throughput());
    let t = Instant::now();
    let trends = trend_cells();
    report(6, "throughput trend", t, c6_throughput_trend(&trends));
    let t = Instant::now();
    report(7, "fidelity trend", t, c7_fidelity_trend(&trends));
    let t = Instant::now();
    report(8, "jitter trend", t, c8_jitter_trend(&trends));
    let t = Instant::now();
    report(9, "property suites", t, c9_properties());
    let t = Instant::now();
    report(10, "sweep determinism", t, c10_determinism());
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
