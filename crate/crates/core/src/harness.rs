//! Paired runs of the estimated-belief learner against the full-observability
//! learner, metrics, sweeps and CSV output.
//!
//! Both arms of a paired run start from the same parameters and draw from
//! their own copies of the same three random streams. With a uniform behavior
//! policy the actions do not depend on the beliefs, so both arms see the same
//! states, actions and rewards at every step and differ only in the belief
//! features they learn from.
//!
//! Row `step = n` of a trace describes iteration `n` (zero-based): the state
//! `s_n`, the hard belief `μ_{k,n}` used to act, the reward `r_{k,n}`, and the
//! parameters after the iteration's updates.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::actor_critic::{ActorParams, CriticParams};
use crate::beliefs::{BeliefVector, ErrorWindow};
use crate::config::{Experiment, ExperimentConfig};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::sim::{marl_sl_step, BeliefSource, LearnerConfig, NetworkState, RngStreams, StepReport};

pub const CSV_HEADER: &str = "run_id,arm,step,agent,metric,value";
pub const SUMMARY_HEADER: &str = "eps,arm,metric,n,mean,stderr";
pub const RUNS_HEADER: &str = "run_id,eps,seed";

pub const TRACES_FILE: &str = "traces.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    /// Social-learning beliefs.
    Partial,
    /// True-state beliefs.
    Full,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::Partial, Arm::Full];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Partial => "partial",
            Arm::Full => "full",
        }
    }

    pub fn source(self) -> BeliefSource {
        match self {
            Arm::Partial => BeliefSource::Estimated,
            Arm::Full => BeliefSource::True,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    CumReward,
    Reward,
    TrueState,
    HardState,
    SoftBeliefEntropy,
    PErrorWindow,
    ConsensusDisagreement,
    CriticGap,
    ActorGap,
    RhoJointEst,
    RhoJointExact,
    Delta,
    OmegaNorm,
    ProjectionHits,
}

impl Metric {
    pub const ALL: [Metric; 14] = [
        Metric::CumReward,
        Metric::Reward,
        Metric::TrueState,
        Metric::HardState,
        Metric::SoftBeliefEntropy,
        Metric::PErrorWindow,
        Metric::ConsensusDisagreement,
        Metric::CriticGap,
        Metric::ActorGap,
        Metric::RhoJointEst,
        Metric::RhoJointExact,
        Metric::Delta,
        Metric::OmegaNorm,
        Metric::ProjectionHits,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::CumReward => "cum_reward",
            Metric::Reward => "reward",
            Metric::TrueState => "true_state",
            Metric::HardState => "hard_state",
            Metric::SoftBeliefEntropy => "soft_belief_entropy",
            Metric::PErrorWindow => "p_error_window",
            Metric::ConsensusDisagreement => "consensus_disagreement",
            Metric::CriticGap => "critic_gap",
            Metric::ActorGap => "actor_gap",
            Metric::RhoJointEst => "rho_joint_est",
            Metric::RhoJointExact => "rho_joint_exact",
            Metric::Delta => "delta",
            Metric::OmegaNorm => "omega_norm",
            Metric::ProjectionHits => "projection_hits",
        }
    }

    pub fn parse(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.as_str() == name)
    }

    /// Network-level metrics are logged with agent `-1`.
    pub fn is_network(self) -> bool {
        matches!(
            self,
            Metric::CumReward
                | Metric::TrueState
                | Metric::ConsensusDisagreement
                | Metric::CriticGap
                | Metric::RhoJointExact
                | Metric::ProjectionHits
        )
    }

    /// Gaps compare the two arms and are logged on the partial arm only.
    pub fn is_gap(self) -> bool {
        matches!(self, Metric::CriticGap | Metric::ActorGap)
    }
}

/// One long-format metrics row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub run_id: usize,
    pub arm: Arm,
    pub step: usize,
    /// `None` for network-level metrics.
    pub agent: Option<usize>,
    pub metric: Metric,
    pub value: f64,
}

impl TraceRecord {
    pub fn write_csv(&self, out: &mut String) {
        let agent = self.agent.map_or(-1, |a| a as i64);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            self.run_id,
            self.arm.as_str(),
            self.step,
            agent,
            self.metric.as_str(),
            format_value(self.value)
        );
    }
}

/// 17 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Parameters of one arm at a recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub omega: Vec<CriticParams>,
    pub theta: Vec<ActorParams>,
}

/// Per-step series of one arm. Per-agent series are flattened step-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ArmTrace {
    pub num_agents: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub hard_states: Vec<usize>,
    pub cum_reward: Vec<f64>,
    pub consensus_disagreement: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub projection_hits: u64,
    /// Steps on which a structural invariant failed, with the first message.
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl ArmTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn hard_state(&self, step: usize, agent: usize) -> usize {
        self.hard_states[step * self.num_agents + agent]
    }

    pub fn step_actions(&self, step: usize) -> &[usize] {
        &self.actions[step * self.num_agents..(step + 1) * self.num_agents]
    }

    pub fn step_rewards(&self, step: usize) -> &[f64] {
        &self.rewards[step * self.num_agents..(step + 1) * self.num_agents]
    }

    pub fn terminal(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedRunResult {
    pub run_id: usize,
    pub seed: u64,
    pub drift: f64,
    pub partial: ArmTrace,
    pub full: ArmTrace,
    pub records: Vec<TraceRecord>,
}

impl PairedRunResult {
    pub fn arm(&self, arm: Arm) -> &ArmTrace {
        match arm {
            Arm::Partial => &self.partial,
            Arm::Full => &self.full,
        }
    }

    /// Values of one metric at one recorded step, agents in order.
    pub fn values(&self, arm: Arm, step: usize, metric: Metric) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.arm == arm && r.step == step && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn last_step(&self) -> usize {
        self.partial.len().saturating_sub(1)
    }
}

/// `sqrt(Σ_k ‖ω_k − ω̄‖²)`.
pub fn consensus_disagreement(omega: &[CriticParams]) -> f64 {
    let mean = centroid(omega);
    omega.iter().map(|w| sq_dist(&w.0, &mean)).sum::<f64>().sqrt()
}

/// `‖W* − 1 ⊗ ω̄‖`: full-arm critic stack against the partial-arm average.
pub fn critic_gap(full: &[CriticParams], partial: &[CriticParams]) -> f64 {
    let mean = centroid(partial);
    full.iter().map(|w| sq_dist(&w.0, &mean)).sum::<f64>().sqrt()
}

/// `‖θ*_k − θ_k‖` per agent.
pub fn actor_gaps(full: &[ActorParams], partial: &[ActorParams]) -> Vec<f64> {
    full.iter().zip(partial).map(|(a, b)| a.distance(b)).collect()
}

fn centroid(omega: &[CriticParams]) -> Vec<f64> {
    let k = omega.len() as f64;
    let mut c = vec![0.0; omega.first().map_or(0, |w| w.0.len())];
    for w in omega {
        for (ci, wi) in c.iter_mut().zip(&w.0) {
            *ci += wi / k;
        }
    }
    c
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSeries {
    pub steps: Vec<usize>,
    /// Disagreement of the partial-arm critics.
    pub consensus_disagreement: Vec<f64>,
    pub critic_gap: Vec<f64>,
    /// `actor_gap[i][k]` at `steps[i]`.
    pub actor_gap: Vec<Vec<f64>>,
}

/// Gap series over the recorded snapshots of both arms.
pub fn compute_gap_series(result: &PairedRunResult) -> Result<GapSeries> {
    let (p, f) = (&result.partial.snapshots, &result.full.snapshots);
    if p.len() != f.len() {
        return Err(Error::Internal(format!(
            "arms have {} and {} snapshots",
            p.len(),
            f.len()
        )));
    }
    let mut out = GapSeries {
        steps: Vec::with_capacity(p.len()),
        consensus_disagreement: Vec::with_capacity(p.len()),
        critic_gap: Vec::with_capacity(p.len()),
        actor_gap: Vec::with_capacity(p.len()),
    };
    for (sp, sf) in p.iter().zip(f) {
        if sp.step != sf.step
            || sp.omega.len() != sf.omega.len()
            || sp.theta.len() != sf.theta.len()
        {
            return Err(Error::Internal(format!(
                "snapshot mismatch at steps {} and {}",
                sp.step, sf.step
            )));
        }
        out.steps.push(sp.step);
        out.consensus_disagreement.push(consensus_disagreement(&sp.omega));
        out.critic_gap.push(critic_gap(&sf.omega, &sp.omega));
        out.actor_gap.push(actor_gaps(&sf.theta, &sp.theta));
    }
    Ok(out)
}

/// Builds the experiment from `cfg` and runs one paired run with id 0.
pub fn run_paired(cfg: &ExperimentConfig, seed: u64) -> Result<PairedRunResult> {
    let exp = cfg.build()?;
    run_paired_experiment(&exp, seed, 0)
}

struct ArmRunner {
    arm: Arm,
    net: NetworkState,
    rngs: RngStreams,
    learner: LearnerConfig,
    windows: Vec<ErrorWindow>,
    trace: ArmTrace,
    cum_reward: f64,
}

impl ArmRunner {
    fn new(exp: &Experiment, arm: Arm, seed: u64) -> Self {
        let mut rngs = RngStreams::from_seed(seed);
        let net = NetworkState::new(&exp.env, arm.source(), &mut rngs);
        let mut learner = exp.learner.clone();
        learner.source = arm.source();
        let k = exp.env.num_agents();
        ArmRunner {
            arm,
            net,
            rngs,
            learner,
            windows: vec![ErrorWindow::new(exp.error_window); k],
            trace: ArmTrace {
                num_agents: k,
                ..ArmTrace::default()
            },
            cum_reward: 0.0,
        }
    }

    fn step(&mut self, exp: &Experiment) -> Result<(StepReport, Vec<f64>)> {
        let soft_before: Vec<BeliefVector> = self.net.soft.clone();
        let rep = marl_sl_step(&mut self.net, &exp.env, &exp.combination, &self.learner, &mut self.rngs)?;
        self.cum_reward += rep.target_reward;
        let p_err: Vec<f64> = rep
            .hard_states
            .iter()
            .zip(self.windows.iter_mut())
            .map(|(&h, w)| w.push(h != rep.state))
            .collect();

        let t = &mut self.trace;
        t.states.push(rep.state);
        t.actions.extend_from_slice(&rep.actions);
        t.rewards.extend_from_slice(&rep.rewards);
        t.hard_states.extend_from_slice(&rep.hard_states);
        t.cum_reward.push(self.cum_reward);
        t.consensus_disagreement.push(consensus_disagreement(&self.net.omega));
        t.projection_hits = self.net.projection_hits;

        if let Some(msg) = invariant_violation(exp, &self.learner, &soft_before, &self.net, &rep) {
            t.violations += 1;
            if t.first_violation.is_none() {
                t.first_violation = Some(format!("{} arm, step {}: {msg}", self.arm.as_str(), rep.step));
            }
        }
        Ok((rep, p_err))
    }

    fn snapshot(&self, step: usize) -> Snapshot {
        Snapshot {
            step,
            omega: self.net.omega.clone(),
            theta: self.net.theta.clone(),
        }
    }
}

/// Simplex, flooring, hard-belief, reward and ratio checks for one step.
fn invariant_violation(
    exp: &Experiment,
    learner: &LearnerConfig,
    soft_before: &[BeliefVector],
    net: &NetworkState,
    rep: &StepReport,
) -> Option<String> {
    let floor = learner.asl.floor;
    for (k, b) in soft_before.iter().chain(&net.soft).enumerate() {
        if !b.is_on_simplex(1e-9) {
            return Some(format!("soft belief {k} leaves the simplex"));
        }
        if b.as_slice().iter().any(|&p| p < floor * (1.0 - 1e-9)) {
            return Some(format!("soft belief {k} falls below the floor"));
        }
    }
    if let Some(m) = net.mu.iter().find(|m| !m.is_hard()) {
        return Some(format!("hard belief {:?} is not a basis vector", m.as_slice()));
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    if let Some(e) = rep
        .belief_errors
        .iter()
        .find(|&&e| e != 0.0 && (e - sqrt2).abs() > 1e-12)
    {
        return Some(format!("belief error {e} is neither 0 nor sqrt 2"));
    }
    let bound = exp.env.reward_bound();
    if let Some(r) = rep.rewards.iter().find(|r| r.abs() > bound) {
        return Some(format!("reward {r} exceeds the bound {bound}"));
    }
    let k = exp.env.num_agents() as i32;
    let (lo, hi) = (learner.bounds.rho_min.powi(k), learner.bounds.rho_max.powi(k));
    let tol = 1e-12 * hi;
    if let Some(r) = rep
        .rho_joint_est
        .iter()
        .chain(std::iter::once(&rep.rho_joint_exact))
        .find(|&&r| !(r >= lo - tol && r <= hi + tol))
    {
        return Some(format!("joint ratio {r} outside [{lo}, {hi}]"));
    }
    None
}

/// Runs both arms in lockstep for the configured horizon.
pub fn run_paired_experiment(exp: &Experiment, seed: u64, run_id: usize) -> Result<PairedRunResult> {
    let mut arms = [
        ArmRunner::new(exp, Arm::Partial, seed),
        ArmRunner::new(exp, Arm::Full, seed),
    ];
    let horizon = exp.horizon;
    let mut records = Vec::new();
    for n in 0..horizon {
        let (rep_p, err_p) = arms[0].step(exp)?;
        let (rep_f, err_f) = arms[1].step(exp)?;
        if n % exp.record_stride == 0 || n + 1 == horizon {
            let snaps = [arms[0].snapshot(n), arms[1].snapshot(n)];
            let gaps = (
                critic_gap(&snaps[1].omega, &snaps[0].omega),
                actor_gaps(&snaps[1].theta, &snaps[0].theta),
            );
            for (i, (rep, p_err)) in [(&rep_p, &err_p), (&rep_f, &err_f)].into_iter().enumerate() {
                let runner = &arms[i];
                emit_records(&mut records, run_id, runner, rep, p_err, &snaps[i], (i == 0).then_some(&gaps));
            }
            let [a, b] = snaps;
            arms[0].trace.snapshots.push(a);
            arms[1].trace.snapshots.push(b);
        }
    }
    let [p, f] = arms;
    Ok(PairedRunResult {
        run_id,
        seed,
        drift: exp.env.drift(),
        partial: p.trace,
        full: f.trace,
        records,
    })
}

fn emit_records(
    out: &mut Vec<TraceRecord>,
    run_id: usize,
    runner: &ArmRunner,
    rep: &StepReport,
    p_err: &[f64],
    snap: &Snapshot,
    gaps: Option<&(f64, Vec<f64>)>,
) {
    let step = rep.step;
    let arm = runner.arm;
    let t = &runner.trace;
    let k = snap.omega.len();
    let mut push = |agent: Option<usize>, metric: Metric, value: f64| {
        out.push(TraceRecord {
            run_id,
            arm,
            step,
            agent,
            metric,
            value,
        })
    };
    for metric in Metric::ALL {
        if metric.is_gap() && gaps.is_none() {
            continue;
        }
        if metric.is_network() {
            let v = match metric {
                Metric::CumReward => runner.cum_reward,
                Metric::TrueState => rep.state as f64,
                Metric::ConsensusDisagreement => *t.consensus_disagreement.last().unwrap(),
                Metric::CriticGap => gaps.map_or(0.0, |g| g.0),
                Metric::RhoJointExact => rep.rho_joint_exact,
                Metric::ProjectionHits => t.projection_hits as f64,
                _ => unreachable!(),
            };
            push(None, metric, v);
        } else {
            for a in 0..k {
                let v = match metric {
                    Metric::Reward => rep.rewards[a],
                    Metric::HardState => rep.hard_states[a] as f64,
                    Metric::SoftBeliefEntropy => rep.soft_entropy[a],
                    Metric::PErrorWindow => p_err[a],
                    Metric::ActorGap => gaps.map_or(0.0, |g| g.1[a]),
                    Metric::RhoJointEst => rep.rho_joint_est[a],
                    Metric::Delta => rep.deltas[a],
                    Metric::OmegaNorm => snap.omega[a].norm(),
                    _ => unreachable!(),
                };
                push(Some(a), metric, v);
            }
        }
    }
}

/// Paired runs over `drifts × seeds`. Run ids enumerate drifts first, then
/// seeds; all drifts share the same seeds.
pub fn run_sweep(cfg: &ExperimentConfig, drifts: &[f64], seeds: &[u64]) -> Result<Vec<PairedRunResult>> {
    let exps: Vec<Experiment> = drifts
        .iter()
        .map(|&d| cfg.with_drift(d).build())
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize, u64)> = (0..drifts.len())
        .flat_map(|i| seeds.iter().copied().map(move |s| (i, s)))
        .enumerate()
        .map(|(id, (i, s))| (id, i, s))
        .collect();
    jobs.par_iter()
        .map(|&(id, i, seed)| run_paired_experiment(&exps[i], seed, id))
        .collect()
}

pub fn write_traces<W: Write>(mut w: W, runs: &[PairedRunResult]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    let mut buf = String::new();
    for run in runs {
        for r in &run.records {
            buf.clear();
            r.write_csv(&mut buf);
            w.write_all(buf.as_bytes())?;
        }
    }
    w.flush()
}

pub fn write_runs<W: Write>(mut w: W, runs: &[PairedRunResult]) -> io::Result<()> {
    writeln!(w, "{RUNS_HEADER}")?;
    for r in runs {
        writeln!(w, "{},{},{}", r.run_id, r.drift, r.seed)?;
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub drift: f64,
    pub arm: Arm,
    pub metric: Metric,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over runs divided by `sqrt(n)`; NaN for a
    /// single run.
    pub stderr: f64,
}

/// Per-run value of a metric: the terminal-step value, averaged over agents
/// for per-agent metrics.
pub fn terminal_value(run: &PairedRunResult, arm: Arm, metric: Metric) -> Option<f64> {
    let vals = run.values(arm, run.last_step(), metric);
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error over runs of every terminal metric, grouped by
/// drift in order of first appearance.
pub fn summarize(runs: &[PairedRunResult]) -> Vec<SummaryRow> {
    let mut drifts: Vec<f64> = Vec::new();
    for r in runs {
        if !drifts.contains(&r.drift) {
            drifts.push(r.drift);
        }
    }
    let mut rows = Vec::new();
    for &drift in &drifts {
        let group: Vec<&PairedRunResult> = runs.iter().filter(|r| r.drift == drift).collect();
        for arm in Arm::ALL {
            for metric in Metric::ALL {
                let xs: Vec<f64> = group
                    .iter()
                    .filter_map(|r| terminal_value(r, arm, metric))
                    .collect();
                if xs.is_empty() {
                    continue;
                }
                let (mean, stderr) = mean_stderr(&xs);
                rows.push(SummaryRow {
                    drift,
                    arm,
                    metric,
                    n: xs.len(),
                    mean,
                    stderr,
                });
            }
        }
    }
    rows
}

pub fn write_summary<W: Write>(mut w: W, rows: &[SummaryRow]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.drift,
            r.arm.as_str(),
            r.metric.as_str(),
            r.n,
            format_value(r.mean),
            format_value(r.stderr)
        )?;
    }
    w.flush()
}

/// Writes `traces.csv`, `runs.csv`, `summary.csv` and the resolved
/// `config.toml` into `dir`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, runs: &[PairedRunResult]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| fs::File::create(dir.join(name)).map(BufWriter::new);
    write_traces(create(TRACES_FILE)?, runs)?;
    write_runs(create(RUNS_FILE)?, runs)?;
    write_summary(create(SUMMARY_FILE)?, &summarize(runs))?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml_string())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.run.horizon = 200;
        cfg.run.record_stride = 50;
        cfg
    }

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::parse(m.as_str()), Some(m));
        }
        assert_eq!(Metric::parse("bogus"), None);
    }

    #[test]
    fn value_format_has_17_digits() {
        assert_eq!(format_value(0.1), "1.0000000000000001e-1");
        assert_eq!(format_value(-2.0), "-2.0000000000000000e0");
        let v = 1.0 / 3.0;
        assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn record_rows() {
        let mut s = String::new();
        TraceRecord {
            run_id: 3,
            arm: Arm::Full,
            step: 7,
            agent: None,
            metric: Metric::TrueState,
            value: 2.0,
        }
        .write_csv(&mut s);
        assert_eq!(s, "3,full,7,-1,true_state,2.0000000000000000e0\n");
    }

    #[test]
    fn hand_built_gaps() {
        let snap = |step, w: [[f64; 2]; 2], t: [f64; 2]| Snapshot {
            step,
            omega: w.iter().map(|v| CriticParams(v.to_vec())).collect(),
            theta: t
                .iter()
                .map(|&x| ActorParams::from_rows(&[vec![x, 0.0], vec![0.0, 0.0]]).unwrap())
                .collect(),
        };
        let mut r = run_paired(&small_cfg(), 1).unwrap();
        r.partial.snapshots = vec![snap(0, [[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0]), snap(1, [[1.0, 0.0], [-1.0, 0.0]], [1.0, 2.0])];
        r.full.snapshots = vec![snap(0, [[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0]), snap(1, [[3.0, 4.0], [0.0, 0.0]], [1.0, -1.0])];
        let g = compute_gap_series(&r).unwrap();
        assert_eq!(g.steps, vec![0, 1]);
        assert_eq!(g.critic_gap, vec![0.0, 5.0]);
        assert_eq!(g.consensus_disagreement[1], 2f64.sqrt());
        assert_eq!(g.actor_gap[1], vec![0.0, 3.0]);
        assert_eq!(g.actor_gap[0], vec![0.0, 0.0]);

        r.full.snapshots.pop();
        assert!(matches!(compute_gap_series(&r), Err(Error::Internal(_))));
    }

    #[test]
    fn gaps_invariant_to_relabeling() {
        let r = run_paired(&small_cfg(), 4).unwrap();
        let g = compute_gap_series(&r).unwrap();
        let mut s = r.clone();
        for arm in [&mut s.partial, &mut s.full] {
            for snap in &mut arm.snapshots {
                snap.omega.reverse();
                snap.theta.reverse();
            }
        }
        let h = compute_gap_series(&s).unwrap();
        for i in 0..g.steps.len() {
            assert!((g.critic_gap[i] - h.critic_gap[i]).abs() < 1e-12);
            let mut rev = h.actor_gap[i].clone();
            rev.reverse();
            assert_eq!(g.actor_gap[i], rev);
        }
    }

    #[test]
    fn arms_are_coupled() {
        let r = run_paired(&small_cfg(), 11).unwrap();
        assert_eq!(r.partial.states, r.full.states);
        assert_eq!(r.partial.actions, r.full.actions);
        assert_eq!(r.partial.rewards, r.full.rewards);
        assert_eq!(r.partial.violations, 0, "{:?}", r.partial.first_violation);
        assert_eq!(r.full.violations, 0, "{:?}", r.full.first_violation);
    }

    #[test]
    fn recorded_steps() {
        let r = run_paired(&small_cfg(), 2).unwrap();
        let steps: Vec<usize> = r.partial.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 50, 100, 150, 199]);
        // 6 network + 8 x 5 agent rows on the partial arm, 5 + 7 x 5 on the full arm.
        assert_eq!(r.records.len(), 5 * (46 + 40));
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(mean_stderr(&[1.0]).1.is_nan());
    }
}
