//! Experiment configuration, loaded from TOML.
//!
//! ```toml
//! [env]
//! num_agents = 5          # pistons = ball positions
//! drift = 0.25            # probability that the ball moves at a step
//! obs_noise = 0.05        # observation flip probability
//! window_radius = 1       # piston k sees positions k-r ..= k+r
//! reward = "pistonball"   # +1 ball moves left, -1 right, 0 otherwise
//! belief_likelihood = "matched"   # "matched" | "flat_unseen" | "custom"
//! # custom_likelihood = [[[...S values...], [...]], ...]   # K x 2 x S
//! # initial_state = 0
//!
//! [graph]
//! kind = "ring"           # "ring" | "path" | "complete" | "custom"
//! # edges = [[0, 1], [1, 2]]           # custom only
//! # matrix = [[...], ...]              # custom only, row-major weights
//!
//! [social]
//! nu = 0.5                # sigma = nu / ln(1/drift) unless sigma is given
//! # sigma = 0.3
//! floor = 1e-12
//!
//! [learning]
//! gamma = 0.9
//! rho_min = 0.25
//! rho_max = 3.0
//! # consensus_rounds = 6  # default: 3 x graph diameter
//! q = 0.9995              # critic step decay
//! c1 = 50.0               # critic step sum target c1 / (drift ln(1/drift))
//! q_theta = 0.9995        # actor step decay
//! c2 = 100.0              # actor step sum
//! # beta0 = 0.05          # overrides the derived critic step
//! # beta_theta0 = 0.05    # overrides the derived actor step
//! behavior = "uniform"
//!
//! [run]
//! horizon = 20000
//! num_runs = 10
//! base_seed = 1
//! output = "out"
//! record_stride = 50
//! error_window = 100
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actor_critic::{BehaviorPolicy, RatioBounds, Schedule, StepSizes};
use crate::beliefs::{choose_sigma, AslParams, DEFAULT_FLOOR};
use crate::env::{Environment, LikelihoodKind, Pistonball};
use crate::error::{Error, Result};
use crate::sim::{BeliefSource, LearnerConfig};
use crate::topology::{build_graph, metropolis_rule, CombinationMatrix, Graph, GraphKind};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub graph: GraphConfig,
    pub social: SocialConfig,
    pub learning: LearningConfig,
    pub run: RunConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardRule {
    /// +1 when the ball moves left, −1 when it moves right, shared by all agents.
    #[default]
    Pistonball,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefTable {
    #[default]
    Matched,
    FlatUnseen,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub num_agents: usize,
    pub drift: f64,
    pub obs_noise: f64,
    pub window_radius: usize,
    pub reward: RewardRule,
    pub belief_likelihood: BeliefTable,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub custom_likelihood: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            num_agents: 5,
            drift: 0.25,
            obs_noise: 0.05,
            window_radius: 1,
            reward: RewardRule::Pistonball,
            belief_likelihood: BeliefTable::Matched,
            custom_likelihood: None,
            initial_state: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphShape {
    #[default]
    Ring,
    Path,
    Complete,
    Custom,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: GraphShape,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocialConfig {
    pub nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub floor: f64,
}

impl Default for SocialConfig {
    fn default() -> Self {
        SocialConfig {
            nu: 0.5,
            sigma: None,
            floor: DEFAULT_FLOOR,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    #[default]
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub gamma: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus_rounds: Option<usize>,
    pub q: f64,
    pub c1: f64,
    pub q_theta: f64,
    pub c2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_theta0: Option<f64>,
    pub behavior: BehaviorKind,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            gamma: 0.9,
            rho_min: 0.25,
            rho_max: 3.0,
            consensus_rounds: None,
            q: 0.9995,
            c1: 50.0,
            q_theta: 0.9995,
            c2: 100.0,
            beta0: None,
            beta_theta0: None,
            behavior: BehaviorKind::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub num_runs: usize,
    pub base_seed: u64,
    pub output: String,
    /// Keep every `record_stride`-th step in the CSV (the last step is
    /// always kept).
    pub record_stride: usize,
    /// Trailing window for the empirical error probability.
    pub error_window: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            horizon: 20_000,
            num_runs: 10,
            base_seed: 1,
            output: "out".into(),
            record_stride: 50,
            error_window: 100,
        }
    }
}

/// Everything needed to simulate one configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub env: Pistonball,
    pub graph: Graph,
    pub combination: CombinationMatrix,
    /// Learner settings for the estimated-belief arm.
    pub learner: LearnerConfig,
    pub horizon: usize,
    pub record_stride: usize,
    pub error_window: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Copy with a different drift; everything derived from the drift
    /// follows unless it was set explicitly.
    pub fn with_drift(&self, drift: f64) -> Self {
        let mut cfg = self.clone();
        cfg.env.drift = drift;
        cfg
    }

    pub fn likelihood_kind(&self) -> Result<LikelihoodKind> {
        match (self.env.belief_likelihood, &self.env.custom_likelihood) {
            (BeliefTable::Matched, None) => Ok(LikelihoodKind::Matched),
            (BeliefTable::FlatUnseen, None) => Ok(LikelihoodKind::FlatUnseen),
            (BeliefTable::Custom, Some(t)) => Ok(LikelihoodKind::Custom(t.clone())),
            (BeliefTable::Custom, None) => Err(Error::Config(
                "belief_likelihood = \"custom\" needs env.custom_likelihood".into(),
            )),
            (_, Some(_)) => Err(Error::Config(
                "env.custom_likelihood is only read with belief_likelihood = \"custom\"".into(),
            )),
        }
    }

    pub fn build_env(&self) -> Result<Pistonball> {
        let e = &self.env;
        Pistonball::new(
            e.num_agents,
            e.drift,
            e.obs_noise,
            e.window_radius,
            &self.likelihood_kind()?,
        )?
        .with_initial_state(e.initial_state)
    }

    /// Graph and combination matrix. The matrix is only checked for shape and
    /// sign here; the validators report on the rest.
    pub fn build_topology(&self) -> Result<(Graph, CombinationMatrix)> {
        let k = self.env.num_agents;
        let g = &self.graph;
        if g.kind != GraphShape::Custom && (g.edges.is_some() || g.matrix.is_some()) {
            return Err(Error::Config(
                "graph.edges and graph.matrix need kind = \"custom\"".into(),
            ));
        }
        let kind = match g.kind {
            GraphShape::Ring => GraphKind::Ring,
            GraphShape::Path => GraphKind::Path,
            GraphShape::Complete => GraphKind::Complete,
            GraphShape::Custom => match (&g.edges, &g.matrix) {
                (Some(edges), None) => GraphKind::Custom(edges.iter().map(|e| (e[0], e[1])).collect()),
                (None, Some(rows)) => {
                    let c = CombinationMatrix::from_rows_unchecked(rows)?;
                    if c.num_agents() != k {
                        return Err(Error::Config(format!(
                            "graph.matrix is {0}x{0}, expected {k}x{k}",
                            c.num_agents()
                        )));
                    }
                    let mut pairs = Vec::new();
                    for i in 0..k {
                        for j in i..k {
                            if c.get(i, j) > 0.0 || c.get(j, i) > 0.0 {
                                pairs.push((i, j));
                            }
                        }
                    }
                    return Ok((Graph::from_edges(k, &pairs, true)?, c));
                }
                _ => {
                    return Err(Error::Config(
                        "custom graphs need exactly one of graph.edges or graph.matrix".into(),
                    ))
                }
            },
        };
        let graph = build_graph(&kind, k)?;
        let c = metropolis_rule(&graph);
        Ok((graph, c))
    }

    pub fn sigma(&self) -> Result<f64> {
        match self.social.sigma {
            Some(s) => Ok(s),
            None => choose_sigma(self.env.drift, self.social.nu),
        }
    }

    pub fn step_sizes(&self) -> Result<StepSizes> {
        let l = &self.learning;
        let derived = || {
            StepSizes::from_targets(self.env.drift, l.q, l.c1, l.q_theta, l.c2, l.rho_max)
        };
        let critic = match l.beta0 {
            Some(b) => Schedule {
                initial: b,
                decay: l.q,
            },
            None => derived()?.critic,
        };
        let actor = match l.beta_theta0 {
            Some(b) => Schedule {
                initial: b,
                decay: l.q_theta,
            },
            None => Schedule {
                initial: l.c2 * (1.0 - l.q_theta),
                decay: l.q_theta,
            },
        };
        for (name, s) in [("critic", critic), ("actor", actor)] {
            if !(s.initial >= 0.0 && s.initial.is_finite() && s.decay > 0.0 && s.decay <= 1.0) {
                return Err(Error::Config(format!(
                    "{name} step size {} with decay {} is not usable",
                    s.initial, s.decay
                )));
            }
        }
        Ok(StepSizes { critic, actor })
    }

    /// Critic projection radius `10 R_max / (1 − γ)`.
    pub fn critic_guard(&self, reward_bound: f64) -> f64 {
        10.0 * reward_bound / (1.0 - self.learning.gamma)
    }

    pub fn consensus_rounds(&self, graph: &Graph) -> usize {
        self.learning.consensus_rounds.unwrap_or_else(|| {
            3 * graph
                .diameter()
                .unwrap_or(graph.num_agents().saturating_sub(1))
                .max(1)
        })
    }

    pub fn learner(&self, env: &Pistonball, graph: &Graph) -> Result<LearnerConfig> {
        let l = &self.learning;
        if !(l.gamma > 0.0 && l.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} must lie in (0, 1)", l.gamma)));
        }
        Ok(LearnerConfig {
            gamma: l.gamma,
            bounds: RatioBounds::new(l.rho_min, l.rho_max)?,
            steps: self.step_sizes()?,
            consensus_rounds: self.consensus_rounds(graph),
            guard: self.critic_guard(env.reward_bound()),
            behavior: match l.behavior {
                BehaviorKind::Uniform => BehaviorPolicy::Uniform,
            },
            asl: AslParams::new(self.sigma()?, self.social.floor, env.num_states())?,
            source: BeliefSource::Estimated,
        })
    }

    /// Builds a runnable experiment. The combination matrix must be doubly
    /// stochastic here; connectivity is left to the validators.
    pub fn build(&self) -> Result<Experiment> {
        let env = self.build_env()?;
        let (graph, c) = self.build_topology()?;
        let combination = CombinationMatrix::from_rows(&c.rows())?;
        let learner = self.learner(&env, &graph)?;
        if self.run.horizon == 0 {
            return Err(Error::Config("run.horizon must be positive".into()));
        }
        if self.run.record_stride == 0 {
            return Err(Error::Config("run.record_stride must be positive".into()));
        }
        if self.run.error_window == 0 {
            return Err(Error::Config("run.error_window must be positive".into()));
        }
        Ok(Experiment {
            env,
            graph,
            combination,
            learner,
            horizon: self.run.horizon,
            record_stride: self.run.record_stride,
            error_window: self.run.error_window,
        })
    }

    /// Seeds of the configured runs: `base_seed, base_seed + 1, ...`.
    pub fn seeds(&self, count: usize) -> Vec<u64> {
        (0..count as u64).map(|i| self.run.base_seed.wrapping_add(i)).collect()
    }
}
