//! One iteration of the coupled social-learning / actor-critic loop.
//!
//! Per step `n`, in order:
//!
//! 1. every agent draws `a_{k,n}` from its behavior policy given `μ_{k,n}`;
//! 2. the environment moves to `s_{n+1}` and pays `r_{k,n}`;
//! 3. agents observe `ξ_{k,n+1}` and run one belief round, giving `η_{k,n}`;
//! 4. individual ratios are averaged in the log domain for `T` rounds;
//! 5. TD error, local critic step, score function and actor step per agent;
//! 6. one diffusion round on the critics;
//! 7. `μ_{k,n+1} ← η_{k,n}`.
//!
//! The full-observability arm runs the same code with `μ*`, `η*` (basis
//! vectors of the true states) in place of the estimates.
//!
//! # Random streams
//!
//! A run seed `seed` yields three ChaCha20 streams, all keyed by
//! `ChaCha20Rng::seed_from_u64(seed)` and separated with `set_stream`:
//! transition = 1, observation = 2, action = 3. The transition stream also
//! draws the initial state. Each agent consumes exactly one `f64` per step
//! from the action and observation streams, and the environment one per step
//! from the transition stream, regardless of the values drawn.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::actor_critic::{
    actor_update, critic_diffuse, critic_local_update, individual_ratio, log_policy_grad,
    boltzmann_policy, ratio_consensus, td_error, ActorParams, BehaviorPolicy, CriticParams,
    RatioBounds, StepSizes,
};
use crate::beliefs::{network_belief_step, AslParams, BeliefVector};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::topology::CombinationMatrix;

pub const STREAM_TRANSITION: u64 = 1;
pub const STREAM_OBSERVATION: u64 = 2;
pub const STREAM_ACTION: u64 = 3;

/// Independent random streams for one run.
#[derive(Clone, Debug)]
pub struct RngStreams {
    pub transition: ChaCha20Rng,
    pub observation: ChaCha20Rng,
    pub action: ChaCha20Rng,
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        RngStreams {
            transition: stream(STREAM_TRANSITION),
            observation: stream(STREAM_OBSERVATION),
            action: stream(STREAM_ACTION),
        }
    }
}

/// Where the learner's features come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeliefSource {
    /// Hard-assigned social-learning beliefs.
    Estimated,
    /// Basis vectors of the true state.
    True,
}

#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub bounds: RatioBounds,
    pub steps: StepSizes,
    pub consensus_rounds: usize,
    /// Radius of the ball the critic parameters are projected onto.
    pub guard: f64,
    pub behavior: BehaviorPolicy,
    pub asl: AslParams,
    pub source: BeliefSource,
}

/// Network-wide learner and belief state between steps.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub step: usize,
    /// True state `s_n`.
    pub state: usize,
    /// Soft belief chain, one per agent.
    pub soft: Vec<BeliefVector>,
    /// Hard beliefs `μ_{k,n}` used as features at step `n`.
    pub mu: Vec<BeliefVector>,
    pub omega: Vec<CriticParams>,
    pub theta: Vec<ActorParams>,
    /// Cumulative number of critic projections.
    pub projection_hits: u64,
}

impl NetworkState {
    /// Zero parameters, uniform soft beliefs, and the initial state drawn
    /// from the transition stream. Estimated hard beliefs start at the
    /// argmax of the uniform belief, i.e. state 0.
    pub fn new<E: Environment>(env: &E, source: BeliefSource, rngs: &mut RngStreams) -> Self {
        let k = env.num_agents();
        let s = env.num_states();
        let state = env.initial_state(&mut rngs.transition);
        let mu_index = match source {
            BeliefSource::Estimated => 0,
            BeliefSource::True => state,
        };
        NetworkState {
            step: 0,
            state,
            soft: vec![BeliefVector::uniform(s); k],
            mu: vec![BeliefVector::basis(s, mu_index); k],
            omega: vec![CriticParams::zeros(s); k],
            theta: vec![ActorParams::zeros(env.num_actions(), s); k],
            projection_hits: 0,
        }
    }

    pub fn num_agents(&self) -> usize {
        self.omega.len()
    }

    /// Network average of the critic parameters.
    pub fn omega_centroid(&self) -> Vec<f64> {
        let k = self.omega.len() as f64;
        let mut c = vec![0.0; self.omega[0].0.len()];
        for w in &self.omega {
            for (ci, wi) in c.iter_mut().zip(&w.0) {
                *ci += wi / k;
            }
        }
        c
    }
}

/// Everything observed during one step, for metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub state: usize,
    pub next_state: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `argmax μ_{k,n}` used at this step.
    pub hard_states: Vec<usize>,
    /// `‖μ*_n − μ_{k,n}‖`.
    pub belief_errors: Vec<f64>,
    /// Entropy of the soft belief behind `μ_{k,n}`.
    pub soft_entropy: Vec<f64>,
    pub individual_ratios: Vec<f64>,
    pub rho_joint_est: Vec<f64>,
    pub rho_joint_exact: f64,
    pub deltas: Vec<f64>,
    pub projections: usize,
    /// Expected network-average reward of the target policies at `s_n`.
    pub target_reward: f64,
}

/// Runs one step of the loop and advances `net` to step `n + 1`.
pub fn marl_sl_step<E: Environment>(
    net: &mut NetworkState,
    env: &E,
    c: &CombinationMatrix,
    cfg: &LearnerConfig,
    rngs: &mut RngStreams,
) -> Result<StepReport> {
    let k = env.num_agents();
    let s_count = env.num_states();
    let a_count = env.num_actions();
    let n = net.step;
    let s = net.state;

    // act
    let mut actions = Vec::with_capacity(k);
    let mut behavior = Vec::with_capacity(k);
    for mu in &net.mu {
        let q = cfg.behavior.distribution(mu, a_count)?;
        let u: f64 = rngs.action.random();
        actions.push(sample_index(&q, u));
        behavior.push(q);
    }

    // environment
    let s_next = env.transition(s, &actions, &mut rngs.transition);
    let rewards: Vec<f64> = (0..k)
        .map(|i| env.reward(i, s, actions[i], s_next))
        .collect();
    let observations: Vec<usize> = (0..k)
        .map(|i| env.observe(i, s_next, &mut rngs.observation))
        .collect();

    // next-state beliefs η_{k,n}
    let soft_entropy: Vec<f64> = net.soft.iter().map(BeliefVector::entropy).collect();
    let eta = match cfg.source {
        BeliefSource::Estimated => {
            let (soft, hard) = network_belief_step(&net.soft, &observations, env, c, &cfg.asl)?;
            net.soft = soft;
            hard
        }
        BeliefSource::True => vec![BeliefVector::basis(s_count, s_next); k],
    };

    // importance ratios
    let targets: Vec<Vec<f64>> = net
        .mu
        .iter()
        .zip(&net.theta)
        .map(|(mu, theta)| boltzmann_policy(mu, theta))
        .collect::<Result<_>>()?;
    let target_reward = env.expected_reward(s, &targets);
    let individual: Vec<f64> = (0..k)
        .map(|i| individual_ratio(actions[i], &net.mu[i], &net.theta[i], &behavior[i], &cfg.bounds))
        .collect::<Result<_>>()?;
    let logs: Vec<f64> = individual.iter().map(|r| r.ln()).collect();
    let rho_joint_est: Vec<f64> = ratio_consensus(&logs, c, cfg.consensus_rounds)
        .into_iter()
        .map(|r| cfg.bounds.clip_joint(r, k))
        .collect();
    let rho_joint_exact = individual.iter().product::<f64>();

    // local critic and actor steps
    let beta = cfg.steps.critic.at(n);
    let beta_theta = cfg.steps.actor.at(n);
    let mut tilde = Vec::with_capacity(k);
    let mut deltas = Vec::with_capacity(k);
    let mut projections = 0;
    for i in 0..k {
        let mu = &net.mu[i];
        let delta = td_error(rewards[i], cfg.gamma, &net.omega[i], mu, &eta[i]);
        let (w, projected) =
            critic_local_update(&net.omega[i], beta, rho_joint_est[i], delta, mu, cfg.guard);
        projections += usize::from(projected);
        let psi = log_policy_grad(actions[i], mu, &net.theta[i])?;
        net.theta[i] = actor_update(&net.theta[i], beta_theta, rho_joint_est[i], delta, &psi);
        if !net.theta[i].is_finite() || !delta.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite learner state at step {n}, agent {i}"
            )));
        }
        tilde.push(w);
        deltas.push(delta);
    }
    net.omega = critic_diffuse(&tilde, c);
    net.projection_hits += projections as u64;

    let truth = BeliefVector::basis(s_count, s);
    let hard_states: Vec<usize> = net.mu.iter().map(BeliefVector::argmax).collect();
    let belief_errors: Vec<f64> = net.mu.iter().map(|m| truth.distance(m)).collect();

    net.mu = eta;
    net.state = s_next;
    net.step += 1;

    Ok(StepReport {
        step: n,
        state: s,
        next_state: s_next,
        actions,
        rewards,
        hard_states,
        belief_errors,
        soft_entropy,
        individual_ratios: individual,
        rho_joint_est,
        rho_joint_exact,
        deltas,
        projections,
        target_reward,
    })
}

/// Inverse-CDF sample from `probs` with a single uniform draw `u ∈ [0, 1)`.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
