//! Off-policy actor-critic primitives with linear features.
//!
//! Features are belief vectors: basis vectors in the full-observability arm,
//! hard-assigned social-learning beliefs otherwise. The value estimate is
//! `μᵀω`, the target policy is a Boltzmann distribution over `μᵀθ^a`.

use crate::beliefs::BeliefVector;
use crate::error::{Error, Result};
use crate::topology::CombinationMatrix;

/// Actor parameters `θ^a ∈ ℝ^S` for every action, stored action-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorParams {
    actions: usize,
    states: usize,
    theta: Vec<f64>,
}

impl ActorParams {
    pub fn zeros(actions: usize, states: usize) -> Self {
        ActorParams {
            actions,
            states,
            theta: vec![0.0; actions * states],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let actions = rows.len();
        let states = rows.first().map_or(0, Vec::len);
        if actions == 0 || states == 0 || rows.iter().any(|r| r.len() != states) {
            return Err(Error::Config("actor parameters must be a non-empty A×S matrix".into()));
        }
        Ok(ActorParams {
            actions,
            states,
            theta: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn num_states(&self) -> usize {
        self.states
    }

    pub fn action(&self, a: usize) -> &[f64] {
        &self.theta[a * self.states..(a + 1) * self.states]
    }

    pub fn action_mut(&mut self, a: usize) -> &mut [f64] {
        &mut self.theta[a * self.states..(a + 1) * self.states]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Frobenius distance.
    pub fn distance(&self, other: &ActorParams) -> f64 {
        self.theta
            .iter()
            .zip(&other.theta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Critic parameters `ω ∈ ℝ^S`.
#[derive(Clone, Debug, PartialEq)]
pub struct CriticParams(pub Vec<f64>);

impl CriticParams {
    pub fn zeros(states: usize) -> Self {
        CriticParams(vec![0.0; states])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn value(&self, features: &BeliefVector) -> f64 {
        dot(&self.0, features.as_slice())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Clipping interval for individual importance ratios.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioBounds {
    pub rho_min: f64,
    pub rho_max: f64,
}

impl RatioBounds {
    pub fn new(rho_min: f64, rho_max: f64) -> Result<Self> {
        if !(rho_min > 0.0 && rho_min <= 1.0 && rho_max >= 1.0 && rho_max.is_finite()) {
            return Err(Error::Config(format!(
                "ratio bounds must satisfy 0 < rho_min <= 1 <= rho_max, got [{rho_min}, {rho_max}]"
            )));
        }
        Ok(RatioBounds { rho_min, rho_max })
    }

    pub fn clip(&self, rho: f64) -> f64 {
        rho.clamp(self.rho_min, self.rho_max)
    }

    /// Clips a joint ratio of `k` agents into `[rho_min^k, rho_max^k]`.
    pub fn clip_joint(&self, rho: f64, k: usize) -> f64 {
        rho.clamp(self.rho_min.powi(k as i32), self.rho_max.powi(k as i32))
    }
}

/// Geometric step-size sequence `initial · decay^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub initial: f64,
    pub decay: f64,
}

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule {
            initial: value,
            decay: 1.0,
        }
    }

    #[inline]
    pub fn at(&self, n: usize) -> f64 {
        if self.decay == 1.0 {
            self.initial
        } else {
            self.initial * self.decay.powf(n as f64)
        }
    }

    /// Sum over all `n ≥ 0`; infinite for a non-decaying positive schedule.
    pub fn total(&self) -> f64 {
        if self.decay < 1.0 {
            self.initial / (1.0 - self.decay)
        } else if self.initial == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// Sum of the first `horizon` terms.
    pub fn partial_sum(&self, horizon: usize) -> f64 {
        if self.decay == 1.0 {
            self.initial * horizon as f64
        } else {
            self.initial * (1.0 - self.decay.powf(horizon as f64)) / (1.0 - self.decay)
        }
    }
}

/// Critic and actor learning-rate schedules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub critic: Schedule,
    pub actor: Schedule,
}

impl StepSizes {
    /// Geometric schedules whose sums hit the targets `c1 / (ε ln(1/ε))` and
    /// `c2`. The critic's first step is capped at `1/rho_max`.
    pub fn from_targets(
        drift: f64,
        critic_decay: f64,
        c1: f64,
        actor_decay: f64,
        c2: f64,
        rho_max: f64,
    ) -> Result<Self> {
        if !(drift > 0.0 && drift < 1.0) {
            return Err(Error::Config(format!(
                "drift {drift} must lie in (0, 1) to derive step sizes"
            )));
        }
        for (name, q) in [("q", critic_decay), ("q_theta", actor_decay)] {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!("{name} = {q} must lie in (0, 1)")));
            }
        }
        let beta0 = (1.0 - critic_decay) * c1 / (drift * (1.0 / drift).ln());
        Ok(StepSizes {
            critic: Schedule {
                initial: beta0.min(1.0 / rho_max),
                decay: critic_decay,
            },
            actor: Schedule {
                initial: c2 * (1.0 - actor_decay),
                decay: actor_decay,
            },
        })
    }

    pub fn frozen() -> Self {
        StepSizes {
            critic: Schedule::constant(0.0),
            actor: Schedule::constant(0.0),
        }
    }
}

/// Boltzmann policy `g(a|μ;θ) ∝ exp(μᵀθ^a)`, evaluated with max subtraction.
pub fn boltzmann_policy(mu: &BeliefVector, theta: &ActorParams) -> Result<Vec<f64>> {
    let logits: Vec<f64> = (0..theta.num_actions())
        .map(|a| dot(mu.as_slice(), theta.action(a)))
        .collect();
    softmax(&logits)
}

fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numeric("non-finite policy logit".into()));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

/// `∇_{θ^a} log g(a_taken | μ; θ) = μ (1{a = a_taken} − g(a|μ;θ))` for every `a`.
pub fn log_policy_grad(a_taken: usize, mu: &BeliefVector, theta: &ActorParams) -> Result<ActorParams> {
    let probs = boltzmann_policy(mu, theta)?;
    let mut grad = ActorParams::zeros(theta.num_actions(), theta.num_states());
    for (a, &p) in probs.iter().enumerate() {
        let coeff = f64::from(u8::from(a == a_taken)) - p;
        for (g, &m) in grad.action_mut(a).iter_mut().zip(mu.as_slice()) {
            *g = coeff * m;
        }
    }
    Ok(grad)
}

/// Individual importance ratio `g(a|μ;θ) / q(a|μ)`, clipped into the bounds.
pub fn individual_ratio(
    a_taken: usize,
    mu: &BeliefVector,
    theta: &ActorParams,
    behavior: &[f64],
    bounds: &RatioBounds,
) -> Result<f64> {
    let q = behavior.get(a_taken).copied().unwrap_or(0.0);
    if q <= 0.0 {
        return Err(Error::OffSupport { action: a_taken });
    }
    let g = boltzmann_policy(mu, theta)?[a_taken];
    Ok(bounds.clip(g / q))
}

/// Average-consensus on log-ratios for `rounds` iterations of `f ← C f`,
/// then `exp(K f_k)` at every agent.
pub fn ratio_consensus(log_ratios: &[f64], c: &CombinationMatrix, rounds: usize) -> Vec<f64> {
    let k = log_ratios.len() as f64;
    let mut f = log_ratios.to_vec();
    for _ in 0..rounds {
        f = c.apply(&f);
    }
    f.into_iter().map(|v| (k * v).exp()).collect()
}

/// `δ = r + γ ωᵀη − ωᵀμ`.
pub fn td_error(
    reward: f64,
    gamma: f64,
    omega: &CriticParams,
    mu: &BeliefVector,
    eta: &BeliefVector,
) -> f64 {
    reward + gamma * omega.value(eta) - omega.value(mu)
}

/// `ω̃ = ω + β ρ δ μ`, projected onto the ball of radius `guard`.
/// Returns the new parameters and whether the projection was active.
pub fn critic_local_update(
    omega: &CriticParams,
    beta: f64,
    rho: f64,
    delta: f64,
    mu: &BeliefVector,
    guard: f64,
) -> (CriticParams, bool) {
    let step = beta * rho * delta;
    let mut next: Vec<f64> = omega
        .0
        .iter()
        .zip(mu.as_slice())
        .map(|(w, m)| w + step * m)
        .collect();
    let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
    let projected = norm > guard;
    if projected {
        let scale = guard / norm;
        next.iter_mut().for_each(|v| *v *= scale);
    }
    (CriticParams(next), projected)
}

/// Diffusion step `ω_k = Σ_ℓ c_{ℓk} ω̃_ℓ`.
pub fn critic_diffuse(tilde: &[CriticParams], c: &CombinationMatrix) -> Vec<CriticParams> {
    let s = tilde.first().map_or(0, |w| w.0.len());
    (0..tilde.len())
        .map(|k| {
            let mut out = vec![0.0; s];
            for (l, w) in tilde.iter().enumerate() {
                let c_lk = c.get(l, k);
                if c_lk != 0.0 {
                    for (o, v) in out.iter_mut().zip(&w.0) {
                        *o += c_lk * v;
                    }
                }
            }
            CriticParams(out)
        })
        .collect()
}

/// `θ^a ← θ^a + β_θ ρ δ Ψ^a` for every action.
pub fn actor_update(
    theta: &ActorParams,
    beta_theta: f64,
    rho: f64,
    delta: f64,
    psi: &ActorParams,
) -> ActorParams {
    let step = beta_theta * rho * delta;
    let mut next = theta.clone();
    for (t, g) in next.theta.iter_mut().zip(&psi.theta) {
        *t += step * g;
    }
    next
}

/// Behavior policy `q(a | μ; χ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum BehaviorPolicy {
    Uniform,
    /// Boltzmann over fixed parameters `χ`.
    Boltzmann(ActorParams),
}

impl BehaviorPolicy {
    pub fn distribution(&self, mu: &BeliefVector, num_actions: usize) -> Result<Vec<f64>> {
        match self {
            BehaviorPolicy::Uniform => Ok(vec![1.0 / num_actions as f64; num_actions]),
            BehaviorPolicy::Boltzmann(chi) => boltzmann_policy(mu, chi),
        }
    }
}
