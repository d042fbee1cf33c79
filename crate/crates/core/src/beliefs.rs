//! Adaptive social learning over a network.
//!
//! One round per agent: a local Bayesian update whose prior is discounted by
//! the exponent `1 − σ`, then a weighted geometric average of the neighbours'
//! intermediate beliefs, then a hard assignment to the argmax state. All
//! combination arithmetic is done in the log domain.

use std::collections::VecDeque;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::topology::CombinationMatrix;

/// Default lower bound applied to every soft-belief entry.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Upper clamp for the adaptation parameter chosen from the drift.
pub const SIGMA_MAX: f64 = 0.99;

/// Probability vector over global states.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    /// Wraps `probs` after checking it lies on the simplex (within `1e-12`).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let b = BeliefVector(probs);
        if b.0.is_empty() || !b.is_on_simplex(1e-12) {
            return Err(Error::Numeric(format!("{:?} is not a probability vector", b.0)));
        }
        Ok(b)
    }

    pub fn uniform(num_states: usize) -> Self {
        BeliefVector(vec![1.0 / num_states as f64; num_states])
    }

    pub fn basis(num_states: usize, index: usize) -> Self {
        let mut v = vec![0.0; num_states];
        v[index] = 1.0;
        BeliefVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        self.0.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (self.0.iter().sum::<f64>() - 1.0).abs() <= tol
    }

    /// True for a basis vector: one entry exactly 1, the rest exactly 0.
    pub fn is_hard(&self) -> bool {
        self.0.iter().filter(|&&p| p == 1.0).count() == 1
            && self.0.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }

    pub fn distance(&self, other: &BeliefVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Adaptation parameter and entry floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AslParams {
    pub sigma: f64,
    pub floor: f64,
}

impl AslParams {
    pub fn new(sigma: f64, floor: f64, num_states: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::Config(format!("sigma {sigma} must lie in (0, 1)")));
        }
        if !(floor > 0.0 && floor < 1.0 / num_states as f64) {
            return Err(Error::Config(format!(
                "belief floor {floor} must lie in (0, 1/S)"
            )));
        }
        Ok(AslParams { sigma, floor })
    }
}

/// Raises entries below `floor` to exactly `floor` and rescales the rest so
/// the vector sums to one.
fn floor_and_normalize(mut p: Vec<f64>, floor: f64) -> Vec<f64> {
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    if floor <= 0.0 {
        return p;
    }
    let mut fixed = vec![false; p.len()];
    loop {
        let mut changed = false;
        for (v, f) in p.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *v < floor {
                *f = true;
                changed = true;
            }
        }
        if !changed {
            return p;
        }
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_mass: f64 = p.iter().zip(&fixed).filter(|(_, &f)| !f).map(|(v, _)| v).sum();
        let target = 1.0 - n_fixed as f64 * floor;
        for (v, &f) in p.iter_mut().zip(&fixed) {
            *v = if f { floor } else { *v * target / free_mass };
        }
    }
}

/// Local update `ψ(s) ∝ L(ξ|s) · prior(s)^{1−σ}`, floored and renormalized.
pub fn asl_local_update(
    prior: &BeliefVector,
    lik_row: &[f64],
    sigma: f64,
    floor: f64,
) -> Result<BeliefVector> {
    if lik_row.len() != prior.len() {
        return Err(Error::Model(format!(
            "likelihood row has {} entries for {} states",
            lik_row.len(),
            prior.len()
        )));
    }
    if lik_row.iter().all(|&l| l <= 0.0) {
        return Err(Error::Model("likelihood row is identically zero".into()));
    }
    // Prior exponentiated relative to its largest entry, so a uniform prior
    // contributes exactly 1 for every σ.
    let log_pmax = prior.as_slice().iter().copied().fold(0.0, f64::max).ln();
    let unnorm: Vec<f64> = lik_row
        .iter()
        .zip(prior.as_slice())
        .map(|(&l, &p)| {
            if l <= 0.0 {
                0.0
            } else if p > 0.0 {
                l * ((1.0 - sigma) * (p.ln() - log_pmax)).exp()
            } else if sigma >= 1.0 {
                l
            } else {
                0.0
            }
        })
        .collect();
    if unnorm.iter().all(|&w| w <= 0.0) {
        return Err(Error::Model(
            "likelihood vanishes wherever the prior is positive".into(),
        ));
    }
    Ok(BeliefVector(floor_and_normalize(unnorm, floor)))
}

/// Weighted geometric average `out(s) ∝ Π_ℓ ψ_ℓ(s)^{w_ℓ}` in the log domain.
pub fn geometric_combine(beliefs: &[&BeliefVector], weights: &[f64]) -> Result<BeliefVector> {
    let Some(first) = beliefs.first() else {
        return Err(Error::Model("no beliefs to combine".into()));
    };
    let s = first.len();
    let mut logs = vec![0.0; s];
    for (b, &w) in beliefs.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (acc, &p) in logs.iter_mut().zip(b.as_slice()) {
            if p <= 0.0 {
                return Err(Error::Numeric(
                    "zero belief entry with positive combination weight".into(),
                ));
            }
            *acc += w * p.ln();
        }
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    Ok(BeliefVector(floor_and_normalize(unnorm, 0.0)))
}

/// Basis vector at the argmax of `soft`, lowest index on ties.
pub fn hard_assign(soft: &BeliefVector) -> BeliefVector {
    BeliefVector::basis(soft.len(), soft.argmax())
}

/// One synchronous belief round given each agent's likelihood row.
///
/// All local updates complete before any combination reads them.
pub fn combine_round(
    soft: &[BeliefVector],
    lik_rows: &[Vec<f64>],
    c: &CombinationMatrix,
    params: &AslParams,
) -> Result<(Vec<BeliefVector>, Vec<BeliefVector>)> {
    let k = soft.len();
    if lik_rows.len() != k || c.num_agents() != k {
        return Err(Error::Internal(format!(
            "belief round for {k} agents got {} likelihood rows and a {}-agent matrix",
            lik_rows.len(),
            c.num_agents()
        )));
    }
    let local: Vec<BeliefVector> = soft
        .iter()
        .zip(lik_rows)
        .map(|(prior, row)| asl_local_update(prior, row, params.sigma, params.floor))
        .collect::<Result<_>>()?;
    let refs: Vec<&BeliefVector> = local.iter().collect();
    let mut out_soft = Vec::with_capacity(k);
    let mut out_hard = Vec::with_capacity(k);
    for agent in 0..k {
        let combined = geometric_combine(&refs, &c.column(agent))?;
        let combined = BeliefVector(floor_and_normalize(combined.0, params.floor));
        out_hard.push(hard_assign(&combined));
        out_soft.push(combined);
    }
    Ok((out_soft, out_hard))
}

/// One round of adaptive social learning across the network.
pub fn network_belief_step<E: Environment>(
    soft: &[BeliefVector],
    observations: &[usize],
    env: &E,
    c: &CombinationMatrix,
    params: &AslParams,
) -> Result<(Vec<BeliefVector>, Vec<BeliefVector>)> {
    let rows: Vec<Vec<f64>> = observations
        .iter()
        .enumerate()
        .map(|(k, &obs)| env.likelihood_row(k, obs))
        .collect();
    combine_round(soft, &rows, c, params)
}

/// `σ = ν / ln(1/ε)`, clamped to `(0, 0.99]`.
pub fn choose_sigma(drift: f64, nu: f64) -> Result<f64> {
    if !(drift > 0.0 && drift < 1.0) {
        return Err(Error::Config(format!(
            "drift {drift} must lie in (0, 1) to choose sigma"
        )));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Config(format!("nu {nu} must be positive")));
    }
    Ok((nu / (1.0 / drift).ln()).min(SIGMA_MAX))
}

/// Fraction of the last `window` steps on which each agent's hard state
/// differed from the true state.
pub fn empirical_error_probability(
    hard_states: &[Vec<usize>],
    true_states: &[usize],
    window: usize,
) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("error-probability window is empty".into()));
    }
    if true_states.len() < window {
        return Err(Error::Config(format!(
            "trace of length {} is shorter than the window {window}",
            true_states.len()
        )));
    }
    let start = true_states.len() - window;
    hard_states
        .iter()
        .map(|trace| {
            if trace.len() != true_states.len() {
                return Err(Error::Internal("hard-state trace length mismatch".into()));
            }
            let wrong = trace[start..]
                .iter()
                .zip(&true_states[start..])
                .filter(|(h, t)| h != t)
                .count();
            Ok(wrong as f64 / window as f64)
        })
        .collect()
}

/// Streaming trailing-window error rate for one agent.
#[derive(Clone, Debug)]
pub struct ErrorWindow {
    window: usize,
    hits: VecDeque<bool>,
    wrong: usize,
}

impl ErrorWindow {
    pub fn new(window: usize) -> Self {
        ErrorWindow {
            window: window.max(1),
            hits: VecDeque::with_capacity(window.max(1)),
            wrong: 0,
        }
    }

    /// Records one step and returns the rate over the steps seen so far
    /// (at most `window` of them).
    pub fn push(&mut self, is_wrong: bool) -> f64 {
        if self.hits.len() == self.window && self.hits.pop_front() == Some(true) {
            self.wrong -= 1;
        }
        self.hits.push_back(is_wrong);
        self.wrong += usize::from(is_wrong);
        self.wrong as f64 / self.hits.len() as f64
    }
}
