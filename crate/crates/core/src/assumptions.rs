//! Checks of the structural conditions the learner relies on.
//!
//! [`validate_config`] returns one [`Check`] per condition, in a fixed order.
//! Only parse/shape problems are errors; everything else is reported as a
//! failed check so that a bad configuration can still be diagnosed in full.

use std::fmt;

use crate::actor_critic::Schedule;
use crate::config::ExperimentConfig;
use crate::env::Environment;
use crate::error::Result;
use crate::topology::{check_strong_connectivity, spectral_contraction_value, CombinationMatrix, STOCHASTIC_TOL};

pub const STRONG_CONNECTIVITY: &str = "strong_connectivity";
pub const DOUBLE_STOCHASTICITY: &str = "double_stochasticity";
pub const SPECTRAL_CONTRACTION: &str = "spectral_contraction";
pub const BOUNDED_LIKELIHOOD: &str = "bounded_log_likelihood";
pub const IDENTIFIABILITY: &str = "global_identifiability";
pub const STEP_SIZE_SUMS: &str = "step_size_sums";
pub const STEP_SIZE_BOUND: &str = "step_size_bound";
pub const DISCOUNT: &str = "discount_factor";

/// Margin below 1 required of the spectral value; the power iteration is
/// accurate to about 1e-10.
const SPECTRAL_MARGIN: f64 = 1e-8;
/// Smallest divergence counted as positive.
const KL_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let env = cfg.build_env()?;
    let (_, c) = cfg.build_topology()?;
    let mut out = topology_checks(&c);
    out.push(bounded_likelihood(&env));
    out.push(identifiability(&env));
    out.extend(step_size_checks(cfg)?);
    let gamma = cfg.learning.gamma;
    out.push(check(
        DISCOUNT,
        gamma > 0.0 && gamma < 1.0,
        format!("gamma = {gamma}"),
    ));
    Ok(out)
}

/// Names of the failed checks.
pub fn failures(checks: &[Check]) -> Vec<&'static str> {
    checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
}

pub fn topology_checks(c: &CombinationMatrix) -> Vec<Check> {
    let (row_err, col_err) = c.stochasticity_error();
    let strong = check_strong_connectivity(c);
    let spectral = spectral_contraction_value(c);
    vec![
        check(
            STRONG_CONNECTIVITY,
            strong,
            if strong {
                "positive weights connect every pair of agents, with a self-loop".into()
            } else {
                "some agents cannot reach each other, or no agent has a self-loop".into()
            },
        ),
        check(
            DOUBLE_STOCHASTICITY,
            row_err <= STOCHASTIC_TOL && col_err <= STOCHASTIC_TOL,
            format!("max row deviation {row_err:.3e}, max column deviation {col_err:.3e}"),
        ),
        check(
            SPECTRAL_CONTRACTION,
            spectral < 1.0 - SPECTRAL_MARGIN,
            format!("||C^T (I - 11^T/K) C|| = {spectral:.12}"),
        ),
    ]
}

/// Largest `|log L(ξ|s) / L(ξ|s′)|` over agents, observations and state
/// pairs; infinite when some entry is zero.
pub fn max_log_likelihood_ratio<E: Environment>(env: &E) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..env.num_agents() {
        for o in 0..env.num_observations() {
            let row = env.likelihood_row(k, o);
            let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = row.iter().cloned().fold(0.0, f64::max);
            let r = if lo > 0.0 { (hi / lo).ln() } else { f64::INFINITY };
            worst = worst.max(r);
        }
    }
    worst
}

pub fn bounded_likelihood<E: Environment>(env: &E) -> Check {
    let worst = max_log_likelihood_ratio(env);
    check(
        BOUNDED_LIKELIHOOD,
        worst.is_finite(),
        format!("max |log likelihood ratio| = {worst:.6}"),
    )
}

/// `E_{ξ ~ P_k(·|s_true)} [log L_k(ξ|s_true) / L_k(ξ|s_alt)]`, with the
/// expectation over the generative observation model and the ratio from the
/// belief table.
pub fn divergence<E: Environment>(env: &E, agent: usize, s_true: usize, s_alt: usize) -> f64 {
    let mut total = 0.0;
    for o in 0..env.num_observations() {
        let p = env.observation_prob(agent, o, s_true);
        if p == 0.0 {
            continue;
        }
        let num = env.likelihood(agent, o, s_true);
        let den = env.likelihood(agent, o, s_alt);
        let term = match (num > 0.0, den > 0.0) {
            (true, true) => (num / den).ln(),
            (true, false) => f64::INFINITY,
            (false, true) => f64::NEG_INFINITY,
            (false, false) => 0.0,
        };
        total += p * term;
    }
    total
}

/// First ordered pair `(s_true, s_alt)` that no agent can tell apart, if any.
pub fn unidentifiable_pair<E: Environment>(env: &E) -> Option<(usize, usize)> {
    let s = env.num_states();
    for s_true in 0..s {
        for s_alt in 0..s {
            if s_true == s_alt {
                continue;
            }
            let separated =
                (0..env.num_agents()).any(|k| divergence(env, k, s_true, s_alt) > KL_TOL);
            if !separated {
                return Some((s_true, s_alt));
            }
        }
    }
    None
}

pub fn identifiability<E: Environment>(env: &E) -> Check {
    match unidentifiable_pair(env) {
        None => check(
            IDENTIFIABILITY,
            true,
            "every ordered state pair is separated by some agent".into(),
        ),
        Some((a, b)) => check(
            IDENTIFIABILITY,
            false,
            format!("no agent separates true state {a} from state {b}"),
        ),
    }
}

fn step_size_checks(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let l = &cfg.learning;
    let drift = cfg.env.drift;
    let steps = cfg.step_sizes()?;
    let critic: Schedule = steps.critic;
    let actor: Schedule = steps.actor;
    let horizon = cfg.run.horizon;

    // Critic: finite positive sum, scaling as c1 / (ε ln(1/ε)).
    let scale = drift * (1.0 / drift).ln();
    let sum = critic.total();
    let implied_c1 = sum * scale;
    let critic_ok = if l.beta0.is_some() {
        implied_c1 > 0.0 && implied_c1.is_finite()
    } else {
        implied_c1.is_finite() && (implied_c1 - l.c1).abs() <= 1e-9 * l.c1
    };
    // Actor: summable, with the realized sum over the horizon below c2.
    let actor_total = actor.total();
    let actor_run = actor.partial_sum(horizon);
    let actor_ok = actor.decay < 1.0 && actor.initial > 0.0 && actor_total <= l.c2 * (1.0 + 1e-12)
        && actor_run < l.c2;
    let sums = check(
        STEP_SIZE_SUMS,
        critic_ok && actor_ok && scale > 0.0,
        format!(
            "critic sum {sum:.6} (implied c1 = {implied_c1:.6}, configured {}); \
             actor sum {actor_total:.6}, over {horizon} steps {actor_run:.6} (c2 = {})",
            l.c1, l.c2
        ),
    );

    let cap = 1.0 / l.rho_max;
    let bound = check(
        STEP_SIZE_BOUND,
        critic.initial <= cap,
        format!("beta_0 = {:.6} against 1/rho_max = {cap:.6}", critic.initial),
    );
    Ok(vec![sums, bound])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{BeliefTable, GraphShape};
    use crate::env::{LikelihoodKind, Pistonball};
    use crate::topology::{build_graph, metropolis_rule, GraphKind};

    #[test]
    fn default_config_passes_everything() {
        let checks = validate_config(&ExperimentConfig::default()).unwrap();
        assert_eq!(checks.len(), 8);
        assert!(failures(&checks).is_empty(), "{checks:?}");
    }

    #[test]
    fn identity_matrix_fails_connectivity() {
        let c = CombinationMatrix::identity(4);
        let f: Vec<_> = topology_checks(&c).into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
        assert_eq!(f, vec![STRONG_CONNECTIVITY, SPECTRAL_CONTRACTION]);
    }

    #[test]
    fn disconnected_graph_fails_both_connectivity_checks() {
        let g = build_graph(&GraphKind::Custom(vec![(0, 1), (2, 3)]), 4).unwrap();
        let checks = topology_checks(&metropolis_rule(&g));
        assert_eq!(
            failures(&checks),
            vec![STRONG_CONNECTIVITY, SPECTRAL_CONTRACTION]
        );
    }

    #[test]
    fn uniform_likelihood_is_not_identifiable() {
        let table = vec![vec![vec![0.5; 4]; 2]; 4];
        let env = Pistonball::new(4, 0.25, 0.1, 1, &LikelihoodKind::Custom(table)).unwrap();
        assert!(!identifiability(&env).passed);
        assert!(bounded_likelihood(&env).passed);
        for k in 0..4 {
            assert_eq!(divergence(&env, k, 0, 1), 0.0);
        }
    }

    #[test]
    fn flat_unseen_table_cannot_separate_right_edge() {
        let env = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::FlatUnseen).unwrap();
        assert_eq!(unidentifiable_pair(&env), Some((0, 1)));
        assert!(divergence(&env, 2, 4, 3) < 0.0);
        let matched = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::Matched).unwrap();
        assert_eq!(unidentifiable_pair(&matched), None);
    }

    #[test]
    fn divergence_matches_hand_value() {
        // Agent 0 with radius 1 sees states 0 and 1. True 0 vs alt 2:
        // 0.9 ln(0.9/0.1) + 0.1 ln(0.1/0.9) = 0.8 ln 9.
        let env = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::Matched).unwrap();
        assert!((divergence(&env, 0, 0, 2) - 0.8 * 9f64.ln()).abs() < 1e-12);
        assert_eq!(divergence(&env, 0, 0, 1), 0.0);
    }

    #[test]
    fn noiseless_observations_unbounded() {
        let env = Pistonball::new(5, 0.25, 0.0, 1, &LikelihoodKind::Matched).unwrap();
        assert!(!bounded_likelihood(&env).passed);
        assert!(identifiability(&env).passed);
    }

    #[test]
    fn oversized_beta_fails_bound_only() {
        let mut cfg = ExperimentConfig::default();
        cfg.learning.beta0 = Some(0.5);
        let checks = validate_config(&cfg).unwrap();
        assert_eq!(failures(&checks), vec![STEP_SIZE_BOUND]);
    }

    #[test]
    fn capped_beta_breaks_the_sum_target() {
        let mut cfg = ExperimentConfig::default();
        cfg.learning.c1 = 1e4;
        let checks = validate_config(&cfg).unwrap();
        assert_eq!(failures(&checks), vec![STEP_SIZE_SUMS]);
    }

    #[test]
    fn bad_discount_reported() {
        let mut cfg = ExperimentConfig::default();
        cfg.learning.gamma = 1.0;
        assert_eq!(failures(&validate_config(&cfg).unwrap()), vec![DISCOUNT]);
    }

    #[test]
    fn custom_uniform_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.env.belief_likelihood = BeliefTable::Custom;
        cfg.env.custom_likelihood = Some(vec![vec![vec![0.5; 5]; 2]; 5]);
        cfg.graph.kind = GraphShape::Ring;
        assert_eq!(failures(&validate_config(&cfg).unwrap()), vec![IDENTIFIABILITY]);
    }
}
