//! Environment interface and the discretized pistonball problem.
//!
//! The global state is the index of the piston under the ball center. Each
//! piston observes whether the ball is within `window_radius` cells of it.
//! Two likelihood tables exist side by side:
//!
//! * the *generative* model, used to draw observations, which is always the
//!   normalized window rule (`P(seen | s) = 1 − ε′` inside the window, `ε′`
//!   outside);
//! * the *belief* table, the `L_k(ξ | s)` used inside belief updates, which is
//!   configurable (see [`LikelihoodKind`]).

use rand::Rng;

use crate::error::{Error, Result};

pub const ACTION_DOWN: usize = 0;
pub const ACTION_STAY: usize = 1;
pub const ACTION_UP: usize = 2;
pub const PISTON_ACTIONS: usize = 3;

/// Binary pistonball observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Observation {
    Seen,
    Unseen,
}

impl Observation {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        match self {
            Observation::Seen => 0,
            Observation::Unseen => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Observation::Seen
        } else {
            Observation::Unseen
        }
    }
}

/// A finite multi-agent environment with per-agent discrete observations.
///
/// Every stochastic method consumes a fixed number of draws from the stream it
/// is handed (one per call), so that two simulations fed identically seeded
/// streams stay aligned draw for draw.
pub trait Environment {
    fn num_agents(&self) -> usize;
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn num_observations(&self) -> usize;
    /// Bound `R_max` on the magnitude of every reward.
    fn reward_bound(&self) -> f64;

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize;
    fn transition<R: Rng + ?Sized>(&self, s: usize, joint_action: &[usize], rng: &mut R) -> usize;
    fn transition_distribution(&self, s: usize, joint_action: &[usize]) -> Vec<f64>;
    fn reward(&self, agent: usize, s: usize, action: usize, s_next: usize) -> f64;

    /// Draws agent `agent`'s observation index of state `s`.
    fn observe<R: Rng + ?Sized>(&self, agent: usize, s: usize, rng: &mut R) -> usize;
    /// Probability that `agent` emits observation `obs` in state `s`.
    fn observation_prob(&self, agent: usize, obs: usize, s: usize) -> f64;
    /// Belief-update likelihood `L_k(obs | s)`.
    fn likelihood(&self, agent: usize, obs: usize, s: usize) -> f64;

    fn likelihood_row(&self, agent: usize, obs: usize) -> Vec<f64> {
        (0..self.num_states())
            .map(|s| self.likelihood(agent, obs, s))
            .collect()
    }

    /// Expected network-average reward in state `s` when agent `k` acts from
    /// `policies[k]`. The default enumerates joint actions.
    fn expected_reward(&self, s: usize, policies: &[Vec<f64>]) -> f64 {
        let k = self.num_agents();
        let a = self.num_actions();
        let mut joint = vec![0usize; k];
        let mut total = 0.0;
        loop {
            let p: f64 = joint.iter().enumerate().map(|(i, &ai)| policies[i][ai]).product();
            if p > 0.0 {
                let dist = self.transition_distribution(s, &joint);
                for (s_next, &ps) in dist.iter().enumerate() {
                    if ps > 0.0 {
                        let r: f64 = (0..k)
                            .map(|i| self.reward(i, s, joint[i], s_next))
                            .sum::<f64>()
                            / k as f64;
                        total += p * ps * r;
                    }
                }
            }
            // odometer increment over A^K
            let mut i = 0;
            loop {
                if i == k {
                    return total;
                }
                joint[i] += 1;
                if joint[i] < a {
                    break;
                }
                joint[i] = 0;
                i += 1;
            }
        }
    }
}

/// Which table feeds the belief updates.
#[derive(Clone, Debug, PartialEq)]
pub enum LikelihoodKind {
    /// `L(unseen | s) = 1/K`, `L(seen | s) = 1 − ε′` in the window, `ε′` outside.
    /// Unnormalized over observations, and cannot separate the two right-most
    /// states.
    FlatUnseen,
    /// Same as the generative model: `L(unseen | s) = 1 − L(seen | s)`.
    Matched,
    /// Explicit `K × 2 × S` table.
    Custom(Vec<Vec<Vec<f64>>>),
}

/// `K × |O| × S` table of likelihood values.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodTable {
    agents: usize,
    observations: usize,
    states: usize,
    values: Vec<f64>,
}

impl LikelihoodTable {
    pub fn from_nested(table: &[Vec<Vec<f64>>]) -> Result<Self> {
        let agents = table.len();
        let observations = table.first().map_or(0, Vec::len);
        let states = table.first().and_then(|t| t.first()).map_or(0, Vec::len);
        if agents == 0 || observations == 0 || states == 0 {
            return Err(Error::Config("likelihood table is empty".into()));
        }
        let mut values = Vec::with_capacity(agents * observations * states);
        for per_agent in table {
            if per_agent.len() != observations {
                return Err(Error::Config("ragged likelihood table".into()));
            }
            for row in per_agent {
                if row.len() != states {
                    return Err(Error::Config("ragged likelihood table".into()));
                }
                for &v in row {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Config(format!(
                            "likelihood value {v} is outside [0, 1]"
                        )));
                    }
                    values.push(v);
                }
            }
        }
        Ok(LikelihoodTable {
            agents,
            observations,
            states,
            values,
        })
    }

    fn from_fn(
        agents: usize,
        observations: usize,
        states: usize,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(agents * observations * states);
        for k in 0..agents {
            for o in 0..observations {
                for s in 0..states {
                    values.push(f(k, o, s));
                }
            }
        }
        LikelihoodTable {
            agents,
            observations,
            states,
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.agents, self.observations, self.states)
    }

    #[inline]
    pub fn get(&self, agent: usize, obs: usize, s: usize) -> f64 {
        self.values[(agent * self.observations + obs) * self.states + s]
    }

    pub fn row(&self, agent: usize, obs: usize) -> &[f64] {
        let start = (agent * self.observations + obs) * self.states;
        &self.values[start..start + self.states]
    }
}

#[inline]
fn in_window(agent: usize, s: usize, radius: usize) -> bool {
    agent.abs_diff(s) <= radius
}

/// Pistonball likelihood `L_k(ξ | s)` in its published form: uniform `1/K`
/// when unseen, `1 − ε′` inside `[k − r, k + r]` and `ε′` outside when seen.
pub fn flat_unseen_likelihood(
    num_agents: usize,
    obs_noise: f64,
    window_radius: usize,
    agent: usize,
    obs: Observation,
    s: usize,
) -> f64 {
    match obs {
        Observation::Unseen => 1.0 / num_agents as f64,
        Observation::Seen if in_window(agent, s, window_radius) => 1.0 - obs_noise,
        Observation::Seen => obs_noise,
    }
}

/// Probability of `obs` under the generative window rule.
pub fn generative_likelihood(
    obs_noise: f64,
    window_radius: usize,
    agent: usize,
    obs: Observation,
    s: usize,
) -> f64 {
    let seen = if in_window(agent, s, window_radius) {
        1.0 - obs_noise
    } else {
        obs_noise
    };
    match obs {
        Observation::Seen => seen,
        Observation::Unseen => 1.0 - seen,
    }
}

/// Draws a pistonball observation with one uniform draw.
pub fn observe<R: Rng + ?Sized>(
    s: usize,
    agent: usize,
    obs_noise: f64,
    window_radius: usize,
    rng: &mut R,
) -> Observation {
    let u: f64 = rng.random();
    if u < generative_likelihood(obs_noise, window_radius, agent, Observation::Seen, s) {
        Observation::Seen
    } else {
        Observation::Unseen
    }
}

/// Ball dynamics with one uniform draw: with probability `drift` the ball
/// moves one cell, leftward when the piston under it plays up and rightward
/// otherwise; moves off the grid become stays.
pub fn transition<R: Rng + ?Sized>(
    s: usize,
    joint_action: &[usize],
    drift: f64,
    num_states: usize,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random();
    if u < drift {
        step_ball(s, joint_action, num_states)
    } else {
        s
    }
}

fn step_ball(s: usize, joint_action: &[usize], num_states: usize) -> usize {
    if joint_action[s] == ACTION_UP {
        s.saturating_sub(1)
    } else if s + 1 < num_states {
        s + 1
    } else {
        s
    }
}

/// Shared leftward-progress reward: `+1` left, `−1` right, `0` otherwise.
pub fn reward(s: usize, _action: usize, s_next: usize) -> f64 {
    match s_next.cmp(&s) {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Greater => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    }
}

/// Discretized pistonball: `K` pistons, `K` ball positions, actions
/// down/stay/up.
#[derive(Clone, Debug)]
pub struct Pistonball {
    num_agents: usize,
    drift: f64,
    obs_noise: f64,
    window_radius: usize,
    initial_state: Option<usize>,
    belief_table: LikelihoodTable,
}

impl Pistonball {
    pub fn new(
        num_agents: usize,
        drift: f64,
        obs_noise: f64,
        window_radius: usize,
        likelihood: &LikelihoodKind,
    ) -> Result<Self> {
        if num_agents < 2 {
            return Err(Error::Config(format!(
                "pistonball needs at least 2 pistons, got {num_agents}"
            )));
        }
        if !(0.0..1.0).contains(&drift) {
            return Err(Error::Config(format!("drift {drift} must lie in [0, 1)")));
        }
        if !(0.0..0.5).contains(&obs_noise) {
            return Err(Error::Config(format!(
                "observation noise {obs_noise} must lie in [0, 0.5)"
            )));
        }
        let k = num_agents;
        let belief_table = match likelihood {
            LikelihoodKind::FlatUnseen => LikelihoodTable::from_fn(k, 2, k, |a, o, s| {
                flat_unseen_likelihood(k, obs_noise, window_radius, a, Observation::from_index(o), s)
            }),
            LikelihoodKind::Matched => LikelihoodTable::from_fn(k, 2, k, |a, o, s| {
                generative_likelihood(obs_noise, window_radius, a, Observation::from_index(o), s)
            }),
            LikelihoodKind::Custom(table) => {
                let t = LikelihoodTable::from_nested(table)?;
                if t.dims() != (k, 2, k) {
                    return Err(Error::Config(format!(
                        "custom likelihood table has shape {:?}, expected ({k}, 2, {k})",
                        t.dims()
                    )));
                }
                t
            }
        };
        Ok(Pistonball {
            num_agents,
            drift,
            obs_noise,
            window_radius,
            initial_state: None,
            belief_table,
        })
    }

    /// Pins the starting ball position instead of drawing it uniformly.
    pub fn with_initial_state(mut self, s: Option<usize>) -> Result<Self> {
        if let Some(s) = s {
            if s >= self.num_agents {
                return Err(Error::Config(format!("initial state {s} out of range")));
            }
        }
        self.initial_state = s;
        Ok(self)
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn obs_noise(&self) -> f64 {
        self.obs_noise
    }

    pub fn window_radius(&self) -> usize {
        self.window_radius
    }

    pub fn belief_table(&self) -> &LikelihoodTable {
        &self.belief_table
    }
}

impl Environment for Pistonball {
    fn num_agents(&self) -> usize {
        self.num_agents
    }

    fn num_states(&self) -> usize {
        self.num_agents
    }

    fn num_actions(&self) -> usize {
        PISTON_ACTIONS
    }

    fn num_observations(&self) -> usize {
        Observation::COUNT
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        match self.initial_state {
            Some(s) => s,
            None => ((u * self.num_agents as f64) as usize).min(self.num_agents - 1),
        }
    }

    fn transition<R: Rng + ?Sized>(&self, s: usize, joint_action: &[usize], rng: &mut R) -> usize {
        transition(s, joint_action, self.drift, self.num_agents, rng)
    }

    fn transition_distribution(&self, s: usize, joint_action: &[usize]) -> Vec<f64> {
        let mut dist = vec![0.0; self.num_agents];
        dist[s] += 1.0 - self.drift;
        dist[step_ball(s, joint_action, self.num_agents)] += self.drift;
        dist
    }

    fn reward(&self, _agent: usize, s: usize, action: usize, s_next: usize) -> f64 {
        reward(s, action, s_next)
    }

    fn observe<R: Rng + ?Sized>(&self, agent: usize, s: usize, rng: &mut R) -> usize {
        observe(s, agent, self.obs_noise, self.window_radius, rng).index()
    }

    fn observation_prob(&self, agent: usize, obs: usize, s: usize) -> f64 {
        generative_likelihood(
            self.obs_noise,
            self.window_radius,
            agent,
            Observation::from_index(obs),
            s,
        )
    }

    fn likelihood(&self, agent: usize, obs: usize, s: usize) -> f64 {
        self.belief_table.get(agent, obs, s)
    }

    fn likelihood_row(&self, agent: usize, obs: usize) -> Vec<f64> {
        self.belief_table.row(agent, obs).to_vec()
    }

    /// Only the piston under the ball matters: it pushes left by playing up.
    fn expected_reward(&self, s: usize, policies: &[Vec<f64>]) -> f64 {
        let p_up = policies[s][ACTION_UP];
        let left = if s > 0 { p_up } else { 0.0 };
        let right = if s + 1 < self.num_agents { 1.0 - p_up } else { 0.0 };
        self.drift * (left - right)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn flat_unseen_likelihood_values() {
        assert_eq!(flat_unseen_likelihood(5, 0.1, 1, 3, Observation::Unseen, 0), 0.2);
        assert_eq!(flat_unseen_likelihood(5, 0.1, 1, 3, Observation::Seen, 2), 0.9);
        assert_eq!(flat_unseen_likelihood(5, 0.1, 1, 3, Observation::Seen, 0), 0.1);
        // window clamps at the grid edge
        assert_eq!(flat_unseen_likelihood(5, 0.1, 1, 0, Observation::Seen, 1), 0.9);
        assert_eq!(flat_unseen_likelihood(5, 0.1, 1, 0, Observation::Seen, 2), 0.1);
    }

    #[test]
    fn belief_tables() {
        let flat = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::FlatUnseen).unwrap();
        assert!(flat.likelihood_row(2, Observation::Unseen.index()).iter().all(|&v| v == 0.2));
        let matched = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::Matched).unwrap();
        for k in 0..5 {
            for s in 0..5 {
                let total: f64 = (0..2).map(|o| matched.likelihood(k, o, s)).sum();
                assert!((total - 1.0).abs() < 1e-15);
                assert_eq!(matched.likelihood(k, 0, s), matched.observation_prob(k, 0, s));
            }
        }
    }

    #[test]
    fn custom_table_shape_checked() {
        let bad = LikelihoodKind::Custom(vec![vec![vec![0.5; 3]; 2]; 3]);
        assert!(Pistonball::new(5, 0.25, 0.1, 1, &bad).is_err());
        let good = LikelihoodKind::Custom(vec![vec![vec![0.5; 5]; 2]; 5]);
        assert!(Pistonball::new(5, 0.25, 0.1, 1, &good).is_ok());
    }

    #[test]
    fn noiseless_observation() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(observe(3, 3, 0.0, 1, &mut rng), Observation::Seen);
            assert_eq!(observe(0, 4, 0.0, 1, &mut rng), Observation::Unseen);
        }
    }

    #[test]
    fn observation_rate() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let n = 100_000;
        let seen = (0..n)
            .filter(|_| observe(3, 3, 0.1, 1, &mut rng) == Observation::Seen)
            .count();
        let rate = seen as f64 / n as f64;
        assert!((rate - 0.9).abs() < 0.01, "{rate}");
    }

    #[test]
    fn zero_drift_never_moves() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(transition(2, &[2; 5], 0.0, 5, &mut rng), 2);
        }
    }

    #[test]
    fn up_under_ball_moves_left() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let n = 100_000;
        let mut actions = [ACTION_STAY; 5];
        actions[3] = ACTION_UP;
        let left = (0..n)
            .filter(|_| transition(3, &actions, 0.25, 5, &mut rng) == 2)
            .count();
        let p = left as f64 / n as f64;
        assert!((p - 0.25).abs() < 0.01, "{p}");
    }

    #[test]
    fn boundary_clamps() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for i in 0..10_000 {
            let a = [i % 3; 5];
            let s = transition(0, &a, 0.25, 5, &mut rng);
            assert!(s <= 1);
            let s = transition(4, &[ACTION_DOWN; 5], 0.25, 5, &mut rng);
            assert_eq!(s, 4);
        }
    }

    #[test]
    fn reward_signs() {
        assert_eq!(reward(3, 0, 2), 1.0);
        assert_eq!(reward(3, 0, 3), 0.0);
        assert_eq!(reward(3, 0, 4), -1.0);
    }

    #[test]
    fn transition_distribution_normalized() {
        let env = Pistonball::new(5, 0.25, 0.1, 1, &LikelihoodKind::Matched).unwrap();
        for s in 0..5 {
            for a in 0..3 {
                let d = env.transition_distribution(s, &[a; 5]);
                assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_expected_reward_matches_enumeration() {
        struct Enumerated<'a>(&'a Pistonball);
        impl Environment for Enumerated<'_> {
            fn num_agents(&self) -> usize { self.0.num_agents() }
            fn num_states(&self) -> usize { self.0.num_states() }
            fn num_actions(&self) -> usize { self.0.num_actions() }
            fn num_observations(&self) -> usize { 2 }
            fn reward_bound(&self) -> f64 { 1.0 }
            fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize { self.0.initial_state(rng) }
            fn transition<R: Rng + ?Sized>(&self, s: usize, a: &[usize], rng: &mut R) -> usize { self.0.transition(s, a, rng) }
            fn transition_distribution(&self, s: usize, a: &[usize]) -> Vec<f64> { self.0.transition_distribution(s, a) }
            fn reward(&self, k: usize, s: usize, a: usize, n: usize) -> f64 { self.0.reward(k, s, a, n) }
            fn observe<R: Rng + ?Sized>(&self, k: usize, s: usize, rng: &mut R) -> usize { self.0.observe(k, s, rng) }
            fn observation_prob(&self, k: usize, o: usize, s: usize) -> f64 { self.0.observation_prob(k, o, s) }
            fn likelihood(&self, k: usize, o: usize, s: usize) -> f64 { self.0.likelihood(k, o, s) }
        }
        let env = Pistonball::new(4, 0.3, 0.1, 1, &LikelihoodKind::Matched).unwrap();
        let policies = vec![
            vec![0.2, 0.3, 0.5],
            vec![0.1, 0.1, 0.8],
            vec![0.6, 0.3, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        for s in 0..4 {
            let fast = env.expected_reward(s, &policies);
            let slow = Enumerated(&env).expected_reward(s, &policies);
            assert!((fast - slow).abs() < 1e-12, "s={s}: {fast} vs {slow}");
        }
    }
}
