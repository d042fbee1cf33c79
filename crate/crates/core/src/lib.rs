//! Multi-agent off-policy actor-critic learning on top of adaptive social
//! learning, with a partially observable pistonball environment.

pub mod actor_critic;
pub mod assumptions;
pub mod beliefs;
pub mod config;
pub mod env;
pub mod error;
pub mod harness;
pub mod sim;
pub mod topology;

pub use actor_critic::{ActorParams, BehaviorPolicy, CriticParams, RatioBounds, Schedule, StepSizes};
pub use beliefs::{AslParams, BeliefVector};
pub use env::{Environment, LikelihoodKind, Observation, Pistonball};
pub use error::{Error, Result};
pub use sim::{marl_sl_step, BeliefSource, LearnerConfig, NetworkState, RngStreams, StepReport};
pub use topology::{CombinationMatrix, Graph, GraphKind};
pub use assumptions::{validate_config, Check};
pub use config::{Experiment, ExperimentConfig};
pub use harness::{compute_gap_series, run_paired, run_sweep, Arm, Metric, PairedRunResult, TraceRecord};
