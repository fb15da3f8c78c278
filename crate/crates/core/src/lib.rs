//! Contextual gamble choice as a partially observable decision problem.
//!
//! Agents face three gambles they cannot see directly. They pay small costs
//! for noisy pairwise comparisons of probabilities or values, or for noisy
//! expected-value calculations, and finally commit to one option. A tabular
//! learner finds reward-maximising observation and choice policies, and the
//! [`experiments`] module measures how those policies behave on decoy tasks.

pub mod agent;
pub mod config;
pub mod env;
pub mod experiments;
pub mod oracle;
pub mod stats;
pub mod tasks;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use agent::{
    discretize, evaluate, select_action, td_update, train, DiscretizerConfig, EvalMetrics, LearnerConfig,
    PolicyArtifact, QPolicy, TaskSource,
};
pub use env::{Action, AgentKind, Environment, EpisodeConfig, EvidenceState, ObservationModel, Relation, RewardModel};
pub use tasks::{ChoiceSet, ContextKind, Gamble, Role, TaskDistribution};

/// The random source used throughout.
pub type Rng = ChaCha8Rng;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Training = 1,
    Evaluation = 2,
    Oracle = 3,
    Tasks = 4,
}

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
