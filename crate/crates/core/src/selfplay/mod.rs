//! Self-play: repeated depth-limited solving from the current PBS, value
//! targets for the network, and search-time play.

mod episode;
mod play;
mod sample;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::BeliefError;
use crate::decomposition::{DecompError, SolveConfig, Weighting};
use crate::valuenet::NetError;

pub use episode::{run_episode, run_selfplay, warm_start, EpisodeStep, EpisodeTrace, PolicyPrior, UniformPrior};
pub use play::{play_safe, play_unsafe, safe_policy_average, SafeEpisode, SafeMove, SafeSearch, Solved};
pub use sample::{advance, sample_deal, sample_leaf, walk_to_leaf, LeafSample};
pub use train::{random_beliefs_targets, DataSource, RebelConfig, Trainer};

#[derive(Debug, Error)]
pub enum SelfPlayError {
    #[error("invalid self-play config: {0}")]
    Config(String),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfPlayConfig {
    /// Solver settings; `solve.iterations` is the search budget per subgame.
    pub solve: SolveConfig,
    /// Probability that the explorer takes a uniformly random action.
    pub epsilon: f64,
    /// Law for the sampled iteration. Root values are averaged with the
    /// same weights.
    pub law: Weighting,
    /// Public actions per subgame.
    pub depth: usize,
    /// Seed each solve from a prior profile.
    pub warm_start: bool,
    pub episodes_per_epoch: usize,
    /// Leaf PBSs sampled from each solved subgame; the episode continues
    /// from every one of them.
    pub leaves_per_subgame: usize,
    pub seed: u64,
}

impl Default for SelfPlayConfig {
    fn default() -> Self {
        Self {
            solve: SolveConfig::default(),
            epsilon: 0.25,
            law: Weighting::Linear,
            depth: 2,
            warm_start: false,
            episodes_per_epoch: 64,
            leaves_per_subgame: 1,
            seed: 0,
        }
    }
}

impl SelfPlayConfig {
    pub fn validate(&self) -> Result<(), SelfPlayError> {
        let bad = |m: &str| Err(SelfPlayError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1]");
        }
        if self.solve.iterations == 0 {
            return bad("search iterations must be at least one");
        }
        if self.depth == 0 {
            return bad("subgame depth must be at least one");
        }
        if self.leaves_per_subgame == 0 {
            return bad("at least one leaf must be sampled per subgame");
        }
        if self.warm_start && self.solve.warm_iterations >= self.solve.iterations {
            return bad("warm start must leave at least one search iteration");
        }
        Ok(())
    }

    /// Solver settings with root values averaged under the sampling law.
    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            root_weighting: self.law,
            ..self.solve
        }
    }

    /// Iterations imitated by the warm start, or zero.
    pub fn warm_iterations(&self) -> usize {
        if self.warm_start {
            self.solve.warm_iterations
        } else {
            0
        }
    }
}

/// Draws an iteration from `warm + 1..=total` under `law`.
pub fn sample_iteration<R: Rng + ?Sized>(total: usize, warm: usize, law: Weighting, rng: &mut R) -> usize {
    assert!(warm < total, "no iterations left after the warm start");
    match law {
        Weighting::Uniform => rng.random_range(warm + 1..=total),
        Weighting::Linear => {
            // sum of t over warm+1..=total
            let mass = |n: usize| (n * (n + 1) / 2) as u128;
            let u = rng.random_range(0..mass(total) - mass(warm));
            let target = mass(warm) + u;
            // smallest t with mass(t) > target
            let (mut lo, mut hi) = (warm + 1, total);
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if mass(mid) > target {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            lo
        }
    }
}
