use std::ops::Range;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{sample_iteration, sample_leaf, SelfPlayConfig, SelfPlayError};
use crate::beliefs::{initial_pbs, DepthLimit, Pbs, Subgame};
use crate::decomposition::{solve_subgame, DecompError, SolveConfig, SolveResult, ValueFunction, ValueVector};
use crate::equilibrium::Policy;
use crate::game::{Player, PublicTree};
use crate::valuenet::{encode, Example, ReplayBuffer};

/// Source of the profile a warm-started solve begins from.
pub trait PolicyPrior: Send + Sync {
    fn profile(&self, sg: &Subgame) -> Policy<f64>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformPrior;

impl PolicyPrior for UniformPrior {
    fn profile(&self, sg: &Subgame) -> Policy<f64> {
        Policy::uniform(sg.layout.clone())
    }
}

/// Solves `sg` starting from `profile`: regrets against an exact best
/// response and the average policy are seeded as if `profile` had been
/// played for `solve.warm_iterations` iterations, which are then skipped.
pub fn warm_start(
    sg: &Subgame,
    vf: &dyn ValueFunction,
    solve: &SolveConfig,
    profile: &Policy<f64>,
    snapshot_at: Option<usize>,
) -> Result<SolveResult, DecompError> {
    solve_subgame(sg, vf, solve, Some(profile), snapshot_at)
}

/// One subgame of an episode.
#[derive(Debug, Clone)]
pub struct EpisodeStep {
    pub root: Pbs,
    /// Weighted average of the iterates' root values: the training target.
    pub values: ValueVector,
    /// Sampled leaf PBSs; each non-terminal one roots a later subgame.
    pub leaves: Vec<Pbs>,
    /// Sampled iteration.
    pub iteration: usize,
    pub warm_iterations: usize,
    /// The solver's final average policy.
    pub average: Policy<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    pub explorer: Player,
    pub steps: Vec<EpisodeStep>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Plays one self-play episode from the initial PBS until terminal PBSs:
/// solve the subgame, record its root values, sample the iteration and
/// `leaves_per_subgame` leaves, and continue from each leaf, depth first.
pub fn run_episode<R: Rng + ?Sized>(
    tree: &Arc<PublicTree>,
    vf: &dyn ValueFunction,
    config: &SelfPlayConfig,
    prior: Option<&dyn PolicyPrior>,
    rng: &mut R,
) -> Result<EpisodeTrace, SelfPlayError> {
    config.validate()?;
    let solve = config.solve_config();
    let explorer = rng.random_range(0..2);
    let mut pending = vec![initial_pbs(tree)];
    let mut steps = Vec::new();
    while let Some(root) = pending.pop() {
        if tree.node(root.node).is_terminal() {
            continue;
        }
        let start = Instant::now();
        let sg = Subgame::new(tree.clone(), root.clone(), DepthLimit::Public(config.depth))?;
        let warm = config.warm_start.then(|| prior.unwrap_or(&UniformPrior).profile(&sg));
        let t_warm = config.warm_iterations();
        let t = sample_iteration(solve.iterations, t_warm, config.law, rng);
        let result = solve_subgame(&sg, vf, &solve, warm.as_ref(), Some(t))?;
        let snap = result.snapshot.expect("sampled iteration is recorded");
        let leaves: Vec<Pbs> = (0..config.leaves_per_subgame)
            .map(|_| {
                let belief = snap.belief_policy(solve.algorithm);
                sample_leaf(&sg, &snap.current, belief, Some((explorer, config.epsilon)), rng).0
            })
            .collect();
        pending.extend(leaves.iter().rev().cloned());
        steps.push(EpisodeStep {
            root,
            values: result.root_values,
            leaves,
            iteration: t,
            warm_iterations: t_warm,
            average: result.average,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(EpisodeTrace { explorer, steps })
}

/// RNG of episode `index`: one stream per episode under the run seed.
pub(crate) fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Training example for a subgame root: features seen by agent 0 and both
/// players' values.
pub(crate) fn value_example(tree: &PublicTree, root: &Pbs, values: &ValueVector) -> Result<Example, SelfPlayError> {
    Ok(Example {
        features: encode(tree, root, 0)?.into_iter().map(|x| x as f32).collect(),
        target: values.values.iter().flatten().map(|&v| v as f32).collect(),
    })
}

/// Runs the episodes with indices in `episodes` in parallel, each with its
/// own RNG stream, and appends every root value target to `buffer` in
/// episode order.
pub fn run_selfplay(
    tree: &Arc<PublicTree>,
    vf: &dyn ValueFunction,
    config: &SelfPlayConfig,
    prior: Option<&dyn PolicyPrior>,
    episodes: Range<u64>,
    buffer: Option<&mut ReplayBuffer>,
) -> Result<Vec<EpisodeTrace>, SelfPlayError> {
    config.validate()?;
    let traces = episodes
        .into_par_iter()
        .map(|i| run_episode(tree, vf, config, prior, &mut episode_rng(config.seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(buffer) = buffer {
        for step in traces.iter().flat_map(|t| &t.steps) {
            buffer.add(value_example(tree, &step.root, &step.values)?);
        }
    }
    Ok(traces)
}
