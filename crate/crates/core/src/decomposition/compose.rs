use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::{
    solve_subgame, solve_subgame_traced, Algorithm, DecompError, OracleValue, SolveConfig, ValueFunction, ValueVector,
};
use crate::beliefs::{initial_pbs, leaf_pbs, DepthLimit, Pbs, ReachProfile, Subgame};
use crate::equilibrium::{normalize_mass, walk, Policy};
use crate::game::PublicTree;

/// Full-game policy assembled from subgame solves.
#[derive(Debug, Clone)]
pub struct Composition {
    /// The whole game as one subgame, for evaluation.
    pub full: Subgame,
    pub policy: Policy<f64>,
    pub subgames: usize,
    pub value_queries: usize,
}

type Solution = Option<(Subgame, Policy<f64>)>;

/// Oracle wrapper that keeps the equilibrium policies behind the most
/// recent batch of values.
struct Recorder<'a> {
    oracle: &'a OracleValue,
    last: Mutex<Vec<Solution>>,
}

impl ValueFunction for Recorder<'_> {
    fn evaluate(&self, _: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        let solved = queries
            .par_iter()
            .map(|q| self.oracle.solve(q))
            .collect::<Result<Vec<_>, _>>()?;
        let mut values = Vec::with_capacity(solved.len());
        let mut solutions = Vec::with_capacity(solved.len());
        for s in solved {
            values.push(s.values);
            solutions.push(s.solution);
        }
        *self.last.lock().expect("recorder poisoned") = solutions;
        Ok(values)
    }
}

/// CFR-D on the depth-limited subgame at the game root with oracle leaf
/// values, assembled into a full-game policy.
///
/// Above the leaves the policy is the solver's average. Below each leaf a
/// player's policy is its reach-weighted average, over the opponent's
/// updates, of the oracle equilibria solved at that iteration's leaf
/// beliefs, with the opponent's iteration weights.
pub fn decompose_cfr_d(
    tree: Arc<PublicTree>,
    oracle: &OracleValue,
    depth: usize,
    config: &SolveConfig,
) -> Result<Composition, DecompError> {
    let config = SolveConfig {
        algorithm: Algorithm::CfrD,
        ..*config
    };
    let full = Subgame::full(tree.clone())?;
    let sg = Subgame::new(tree.clone(), initial_pbs(&tree), DepthLimit::Public(depth))?;
    let recorder = Recorder {
        oracle,
        last: Mutex::new(Vec::new()),
    };
    let mut mass = vec![0.0; full.layout.len];
    let mut updates = [0usize; 2];
    let result = solve_subgame_traced(&sg, &recorder, &config, None, None, |t, sigma| {
        // The traverser's regrets on this iteration were computed against
        // the other player's subgame policies, so those are what its
        // average below the leaves must contain.
        let q = (t - 1) % 2;
        let p = 1 - q;
        updates[q] += 1;
        let w = config.cfr_variant.update_weight(updates[q]);
        let reach = walk::reach(&sg, sigma);
        let solutions = std::mem::take(&mut *recorder.last.lock().expect("recorder poisoned"));
        for (&leaf, solution) in sg.leaves.iter().zip(&solutions) {
            let Some((lsg, lpol)) = solution else { continue };
            let inner = walk::reach(lsg, lpol);
            let outer = sg.vec_offset[p][leaf];
            for &n in &lsg.decisions {
                if lsg.layout.player[n] != Some(p) {
                    continue;
                }
                let target = full
                    .sub_index(lsg.nodes[n].public)
                    .expect("leaf subgame outside the game");
                let base = lsg.vec_offset[p][n];
                for k in 0..lsg.layout.num_rows[n] {
                    let x = reach[p][outer + lsg.root_ancestor[p][base + k]] * inner[p][base + k];
                    if x == 0.0 {
                        continue;
                    }
                    let dst = full.layout.row(target, k);
                    for (m, &pr) in mass[dst].iter_mut().zip(lpol.row(n, k)) {
                        *m += w * x * pr;
                    }
                }
            }
        }
    })?;
    let mut policy = normalize_mass(&full.layout, &mass);
    for &n in &sg.decisions {
        let target = full
            .sub_index(sg.nodes[n].public)
            .expect("subgame node outside the game");
        policy.data_mut()[full.layout.block(target)].copy_from_slice(result.average.block(n));
    }
    Ok(Composition {
        full,
        policy,
        subgames: 1,
        value_queries: result.value_queries,
    })
}

/// Solves the game top-down, re-solving every leaf with beliefs induced by
/// the parent subgame's average policy. This passes down beliefs as if the
/// average were an exact equilibrium, which is not safe in general.
pub fn compose_from_average(
    tree: Arc<PublicTree>,
    vf: &dyn ValueFunction,
    depth: usize,
    config: &SolveConfig,
) -> Result<Composition, DecompError> {
    let full = Subgame::full(tree.clone())?;
    let mut policy = Policy::uniform(full.layout.clone());
    let mut queue = VecDeque::from([initial_pbs(&tree)]);
    let (mut subgames, mut value_queries) = (0, 0);
    while let Some(root) = queue.pop_front() {
        let sg = Subgame::new(tree.clone(), root, DepthLimit::Public(depth))?;
        let result = solve_subgame(&sg, vf, config, None, None)?;
        subgames += 1;
        value_queries += result.value_queries;
        for &n in &sg.decisions {
            let target = full
                .sub_index(sg.nodes[n].public)
                .expect("subgame node outside the game");
            policy.data_mut()[full.layout.block(target)].copy_from_slice(result.average.block(n));
        }
        let reach = ReachProfile::of(&sg, &result.average);
        for &l in &sg.leaves {
            queue.push_back(leaf_pbs(&sg, &reach, l));
        }
    }
    Ok(Composition {
        full,
        policy,
        subgames,
        value_queries,
    })
}
