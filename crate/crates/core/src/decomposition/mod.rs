//! Depth-limited subgame solving with leaf values supplied by a value
//! function, plus the exact oracle value function used as a reference.
//!
//! Value vectors are conditional: `v_p(k)` is player `p`'s expected payoff
//! given infostate `k`, with the opponent's infostate distributed according
//! to the PBS beliefs and the chance compatibility of the pair. Solvers work
//! in counterfactual units internally; `to_counterfactual` and
//! `from_counterfactual` convert between the two.

mod compose;
mod oracle;
mod solve;
mod supergradient;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{BeliefError, Pbs, Subgame};
use crate::game::{Player, PublicState, PublicTree};

pub use compose::{compose_from_average, decompose_cfr_d, Composition};
pub use oracle::{exact_terminal_values, OracleConfig, OracleSolve, OracleValue};
pub use solve::{
    modified_avg_leaf_values, root_values, solve_subgame, solve_subgame_snapshots, solve_subgame_traced,
    telescope_leaf_values, Algorithm, Snapshot, SolveConfig, SolveResult, UniformContinuation, Weighting,
};
pub use supergradient::{belief_line, supergradient_check, SupergradientReport};

#[derive(Debug, Error)]
pub enum DecompError {
    #[error("iteration count must be at least one")]
    ZeroIterations,
    #[error("warm start covers {warm} iterations but only {total} were requested")]
    WarmStartTooLong { warm: usize, total: usize },
    #[error("value vector for player {player} has length {got}, expected {expected}")]
    Shape {
        player: Player,
        got: usize,
        expected: usize,
    },
    #[error("value function returned {got} vectors for {expected} queries")]
    BatchSize { got: usize, expected: usize },
    #[error("value function returned a non-finite value at public state {0}")]
    NonFinite(usize),
    #[error("value function failed: {0}")]
    ValueFunction(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// Per-infostate values of both players at one public state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector {
    pub values: [Vec<f64>; 2],
}

impl ValueVector {
    pub fn zeros(state: &PublicState) -> Self {
        Self {
            values: [vec![0.0; state.num_infostates(0)], vec![0.0; state.num_infostates(1)]],
        }
    }

    /// Checks lengths against the public state and that entries are finite.
    pub fn validate(&self, state: &PublicState) -> Result<(), DecompError> {
        for p in 0..2 {
            let expected = state.num_infostates(p);
            if self.values[p].len() != expected {
                return Err(DecompError::Shape {
                    player: p,
                    got: self.values[p].len(),
                    expected,
                });
            }
            if self.values[p].iter().any(|v| !v.is_finite()) {
                return Err(DecompError::NonFinite(state.id));
            }
        }
        Ok(())
    }

    /// Expected value of `player` under the beliefs of `pbs`.
    pub fn expectation(&self, state: &PublicState, pbs: &Pbs, player: Player) -> f64 {
        let o = 1 - player;
        let (mut num, mut z) = (0.0, 0.0);
        for (k, &b) in pbs.beliefs[player].iter().enumerate() {
            let c = opponent_weight(state, player, k, &pbs.beliefs[o]);
            num += b * c * self.values[player][k];
            z += b * c;
        }
        if z > 0.0 {
            num / z
        } else {
            0.0
        }
    }
}

/// Maps a batch of PBSs to value vectors at their public states.
pub trait ValueFunction: Send + Sync {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError>;
}

/// Returns zero for every infostate.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroValue;

impl ValueFunction for ZeroValue {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        Ok(queries.iter().map(|q| ValueVector::zeros(tree.node(q.node))).collect())
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for &V {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        (**self).evaluate(tree, queries)
    }
}

impl<V: ValueFunction + ?Sized> ValueFunction for std::sync::Arc<V> {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        (**self).evaluate(tree, queries)
    }
}

/// `sum_o compat(k, o) * w(o)` for infostate `k` of `player`.
#[inline]
pub fn opponent_weight(state: &PublicState, player: Player, k: usize, weights: &[f64]) -> f64 {
    let n2 = state.num_infostates(1);
    if player == 0 {
        state.compat[k * n2..(k + 1) * n2]
            .iter()
            .zip(weights)
            .map(|(c, w)| c * w)
            .sum()
    } else {
        weights
            .iter()
            .enumerate()
            .map(|(k1, w)| state.compat[k1 * n2 + k] * w)
            .sum()
    }
}

/// Writes counterfactual values at subgame node `node` from conditional
/// values, given the root-weighted reach `wr` of the subgame.
pub fn to_counterfactual(sg: &Subgame, node: usize, values: &ValueVector, wr: &[Vec<f64>; 2], out: &mut [Vec<f64>; 2]) {
    let state = sg.tree.node(sg.nodes[node].public);
    for p in 0..2 {
        let o = 1 - p;
        let opp = &wr[o][sg.infostates(node, o)];
        let base = sg.vec_offset[p][node];
        for (k, &v) in values.values[p].iter().enumerate() {
            out[p][base + k] = v * opponent_weight(state, p, k, opp);
        }
    }
}

/// Conditional values from counterfactual values `cfv` at public state
/// `state`, where `opp_weights[p]` is the weighted reach of `p`'s opponent.
/// Infostates with no compatible opponent mass get zero.
pub fn from_counterfactual(state: &PublicState, cfv: [&[f64]; 2], opp_weights: [&[f64]; 2]) -> ValueVector {
    let values = [0, 1].map(|p| {
        cfv[p]
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let c = opponent_weight(state, p, k, opp_weights[p]);
                if c > 0.0 {
                    v / c
                } else {
                    0.0
                }
            })
            .collect()
    });
    ValueVector { values }
}

/// Conditional values at the root of `sg` from flat counterfactual values.
pub fn root_conditional(sg: &Subgame, cfv: &[Vec<f64>; 2]) -> ValueVector {
    let state = sg.tree.node(sg.root.node);
    let b = &sg.root.beliefs;
    from_counterfactual(
        state,
        [&cfv[0][sg.infostates(0, 0)], &cfv[1][sg.infostates(0, 1)]],
        [&b[1], &b[0]],
    )
}
