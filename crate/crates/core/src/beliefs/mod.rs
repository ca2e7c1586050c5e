//! Public belief states and depth-limited subgames.

mod subgame;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Game, GameError, History, Player, PublicTree};

pub use subgame::{leaf_pbs, DepthLimit, NodeKind, PolicyLayout, ReachProfile, SubNode, Subgame};

/// Tolerance on belief normalization.
pub const BELIEF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("observed action has zero probability under the beliefs and policy")]
    Degenerate,
    #[error("belief vector for player {player} has length {got}, expected {expected}")]
    Shape {
        player: Player,
        got: usize,
        expected: usize,
    },
    #[error("subgame depth must be at least one public action")]
    ZeroDepth,
    #[error("subgame root is a terminal public state")]
    TerminalRoot,
    #[error("public state {0} is not a decision node")]
    NotDecision(usize),
    #[error("history lies in public state {got}, PBS is at {expected}")]
    WrongPublicState { got: usize, expected: usize },
    #[error(transparent)]
    Game(#[from] GameError),
}

/// A public state together with one belief vector per player over that
/// player's infostates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pbs {
    pub node: usize,
    pub beliefs: [Vec<f64>; 2],
    /// Set when some player's beliefs were unreachable and replaced by the
    /// uniform distribution.
    #[serde(default)]
    pub flagged: bool,
}

impl Pbs {
    pub fn new(tree: &PublicTree, node: usize, beliefs: [Vec<f64>; 2]) -> Result<Self, BeliefError> {
        for (p, b) in beliefs.iter().enumerate() {
            let expected = tree.node(node).num_infostates(p);
            if b.len() != expected {
                return Err(BeliefError::Shape {
                    player: p,
                    got: b.len(),
                    expected,
                });
            }
        }
        Ok(Self {
            node,
            beliefs,
            flagged: false,
        })
    }

    /// Builds a PBS from unnormalized per-player weights, substituting the
    /// uniform distribution (and flagging) where a player's total is zero.
    pub fn from_weights(node: usize, weights: [Vec<f64>; 2]) -> Self {
        let mut flagged = false;
        let beliefs = weights.map(|w| match normalized(&w) {
            Some(b) => b,
            None => {
                flagged = true;
                uniform(w.len())
            }
        });
        Self { node, beliefs, flagged }
    }

    pub fn is_normalized(&self) -> bool {
        self.beliefs
            .iter()
            .all(|b| (b.iter().sum::<f64>() - 1.0).abs() <= BELIEF_TOLERANCE && b.iter().all(|&x| x >= 0.0))
    }

    /// Cache key with beliefs rounded to a `1e-6` grid.
    pub fn quantized_key(&self) -> (usize, Vec<i64>) {
        let q = self
            .beliefs
            .iter()
            .flatten()
            .map(|&x| (x * 1e6).round() as i64)
            .collect();
        (self.node, q)
    }
}

pub(crate) fn normalized(w: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if total > 0.0 && total.is_finite() {
        Some(w.iter().map(|x| x / total).collect())
    } else {
        None
    }
}

pub(crate) fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Root PBS: each player's beliefs are the chance marginals.
pub fn initial_pbs(tree: &PublicTree) -> Pbs {
    let root = tree.root();
    Pbs::from_weights(root.id, root.marginals.clone())
}

/// Bayes update after the acting player takes `action` (a dense action id).
///
/// `policy` holds the actor's action distribution row-major, one row per
/// actor infostate. Hidden actions that share a public successor are
/// aggregated, so the result sits at the observed child.
pub fn update_beliefs(tree: &PublicTree, pbs: &Pbs, policy: &[f64], action: usize) -> Result<Pbs, BeliefError> {
    let node = tree.node(pbs.node);
    let actor = node.player.ok_or(BeliefError::NotDecision(pbs.node))?;
    let num_actions = node.num_actions();
    let child = node.edges[action].child;
    let mut next = vec![0.0; tree.node(child).num_infostates(actor)];
    for (a, edge) in node.edges.iter().enumerate() {
        if edge.child != child {
            continue;
        }
        for (k, &b) in pbs.beliefs[actor].iter().enumerate() {
            next[edge.next_infostate[k]] += b * policy[k * num_actions + a];
        }
    }
    let next = normalized(&next).ok_or(BeliefError::Degenerate)?;
    let mut beliefs = pbs.beliefs.clone();
    beliefs[actor] = next;
    Ok(Pbs {
        node: child,
        beliefs,
        flagged: false,
    })
}

/// Probability of `history` given the PBS: `b1(s1) b2(s2) rho / Z`.
pub fn history_weight(tree: &PublicTree, game: &dyn Game, pbs: &Pbs, history: &History) -> Result<f64, BeliefError> {
    let (node, [k1, k2]) = tree.locate(game, history)?;
    if node != pbs.node {
        return Err(BeliefError::WrongPublicState {
            got: node,
            expected: pbs.node,
        });
    }
    let ps = tree.node(node);
    let [b1, b2] = &pbs.beliefs;
    let mut z = 0.0;
    for (i, &x) in b1.iter().enumerate() {
        for (j, &y) in b2.iter().enumerate() {
            z += x * y * ps.compat_at(i, j);
        }
    }
    Ok(b1[k1] * b2[k2] * ps.compat_at(k1, k2) / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CoinGuess, GameSpec, LiarsDice, ModifiedRps};
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn initial_beliefs_are_chance_marginals() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let pbs = initial_pbs(&tree);
        assert!(close(&pbs.beliefs[0], &[0.25; 4]));
        assert!(close(&pbs.beliefs[1], &[0.25; 4]));

        let rps = PublicTree::build(&ModifiedRps).unwrap();
        assert_eq!(initial_pbs(&rps).beliefs, [vec![1.0], vec![1.0]]);

        let coin = PublicTree::build(&CoinGuess::new(0.7).unwrap()).unwrap();
        assert!(close(&initial_pbs(&coin).beliefs[0], &[0.7, 0.3]));
    }

    #[test]
    fn rps_update_recovers_policy() {
        let tree = PublicTree::build(&ModifiedRps).unwrap();
        let pbs = initial_pbs(&tree);
        let next = update_beliefs(&tree, &pbs, &[0.4, 0.4, 0.2], 0).unwrap();
        assert_eq!(next.node, 1);
        assert!(close(&next.beliefs[0], &[0.4, 0.4, 0.2]));
        assert_eq!(next.beliefs[1], vec![1.0]);
    }

    #[test]
    fn zero_likelihood_removes_infostate() {
        let g = CoinGuess::new(0.5).unwrap();
        let tree = PublicTree::build(&g).unwrap();
        let after_play = update_beliefs(&tree, &initial_pbs(&tree), &[1.0, 1.0], 0).unwrap();
        // P2 guesses; P2 has a single infostate, so test the P1-side rule on a two-infostate actor
        let ld = PublicTree::build(&LiarsDice::new(1, 2).unwrap()).unwrap();
        let root = Pbs::new(&ld, 0, [vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let acts = ld.root().num_actions();
        let mut policy = vec![0.0; 2 * acts];
        policy[0] = 1.0; // infostate 0 always bids action 0
        policy[acts + 1] = 1.0; // infostate 1 always bids action 1
        let next = update_beliefs(&ld, &root, &policy, 0).unwrap();
        assert!(close(&next.beliefs[0], &[1.0, 0.0]));
        assert_eq!(after_play.beliefs[0], vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_update_is_an_error() {
        let tree = PublicTree::build(&ModifiedRps).unwrap();
        let pbs = initial_pbs(&tree);
        let child = tree.node(1);
        let p2 = Pbs::new(&tree, 1, [vec![1.0 / 3.0; 3], vec![1.0]]).unwrap();
        assert_eq!(child.player, Some(1));
        assert_eq!(
            update_beliefs(&tree, &p2, &[0.0, 1.0, 0.0], 0),
            Err(BeliefError::Degenerate)
        );
        assert!(update_beliefs(&tree, &pbs, &[0.0, 0.0, 0.0], 1).is_err());
    }

    #[test]
    fn uniform_policy_keeps_uniform_beliefs() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let pbs = initial_pbs(&tree);
        let acts = tree.root().num_actions();
        let policy = vec![1.0 / acts as f64; 4 * acts];
        for a in 0..acts {
            let next = update_beliefs(&tree, &pbs, &policy, a).unwrap();
            assert!(close(&next.beliefs[0], &[0.25; 4]));
        }
    }

    #[test]
    fn history_weights() {
        let g = LiarsDice::new(1, 4).unwrap();
        let tree = PublicTree::build(&g).unwrap();
        let pbs = initial_pbs(&tree);
        let w = history_weight(&tree, &g, &pbs, &History::new([1, 2])).unwrap();
        assert!((w - 1.0 / 16.0).abs() < 1e-15);

        let sharp = Pbs::new(&tree, 0, [vec![1.0, 0.0, 0.0, 0.0], vec![0.25; 4]]).unwrap();
        for j in 0..4 {
            let w = history_weight(&tree, &g, &sharp, &History::new([0, j])).unwrap();
            assert!((w - 0.25).abs() < 1e-15);
        }
        let wrong = history_weight(&tree, &g, &pbs, &History::new([0, 0]).child(0));
        assert!(matches!(wrong, Err(BeliefError::WrongPublicState { .. })));
    }

    #[test]
    fn flagged_when_unreachable() {
        let pbs = Pbs::from_weights(3, [vec![0.0, 0.0], vec![1.0, 3.0]]);
        assert!(pbs.flagged);
        assert_eq!(pbs.beliefs[0], vec![0.5, 0.5]);
        assert_eq!(pbs.beliefs[1], vec![0.25, 0.75]);
    }

    proptest! {
        #[test]
        fn history_weight_sums_to_one(
            b1 in prop::collection::vec(0.01f64..1.0, 4),
            b2 in prop::collection::vec(0.01f64..1.0, 4),
            node in 0usize..200,
        ) {
            let g = LiarsDice::new(1, 4).unwrap();
            let tree = PublicTree::build(&g).unwrap();
            let node = node % tree.len();
            let pbs = Pbs::from_weights(node, [b1, b2]);
            let key = &tree.node(node).public_key;
            let mut total = 0.0;
            for r1 in 0..4 {
                for r2 in 0..4 {
                    let h = History { deal: [r1, r2], actions: key.clone() };
                    total += history_weight(&tree, &g, &pbs, &h).unwrap();
                }
            }
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn updates_stay_normalized_and_supported(
            beliefs in prop::collection::vec(0.0f64..1.0, 4),
            raw in prop::collection::vec(0.001f64..1.0, 32),
            action in 0usize..8,
        ) {
            prop_assume!(beliefs.iter().sum::<f64>() > 1e-3);
            let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
            let pbs = Pbs::from_weights(0, [beliefs.clone(), vec![0.25; 4]]);
            let mut policy = raw.clone();
            for row in policy.chunks_mut(8) {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
            let next = update_beliefs(&tree, &pbs, &policy, action).unwrap();
            prop_assert!(next.is_normalized());
            for k in 0..4 {
                if next.beliefs[0][k] > 0.0 {
                    prop_assert!(pbs.beliefs[0][k] > 0.0);
                }
            }
        }
    }
}
