use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::beliefs::{leaf_pbs, Pbs, ReachProfile, Subgame};
use crate::equilibrium::Policy;
use crate::game::{Player, PublicTree};

/// Outcome of walking one history through a subgame.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafSample {
    /// Subgame node where the walk stopped: a leaf or a terminal.
    pub node: usize,
    /// Each player's infostate index at `node`.
    pub infostates: [usize; 2],
    /// `(subgame node, actor, actor infostate, action)` per step.
    pub actions: Vec<(usize, Player, usize, usize)>,
}

/// Draws an infostate pair at the PBS's public state with probability
/// proportional to `b1(k1) b2(k2) compat(k1, k2)`.
pub fn sample_deal<R: Rng + ?Sized>(tree: &PublicTree, pbs: &Pbs, rng: &mut R) -> [usize; 2] {
    let state = tree.node(pbs.node);
    let n2 = state.num_infostates(1);
    let weights: Vec<f64> = (0..state.num_infostates(0) * n2)
        .map(|i| pbs.beliefs[0][i / n2] * pbs.beliefs[1][i % n2] * state.compat[i])
        .collect();
    let i = WeightedIndex::new(&weights)
        .expect("PBS has no compatible history")
        .sample(rng);
    [i / n2, i % n2]
}

/// Index at `child` of the infostate that `player` held at `parent` when
/// `player` did not act on the way down.
fn passive_infostate(tree: &PublicTree, child: usize, player: Player, k: usize) -> usize {
    tree.node(child).parent_infostate[player]
        .iter()
        .position(|&p| p == k)
        .expect("passive infostate has no successor")
}

/// Subgame node and infostate pair reached by taking action `a` at
/// decision node `node` with infostates `k`.
pub fn advance(sg: &Subgame, node: usize, k: [usize; 2], a: usize) -> (usize, [usize; 2]) {
    let actor = sg.nodes[node].player.expect("decision node");
    let child = sg.nodes[node].edge_child[a];
    let mut next = k;
    next[actor] = sg.tree.node(sg.nodes[node].public).edges[a].next_infostate[k[actor]];
    next[1 - actor] = passive_infostate(&sg.tree, sg.nodes[child].public, 1 - actor, k[1 - actor]);
    (child, next)
}

/// Plays `policy` from the subgame root with the given infostates until a
/// leaf or terminal. When `explorer` is `Some((i, eps))`, player `i` acts
/// uniformly at random with probability `eps` at each of its decisions.
pub fn walk_to_leaf<R: Rng + ?Sized>(
    sg: &Subgame,
    policy: &Policy<f64>,
    start: [usize; 2],
    explorer: Option<(Player, f64)>,
    rng: &mut R,
) -> LeafSample {
    let mut node = 0;
    let mut k = start;
    let mut actions = Vec::new();
    while sg.layout.is_decision(node) {
        let actor = sg.nodes[node].player.expect("decision node");
        let row = policy.row(node, k[actor]);
        let a = match explorer {
            Some((i, eps)) if i == actor && eps > 0.0 && rng.random::<f64>() < eps => rng.random_range(0..row.len()),
            _ => WeightedIndex::new(row).expect("policy row has no mass").sample(rng),
        };
        actions.push((node, actor, k[actor], a));
        (node, k) = advance(sg, node, k, a);
    }
    LeafSample {
        node,
        infostates: k,
        actions,
    }
}

/// Samples a root history from the subgame's root PBS and walks it with
/// `policy` (exploring as `explorer` says). Returns the PBS at the node
/// reached, with beliefs induced by `belief_policy`.
pub fn sample_leaf<R: Rng + ?Sized>(
    sg: &Subgame,
    policy: &Policy<f64>,
    belief_policy: &Policy<f64>,
    explorer: Option<(Player, f64)>,
    rng: &mut R,
) -> (Pbs, LeafSample) {
    let deal = sample_deal(&sg.tree, &sg.root, rng);
    let leaf = walk_to_leaf(sg, policy, deal, explorer, rng);
    let pbs = leaf_pbs(sg, &ReachProfile::of(sg, belief_policy), leaf.node);
    (pbs, leaf)
}
