//! Vectorized passes over a subgame's public tree.
//!
//! Reach vectors flow forward, counterfactual values flow backward. All
//! per-infostate quantities use the subgame's flat layout
//! (`Subgame::vec_offset`).

use crate::beliefs::{NodeKind, Subgame};
use crate::game::Player;
use crate::Scalar;

use super::Policy;

/// How the backward pass chooses actions at decision nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Follow the policy for both players.
    OnPolicy,
    /// The given player maximizes; only that player's values are computed.
    BestResponse(Player),
}

/// Own-action reach of every infostate (root infostates have reach one).
pub fn reach<S: Scalar>(sg: &Subgame, policy: &Policy<S>) -> [Vec<S>; 2] {
    let mut r = sg.zero_vectors::<S>();
    let root = 0;
    for p in 0..2 {
        r[p][sg.infostates(root, p)].fill(S::one());
    }
    for &node in &sg.decisions {
        let sn = &sg.nodes[node];
        let actor = sn.player.expect("decision");
        let other = 1 - actor;
        let ps = sg.tree.node(sn.public);
        let base = sg.vec_offset[actor][node];
        let n_act = ps.num_actions();
        for &c in &sn.children {
            let (src, dst) = (sg.infostates(node, other), sg.vec_offset[other][c]);
            r[other].copy_within(src.clone(), dst);
        }
        let block = policy.block(node);
        for (a, edge) in ps.edges.iter().enumerate() {
            let cbase = sg.vec_offset[actor][sn.edge_child[a]];
            for (k, &nk) in edge.next_infostate.iter().enumerate() {
                let v = r[actor][base + k] * block[k * n_act + a];
                r[actor][cbase + nk] = r[actor][cbase + nk] + v;
            }
        }
    }
    r
}

/// Reach weighted by root beliefs: the probability mass of each infostate.
pub fn weighted_reach<S: Scalar>(sg: &Subgame, policy: &Policy<S>) -> [Vec<S>; 2] {
    sg.weight_by_root(&reach(sg, policy))
}

/// Total belief mass of `player` at a node.
pub fn mass<S: Scalar>(sg: &Subgame, wr: &[Vec<S>; 2], node: usize, player: Player) -> S {
    wr[player][sg.infostates(node, player)].iter().copied().sum()
}

/// Counterfactual values of every infostate.
///
/// `terminal_reach` supplies the weighted opponent reach used at game
/// terminals; `leaf_cfv` supplies counterfactual values at depth-limit
/// leaves (zero when `None`).
pub fn values<S: Scalar>(
    sg: &Subgame,
    policy: &Policy<S>,
    terminal_reach: &[Vec<S>; 2],
    leaf_cfv: Option<&[Vec<S>; 2]>,
    mode: Mode,
) -> [Vec<S>; 2] {
    let mut cfv = sg.zero_vectors::<S>();
    let wants = |p: Player| match mode {
        Mode::OnPolicy => true,
        Mode::BestResponse(q) => q == p,
    };
    for node in (0..sg.len()).rev() {
        let sn = &sg.nodes[node];
        let ps = sg.tree.node(sn.public);
        match sn.kind {
            NodeKind::Terminal => {
                let (n1, n2) = (ps.num_infostates(0), ps.num_infostates(1));
                let (o1, o2) = (sg.vec_offset[0][node], sg.vec_offset[1][node]);
                if wants(0) {
                    let wr2 = &terminal_reach[1][o2..o2 + n2];
                    for k1 in 0..n1 {
                        let row = &ps.payoff[k1 * n2..(k1 + 1) * n2];
                        cfv[0][o1 + k1] = row.iter().zip(wr2).map(|(&u, &w)| S::c(u) * w).sum();
                    }
                }
                if wants(1) {
                    let wr1 = &terminal_reach[0][o1..o1 + n1];
                    for k2 in 0..n2 {
                        let mut acc = S::zero();
                        for k1 in 0..n1 {
                            acc = acc + S::c(ps.payoff[k1 * n2 + k2]) * wr1[k1];
                        }
                        cfv[1][o2 + k2] = -acc;
                    }
                }
            }
            NodeKind::Leaf => {
                if let Some(leaf) = leaf_cfv {
                    for p in 0..2 {
                        let r = sg.infostates(node, p);
                        cfv[p][r.clone()].copy_from_slice(&leaf[p][r]);
                    }
                }
            }
            NodeKind::Decision => {
                let actor = sn.player.expect("decision");
                let other = 1 - actor;
                if wants(other) {
                    let r = sg.infostates(node, other);
                    for &c in &sn.children {
                        let cb = sg.vec_offset[other][c];
                        for (i, k) in r.clone().enumerate() {
                            cfv[other][k] = cfv[other][k] + cfv[other][cb + i];
                        }
                    }
                }
                if wants(actor) {
                    let base = sg.vec_offset[actor][node];
                    let n_act = ps.num_actions();
                    let block = policy.block(node);
                    let maximize = mode == Mode::BestResponse(actor);
                    for k in 0..ps.num_infostates(actor) {
                        let mut acc = if maximize { S::neg_infinity() } else { S::zero() };
                        for (a, edge) in ps.edges.iter().enumerate() {
                            let q = cfv[actor][sg.vec_offset[actor][sn.edge_child[a]] + edge.next_infostate[k]];
                            if maximize {
                                acc = acc.max(q);
                            } else {
                                acc = acc + block[k * n_act + a] * q;
                            }
                        }
                        cfv[actor][base + k] = acc;
                    }
                }
            }
        }
    }
    cfv
}

/// Value of taking `action` at actor infostate `k` of decision `node`.
#[inline]
pub fn action_value<S: Scalar>(sg: &Subgame, cfv: &[Vec<S>; 2], node: usize, k: usize, action: usize) -> S {
    let sn = &sg.nodes[node];
    let actor = sn.player.expect("decision");
    let edge = &sg.tree.node(sn.public).edges[action];
    cfv[actor][sg.vec_offset[actor][sn.edge_child[action]] + edge.next_infostate[k]]
}

/// Normalization `sum_k1,k2 compat * b1 * b2` of the root beliefs.
pub fn root_normalizer(sg: &Subgame) -> f64 {
    let ps = sg.tree.node(sg.root.node);
    let [b1, b2] = &sg.root.beliefs;
    let mut z = 0.0;
    for (i, &x) in b1.iter().enumerate() {
        for (j, &y) in b2.iter().enumerate() {
            z += x * y * ps.compat_at(i, j);
        }
    }
    z
}
