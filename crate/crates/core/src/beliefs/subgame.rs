use std::collections::HashMap;
use std::sync::Arc;

use super::{initial_pbs, BeliefError, Pbs};
use crate::equilibrium::{walk, Policy};
use crate::game::{Player, PublicTree};
use crate::Scalar;

/// How far a subgame extends below its root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthLimit {
    /// A fixed number of public actions.
    Public(usize),
    ToEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Decision,
    /// End of the game; values are exact.
    Terminal,
    /// Depth boundary; values come from a value function.
    Leaf,
}

#[derive(Debug, Clone)]
pub struct SubNode {
    /// Public state id in the full tree.
    pub public: usize,
    pub parent: Option<usize>,
    /// Public actions below the subgame root.
    pub depth: usize,
    pub kind: NodeKind,
    pub player: Option<Player>,
    /// Subgame index of the child reached by each action.
    pub edge_child: Vec<usize>,
    /// Distinct children.
    pub children: Vec<usize>,
}

/// Flat row-major storage layout for per-infostate action data over the
/// decision nodes of a subgame.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyLayout {
    pub offset: Vec<usize>,
    pub num_rows: Vec<usize>,
    pub num_actions: Vec<usize>,
    pub player: Vec<Option<Player>>,
    pub len: usize,
}

impl PolicyLayout {
    #[inline]
    pub fn row(&self, node: usize, infostate: usize) -> std::ops::Range<usize> {
        let start = self.offset[node] + infostate * self.num_actions[node];
        start..start + self.num_actions[node]
    }

    #[inline]
    pub fn block(&self, node: usize) -> std::ops::Range<usize> {
        let start = self.offset[node];
        start..start + self.num_rows[node] * self.num_actions[node]
    }

    pub fn is_decision(&self, node: usize) -> bool {
        self.player[node].is_some()
    }
}

/// Depth-limited public tree rooted at a PBS, enumerated breadth-first so
/// parents precede children.
#[derive(Debug, Clone)]
pub struct Subgame {
    pub tree: Arc<PublicTree>,
    pub root: Pbs,
    pub depth: DepthLimit,
    pub nodes: Vec<SubNode>,
    pub layout: Arc<PolicyLayout>,
    /// Start of each node's infostate block in flat per-player vectors.
    pub vec_offset: [Vec<usize>; 2],
    pub vec_len: [usize; 2],
    /// Root infostate each infostate descends from, in flat vector layout.
    pub root_ancestor: [Vec<usize>; 2],
    pub decisions: Vec<usize>,
    pub leaves: Vec<usize>,
    pub terminals: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl Subgame {
    pub fn new(tree: Arc<PublicTree>, root: Pbs, depth: DepthLimit) -> Result<Self, BeliefError> {
        if depth == DepthLimit::Public(0) {
            return Err(BeliefError::ZeroDepth);
        }
        let root = Pbs::new(&tree, root.node, root.beliefs.clone()).map(|mut p| {
            p.flagged = root.flagged;
            p
        })?;
        if tree.node(root.node).is_terminal() {
            return Err(BeliefError::TerminalRoot);
        }
        let limit = match depth {
            DepthLimit::Public(n) => n,
            DepthLimit::ToEnd => usize::MAX,
        };

        let mut nodes: Vec<SubNode> = Vec::new();
        let mut index = HashMap::new();
        let mut frontier = vec![(root.node, None, 0usize)];
        let mut head = 0;
        while head < frontier.len() {
            let (public, parent, d) = frontier[head];
            head += 1;
            let id = nodes.len();
            index.insert(public, id);
            let ps = tree.node(public);
            let kind = if ps.is_terminal() {
                NodeKind::Terminal
            } else if d >= limit {
                NodeKind::Leaf
            } else {
                NodeKind::Decision
            };
            nodes.push(SubNode {
                public,
                parent,
                depth: d,
                kind,
                player: if kind == NodeKind::Decision { ps.player } else { None },
                edge_child: Vec::new(),
                children: Vec::new(),
            });
            if kind == NodeKind::Decision {
                for &c in &ps.children {
                    frontier.push((c, Some(id), d + 1));
                }
            }
        }
        for i in 0..nodes.len() {
            if nodes[i].kind != NodeKind::Decision {
                continue;
            }
            let ps = tree.node(nodes[i].public);
            nodes[i].edge_child = ps.edges.iter().map(|e| index[&e.child]).collect();
            nodes[i].children = ps.children.iter().map(|c| index[c]).collect();
        }

        let mut vec_offset = [Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len())];
        let mut vec_len = [0, 0];
        for n in &nodes {
            for p in 0..2 {
                vec_offset[p].push(vec_len[p]);
                vec_len[p] += tree.node(n.public).num_infostates(p);
            }
        }
        let mut root_ancestor = [vec![0; vec_len[0]], vec![0; vec_len[1]]];
        for (i, n) in nodes.iter().enumerate() {
            let ps = tree.node(n.public);
            for p in 0..2 {
                for k in 0..ps.num_infostates(p) {
                    root_ancestor[p][vec_offset[p][i] + k] = match n.parent {
                        None => k,
                        Some(par) => root_ancestor[p][vec_offset[p][par] + ps.parent_infostate[p][k]],
                    };
                }
            }
        }

        let mut layout = PolicyLayout {
            offset: vec![usize::MAX; nodes.len()],
            num_rows: vec![0; nodes.len()],
            num_actions: vec![0; nodes.len()],
            player: vec![None; nodes.len()],
            len: 0,
        };
        let (mut decisions, mut leaves, mut terminals) = (Vec::new(), Vec::new(), Vec::new());
        for (i, n) in nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Decision => {
                    let ps = tree.node(n.public);
                    let actor = n.player.expect("decision node without actor");
                    layout.offset[i] = layout.len;
                    layout.num_rows[i] = ps.num_infostates(actor);
                    layout.num_actions[i] = ps.num_actions();
                    layout.player[i] = Some(actor);
                    layout.len += layout.num_rows[i] * layout.num_actions[i];
                    decisions.push(i);
                }
                NodeKind::Leaf => leaves.push(i),
                NodeKind::Terminal => terminals.push(i),
            }
        }

        Ok(Self {
            tree,
            root,
            depth,
            nodes,
            layout: Arc::new(layout),
            vec_offset,
            vec_len,
            root_ancestor,
            decisions,
            leaves,
            terminals,
            index,
        })
    }

    /// The whole game as one subgame.
    pub fn full(tree: Arc<PublicTree>) -> Result<Self, BeliefError> {
        let root = initial_pbs(&tree);
        Self::new(tree, root, DepthLimit::ToEnd)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Subgame index of a public state, if it lies in this subgame.
    pub fn sub_index(&self, public: usize) -> Option<usize> {
        self.index.get(&public).copied()
    }

    #[inline]
    pub fn infostates(&self, node: usize, player: Player) -> std::ops::Range<usize> {
        let start = self.vec_offset[player][node];
        let n = self.tree.node(self.nodes[node].public).num_infostates(player);
        start..start + n
    }

    /// Per-player vectors of zeros in flat infostate layout.
    pub fn zero_vectors<S: Scalar>(&self) -> [Vec<S>; 2] {
        [vec![S::zero(); self.vec_len[0]], vec![S::zero(); self.vec_len[1]]]
    }

    /// Scales pure reach by the root beliefs of each infostate's ancestor.
    pub fn weight_by_root<S: Scalar>(&self, reach: &[Vec<S>; 2]) -> [Vec<S>; 2] {
        [0, 1].map(|p| {
            reach[p]
                .iter()
                .zip(&self.root_ancestor[p])
                .map(|(&r, &a)| r * S::c(self.root.beliefs[p][a]))
                .collect()
        })
    }
}

/// Per-player own-action reach probabilities from the subgame root, in flat
/// infostate layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachProfile {
    pub reach: [Vec<f64>; 2],
}

impl ReachProfile {
    pub fn of<S: Scalar>(subgame: &Subgame, policy: &Policy<S>) -> Self {
        let r = walk::reach(subgame, policy);
        Self {
            reach: r.map(|v| v.into_iter().map(S::as_f64).collect()),
        }
    }
}

/// Beliefs at subgame node `node` when play follows the policy behind
/// `reach`: root beliefs reweighted by reach and normalized per player.
pub fn leaf_pbs(subgame: &Subgame, reach: &ReachProfile, node: usize) -> Pbs {
    let weighted = [0, 1].map(|p| {
        subgame
            .infostates(node, p)
            .map(|i| reach.reach[p][i] * subgame.root.beliefs[p][subgame.root_ancestor[p][i]])
            .collect::<Vec<f64>>()
    });
    Pbs::from_weights(subgame.nodes[node].public, weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::update_beliefs;
    use crate::game::{GameSpec, ModifiedRps};

    fn rps() -> Arc<PublicTree> {
        Arc::new(PublicTree::build(&ModifiedRps).unwrap())
    }

    fn ld14() -> Arc<PublicTree> {
        GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap()
    }

    #[test]
    fn rps_full_subgame() {
        let sg = Subgame::full(rps()).unwrap();
        assert_eq!(sg.decisions.len(), 2);
        assert!(sg.leaves.is_empty());
        let terminal_histories: usize = sg
            .terminals
            .iter()
            .map(|&t| sg.tree.node(sg.nodes[t].public).num_histories)
            .sum();
        assert_eq!(terminal_histories, 9);
    }

    #[test]
    fn depth_zero_rejected() {
        let tree = rps();
        let root = initial_pbs(&tree);
        assert_eq!(
            Subgame::new(tree, root, DepthLimit::Public(0)).unwrap_err(),
            BeliefError::ZeroDepth
        );
    }

    #[test]
    fn depth_two_liars_dice() {
        let tree = ld14();
        let root = initial_pbs(&tree);
        let sg = Subgame::new(tree.clone(), root, DepthLimit::Public(2)).unwrap();
        // 1 root + 8 first bids + (second bids and calls) below each
        assert_eq!(sg.decisions.len(), 9);
        assert!(sg.nodes.iter().all(|n| n.depth <= 2));
        for &l in &sg.leaves {
            assert_eq!(sg.nodes[l].depth, 2);
            assert!(!tree.node(sg.nodes[l].public).is_terminal());
        }
        // after bid k, 7-k raises lead to leaves, plus one call
        assert_eq!(sg.leaves.len(), (0..8).map(|k| 7 - k).sum::<usize>());
        assert_eq!(sg.terminals.len(), 8);
        for (i, n) in sg.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                assert!(p < i);
            }
        }
    }

    #[test]
    fn leaf_beliefs_follow_bayes() {
        // Two P1 infostates with beliefs (1/2, 1/2); action 0 taken with 0.8 and 0.4.
        let tree = GameSpec::LiarsDice { dice: 1, faces: 2 }.build_tree().unwrap();
        let root = Pbs::new(&tree, 0, [vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let sg = Subgame::new(tree.clone(), root.clone(), DepthLimit::Public(1)).unwrap();
        let acts = sg.layout.num_actions[0];
        let mut policy = Policy::<f64>::uniform(sg.layout.clone());
        let mut rows = vec![0.0; 2 * acts];
        rows[0] = 0.8;
        rows[1] = 0.2;
        rows[acts] = 0.4;
        rows[acts + 1] = 0.6;
        policy.data_mut()[sg.layout.block(0)].copy_from_slice(&rows);
        let reach = ReachProfile::of(&sg, &policy);
        let leaf = sg.nodes[0].edge_child[0];
        let pbs = leaf_pbs(&sg, &reach, leaf);
        assert!((pbs.beliefs[0][0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((pbs.beliefs[0][1] - 1.0 / 3.0).abs() < 1e-12);
        let via_update = update_beliefs(&tree, &root, &rows, 0).unwrap();
        assert_eq!(via_update.node, pbs.node);
        assert!((via_update.beliefs[0][0] - pbs.beliefs[0][0]).abs() < 1e-12);
    }

    #[test]
    fn deterministic_policy_keeps_uniform_leaf() {
        let tree = ld14();
        let sg = Subgame::new(tree.clone(), initial_pbs(&tree), DepthLimit::Public(1)).unwrap();
        let mut policy = Policy::<f64>::uniform(sg.layout.clone());
        let acts = sg.layout.num_actions[0];
        for k in 0..4 {
            let row = sg.layout.row(0, k);
            policy.data_mut()[row.clone()].fill(0.0);
            policy.data_mut()[row.start + 3] = 1.0;
        }
        assert_eq!(acts, 8);
        let reach = ReachProfile::of(&sg, &policy);
        let pbs = leaf_pbs(&sg, &reach, sg.nodes[0].edge_child[3]);
        assert!(!pbs.flagged);
        assert!(pbs.beliefs[0].iter().all(|&b| (b - 0.25).abs() < 1e-12));
        let dead = leaf_pbs(&sg, &reach, sg.nodes[0].edge_child[0]);
        assert!(dead.flagged);
    }

    #[test]
    fn rps_leaf_after_nash_matches_policy() {
        let tree = rps();
        let sg = Subgame::new(tree.clone(), initial_pbs(&tree), DepthLimit::Public(1)).unwrap();
        let mut policy = Policy::<f64>::uniform(sg.layout.clone());
        policy.data_mut()[sg.layout.block(0)].copy_from_slice(&[0.4, 0.4, 0.2]);
        let reach = ReachProfile::of(&sg, &policy);
        let pbs = leaf_pbs(&sg, &reach, sg.leaves[0]);
        let expected = [0.4, 0.4, 0.2];
        assert!(pbs.beliefs[0].iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}
