use std::collections::{HashMap, VecDeque};

use super::{Action, Game, GameError, GameSpec, History, Player, NUM_PLAYERS};

/// An infostate, identified densely within its public state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Infostate {
    pub player: Player,
    pub public_state: usize,
    pub id: usize,
}

/// A public action out of a decision node.
#[derive(Debug, Clone)]
pub struct Edge {
    pub action: Action,
    pub child: usize,
    /// Acting player's infostate in `child` reached from each of the actor's
    /// infostates here by taking this action.
    pub next_infostate: Vec<usize>,
}

/// One node of the public tree: all histories sharing a public observation
/// sequence.
///
/// Pair arrays (`compat`, `payoff`) are row-major `[k1 * n2 + k2]`.
#[derive(Debug, Clone)]
pub struct PublicState {
    pub id: usize,
    pub parent: Option<usize>,
    /// Number of public observations since the root.
    pub depth: usize,
    pub public_key: Vec<usize>,
    /// Acting player, `None` at terminal nodes.
    pub player: Option<Player>,
    pub edges: Vec<Edge>,
    /// Distinct children in first-seen order.
    pub children: Vec<usize>,
    /// Private observation sequence of each infostate, sorted.
    pub infostate_keys: [Vec<Vec<usize>>; NUM_PLAYERS],
    /// Private chance marginal of each infostate, inherited from its root
    /// ancestor.
    pub marginals: [Vec<f64>; NUM_PLAYERS],
    /// Relative chance weight `rho(k1, k2) / (m1(k1) m2(k2))`; zero where no
    /// history has that infostate pair.
    pub compat: Vec<f64>,
    /// Terminal reward of the first player times `compat` (terminal only).
    pub payoff: Vec<f64>,
    /// Infostate in the parent each infostate descends from.
    pub parent_infostate: [Vec<usize>; NUM_PLAYERS],
    pub num_histories: usize,
}

impl PublicState {
    pub fn is_terminal(&self) -> bool {
        self.player.is_none()
    }

    pub fn num_infostates(&self, player: Player) -> usize {
        self.infostate_keys[player].len()
    }

    pub fn num_actions(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn compat_at(&self, k1: usize, k2: usize) -> f64 {
        self.compat[k1 * self.infostate_keys[1].len() + k2]
    }
}

/// The public tree of a game with dense per-node infostate indexing.
#[derive(Debug, Clone)]
pub struct PublicTree {
    nodes: Vec<PublicState>,
    index: HashMap<Vec<usize>, usize>,
    spec: Option<GameSpec>,
    payoff_range: f64,
    num_action_codes: usize,
}

struct Pending {
    parent: Option<usize>,
    key: Vec<usize>,
    histories: Vec<(History, f64)>,
}

/// Actor's next private key, per edge and parent infostate, resolved to ids
/// once the child's infostates are known.
type PendingEdges = Vec<Vec<Option<Vec<usize>>>>;

impl PublicTree {
    /// Enumerates every history breadth-first and groups them by public
    /// observation sequence.
    pub fn build(game: &dyn Game) -> Result<Self, GameError> {
        let chance = game.initial_chance();
        let root_key = chance
            .first()
            .map(|(h, _)| game.public_observations(h))
            .ok_or_else(|| GameError::Malformed("no chance outcomes".into()))?;
        if chance.iter().any(|(h, _)| game.public_observations(h) != root_key) {
            return Err(GameError::Malformed("root histories differ publicly".into()));
        }

        let mut nodes: Vec<PublicState> = Vec::new();
        let mut pending_edges: Vec<PendingEdges> = Vec::new();
        let mut queue = VecDeque::new();
        queue.push_back(Pending {
            parent: None,
            key: root_key,
            histories: chance,
        });
        let mut next_id = 1;
        let mut exists: Vec<Vec<bool>> = Vec::new();

        while let Some(Pending { parent, key, histories }) = queue.pop_front() {
            let id = nodes.len();
            let depth = key.len();
            let keys_of = |p: Player| -> Vec<Vec<usize>> {
                histories.iter().map(|(h, _)| game.private_observations(h, p)).collect()
            };
            let hist_keys = [keys_of(0), keys_of(1)];
            let infostate_keys = [0, 1].map(|p| {
                let mut ks = hist_keys[p].clone();
                ks.sort();
                ks.dedup();
                ks
            });
            let n = [infostate_keys[0].len(), infostate_keys[1].len()];
            let lookup = |p: Player, k: &Vec<usize>| infostate_keys[p].binary_search(k).unwrap();
            let pair_of: Vec<(usize, usize)> = (0..histories.len())
                .map(|i| (lookup(0, &hist_keys[0][i]), lookup(1, &hist_keys[1][i])))
                .collect();

            // Chance mass per infostate pair; marginals and the relative
            // weight are filled in once parent links are known.
            let mut pair_hist = vec![usize::MAX; n[0] * n[1]];
            let mut compat = vec![0.0; n[0] * n[1]];
            for (i, &(k1, k2)) in pair_of.iter().enumerate() {
                let slot = &mut pair_hist[k1 * n[1] + k2];
                if *slot != usize::MAX {
                    return Err(GameError::Malformed(format!(
                        "two histories share both infostates at public state {key:?}"
                    )));
                }
                *slot = i;
                compat[k1 * n[1] + k2] = histories[i].1;
            }
            let marginals = [vec![0.0; n[0]], vec![0.0; n[1]]];
            exists.push(pair_hist.iter().map(|&h| h != usize::MAX).collect());

            let h0 = &histories[0].0;
            let terminal = game.is_terminal(h0);
            if histories.iter().any(|(h, _)| game.is_terminal(h) != terminal) {
                return Err(GameError::Malformed(format!(
                    "terminality differs within public state {key:?}"
                )));
            }

            let mut payoff = Vec::new();
            let mut edges = Vec::new();
            let mut children = Vec::new();
            let mut player = None;
            let mut node_pending: PendingEdges = Vec::new();
            if terminal {
                payoff = vec![0.0; n[0] * n[1]];
                for (i, &(k1, k2)) in pair_of.iter().enumerate() {
                    let h = &histories[i].0;
                    let r1 = game.terminal_reward(h, 0)?;
                    let r2 = game.terminal_reward(h, 1)?;
                    if r1 + r2 != 0.0 {
                        return Err(GameError::Malformed(format!("non zero-sum terminal {h:?}")));
                    }
                    payoff[k1 * n[1] + k2] = r1;
                }
            } else {
                let actor = game
                    .current_player(h0)
                    .ok_or_else(|| GameError::Malformed("non-terminal without actor".into()))?;
                player = Some(actor);
                let actions = game.legal_actions(h0)?;
                for (h, _) in &histories {
                    if game.current_player(h) != Some(actor) {
                        return Err(GameError::Malformed("actor is not public".into()));
                    }
                    let codes: Vec<usize> = game.legal_actions(h)?.iter().map(|a| a.code).collect();
                    if codes.iter().ne(actions.iter().map(|a| &a.code)) {
                        return Err(GameError::Malformed(
                            "legal actions differ within a public state".into(),
                        ));
                    }
                }
                let mut grouped: Vec<(Vec<usize>, usize, Vec<(History, f64)>)> = Vec::new();
                for action in actions {
                    let mut next_key: Vec<Option<Vec<usize>>> = vec![None; n[actor]];
                    let mut child_slot = None;
                    for (i, (h, p)) in histories.iter().enumerate() {
                        let c = game.apply(h, action.code)?;
                        let ck = game.public_observations(&c);
                        let slot = match grouped.iter().position(|g| g.0 == ck) {
                            Some(s) => s,
                            None => {
                                grouped.push((ck, next_id, Vec::new()));
                                next_id += 1;
                                grouped.len() - 1
                            }
                        };
                        if *child_slot.get_or_insert(slot) != slot {
                            return Err(GameError::Malformed("an action leads to several public states".into()));
                        }
                        let k = if actor == 0 { pair_of[i].0 } else { pair_of[i].1 };
                        let pk = game.private_observations(&c, actor);
                        match &next_key[k] {
                            Some(existing) if *existing != pk => {
                                return Err(GameError::Malformed(
                                    "actor's successor infostate is not determined".into(),
                                ))
                            }
                            _ => next_key[k] = Some(pk),
                        }
                        grouped[slot].2.push((c, *p));
                    }
                    let slot = child_slot.expect("public state without histories");
                    let child = grouped[slot].1;
                    if !children.contains(&child) {
                        children.push(child);
                    }
                    edges.push(Edge {
                        action,
                        child,
                        next_infostate: Vec::new(),
                    });
                    node_pending.push(next_key);
                }
                for (ck, _, hs) in grouped {
                    queue.push_back(Pending {
                        parent: Some(id),
                        key: ck,
                        histories: hs,
                    });
                }
            }

            nodes.push(PublicState {
                id,
                parent,
                depth,
                public_key: key,
                player,
                edges,
                children,
                infostate_keys,
                marginals,
                compat,
                payoff,
                parent_infostate: [Vec::new(), Vec::new()],
                num_histories: histories.len(),
            });
            pending_edges.push(node_pending);
        }

        // Resolve successor infostates and parent links.
        for id in 0..nodes.len() {
            let Some(actor) = nodes[id].player else {
                continue;
            };
            let other = 1 - actor;
            for e in 0..nodes[id].edges.len() {
                let child = nodes[id].edges[e].child;
                let next: Vec<usize> = pending_edges[id][e]
                    .iter()
                    .map(|k| {
                        let k = k.as_ref().expect("infostate without histories");
                        nodes[child].infostate_keys[actor]
                            .binary_search(k)
                            .map_err(|_| GameError::Malformed("successor key missing".into()))
                    })
                    .collect::<Result<_, _>>()?;
                nodes[id].edges[e].next_infostate = next;
            }
            for &child in &nodes[id].children.clone() {
                if nodes[child].infostate_keys[other] != nodes[id].infostate_keys[other] {
                    return Err(GameError::Malformed(
                        "non-acting player's infostates changed on a public action".into(),
                    ));
                }
                let mut links = vec![usize::MAX; nodes[child].num_infostates(actor)];
                for edge in nodes[id].edges.iter().filter(|e| e.child == child) {
                    for (k, &k2) in edge.next_infostate.iter().enumerate() {
                        if links[k2] != usize::MAX && links[k2] != k {
                            return Err(GameError::Malformed("infostate has two parents".into()));
                        }
                        links[k2] = k;
                    }
                }
                let n_other = nodes[child].num_infostates(other);
                let mut pi = [Vec::new(), Vec::new()];
                pi[actor] = links;
                pi[other] = (0..n_other).collect();
                nodes[child].parent_infostate = pi;
            }
        }

        // Private chance marginals are fixed at the root and inherited, so
        // that chance mass factors as `compat * m1 * m2` at every node.
        for id in 0..nodes.len() {
            let marginals = match nodes[id].parent {
                None => {
                    let n2 = nodes[id].num_infostates(1);
                    let mut m = [vec![0.0; nodes[id].num_infostates(0)], vec![0.0; n2]];
                    for (i, &rho) in nodes[id].compat.iter().enumerate() {
                        m[0][i / n2] += rho;
                        m[1][i % n2] += rho;
                    }
                    m
                }
                Some(par) => [0, 1].map(|p| {
                    nodes[id].parent_infostate[p]
                        .iter()
                        .map(|&k| nodes[par].marginals[p][k])
                        .collect()
                }),
            };
            let node = &mut nodes[id];
            let n2 = node.num_infostates(1);
            for i in 0..node.compat.len() {
                let denom = marginals[0][i / n2] * marginals[1][i % n2];
                node.compat[i] = if !exists[id][i] {
                    0.0
                } else if denom > 0.0 {
                    node.compat[i] / denom
                } else {
                    1.0
                };
            }
            if !node.payoff.is_empty() {
                for i in 0..node.payoff.len() {
                    node.payoff[i] *= node.compat[i];
                }
            }
            node.marginals = marginals;
        }

        let index = nodes.iter().map(|n| (n.public_key.clone(), n.id)).collect();
        Ok(Self {
            nodes,
            index,
            spec: game.spec(),
            payoff_range: game.payoff_range(),
            num_action_codes: game.num_action_codes(),
        })
    }

    pub fn root(&self) -> &PublicState {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> &PublicState {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[PublicState] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spec(&self) -> Option<GameSpec> {
        self.spec
    }

    pub fn payoff_range(&self) -> f64 {
        self.payoff_range
    }

    pub fn num_action_codes(&self) -> usize {
        self.num_action_codes
    }

    pub fn node_by_key(&self, public_key: &[usize]) -> Option<usize> {
        self.index.get(public_key).copied()
    }

    /// Public state and per-player infostate ids of a concrete history.
    pub fn locate(&self, game: &dyn Game, history: &History) -> Result<(usize, [usize; 2]), GameError> {
        let node = self
            .node_by_key(&game.public_observations(history))
            .ok_or(GameError::UnknownHistory)?;
        let ks =
            [0, 1].map(|p| self.nodes[node].infostate_keys[p].binary_search(&game.private_observations(history, p)));
        match ks {
            [Ok(k1), Ok(k2)] => Ok((node, [k1, k2])),
            _ => Err(GameError::UnknownHistory),
        }
    }

    pub fn infostate_of(&self, game: &dyn Game, history: &History, player: Player) -> Result<Infostate, GameError> {
        let (node, ks) = self.locate(game, history)?;
        Ok(Infostate {
            player,
            public_state: node,
            id: ks[player],
        })
    }
}
