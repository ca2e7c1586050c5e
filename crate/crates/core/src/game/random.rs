use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Action, Game, GameError, GameSpec, History, Player};

#[derive(Debug, Clone)]
struct Node {
    player: Player,
    actions: usize,
    /// Hidden actions are seen only by the actor; all of them lead to the
    /// same public successor stored in `next[0]`.
    hidden: bool,
    next: Vec<Option<usize>>,
}

/// Small randomly generated game used to exercise the solvers on structures
/// the built-in games do not cover: several private types per player,
/// non-uniform chance, hidden actions and arbitrary payoffs.
#[derive(Debug, Clone)]
pub struct RandomGame {
    seed: u64,
    nodes: Vec<Node>,
    marginals: [Vec<f64>; 2],
}

const MAX_DEPTH: usize = 4;
const MAX_DECISIONS_PER_PLAYER: usize = 3;

impl RandomGame {
    pub fn generate(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let marginals = [0, 1].map(|_| {
            let n = rng.random_range(1..=3);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|x| x / total).collect::<Vec<_>>()
        });
        let mut nodes = Vec::new();
        let budget = [MAX_DECISIONS_PER_PLAYER; 2];
        // the root is always a decision so the game is never trivial
        Self::grow(&mut rng, &mut nodes, 0, budget, true);
        Self { seed, nodes, marginals }
    }

    fn grow(
        rng: &mut ChaCha8Rng,
        nodes: &mut Vec<Node>,
        depth: usize,
        budget: [usize; 2],
        force: bool,
    ) -> Option<usize> {
        let stop = depth >= MAX_DEPTH || budget == [0, 0] || (!force && rng.random_bool(0.3));
        if stop {
            return None;
        }
        let player = match (budget[0] > 0, budget[1] > 0) {
            (true, true) => rng.random_range(0..2),
            (true, false) => 0,
            _ => 1,
        };
        let actions = rng.random_range(2..=3);
        let hidden = rng.random_bool(0.3);
        let id = nodes.len();
        nodes.push(Node {
            player,
            actions,
            hidden,
            next: Vec::new(),
        });
        let mut child_budget = budget;
        child_budget[player] -= 1;
        let fanout = if hidden { 1 } else { actions };
        let next = (0..fanout)
            .map(|_| Self::grow(rng, nodes, depth + 1, child_budget, false))
            .collect();
        nodes[id].next = next;
        Some(id)
    }

    fn node_of(&self, history: &History) -> Option<usize> {
        let mut node = Some(0);
        for &a in &history.actions {
            let n = &self.nodes[node?];
            node = if n.hidden { n.next[0] } else { n.next[a] };
        }
        node
    }

    fn hash(&self, history: &History) -> u64 {
        let mut x = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        let mut mix = |v: u64| {
            x = x.wrapping_add(v).wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = x;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            x = z ^ (z >> 31);
        };
        mix(history.deal[0] as u64);
        mix(history.deal[1] as u64);
        for &a in &history.actions {
            mix(a as u64 + 1);
        }
        x
    }
}

impl Game for RandomGame {
    fn spec(&self) -> Option<GameSpec> {
        None
    }

    fn initial_chance(&self) -> Vec<(History, f64)> {
        let mut out = Vec::new();
        for (k1, &m1) in self.marginals[0].iter().enumerate() {
            for (k2, &m2) in self.marginals[1].iter().enumerate() {
                out.push((History::new([k1, k2]), m1 * m2));
            }
        }
        out
    }

    fn is_terminal(&self, history: &History) -> bool {
        self.node_of(history).is_none()
    }

    fn current_player(&self, history: &History) -> Option<Player> {
        self.node_of(history).map(|n| self.nodes[n].player)
    }

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>, GameError> {
        let node = self.node_of(history).ok_or(GameError::Terminal)?;
        Ok((0..self.nodes[node].actions)
            .map(|code| Action {
                id: code,
                code,
                label: self.action_label(code),
            })
            .collect())
    }

    fn apply(&self, history: &History, code: usize) -> Result<History, GameError> {
        let node = self.node_of(history).ok_or(GameError::Terminal)?;
        if code >= self.nodes[node].actions {
            return Err(GameError::IllegalAction { code });
        }
        Ok(history.child(code))
    }

    fn terminal_reward(&self, history: &History, player: Player) -> Result<f64, GameError> {
        if !self.is_terminal(history) {
            return Err(GameError::NotTerminal);
        }
        let unit = (self.hash(history) >> 11) as f64 / (1u64 << 53) as f64;
        let v = 2.0 * unit - 1.0;
        Ok(if player == 0 { v } else { -v })
    }

    fn private_observations(&self, history: &History, player: Player) -> Vec<usize> {
        let mut obs = vec![history.deal[player]];
        let mut node = Some(0);
        for &a in &history.actions {
            let Some(id) = node else { break };
            let n = &self.nodes[id];
            if n.hidden && n.player == player {
                obs.push(a);
            }
            node = if n.hidden { n.next[0] } else { n.next[a] };
        }
        obs
    }

    fn public_observations(&self, history: &History) -> Vec<usize> {
        let mut obs = Vec::with_capacity(history.actions.len());
        let mut node = Some(0);
        for &a in &history.actions {
            let Some(id) = node else { break };
            let n = &self.nodes[id];
            obs.push(if n.hidden { 0 } else { a + 1 });
            node = if n.hidden { n.next[0] } else { n.next[a] };
        }
        obs
    }

    fn num_action_codes(&self) -> usize {
        3
    }

    fn action_label(&self, code: usize) -> String {
        format!("a{code}")
    }

    fn payoff_range(&self) -> f64 {
        2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let a = RandomGame::generate(7);
        let b = RandomGame::generate(7);
        let h = History::new([0, 0]);
        assert_eq!(a.legal_actions(&h), b.legal_actions(&h));
        assert_eq!(a.nodes.len(), b.nodes.len());
    }

    #[test]
    fn chance_sums_to_one() {
        for seed in 0..20 {
            let g = RandomGame::generate(seed);
            let total: f64 = g.initial_chance().iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rewards_are_zero_sum_and_bounded() {
        let g = RandomGame::generate(3);
        let mut h = History::new([0, 0]);
        while !g.is_terminal(&h) {
            h = g.apply(&h, 0).unwrap();
        }
        let r = g.terminal_reward(&h, 0).unwrap();
        assert!((-1.0..=1.0).contains(&r));
        assert_eq!(r, -g.terminal_reward(&h, 1).unwrap());
    }
}
