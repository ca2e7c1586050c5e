use super::{Action, Game, GameError, GameSpec, History, Player};

/// Two-player Liar's Dice with the highest face wild.
///
/// Each player privately rolls `dice` dice with `faces` faces; the roll is
/// stored as a base-`faces` index with die `j` in digit `j`. Bids are
/// `(quantity, face)` pairs ordered lexicographically and encoded as
/// `(quantity - 1) * faces + (face - 1)`; the challenge ("liar") takes the
/// code right after the last bid.
#[derive(Debug, Clone)]
pub struct LiarsDice {
    dice: usize,
    faces: usize,
}

impl LiarsDice {
    pub fn new(dice: usize, faces: usize) -> Result<Self, GameError> {
        GameSpec::LiarsDice { dice, faces }.validate()?;
        Ok(Self { dice, faces })
    }

    pub fn dice(&self) -> usize {
        self.dice
    }

    pub fn faces(&self) -> usize {
        self.faces
    }

    pub fn num_bids(&self) -> usize {
        2 * self.dice * self.faces
    }

    pub fn liar_code(&self) -> usize {
        self.num_bids()
    }

    pub fn num_rolls(&self) -> usize {
        self.faces.pow(self.dice as u32)
    }

    pub fn bid_code(&self, quantity: usize, face: usize) -> usize {
        (quantity - 1) * self.faces + (face - 1)
    }

    /// `(quantity, face)` of a bid code, faces counted from 1.
    pub fn decode_bid(&self, code: usize) -> (usize, usize) {
        (code / self.faces + 1, code % self.faces + 1)
    }

    /// Face values (1-based) of a roll index.
    pub fn roll_faces(&self, roll: usize) -> Vec<usize> {
        let mut rest = roll;
        (0..self.dice)
            .map(|_| {
                let face = rest % self.faces + 1;
                rest /= self.faces;
                face
            })
            .collect()
    }

    fn count_matching(&self, roll: usize, face: usize) -> usize {
        self.roll_faces(roll)
            .into_iter()
            .filter(|&die| die == face || die == self.faces)
            .count()
    }

    fn last_bid(&self, history: &History) -> Option<usize> {
        history
            .actions
            .iter()
            .rev()
            .copied()
            .find(|&code| code < self.num_bids())
    }
}

impl Game for LiarsDice {
    fn spec(&self) -> Option<GameSpec> {
        Some(GameSpec::LiarsDice {
            dice: self.dice,
            faces: self.faces,
        })
    }

    fn initial_chance(&self) -> Vec<(History, f64)> {
        let rolls = self.num_rolls();
        let p = 1.0 / (rolls * rolls) as f64;
        let mut out = Vec::with_capacity(rolls * rolls);
        for r1 in 0..rolls {
            for r2 in 0..rolls {
                out.push((History::new([r1, r2]), p));
            }
        }
        out
    }

    fn is_terminal(&self, history: &History) -> bool {
        history.actions.last() == Some(&self.liar_code())
    }

    fn current_player(&self, history: &History) -> Option<Player> {
        if self.is_terminal(history) {
            None
        } else {
            Some(history.actions.len() % 2)
        }
    }

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>, GameError> {
        if self.is_terminal(history) {
            return Err(GameError::Terminal);
        }
        let first = self.last_bid(history).map_or(0, |b| b + 1);
        let mut codes: Vec<usize> = (first..self.num_bids()).collect();
        if !history.actions.is_empty() {
            codes.push(self.liar_code());
        }
        Ok(codes
            .into_iter()
            .enumerate()
            .map(|(id, code)| Action {
                id,
                code,
                label: self.action_label(code),
            })
            .collect())
    }

    fn apply(&self, history: &History, code: usize) -> Result<History, GameError> {
        if self.is_terminal(history) {
            return Err(GameError::Terminal);
        }
        let legal = if code == self.liar_code() {
            !history.actions.is_empty()
        } else {
            code < self.num_bids() && self.last_bid(history).is_none_or(|b| code > b)
        };
        if !legal {
            return Err(GameError::IllegalAction { code });
        }
        Ok(history.child(code))
    }

    fn terminal_reward(&self, history: &History, player: Player) -> Result<f64, GameError> {
        if !self.is_terminal(history) {
            return Err(GameError::NotTerminal);
        }
        let n = history.actions.len();
        let bid = history.actions[n - 2];
        let bidder = (n - 2) % 2;
        let (quantity, face) = self.decode_bid(bid);
        let count = self.count_matching(history.deal[0], face) + self.count_matching(history.deal[1], face);
        let winner = if count >= quantity { bidder } else { 1 - bidder };
        Ok(if player == winner { 1.0 } else { -1.0 })
    }

    fn private_observations(&self, history: &History, player: Player) -> Vec<usize> {
        vec![history.deal[player]]
    }

    fn public_observations(&self, history: &History) -> Vec<usize> {
        history.actions.clone()
    }

    fn num_action_codes(&self) -> usize {
        self.num_bids() + 1
    }

    fn action_label(&self, code: usize) -> String {
        if code == self.liar_code() {
            "liar".to_string()
        } else {
            let (q, f) = self.decode_bid(code);
            format!("{q}x{f}")
        }
    }

    fn payoff_range(&self) -> f64 {
        2.0
    }
}
