use super::{Action, Game, GameError, GameSpec, History, Player};

const PLAY: usize = 0;
const GUESS_HEADS: usize = 1;
const GUESS_TAILS: usize = 2;

/// Coin-guessing toy game.
///
/// A coin lands heads with probability `prior` and only the first player
/// sees it. The first player takes a single uninformative "play" action, then
/// the second player guesses the side and wins one point when correct.
#[derive(Debug, Clone, Copy)]
pub struct CoinGuess {
    prior: f64,
}

impl CoinGuess {
    pub fn new(prior: f64) -> Result<Self, GameError> {
        GameSpec::CoinGuess { prior }.validate()?;
        Ok(Self { prior })
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }
}

impl Game for CoinGuess {
    fn spec(&self) -> Option<GameSpec> {
        Some(GameSpec::CoinGuess { prior: self.prior })
    }

    /// Heads is deal `0`, tails deal `1`.
    fn initial_chance(&self) -> Vec<(History, f64)> {
        vec![
            (History::new([0, 0]), self.prior),
            (History::new([1, 0]), 1.0 - self.prior),
        ]
    }

    fn is_terminal(&self, history: &History) -> bool {
        history.actions.len() >= 2
    }

    fn current_player(&self, history: &History) -> Option<Player> {
        match history.actions.len() {
            0 => Some(0),
            1 => Some(1),
            _ => None,
        }
    }

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>, GameError> {
        let codes: &[usize] = match history.actions.len() {
            0 => &[PLAY],
            1 => &[GUESS_HEADS, GUESS_TAILS],
            _ => return Err(GameError::Terminal),
        };
        Ok(codes
            .iter()
            .enumerate()
            .map(|(id, &code)| Action {
                id,
                code,
                label: self.action_label(code),
            })
            .collect())
    }

    fn apply(&self, history: &History, code: usize) -> Result<History, GameError> {
        let legal = self.legal_actions(history)?;
        if !legal.iter().any(|a| a.code == code) {
            return Err(GameError::IllegalAction { code });
        }
        Ok(history.child(code))
    }

    fn terminal_reward(&self, history: &History, player: Player) -> Result<f64, GameError> {
        if !self.is_terminal(history) {
            return Err(GameError::NotTerminal);
        }
        let heads = history.deal[0] == 0;
        let guessed_heads = history.actions[1] == GUESS_HEADS;
        let guesser = if heads == guessed_heads { 1.0 } else { -1.0 };
        Ok(if player == 1 { guesser } else { -guesser })
    }

    fn private_observations(&self, history: &History, player: Player) -> Vec<usize> {
        if player == 0 {
            vec![history.deal[0]]
        } else {
            Vec::new()
        }
    }

    fn public_observations(&self, history: &History) -> Vec<usize> {
        history.actions.clone()
    }

    fn num_action_codes(&self) -> usize {
        3
    }

    fn action_label(&self, code: usize) -> String {
        match code {
            PLAY => "play",
            GUESS_HEADS => "heads",
            GUESS_TAILS => "tails",
            _ => "?",
        }
        .to_string()
    }

    fn payoff_range(&self) -> f64 {
        2.0
    }
}
