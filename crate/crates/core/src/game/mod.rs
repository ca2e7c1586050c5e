//! Factored-observation games.
//!
//! A [`Game`] is described at the level of concrete histories: chance deals
//! private information at the root, after which players take turns and every
//! transition is deterministic. Each history exposes a public observation
//! sequence and, per player, a private observation sequence. The solvers do
//! not walk histories directly; they work on a [`PublicTree`] compiled from
//! the history-level description.

mod coin;
mod liars_dice;
mod random;
mod rps;
mod tree;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coin::CoinGuess;
pub use liars_dice::LiarsDice;
pub use random::RandomGame;
pub use rps::ModifiedRps;
pub use tree::{Edge, Infostate, PublicState, PublicTree};

/// Player index: `0` is the first player, `1` the second.
pub type Player = usize;

pub const NUM_PLAYERS: usize = 2;

#[inline]
pub fn opponent(player: Player) -> Player {
    1 - player
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("history is terminal")]
    Terminal,
    #[error("history is not terminal")]
    NotTerminal,
    #[error("action {code} is not legal here")]
    IllegalAction { code: usize },
    #[error("invalid game parameters: {0}")]
    InvalidSpec(String),
    #[error("malformed game: {0}")]
    Malformed(String),
    #[error("history does not belong to this game tree")]
    UnknownHistory,
    #[error("game too large for tabular treatment: about {estimate} histories (limit {limit})")]
    TooLarge { estimate: u64, limit: u64 },
}

/// A legal action at a decision point.
///
/// `id` is dense within the decision point; `code` identifies the action
/// across the whole game (for Liar's Dice it is the global bid index).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Action {
    pub id: usize,
    pub code: usize,
    pub label: String,
}

/// Chance outcome plus the action sequence taken from the root.
///
/// Every built-in game front-loads its chance events, so the private deal
/// together with the action sequence determines the world state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    pub deal: [usize; NUM_PLAYERS],
    pub actions: Vec<usize>,
}

impl History {
    pub fn new(deal: [usize; NUM_PLAYERS]) -> Self {
        Self {
            deal,
            actions: Vec::new(),
        }
    }

    pub fn child(&self, code: usize) -> Self {
        let mut actions = Vec::with_capacity(self.actions.len() + 1);
        actions.extend_from_slice(&self.actions);
        actions.push(code);
        Self {
            deal: self.deal,
            actions,
        }
    }
}

/// History-level description of a two-player zero-sum game.
pub trait Game: Send + Sync + fmt::Debug {
    /// Built-in games report their spec; ad hoc games return `None`.
    fn spec(&self) -> Option<GameSpec>;

    /// Root histories with their chance probabilities (summing to one).
    fn initial_chance(&self) -> Vec<(History, f64)>;

    fn is_terminal(&self, history: &History) -> bool;

    /// Player to act, or `None` at terminal histories.
    fn current_player(&self, history: &History) -> Option<Player>;

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>, GameError>;

    /// Applies the action with the given game-wide `code`.
    fn apply(&self, history: &History, code: usize) -> Result<History, GameError>;

    fn terminal_reward(&self, history: &History, player: Player) -> Result<f64, GameError>;

    /// The part of `player`'s action-observation history not implied by the
    /// public observations.
    fn private_observations(&self, history: &History, player: Player) -> Vec<usize>;

    /// Public observation sequence.
    fn public_observations(&self, history: &History) -> Vec<usize>;

    /// Number of distinct game-wide action codes.
    fn num_action_codes(&self) -> usize;

    fn action_label(&self, code: usize) -> String;

    /// Difference between the largest and smallest terminal reward.
    fn payoff_range(&self) -> f64;
}

/// Which built-in game to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "game", rename_all = "snake_case")]
pub enum GameSpec {
    ModifiedRps,
    LiarsDice { dice: usize, faces: usize },
    CoinGuess { prior: f64 },
}

/// Tabular work refuses games with more histories than this.
pub const TABULAR_HISTORY_LIMIT: u64 = 5_000_000;

impl GameSpec {
    pub fn validate(&self) -> Result<(), GameError> {
        match *self {
            GameSpec::ModifiedRps => Ok(()),
            GameSpec::LiarsDice { dice, faces } => {
                if dice < 1 || faces < 2 {
                    Err(GameError::InvalidSpec(format!(
                        "liars dice needs dice >= 1 and faces >= 2, got {dice}x{faces}"
                    )))
                } else {
                    Ok(())
                }
            }
            GameSpec::CoinGuess { prior } => {
                if (0.0..=1.0).contains(&prior) {
                    Ok(())
                } else {
                    Err(GameError::InvalidSpec(format!("coin prior {prior} outside [0, 1]")))
                }
            }
        }
    }

    pub fn instantiate(&self) -> Result<Arc<dyn Game>, GameError> {
        self.validate()?;
        Ok(match *self {
            GameSpec::ModifiedRps => Arc::new(ModifiedRps),
            GameSpec::LiarsDice { dice, faces } => Arc::new(LiarsDice::new(dice, faces)?),
            GameSpec::CoinGuess { prior } => Arc::new(CoinGuess::new(prior)?),
        })
    }

    /// Rough count of histories in the full game tree.
    pub fn estimated_histories(&self) -> u64 {
        match *self {
            GameSpec::ModifiedRps => 13,
            GameSpec::CoinGuess { .. } => 10,
            GameSpec::LiarsDice { dice, faces } => {
                let bids = (2 * dice * faces) as u32;
                let deals = (faces as u64).saturating_pow(2 * dice as u32);
                2u64.saturating_pow(bids + 1).saturating_mul(deals)
            }
        }
    }

    /// Instantiates the game and compiles its public tree, refusing games
    /// too large for tabular treatment.
    pub fn build_tree(&self) -> Result<Arc<PublicTree>, GameError> {
        let estimate = self.estimated_histories();
        if estimate > TABULAR_HISTORY_LIMIT {
            return Err(GameError::TooLarge {
                estimate,
                limit: TABULAR_HISTORY_LIMIT,
            });
        }
        let game = self.instantiate()?;
        Ok(Arc::new(PublicTree::build(game.as_ref())?))
    }

    pub fn short_name(&self) -> String {
        match *self {
            GameSpec::ModifiedRps => "rps".to_string(),
            GameSpec::LiarsDice { dice, faces } => format!("{dice}x{faces}f"),
            GameSpec::CoinGuess { prior } => format!("coin{prior}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(GameSpec::LiarsDice { dice: 0, faces: 4 }.validate().is_err());
        assert!(GameSpec::LiarsDice { dice: 1, faces: 1 }.validate().is_err());
        assert!(GameSpec::LiarsDice { dice: 1, faces: 2 }.validate().is_ok());
        assert!(GameSpec::CoinGuess { prior: 1.5 }.validate().is_err());
    }

    #[test]
    fn large_games_are_refused() {
        let err = GameSpec::LiarsDice { dice: 3, faces: 6 }.build_tree().unwrap_err();
        assert!(matches!(err, GameError::TooLarge { .. }));
    }

    #[test]
    fn spec_parses_from_tagged_json() {
        let spec: GameSpec = serde_json::from_str(r#"{"game": "liars_dice", "dice": 1, "faces": 4}"#).unwrap();
        assert_eq!(spec, GameSpec::LiarsDice { dice: 1, faces: 4 });
    }
}
