use super::{Action, Game, GameError, GameSpec, History, Player};

const LABELS: [&str; 3] = ["R", "P", "S"];

/// Payoff to the first player, indexed `[p1 action][p2 action]`.
/// Any outcome involving Scissors is worth two points.
pub(crate) const RPS_PAYOFF: [[f64; 3]; 3] = [[0.0, -1.0, 2.0], [1.0, 0.0, -2.0], [-2.0, 2.0, 0.0]];

/// Public observation emitted when the first player moves; the move itself
/// stays private.
const ACTED: usize = 0;

/// Rock-Paper-Scissors in sequential form where the second player does not
/// see the first player's choice.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModifiedRps;

impl Game for ModifiedRps {
    fn spec(&self) -> Option<GameSpec> {
        Some(GameSpec::ModifiedRps)
    }

    fn initial_chance(&self) -> Vec<(History, f64)> {
        vec![(History::new([0, 0]), 1.0)]
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
        if self.is_terminal(history) {
            return Err(GameError::Terminal);
        }
        Ok((0..3)
            .map(|code| Action {
                id: code,
                code,
                label: LABELS[code].to_string(),
            })
            .collect())
    }

    fn apply(&self, history: &History, code: usize) -> Result<History, GameError> {
        if self.is_terminal(history) {
            return Err(GameError::Terminal);
        }
        if code >= 3 {
            return Err(GameError::IllegalAction { code });
        }
        Ok(history.child(code))
    }

    fn terminal_reward(&self, history: &History, player: Player) -> Result<f64, GameError> {
        if !self.is_terminal(history) {
            return Err(GameError::NotTerminal);
        }
        let v = RPS_PAYOFF[history.actions[0]][history.actions[1]];
        Ok(if player == 0 { v } else { -v })
    }

    fn private_observations(&self, history: &History, player: Player) -> Vec<usize> {
        if player == 0 {
            history.actions.iter().take(1).copied().collect()
        } else {
            Vec::new()
        }
    }

    fn public_observations(&self, history: &History) -> Vec<usize> {
        let mut obs = Vec::with_capacity(2);
        if !history.actions.is_empty() {
            obs.push(ACTED);
        }
        if let Some(&a) = history.actions.get(1) {
            obs.push(1 + a);
        }
        obs
    }

    fn num_action_codes(&self) -> usize {
        3
    }

    fn action_label(&self, code: usize) -> String {
        LABELS[code].to_string()
    }

    fn payoff_range(&self) -> f64 {
        4.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_deterministic_root() {
        let chance = ModifiedRps.initial_chance();
        assert_eq!(chance.len(), 1);
        assert_eq!(chance[0].1, 1.0);
    }

    #[test]
    fn first_player_chooses_among_three() {
        let acts = ModifiedRps.legal_actions(&History::new([0, 0])).unwrap();
        let labels: Vec<_> = acts.iter().map(|a| a.label.as_str()).collect();
        assert_eq!(labels, ["R", "P", "S"]);
    }

    #[test]
    fn rock_leads_to_second_player() {
        let h = ModifiedRps.apply(&History::new([0, 0]), 0).unwrap();
        assert_eq!(ModifiedRps.current_player(&h), Some(1));
        assert!(!ModifiedRps.is_terminal(&h));
    }

    #[test]
    fn scissors_beats_paper_for_two() {
        let h = History::new([0, 0]).child(2).child(1);
        assert_eq!(ModifiedRps.terminal_reward(&h, 0).unwrap(), 2.0);
        assert_eq!(ModifiedRps.terminal_reward(&h, 1).unwrap(), -2.0);
    }

    #[test]
    fn second_player_cannot_see_first_move() {
        let a = History::new([0, 0]).child(0);
        let b = History::new([0, 0]).child(2);
        assert_eq!(ModifiedRps.public_observations(&a), ModifiedRps.public_observations(&b));
        assert_eq!(
            ModifiedRps.private_observations(&a, 1),
            ModifiedRps.private_observations(&b, 1)
        );
        assert_ne!(
            ModifiedRps.private_observations(&a, 0),
            ModifiedRps.private_observations(&b, 0)
        );
    }
}
