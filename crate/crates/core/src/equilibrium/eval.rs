use crate::beliefs::Subgame;
use crate::game::Player;
use crate::Scalar;

use super::walk::{self, Mode};
use super::Policy;

/// Expected value of `player` given per-infostate counterfactual values at
/// the subgame root.
pub fn root_expectation<S: Scalar>(sg: &Subgame, cfv: &[Vec<S>; 2], player: Player) -> f64 {
    let z = walk::root_normalizer(sg);
    let b = &sg.root.beliefs[player];
    let r = sg.infostates(0, player);
    b.iter()
        .zip(&cfv[player][r])
        .map(|(&x, &v)| x * v.as_f64())
        .sum::<f64>()
        / z
}

/// Exact best response of `player` to the other player's part of `policy`.
///
/// Returns `policy` with `player`'s rows replaced by a pure best response
/// (ties to the lowest action id), the responder's counterfactual values,
/// and the responder's expected value.
pub fn best_response_with_values<S: Scalar>(
    sg: &Subgame,
    policy: &Policy<S>,
    player: Player,
    leaf_cfv: Option<&[Vec<S>; 2]>,
) -> (Policy<S>, [Vec<S>; 2], f64) {
    let wr = walk::weighted_reach(sg, policy);
    let cfv = walk::values(sg, policy, &wr, leaf_cfv, Mode::BestResponse(player));
    let mut br = policy.clone();
    let layout = policy.layout().clone();
    for &node in &sg.decisions {
        if layout.player[node] != Some(player) {
            continue;
        }
        let n_act = layout.num_actions[node];
        for k in 0..layout.num_rows[node] {
            let mut best = 0;
            let mut best_q = walk::action_value(sg, &cfv, node, k, 0);
            for a in 1..n_act {
                let q = walk::action_value(sg, &cfv, node, k, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            let row = &mut br.data_mut()[layout.row(node, k)];
            row.fill(S::zero());
            row[best] = S::one();
        }
    }
    let value = root_expectation(sg, &cfv, player);
    (br, cfv, value)
}

/// Pure best response of `player` and its expected value.
pub fn best_response<S: Scalar>(sg: &Subgame, policy: &Policy<S>, player: Player) -> (Policy<S>, f64) {
    let (br, _, v) = best_response_with_values(sg, policy, player, None);
    (br, v)
}

/// Best-response value of `player` against `policy`.
pub fn best_response_value<S: Scalar>(sg: &Subgame, policy: &Policy<S>, player: Player) -> f64 {
    let wr = walk::weighted_reach(sg, policy);
    let cfv = walk::values(sg, policy, &wr, None, Mode::BestResponse(player));
    root_expectation(sg, &cfv, player)
}

/// Mean over both players of the best-response value against `policy`.
pub fn exploitability<S: Scalar>(sg: &Subgame, policy: &Policy<S>) -> f64 {
    (best_response_value(sg, policy, 0) + best_response_value(sg, policy, 1)) / 2.0
}

/// Expected value of each player when both follow `policy`.
pub fn expected_values<S: Scalar>(sg: &Subgame, policy: &Policy<S>) -> [f64; 2] {
    let wr = walk::weighted_reach(sg, policy);
    let cfv = walk::values(sg, policy, &wr, None, Mode::OnPolicy);
    [root_expectation(sg, &cfv, 0), root_expectation(sg, &cfv, 1)]
}
