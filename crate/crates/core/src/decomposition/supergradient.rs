use serde::Serialize;

use super::{DecompError, OracleValue, ValueFunction, ValueVector};
use crate::beliefs::Pbs;
use crate::game::Player;

/// Outcome of checking the supergradient inequality and concavity of a
/// player's value along a line of beliefs.
#[derive(Debug, Clone, Serialize)]
pub struct SupergradientReport {
    pub points: usize,
    /// `V(b_j) - (V(b_i) + g_i . (b_j - b_i))`, maximized over pairs.
    pub max_slack: f64,
    pub violations: usize,
    /// Largest shortfall of a midpoint below the chord of its neighbours.
    pub max_concavity_gap: f64,
    pub concavity_violations: usize,
    /// `V` at each grid point.
    pub values: Vec<f64>,
}

impl SupergradientReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.concavity_violations == 0
    }
}

/// Beliefs obtained from `base` by moving `player`'s mass between
/// infostates `i` and `j`: `x` of the pair's total on `i` for `x` on a grid
/// of the given step from 0 to 1.
pub fn belief_line(base: &Pbs, player: Player, i: usize, j: usize, step: f64) -> Vec<Pbs> {
    let total = base.beliefs[player][i] + base.beliefs[player][j];
    let n = (1.0 / step).round() as usize;
    (0..=n)
        .map(|s| {
            let x = s as f64 / n as f64;
            let mut p = base.clone();
            p.beliefs[player][i] = x * total;
            p.beliefs[player][j] = (1.0 - x) * total;
            p
        })
        .collect()
}

/// Evaluates the oracle along `line` (PBSs at one public state differing
/// only in `player`'s beliefs) and checks, for every pair of points, that
/// `V(b') <= V(b) + g . (b' - b)` with `g(s) = v(s | b) - V(b)`, and that `V`
/// is concave along the line. Violations are counted above `tolerance`.
pub fn supergradient_check(
    oracle: &OracleValue,
    line: &[Pbs],
    player: Player,
    tolerance: f64,
) -> Result<SupergradientReport, DecompError> {
    let tree = oracle.tree().clone();
    let values: Vec<ValueVector> = oracle.evaluate(&tree, line)?;
    let value_at = |v: &ValueVector, pbs: &Pbs| v.expectation(tree.node(pbs.node), pbs, player);
    let big_v: Vec<f64> = line.iter().zip(&values).map(|(b, v)| value_at(v, b)).collect();

    let (mut max_slack, mut violations) = (f64::NEG_INFINITY, 0);
    for (i, bi) in line.iter().enumerate() {
        let g: Vec<f64> = values[i].values[player].iter().map(|v| v - big_v[i]).collect();
        for (j, bj) in line.iter().enumerate() {
            let dot: f64 = g
                .iter()
                .zip(bj.beliefs[player].iter().zip(&bi.beliefs[player]))
                .map(|(g, (a, b))| g * (a - b))
                .sum();
            let slack = big_v[j] - (big_v[i] + dot);
            max_slack = max_slack.max(slack);
            if slack > tolerance {
                violations += 1;
            }
        }
    }

    let (mut max_gap, mut concavity_violations) = (0.0f64, 0);
    for w in big_v.windows(3) {
        let gap = (w[0] + w[2]) / 2.0 - w[1];
        max_gap = max_gap.max(gap);
        if gap > tolerance {
            concavity_violations += 1;
        }
    }
    Ok(SupergradientReport {
        points: line.len(),
        max_slack,
        violations,
        max_concavity_gap: max_gap,
        concavity_violations,
        values: big_v,
    })
}
