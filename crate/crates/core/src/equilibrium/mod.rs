//! Tabular equilibrium finding over subgames: regret matching with vanilla
//! or linear weighting, fictitious-play variants, best responses and
//! exploitability.

mod cfr;
mod eval;
mod fp;
mod policy;
pub mod walk;

use rand::Rng;

use crate::beliefs::Subgame;
use crate::game::Player;
use crate::Scalar;

pub use cfr::{Cfr, CfrVariant};
pub use eval::{
    best_response, best_response_value, best_response_with_values, expected_values, exploitability, root_expectation,
};
pub use fp::{Fp, FpVariant};
pub use policy::{mix_policies, normalize_mass, realization, regret_matching, Policy, POLICY_TOLERANCE};

/// Runs `iterations` CFR iterations, calling `on_iteration` after each with
/// the number of completed iterations.
pub fn solve_cfr<S: Scalar>(
    sg: &Subgame,
    variant: CfrVariant,
    iterations: usize,
    mut on_iteration: impl FnMut(usize, &Cfr<S>),
) -> Cfr<S> {
    let mut cfr = Cfr::new(sg, variant);
    for t in 1..=iterations {
        cfr.step(sg);
        on_iteration(t, &cfr);
    }
    cfr
}

/// Runs `iterations` fictitious-play iterations. The callback receives the
/// completed count, the state, and (when `diagnose`) the best-response
/// shortfall of the newest iterate.
pub fn solve_fp<S: Scalar>(
    sg: &Subgame,
    variant: FpVariant,
    iterations: usize,
    diagnose: bool,
    mut on_iteration: impl FnMut(usize, &Fp<S>, Option<f64>),
) -> Fp<S> {
    let mut fp = Fp::new(sg, variant);
    for t in 1..=iterations {
        let eps = fp.step(sg, diagnose);
        on_iteration(t, &fp, eps);
    }
    fp
}

/// Number of pure policies of `player` (saturating).
pub fn count_pure_policies(sg: &Subgame, player: Player) -> u128 {
    let l = &sg.layout;
    sg.decisions
        .iter()
        .filter(|&&n| l.player[n] == Some(player))
        .fold(1u128, |acc, &n| {
            acc.saturating_mul((l.num_actions[n] as u128).saturating_pow(l.num_rows[n] as u32))
        })
}

/// Replaces `player`'s rows of `base` with the pure policy numbered `index`
/// in mixed radix over rows.
pub fn pure_policy<S: Scalar>(sg: &Subgame, base: &Policy<S>, player: Player, mut index: u128) -> Policy<S> {
    let mut out = base.clone();
    let l = sg.layout.clone();
    for &n in &sg.decisions {
        if l.player[n] != Some(player) {
            continue;
        }
        for k in 0..l.num_rows[n] {
            let a = (index % l.num_actions[n] as u128) as usize;
            index /= l.num_actions[n] as u128;
            let row = &mut out.data_mut()[l.row(n, k)];
            row.fill(S::zero());
            row[a] = S::one();
        }
    }
    out
}

/// Largest gap, over opponent pure policies, between the value of the
/// reach-weighted mixture of `a` and `b` and the corresponding mixture of
/// values. Enumerates all opponent pure policies when there are at most
/// `max_pure`, otherwise samples `max_pure` of them.
pub fn mixture_equivalence_gap<R: Rng>(
    sg: &Subgame,
    a: &Policy<f64>,
    b: &Policy<f64>,
    alpha: f64,
    player: Player,
    max_pure: usize,
    rng: &mut R,
) -> f64 {
    let mixed = mix_policies(sg, a, b, alpha);
    let opp = 1 - player;
    let count = count_pure_policies(sg, opp);
    let indices: Vec<u128> = if count <= max_pure as u128 {
        (0..count).collect()
    } else {
        (0..max_pure).map(|_| rng.random_range(0..count)).collect()
    };
    indices
        .into_iter()
        .map(|i| {
            let ev = |p: &Policy<f64>| expected_values(sg, &pure_policy(sg, p, opp, i))[player];
            (ev(&mixed) - (alpha * ev(a) + (1.0 - alpha) * ev(b))).abs()
        })
        .fold(0.0, f64::max)
}

/// Random behavioural policy with every row drawn from a flat Dirichlet and
/// occasional zero entries.
pub fn random_policy<R: Rng>(sg: &Subgame, rng: &mut R) -> Policy<f64> {
    let mut p = Policy::uniform(sg.layout.clone());
    let l = sg.layout.clone();
    for &n in &sg.decisions {
        for k in 0..l.num_rows[n] {
            let row = &mut p.data_mut()[l.row(n, k)];
            for x in row.iter_mut() {
                let u: f64 = rng.random();
                *x = if u < 0.15 { 0.0 } else { -u.ln() };
            }
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            } else {
                row[0] = 1.0;
            }
        }
    }
    p
}
