use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beliefs::{PolicyLayout, Subgame};
use crate::game::Player;
use crate::Scalar;

use super::eval::best_response_with_values;
use super::policy::{normalize_mass, realization, regret_matching};
use super::walk::{self, Mode};
use super::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CfrVariant {
    Vanilla,
    /// Iteration `t` of each player's updates carries weight `t`, realized by
    /// discounting accumulated regret and average mass by `(n-1)/n`.
    Linear,
    /// Regrets floored at zero after every update, linear averaging.
    Plus,
}

impl CfrVariant {
    /// Discount on accumulated regret before adding the `n`-th update.
    #[inline]
    pub fn regret_discount<S: Scalar>(self, n: usize) -> S {
        match self {
            CfrVariant::Vanilla | CfrVariant::Plus => S::one(),
            CfrVariant::Linear => S::c((n - 1) as f64 / n as f64),
        }
    }

    /// Discount on average-policy mass before adding the `n`-th update.
    #[inline]
    pub fn average_discount<S: Scalar>(self, n: usize) -> S {
        match self {
            CfrVariant::Vanilla => S::one(),
            CfrVariant::Linear | CfrVariant::Plus => S::c((n - 1) as f64 / n as f64),
        }
    }

    /// Accumulated regret scale after `n` identical updates.
    pub fn regret_scale(self, n: usize) -> f64 {
        match self {
            CfrVariant::Vanilla | CfrVariant::Plus => n as f64,
            CfrVariant::Linear => (n + 1) as f64 / 2.0,
        }
    }

    /// Accumulated average-mass scale after `n` identical updates.
    pub fn average_scale(self, n: usize) -> f64 {
        match self {
            CfrVariant::Vanilla => n as f64,
            CfrVariant::Linear | CfrVariant::Plus => (n + 1) as f64 / 2.0,
        }
    }

    /// Weight of the `n`-th update in the average policy.
    pub fn update_weight(self, n: usize) -> f64 {
        match self {
            CfrVariant::Vanilla => 1.0,
            CfrVariant::Linear | CfrVariant::Plus => n as f64,
        }
    }

    /// Total weight of the first `n` updates in the average policy.
    pub fn cumulative_weight(self, n: usize) -> f64 {
        match self {
            CfrVariant::Vanilla => n as f64,
            CfrVariant::Linear | CfrVariant::Plus => (n * (n + 1)) as f64 / 2.0,
        }
    }
}

/// Regret-matching solver state with alternating updates: completed
/// iteration `t` (0-based) updated player `t mod 2`.
#[derive(Debug, Clone)]
pub struct Cfr<S> {
    layout: Arc<PolicyLayout>,
    variant: CfrVariant,
    regret: Vec<S>,
    avg_mass: Vec<S>,
    policy: Policy<S>,
    updates: [usize; 2],
    iteration: usize,
}

impl<S: Scalar> Cfr<S> {
    pub fn new(sg: &Subgame, variant: CfrVariant) -> Self {
        let layout = sg.layout.clone();
        Self {
            regret: vec![S::zero(); layout.len],
            avg_mass: vec![S::zero(); layout.len],
            policy: Policy::uniform(layout.clone()),
            layout,
            variant,
            updates: [0, 0],
            iteration: 0,
        }
    }

    pub fn variant(&self) -> CfrVariant {
        self.variant
    }

    /// Current iterate, derived from the regrets.
    pub fn current(&self) -> &Policy<S> {
        &self.policy
    }

    pub fn average(&self) -> Policy<S> {
        normalize_mass(&self.layout, &self.avg_mass)
    }

    /// Average policy each player would hold after folding the current
    /// iterate into its next update. `reach` is the iterate's own-action reach.
    pub fn prospective_average(&self, sg: &Subgame, reach: &[Vec<S>; 2]) -> Policy<S> {
        let mut mass = self.avg_mass.clone();
        for &node in &sg.decisions {
            let p = self.layout.player[node].expect("decision");
            let d: S = self.variant.average_discount(self.updates[p] + 1);
            let base = sg.vec_offset[p][node];
            for k in 0..self.layout.num_rows[node] {
                let x = reach[p][base + k];
                for i in self.layout.row(node, k) {
                    mass[i] = mass[i] * d + x * self.policy.data()[i];
                }
            }
        }
        normalize_mass(&self.layout, &mass)
    }

    pub fn regrets(&self) -> &[S] {
        &self.regret
    }

    /// Completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn updates(&self) -> [usize; 2] {
        self.updates
    }

    /// Player whose regrets the next update changes.
    pub fn traverser(&self) -> Player {
        self.iteration % 2
    }

    /// Applies the traverser's regret and average-policy updates given the
    /// own-action `reach` and counterfactual values `cfv` of the current
    /// iterate, then advances the iteration counter.
    pub fn update(&mut self, sg: &Subgame, reach: &[Vec<S>; 2], cfv: &[Vec<S>; 2]) {
        let p = self.traverser();
        let n = self.updates[p] + 1;
        let dr: S = self.variant.regret_discount(n);
        let da: S = self.variant.average_discount(n);
        let plus = self.variant == CfrVariant::Plus;
        for &node in &sg.decisions {
            if self.layout.player[node] != Some(p) {
                continue;
            }
            let base = sg.vec_offset[p][node];
            let n_act = self.layout.num_actions[node];
            for k in 0..self.layout.num_rows[node] {
                let v = cfv[p][base + k];
                let x = reach[p][base + k];
                let row = self.layout.row(node, k);
                for a in 0..n_act {
                    let i = row.start + a;
                    let q = walk::action_value(sg, cfv, node, k, a);
                    let r = self.regret[i] * dr + (q - v);
                    self.regret[i] = if plus && r < S::zero() { S::zero() } else { r };
                    self.avg_mass[i] = self.avg_mass[i] * da + x * self.policy.data()[i];
                }
                let (regret, policy) = (&self.regret[row.clone()], &mut self.policy.data_mut()[row]);
                regret_matching(regret, policy);
            }
        }
        self.updates[p] = n;
        self.iteration += 1;
    }

    /// One iteration on a subgame without depth-limit leaves. Returns the
    /// counterfactual values of the iterate that was played.
    pub fn step(&mut self, sg: &Subgame) -> [Vec<S>; 2] {
        let reach = walk::reach(sg, &self.policy);
        let wr = sg.weight_by_root(&reach);
        let cfv = walk::values(sg, &self.policy, &wr, None, Mode::OnPolicy);
        self.update(sg, &reach, &cfv);
        cfv
    }

    /// Seeds the solver as if `profile` had been played for `iterations`
    /// identical updates of each player, with instantaneous regrets taken
    /// against an exact best response to the profile.
    pub fn warm_start(&mut self, sg: &Subgame, profile: &Policy<S>, leaf_cfv: Option<&[Vec<S>; 2]>, iterations: usize) {
        let scale = S::c(self.variant.regret_scale(iterations));
        let mass_scale = S::c(self.variant.average_scale(iterations));
        let plus = self.variant == CfrVariant::Plus;
        let real = realization(sg, profile);
        for p in 0..2 {
            let (_, cfv, _) = best_response_with_values(sg, profile, p, leaf_cfv);
            for &node in &sg.decisions {
                if self.layout.player[node] != Some(p) {
                    continue;
                }
                for k in 0..self.layout.num_rows[node] {
                    let row = self.layout.row(node, k);
                    let q: Vec<S> = (0..row.len())
                        .map(|a| walk::action_value(sg, &cfv, node, k, a))
                        .collect();
                    let sigma = profile.row(node, k);
                    let v: S = q.iter().zip(sigma).map(|(&q, &s)| q * s).sum();
                    for (a, i) in row.clone().enumerate() {
                        let r = scale * (q[a] - v);
                        self.regret[i] = if plus && r < S::zero() { S::zero() } else { r };
                        self.avg_mass[i] = mass_scale * real[i];
                    }
                    let (regret, policy) = (&self.regret[row.clone()], &mut self.policy.data_mut()[row]);
                    regret_matching(regret, policy);
                }
            }
        }
        self.updates = [iterations, iterations];
        self.iteration = iterations;
    }
}
