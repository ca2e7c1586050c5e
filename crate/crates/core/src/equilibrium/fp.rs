use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::beliefs::{PolicyLayout, Subgame};
use crate::game::Player;
use crate::Scalar;

use super::eval::{best_response_value, best_response_with_values, root_expectation};
use super::policy::{mix_policies, normalize_mass, realization};
use super::walk::{self, Mode};
use super::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpVariant {
    /// Best response to the average, average weight `1/t`.
    Vanilla,
    /// Best response to the average, average weight `2/(t+1)`.
    Linear,
    /// Best response to the optimistic mixture
    /// `t/(t+2) avg + 2/(t+2) last`, linear averaging.
    Flop,
}

impl FpVariant {
    /// Weight of the `t`-th best response in the running average.
    pub fn average_weight(self, t: usize) -> f64 {
        match self {
            FpVariant::Vanilla => 1.0 / t as f64,
            FpVariant::Linear | FpVariant::Flop => 2.0 / (t + 1) as f64,
        }
    }
}

/// Fictitious-play state with alternating updates.
#[derive(Debug, Clone)]
pub struct Fp<S> {
    layout: Arc<PolicyLayout>,
    variant: FpVariant,
    /// Realization weights of the average policy.
    avg_mass: Vec<S>,
    last: Policy<S>,
    updates: [usize; 2],
    iteration: usize,
}

impl<S: Scalar> Fp<S> {
    pub fn new(sg: &Subgame, variant: FpVariant) -> Self {
        let layout = sg.layout.clone();
        let uniform = Policy::uniform(layout.clone());
        Self {
            avg_mass: realization(sg, &uniform),
            last: uniform,
            layout,
            variant,
            updates: [0, 0],
            iteration: 0,
        }
    }

    pub fn variant(&self) -> FpVariant {
        self.variant
    }

    pub fn average(&self) -> Policy<S> {
        normalize_mass(&self.layout, &self.avg_mass)
    }

    /// Most recent best response of each player.
    pub fn current(&self) -> &Policy<S> {
        &self.last
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn updates(&self) -> [usize; 2] {
        self.updates
    }

    pub fn traverser(&self) -> Player {
        self.iteration % 2
    }

    /// Profile the traverser best-responds to on its next update.
    pub fn target(&self, sg: &Subgame) -> Policy<S> {
        let avg = self.average();
        match self.variant {
            FpVariant::Flop => {
                let t = (self.updates[self.traverser()] + 1) as f64;
                mix_policies(sg, &avg, &self.last, S::c(t / (t + 2.0)))
            }
            _ => avg,
        }
    }

    /// Seeds the average as if `profile` had been the best response of both
    /// players for `iterations` updates each.
    pub fn warm_start(&mut self, sg: &Subgame, profile: &Policy<S>, iterations: usize) {
        self.avg_mass = realization(sg, profile);
        self.last = profile.clone();
        self.updates = [iterations, iterations];
        self.iteration = iterations;
    }

    /// Folds the traverser's rows of `br` into the average and advances.
    pub fn apply(&mut self, sg: &Subgame, br: &Policy<S>) {
        let p = self.traverser();
        let t = self.updates[p] + 1;
        let w = S::c(self.variant.average_weight(t));
        let real = realization(sg, br);
        for &node in &sg.decisions {
            if self.layout.player[node] != Some(p) {
                continue;
            }
            for i in self.layout.block(node) {
                self.avg_mass[i] = (S::one() - w) * self.avg_mass[i] + w * real[i];
            }
        }
        self.last = self.last.splice(br, p);
        self.updates[p] = t;
        self.iteration += 1;
    }

    /// One iteration on a subgame without depth-limit leaves. With
    /// `diagnose`, returns how far the new best response falls short of a
    /// best response to the opponent's current average.
    pub fn step(&mut self, sg: &Subgame, diagnose: bool) -> Option<f64> {
        let p = self.traverser();
        let target = self.target(sg);
        let (br, _, _) = best_response_with_values(sg, &target, p, None);
        let epsilon = diagnose.then(|| {
            let avg = self.average();
            let best = best_response_value(sg, &avg, p);
            let played = avg.splice(&br, p);
            let wr = walk::weighted_reach(sg, &played);
            let cfv = walk::values(sg, &played, &wr, None, Mode::OnPolicy);
            best - root_expectation(sg, &cfv, p)
        });
        self.apply(sg, &br);
        epsilon
    }
}
