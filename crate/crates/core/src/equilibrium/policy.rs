use std::sync::Arc;

use crate::beliefs::{PolicyLayout, Subgame};
use crate::game::Player;
use crate::Scalar;

use super::walk;

/// Tolerance on policy row sums.
pub const POLICY_TOLERANCE: f64 = 1e-12;

/// Behavioural policy for both players over the decision nodes of a subgame.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy<S> {
    layout: Arc<PolicyLayout>,
    data: Vec<S>,
}

impl<S: Scalar> Policy<S> {
    pub fn uniform(layout: Arc<PolicyLayout>) -> Self {
        let mut data = vec![S::zero(); layout.len];
        for node in 0..layout.offset.len() {
            if layout.is_decision(node) {
                let u = S::one() / S::c(layout.num_actions[node] as f64);
                data[layout.block(node)].fill(u);
            }
        }
        Self { layout, data }
    }

    /// Wraps raw rows, checking that each row is a distribution.
    pub fn from_data(layout: Arc<PolicyLayout>, data: Vec<S>) -> Option<Self> {
        if data.len() != layout.len {
            return None;
        }
        let p = Self { layout, data };
        p.is_valid().then_some(p)
    }

    pub fn layout(&self) -> &Arc<PolicyLayout> {
        &self.layout
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, node: usize, infostate: usize) -> &[S] {
        &self.data[self.layout.row(node, infostate)]
    }

    #[inline]
    pub fn prob(&self, node: usize, infostate: usize, action: usize) -> S {
        self.data[self.layout.row(node, infostate).start + action]
    }

    /// The actor's rows at `node`, row-major.
    pub fn block(&self, node: usize) -> &[S] {
        &self.data[self.layout.block(node)]
    }

    pub fn is_valid(&self) -> bool {
        let l = &self.layout;
        (0..l.offset.len()).filter(|&n| l.is_decision(n)).all(|n| {
            (0..l.num_rows[n]).all(|k| {
                let row = self.row(n, k);
                let sum: f64 = row.iter().map(|x| x.as_f64()).sum();
                row.iter().all(|&x| x >= S::zero()) && (sum - 1.0).abs() <= POLICY_TOLERANCE * 10.0
            })
        })
    }

    /// Replaces `player`'s rows with those of `other`.
    pub fn splice(&self, other: &Policy<S>, player: Player) -> Policy<S> {
        let mut out = self.clone();
        for node in 0..self.layout.offset.len() {
            if self.layout.player[node] == Some(player) {
                let b = self.layout.block(node);
                out.data[b.clone()].copy_from_slice(&other.data[b]);
            }
        }
        out
    }

    pub fn cast<T: Scalar>(&self) -> Policy<T> {
        Policy {
            layout: self.layout.clone(),
            data: self.data.iter().map(|&x| T::c(x.as_f64())).collect(),
        }
    }

    /// Largest absolute difference between corresponding probabilities.
    pub fn max_abs_diff(&self, other: &Policy<S>) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// Positive-part regret matching; uniform when no regret is positive.
pub fn regret_matching<S: Scalar>(regrets: &[S], out: &mut [S]) {
    let total: S = regrets.iter().map(|&r| r.max(S::zero())).sum();
    if total > S::zero() {
        for (o, &r) in out.iter_mut().zip(regrets) {
            *o = r.max(S::zero()) / total;
        }
    } else {
        out.fill(S::one() / S::c(regrets.len() as f64));
    }
}

/// Normalizes accumulated realization-weighted mass into a policy; rows
/// without mass read as uniform.
pub fn normalize_mass<S: Scalar>(layout: &Arc<PolicyLayout>, mass: &[S]) -> Policy<S> {
    let mut data = mass.to_vec();
    for node in 0..layout.offset.len() {
        if !layout.is_decision(node) {
            continue;
        }
        for k in 0..layout.num_rows[node] {
            let row = &mut data[layout.row(node, k)];
            let total: S = row.iter().copied().sum();
            if total > S::zero() {
                row.iter_mut().for_each(|x| *x = *x / total);
            } else {
                let u = S::one() / S::c(row.len() as f64);
                row.fill(u);
            }
        }
    }
    Policy {
        layout: layout.clone(),
        data,
    }
}

/// Realization weights `x(s) * pi(s, a)` of a policy.
pub fn realization<S: Scalar>(subgame: &Subgame, policy: &Policy<S>) -> Vec<S> {
    let reach = walk::reach(subgame, policy);
    let layout = policy.layout();
    let mut out = vec![S::zero(); layout.len];
    for &node in &subgame.decisions {
        let actor = layout.player[node].expect("decision");
        let base = subgame.vec_offset[actor][node];
        for k in 0..layout.num_rows[node] {
            let x = reach[actor][base + k];
            for (o, &p) in out[layout.row(node, k)].iter_mut().zip(policy.row(node, k)) {
                *o = x * p;
            }
        }
    }
    out
}

/// Reach-weighted mixture that plays like `a` with probability `alpha` and
/// like `b` otherwise, expressed as a single behavioural policy.
///
/// Rows that neither policy reaches fall back to the pointwise mixture.
pub fn mix_policies<S: Scalar>(subgame: &Subgame, a: &Policy<S>, b: &Policy<S>, alpha: S) -> Policy<S> {
    let ra = walk::reach(subgame, a);
    let rb = walk::reach(subgame, b);
    let beta = S::one() - alpha;
    let layout = a.layout().clone();
    let mut out = a.clone();
    for &node in &subgame.decisions {
        let actor = layout.player[node].expect("decision");
        let base = subgame.vec_offset[actor][node];
        for k in 0..layout.num_rows[node] {
            let wa = ra[actor][base + k] * alpha;
            let wb = rb[actor][base + k] * beta;
            let denom = wa + wb;
            let range = layout.row(node, k);
            for (i, o) in out.data[range.clone()].iter_mut().enumerate() {
                let (pa, pb) = (a.data[range.start + i], b.data[range.start + i]);
                *o = if denom > S::zero() {
                    (wa * pa + wb * pb) / denom
                } else {
                    alpha * pa + beta * pb
                };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ModifiedRps, PublicTree};

    #[test]
    fn regret_matching_examples() {
        let mut out = [0.0; 3];
        regret_matching(&[3.0, 1.0, 0.0], &mut out);
        assert_eq!(out, [0.75, 0.25, 0.0]);
        let mut out = [0.0; 2];
        regret_matching(&[-1.0, -2.0], &mut out);
        assert_eq!(out, [0.5, 0.5]);
        regret_matching(&[0.0, 5.0], &mut out);
        assert_eq!(out, [0.0, 1.0]);
        let mut out32 = [0.0f32; 2];
        regret_matching(&[2.0f32, 2.0], &mut out32);
        assert_eq!(out32, [0.5, 0.5]);
    }

    fn rps_subgame() -> Subgame {
        Subgame::full(Arc::new(PublicTree::build(&ModifiedRps).unwrap())).unwrap()
    }

    #[test]
    fn mixing_identity_cases() {
        let sg = rps_subgame();
        let mut a = Policy::<f64>::uniform(sg.layout.clone());
        a.data_mut()[sg.layout.block(0)].copy_from_slice(&[1.0, 0.0, 0.0]);
        let mut b = a.clone();
        b.data_mut()[sg.layout.block(0)].copy_from_slice(&[0.0, 1.0, 0.0]);
        assert_eq!(mix_policies(&sg, &a, &b, 1.0), a);
        assert_eq!(mix_policies(&sg, &a, &a, 0.3), a);
        let m = mix_policies(&sg, &a, &b, 0.5);
        assert_eq!(m.block(0), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn zero_mass_rows_read_uniform() {
        let sg = rps_subgame();
        let mass = vec![0.0; sg.layout.len];
        let p = normalize_mass(&sg.layout, &mass);
        assert_eq!(p, Policy::uniform(sg.layout.clone()));
    }

    #[test]
    fn realization_of_uniform() {
        let sg = rps_subgame();
        let p = Policy::<f64>::uniform(sg.layout.clone());
        let r = realization(&sg, &p);
        assert!(r.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));
        assert!(p.is_valid());
    }
}
