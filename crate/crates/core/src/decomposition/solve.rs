use serde::{Deserialize, Serialize};

use super::{root_conditional, to_counterfactual, DecompError, ValueFunction, ValueVector};
use crate::beliefs::{leaf_pbs, DepthLimit, Pbs, ReachProfile, Subgame};
use crate::equilibrium::walk::{self, Mode};
use crate::equilibrium::{best_response_with_values, Cfr, CfrVariant, Fp, FpVariant, Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Leaves evaluated at the beliefs of the current iterate.
    CfrD,
    /// Leaves evaluated at the beliefs of the average policy.
    CfrAvg,
    /// Average-policy leaf values telescoped into current-iterate values.
    CfrAvgModified,
    Fp,
}

impl Algorithm {
    /// Whether successor beliefs follow the average policy rather than the
    /// sampled iterate.
    pub fn uses_average_beliefs(self) -> bool {
        !matches!(self, Algorithm::CfrD)
    }
}

/// Weights over solver iterations, used both for averaging root values and
/// for sampling an iteration to play.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// Iteration `t` has weight `t`.
    Linear,
}

impl Weighting {
    #[inline]
    pub fn weight(self, t: usize) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::Linear => t as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub cfr_variant: CfrVariant,
    pub fp_variant: FpVariant,
    /// Iterations imitated by a warm start, when a profile is supplied.
    pub warm_iterations: usize,
    /// How root values of the iterates are averaged.
    pub root_weighting: Weighting,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::CfrAvgModified,
            iterations: 1024,
            cfr_variant: CfrVariant::Linear,
            fp_variant: FpVariant::Flop,
            warm_iterations: 15,
            root_weighting: Weighting::Uniform,
        }
    }
}

/// Iterate and average recorded after a chosen iteration.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub iteration: usize,
    pub current: Policy<f64>,
    /// Average including the snapshot iteration's iterate.
    pub average: Policy<f64>,
}

impl Snapshot {
    /// Policy whose leaf beliefs seed the next subgame.
    pub fn belief_policy(&self, algorithm: Algorithm) -> &Policy<f64> {
        if algorithm.uses_average_beliefs() {
            &self.average
        } else {
            &self.current
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub average: Policy<f64>,
    /// Weighted average of root values over the non-warm iterations.
    pub root_values: ValueVector,
    pub snapshot: Option<Snapshot>,
    pub iterations: usize,
    pub warm_iterations: usize,
    /// PBSs sent to the value function.
    pub value_queries: usize,
}

/// The accumulated root value vector of a finished solve.
pub fn root_values(result: &SolveResult) -> &ValueVector {
    &result.root_values
}

/// `t * current - (t - 1) * previous`, the vanilla-weighted form.
pub fn modified_avg_leaf_values(current: &ValueVector, previous: Option<&ValueVector>, t: usize) -> ValueVector {
    assert!(t >= 1, "iterations are numbered from one");
    let tf = t as f64;
    let values = [0, 1].map(|p| match previous {
        Some(prev) if t > 1 => current.values[p]
            .iter()
            .zip(&prev.values[p])
            .map(|(c, q)| tf * c - (tf - 1.0) * q)
            .collect(),
        _ => current.values[p].clone(),
    });
    ValueVector { values }
}

/// `(w_cur * current - w_prev * previous) / (w_cur - w_prev)` where the
/// weights are cumulative average weights before and after the iterate.
pub fn telescope_leaf_values(current: &[f64], previous: &[f64], w_prev: f64, w_cur: f64) -> Vec<f64> {
    let w = w_cur - w_prev;
    if w_prev == 0.0 {
        return current.to_vec();
    }
    current
        .iter()
        .zip(previous)
        .map(|(c, q)| (w_cur * c - w_prev * q) / w)
        .collect()
}

struct Leaves<'a> {
    sg: &'a Subgame,
    vf: &'a dyn ValueFunction,
    queries: usize,
}

impl Leaves<'_> {
    /// Counterfactual leaf values: value-function output at the leaf PBSs
    /// induced by `belief_reach`, weighted by the opponent reach in `wr`.
    fn counterfactual(
        &mut self,
        belief_reach: &[Vec<f64>; 2],
        wr: &[Vec<f64>; 2],
    ) -> Result<[Vec<f64>; 2], DecompError> {
        let mut out = self.sg.zero_vectors::<f64>();
        if self.sg.leaves.is_empty() {
            return Ok(out);
        }
        let profile = ReachProfile {
            reach: belief_reach.clone(),
        };
        let queries: Vec<Pbs> = self.sg.leaves.iter().map(|&l| leaf_pbs(self.sg, &profile, l)).collect();
        self.queries += queries.len();
        let values = self.vf.evaluate(&self.sg.tree, &queries)?;
        if values.len() != queries.len() {
            return Err(DecompError::BatchSize {
                got: values.len(),
                expected: queries.len(),
            });
        }
        for (&l, v) in self.sg.leaves.iter().zip(&values) {
            v.validate(self.sg.tree.node(self.sg.nodes[l].public))?;
            to_counterfactual(self.sg, l, v, wr, &mut out);
        }
        Ok(out)
    }
}

struct RootAverage {
    value: ValueVector,
    weighting: Weighting,
    total: f64,
}

impl RootAverage {
    fn new(sg: &Subgame, weighting: Weighting) -> Self {
        Self {
            value: ValueVector::zeros(sg.tree.node(sg.root.node)),
            weighting,
            total: 0.0,
        }
    }

    fn add(&mut self, sg: &Subgame, t: usize, cfv: &[Vec<f64>; 2]) {
        let v = root_conditional(sg, cfv);
        let w = self.weighting.weight(t);
        self.total += w;
        let a = w / self.total;
        for p in 0..2 {
            for (acc, x) in self.value.values[p].iter_mut().zip(&v.values[p]) {
                *acc = (1.0 - a) * *acc + a * x;
            }
        }
    }
}

/// Solves `sg` for `config.iterations` total iterations, re-evaluating leaf
/// values on every iteration. A `warm` profile seeds the solver and counts
/// toward the total. `snapshot_at` records the iterate of that iteration.
pub fn solve_subgame(
    sg: &Subgame,
    vf: &dyn ValueFunction,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
    snapshot_at: Option<usize>,
) -> Result<SolveResult, DecompError> {
    solve_subgame_traced(sg, vf, config, warm, snapshot_at, |_, _| {})
}

/// As `solve_subgame`, calling `on_iteration` with each iteration number
/// and the iterate played on it.
pub fn solve_subgame_traced(
    sg: &Subgame,
    vf: &dyn ValueFunction,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
    snapshot_at: Option<usize>,
    mut on_iteration: impl FnMut(usize, &Policy<f64>),
) -> Result<SolveResult, DecompError> {
    let mut snapshot = None;
    let mut result = run(sg, vf, config, warm, &mut |t, sigma, average| {
        on_iteration(t, sigma);
        if snapshot_at == Some(t) {
            snapshot = Some(Snapshot {
                iteration: t,
                current: sigma.clone(),
                average: average(),
            });
        }
    })?;
    result.snapshot = snapshot;
    Ok(result)
}

/// As `solve_subgame`, keeping a snapshot of every non-warm iteration,
/// indexed from `warm_iterations + 1`.
pub fn solve_subgame_snapshots(
    sg: &Subgame,
    vf: &dyn ValueFunction,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
) -> Result<(SolveResult, Vec<Snapshot>), DecompError> {
    let mut all = Vec::new();
    let result = run(sg, vf, config, warm, &mut |t, sigma, average| {
        all.push(Snapshot {
            iteration: t,
            current: sigma.clone(),
            average: average(),
        })
    })?;
    Ok((result, all))
}

/// Per-iteration hook: iteration number, iterate played, and a thunk for
/// the average including that iterate.
type Hook<'a> = dyn FnMut(usize, &Policy<f64>, &dyn Fn() -> Policy<f64>) + 'a;

fn run(
    sg: &Subgame,
    vf: &dyn ValueFunction,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
    hook: &mut Hook,
) -> Result<SolveResult, DecompError> {
    if config.iterations == 0 {
        return Err(DecompError::ZeroIterations);
    }
    if warm.is_some() && config.warm_iterations >= config.iterations {
        return Err(DecompError::WarmStartTooLong {
            warm: config.warm_iterations,
            total: config.iterations,
        });
    }
    let mut leaves = Leaves { sg, vf, queries: 0 };
    match config.algorithm {
        Algorithm::Fp => solve_fp(sg, &mut leaves, config, warm, hook),
        _ => solve_cfr(sg, &mut leaves, config, warm, hook),
    }
}

fn solve_cfr(
    sg: &Subgame,
    leaves: &mut Leaves,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
    hook: &mut Hook,
) -> Result<SolveResult, DecompError> {
    let variant = config.cfr_variant;
    let mut cfr = Cfr::<f64>::new(sg, variant);
    if let Some(profile) = warm {
        let reach = walk::reach(sg, profile);
        let leaf = leaves.counterfactual(&reach, &sg.weight_by_root(&reach))?;
        cfr.warm_start(sg, profile, Some(&leaf), config.warm_iterations);
    }
    let t_warm = cfr.iteration();
    let mut root = RootAverage::new(sg, config.root_weighting);
    for t in t_warm + 1..=config.iterations {
        let sigma = cfr.current().clone();
        let reach = walk::reach(sg, &sigma);
        let wr = sg.weight_by_root(&reach);
        let average = match config.algorithm {
            Algorithm::CfrD => None,
            _ => Some(cfr.prospective_average(sg, &reach)),
        };
        let leaf = match (config.algorithm, &average) {
            (Algorithm::CfrAvg, Some(avg)) => {
                let ar = walk::reach(sg, avg);
                leaves.counterfactual(&ar, &wr)?
            }
            (Algorithm::CfrAvgModified, Some(avg)) => {
                let ar = walk::reach(sg, avg);
                let current = leaves.counterfactual(&ar, &sg.weight_by_root(&ar))?;
                let n = cfr.updates();
                let previous = if n == [0, 0] || sg.leaves.is_empty() {
                    sg.zero_vectors()
                } else {
                    let pr = walk::reach(sg, &cfr.average());
                    leaves.counterfactual(&pr, &sg.weight_by_root(&pr))?
                };
                // Leaf values of player p are linear in the opponent's
                // reach, so the opponent's update count sets the weights.
                [0, 1].map(|p| {
                    let o = 1 - p;
                    telescope_leaf_values(
                        &current[p],
                        &previous[p],
                        variant.cumulative_weight(n[o]),
                        variant.cumulative_weight(n[o] + 1),
                    )
                })
            }
            _ => leaves.counterfactual(&reach, &wr)?,
        };
        let cfv = walk::values(sg, &sigma, &wr, Some(&leaf), Mode::OnPolicy);
        root.add(sg, t, &cfv);
        cfr.update(sg, &reach, &cfv);
        match &average {
            Some(avg) => hook(t, &sigma, &|| avg.clone()),
            None => hook(t, &sigma, &|| cfr.average()),
        }
    }
    Ok(SolveResult {
        average: cfr.average(),
        root_values: root.value,
        snapshot: None,
        iterations: config.iterations,
        warm_iterations: t_warm,
        value_queries: leaves.queries,
    })
}

fn solve_fp(
    sg: &Subgame,
    leaves: &mut Leaves,
    config: &SolveConfig,
    warm: Option<&Policy<f64>>,
    hook: &mut Hook,
) -> Result<SolveResult, DecompError> {
    let mut fp = Fp::<f64>::new(sg, config.fp_variant);
    if let Some(profile) = warm {
        fp.warm_start(sg, profile, config.warm_iterations);
    }
    let t_warm = fp.iteration();
    let mut root = RootAverage::new(sg, config.root_weighting);
    for t in t_warm + 1..=config.iterations {
        let p = fp.traverser();
        let target = fp.target(sg);
        let tr = walk::reach(sg, &target);
        let leaf = leaves.counterfactual(&tr, &sg.weight_by_root(&tr))?;
        let (br, _, _) = best_response_with_values(sg, &target, p, Some(&leaf));
        let played = target.splice(&br, p);
        let pr = walk::reach(sg, &played);
        let pwr = sg.weight_by_root(&pr);
        let leaf = leaves.counterfactual(&pr, &pwr)?;
        let cfv = walk::values(sg, &played, &pwr, Some(&leaf), Mode::OnPolicy);
        root.add(sg, t, &cfv);
        fp.apply(sg, &br);
        hook(t, &played, &|| fp.average());
    }
    Ok(SolveResult {
        average: fp.average(),
        root_values: root.value,
        snapshot: None,
        iterations: config.iterations,
        warm_iterations: t_warm,
        value_queries: leaves.queries,
    })
}

/// Values of the rest of the game when both players act uniformly at
/// random below the queried PBS. Leaf values of this kind are linear in the
/// opponent's reach, which makes it a convenient exact test double.
#[derive(Debug, Clone)]
pub struct UniformContinuation {
    pub tree: std::sync::Arc<crate::game::PublicTree>,
}

impl ValueFunction for UniformContinuation {
    fn evaluate(&self, _: &crate::game::PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        let tree = &self.tree;
        queries
            .iter()
            .map(|q| {
                let state = tree.node(q.node);
                if state.is_terminal() {
                    return Ok(super::exact_terminal_values(state, q));
                }
                let sg = Subgame::new(tree.clone(), q.clone(), DepthLimit::ToEnd)?;
                let u = Policy::uniform(sg.layout.clone());
                let wr = walk::weighted_reach(&sg, &u);
                let cfv = walk::values(&sg, &u, &wr, None, Mode::OnPolicy);
                Ok(root_conditional(&sg, &cfv))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::beliefs::initial_pbs;
    use crate::decomposition::ZeroValue;
    use crate::equilibrium::exploitability;
    use crate::game::{GameSpec, ModifiedRps, PublicTree};

    fn rps_tree() -> Arc<PublicTree> {
        Arc::new(PublicTree::build(&ModifiedRps).unwrap())
    }

    fn cfg(algorithm: Algorithm, iterations: usize, cfr_variant: CfrVariant) -> SolveConfig {
        SolveConfig {
            algorithm,
            iterations,
            cfr_variant,
            ..Default::default()
        }
    }

    #[test]
    fn full_depth_cfr_d_finds_rps_nash() {
        let sg = Subgame::full(rps_tree()).unwrap();
        let r = solve_subgame(
            &sg,
            &ZeroValue,
            &cfg(Algorithm::CfrD, 1000, CfrVariant::Linear),
            None,
            None,
        )
        .unwrap();
        let l1: f64 = r
            .average
            .block(0)
            .iter()
            .zip([0.4, 0.4, 0.2])
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 < 0.01);
        assert_eq!(r.value_queries, 0);
        for p in 0..2 {
            assert!(r.root_values.values[p][0].abs() < 0.01);
        }
    }

    #[test]
    fn zero_iterations_rejected() {
        let sg = Subgame::full(rps_tree()).unwrap();
        let e = solve_subgame(
            &sg,
            &ZeroValue,
            &cfg(Algorithm::CfrD, 0, CfrVariant::Linear),
            None,
            None,
        );
        assert!(matches!(e, Err(DecompError::ZeroIterations)));
        let u = Policy::uniform(sg.layout.clone());
        let e = solve_subgame(
            &sg,
            &ZeroValue,
            &cfg(Algorithm::CfrD, 15, CfrVariant::Linear),
            Some(&u),
            None,
        );
        assert!(matches!(e, Err(DecompError::WarmStartTooLong { .. })));
    }

    #[test]
    fn modified_values_examples() {
        let cur = ValueVector {
            values: [vec![1.0, 2.0], vec![-1.0]],
        };
        let prev = ValueVector {
            values: [vec![0.5, 2.0], vec![0.0]],
        };
        assert_eq!(modified_avg_leaf_values(&cur, Some(&prev), 1), cur);
        assert_eq!(modified_avg_leaf_values(&cur, Some(&cur), 7), cur);
        let m = modified_avg_leaf_values(&cur, Some(&prev), 3);
        assert_eq!(m.values[0], vec![2.0, 2.0]);
        assert_eq!(m.values[1], vec![-3.0]);
        assert_eq!(telescope_leaf_values(&[1.0], &[0.5], 3.0, 6.0), vec![1.5]);
    }

    #[test]
    fn root_values_match_tabular_iterates() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let sg = Subgame::full(tree).unwrap();
        for weighting in [Weighting::Uniform, Weighting::Linear] {
            let config = SolveConfig {
                root_weighting: weighting,
                ..cfg(Algorithm::CfrD, 64, CfrVariant::Linear)
            };
            let r = solve_subgame(&sg, &ZeroValue, &config, None, None).unwrap();
            let mut cfr = Cfr::<f64>::new(&sg, CfrVariant::Linear);
            let total: f64 = (1..=64).map(|t| weighting.weight(t)).sum();
            let mut sum = [vec![0.0; 3], vec![0.0; 3]];
            for t in 1..=64 {
                let cfv = cfr.step(&sg);
                // root beliefs are uniform over 3 faces and compatibility is one
                for p in 0..2 {
                    for k in 0..3 {
                        sum[p][k] += weighting.weight(t) * cfv[p][k] / total;
                    }
                }
            }
            for p in 0..2 {
                for k in 0..3 {
                    assert!((r.root_values.values[p][k] - sum[p][k]).abs() < 1e-12, "{weighting:?}");
                }
            }
        }
    }

    #[test]
    fn modified_average_tracks_cfr_d_with_linear_leaves() {
        for (spec, depth) in [(None, 1), (Some(GameSpec::LiarsDice { dice: 1, faces: 3 }), 2)] {
            let tree = match spec {
                Some(s) => s.build_tree().unwrap(),
                None => rps_tree(),
            };
            let sg = Subgame::new(tree.clone(), initial_pbs(&tree), DepthLimit::Public(depth)).unwrap();
            assert!(!sg.leaves.is_empty());
            let vf = UniformContinuation { tree: tree.clone() };
            for variant in [CfrVariant::Vanilla, CfrVariant::Linear] {
                let mut a = Vec::new();
                let mut b = Vec::new();
                solve_subgame_traced(&sg, &vf, &cfg(Algorithm::CfrD, 128, variant), None, None, |_, p| {
                    a.push(p.clone())
                })
                .unwrap();
                solve_subgame_traced(
                    &sg,
                    &vf,
                    &cfg(Algorithm::CfrAvgModified, 128, variant),
                    None,
                    None,
                    |_, p| b.push(p.clone()),
                )
                .unwrap();
                let gap = a.iter().zip(&b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max);
                // Linear weights reach ~t^2/2, so rounding in the telescoped
                // difference grows accordingly.
                let tol = if variant == CfrVariant::Vanilla { 1e-12 } else { 1e-9 };
                assert!(gap <= tol, "{variant:?} depth {depth}: {gap}");
            }
        }
    }

    #[test]
    fn snapshot_records_requested_iteration() {
        let sg = Subgame::full(rps_tree()).unwrap();
        let mut seen = None;
        let r = solve_subgame_traced(
            &sg,
            &ZeroValue,
            &cfg(Algorithm::CfrD, 20, CfrVariant::Linear),
            None,
            Some(7),
            |t, p| {
                if t == 7 {
                    seen = Some(p.clone());
                }
            },
        )
        .unwrap();
        let snap = r.snapshot.unwrap();
        assert_eq!(snap.iteration, 7);
        assert_eq!(Some(snap.current), seen);
    }

    #[test]
    fn all_snapshots_match_single_ones() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 2 }.build_tree().unwrap();
        let sg = Subgame::new(tree.clone(), initial_pbs(&tree), DepthLimit::Public(1)).unwrap();
        let vf = UniformContinuation { tree };
        for alg in [Algorithm::CfrD, Algorithm::CfrAvgModified, Algorithm::Fp] {
            let c = cfg(alg, 12, CfrVariant::Linear);
            let (r, all) = solve_subgame_snapshots(&sg, &vf, &c, None).unwrap();
            assert_eq!(all.len(), 12);
            assert_eq!(all[0].iteration, 1);
            for t in [1, 6, 12] {
                let one = solve_subgame(&sg, &vf, &c, None, Some(t)).unwrap().snapshot.unwrap();
                assert_eq!(one.current, all[t - 1].current, "{alg:?} {t}");
                assert_eq!(one.average, all[t - 1].average, "{alg:?} {t}");
            }
            assert_eq!(r.iterations, 12);
        }
    }

    #[test]
    fn fp_and_avg_reduce_exploitability() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let sg = Subgame::full(tree).unwrap();
        let start = exploitability(&sg, &Policy::<f64>::uniform(sg.layout.clone()));
        for alg in [Algorithm::Fp, Algorithm::CfrAvg, Algorithm::CfrAvgModified] {
            let r = solve_subgame(&sg, &ZeroValue, &cfg(alg, 200, CfrVariant::Linear), None, None).unwrap();
            assert!(exploitability(&sg, &r.average) < start / 4.0, "{alg:?}");
        }
    }

    #[test]
    fn warm_start_counts_toward_total() {
        let sg = Subgame::full(rps_tree()).unwrap();
        let u = Policy::uniform(sg.layout.clone());
        let mut count = 0;
        let r = solve_subgame_traced(
            &sg,
            &ZeroValue,
            &cfg(Algorithm::CfrD, 40, CfrVariant::Linear),
            Some(&u),
            None,
            |_, _| count += 1,
        )
        .unwrap();
        assert_eq!(r.warm_iterations, 15);
        assert_eq!(count, 25);
    }
}
