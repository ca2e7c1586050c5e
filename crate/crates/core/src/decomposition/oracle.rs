use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{from_counterfactual, root_conditional, DecompError, ValueFunction, ValueVector};
use crate::beliefs::{DepthLimit, Pbs, Subgame};
use crate::equilibrium::{best_response_with_values, root_expectation, Cfr, CfrVariant, Policy};
use crate::game::{PublicState, PublicTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Exploitability (stake units) at which a solve stops.
    pub target: f64,
    pub max_iterations: usize,
    /// Iterations between exploitability checks.
    pub check_every: usize,
    pub solver: CfrVariant,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            target: 1e-5,
            max_iterations: 50_000,
            check_every: 16,
            solver: CfrVariant::Plus,
        }
    }
}

/// Outcome of one exact solve of the remainder of the game.
#[derive(Debug, Clone)]
pub struct OracleSolve {
    pub values: ValueVector,
    pub exploitability: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The solved subgame and its average policy; absent at terminals.
    pub solution: Option<(Subgame, Policy<f64>)>,
}

type CacheKey = (usize, Vec<i64>);

/// Value function that solves the game below the queried PBS with tabular
/// CFR (CFR+ by default) and reports best-response values against the approximate
/// equilibrium, for every infostate including zero-belief ones.
#[derive(Debug)]
pub struct OracleValue {
    tree: Arc<PublicTree>,
    config: OracleConfig,
    cache: Mutex<HashMap<CacheKey, ValueVector>>,
    solves: AtomicUsize,
    warnings: AtomicUsize,
}

impl OracleValue {
    pub fn new(tree: Arc<PublicTree>, config: OracleConfig) -> Self {
        Self {
            tree,
            config,
            cache: Mutex::new(HashMap::new()),
            solves: AtomicUsize::new(0),
            warnings: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn tree(&self) -> &Arc<PublicTree> {
        &self.tree
    }

    /// Solves performed so far (cache hits excluded).
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Solves that hit the iteration budget before the target.
    pub fn warnings(&self) -> usize {
        self.warnings.load(Ordering::Relaxed)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().expect("oracle cache poisoned").len()
    }

    /// Solves without consulting the cache.
    pub fn solve(&self, pbs: &Pbs) -> Result<OracleSolve, DecompError> {
        let state = self.tree.node(pbs.node);
        if state.is_terminal() {
            return Ok(OracleSolve {
                values: exact_terminal_values(state, pbs),
                exploitability: 0.0,
                iterations: 0,
                converged: true,
                solution: None,
            });
        }
        let sg = Subgame::new(self.tree.clone(), pbs.clone(), DepthLimit::ToEnd)?;
        let mut cfr = Cfr::<f64>::new(&sg, self.config.solver);
        let check = self.config.check_every.max(1);
        loop {
            cfr.step(&sg);
            let done = cfr.iteration() >= self.config.max_iterations;
            if cfr.iteration() % check != 0 && !done {
                continue;
            }
            let avg = cfr.average();
            let (_, cfv1, _) = best_response_with_values(&sg, &avg, 0, None);
            let (_, cfv2, _) = best_response_with_values(&sg, &avg, 1, None);
            let e = (root_expectation(&sg, &cfv1, 0) + root_expectation(&sg, &cfv2, 1)) / 2.0;
            let converged = e <= self.config.target;
            if converged || done {
                self.solves.fetch_add(1, Ordering::Relaxed);
                if !converged {
                    self.warnings.fetch_add(1, Ordering::Relaxed);
                    log::warn!(
                        "oracle stopped at exploitability {e:.3e} after {} iterations (target {:.1e})",
                        cfr.iteration(),
                        self.config.target
                    );
                }
                let cfv = [cfv1[0].clone(), cfv2[1].clone()];
                return Ok(OracleSolve {
                    values: root_conditional(&sg, &cfv),
                    exploitability: e,
                    iterations: cfr.iteration(),
                    converged,
                    solution: Some((sg, avg)),
                });
            }
        }
    }
}

impl ValueFunction for OracleValue {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        debug_assert_eq!(tree.len(), self.tree.len());
        let keys: Vec<CacheKey> = queries.iter().map(Pbs::quantized_key).collect();
        let mut missing: Vec<usize> = Vec::new();
        {
            let cache = self.cache.lock().expect("oracle cache poisoned");
            let mut seen = std::collections::HashSet::new();
            for (i, key) in keys.iter().enumerate() {
                let terminal = self.tree.node(queries[i].node).is_terminal();
                if !terminal && !cache.contains_key(key) && seen.insert(key) {
                    missing.push(i);
                }
            }
        }
        let solved: Vec<(usize, ValueVector)> = missing
            .par_iter()
            .map(|&i| self.solve(&queries[i]).map(|s| (i, s.values)))
            .collect::<Result<_, _>>()?;
        let mut cache = self.cache.lock().expect("oracle cache poisoned");
        for (i, v) in solved {
            cache.insert(keys[i].clone(), v);
        }
        Ok(queries
            .iter()
            .zip(&keys)
            .map(|(q, key)| {
                let state = self.tree.node(q.node);
                if state.is_terminal() {
                    exact_terminal_values(state, q)
                } else {
                    cache[key].clone()
                }
            })
            .collect())
    }
}

/// Conditional terminal payoffs under the beliefs of `pbs`.
pub fn exact_terminal_values(state: &PublicState, pbs: &Pbs) -> ValueVector {
    let n2 = state.num_infostates(1);
    let [b1, b2] = &pbs.beliefs;
    let cf1: Vec<f64> = (0..state.num_infostates(0))
        .map(|k1| (0..n2).map(|k2| state.payoff[k1 * n2 + k2] * b2[k2]).sum())
        .collect();
    let cf2: Vec<f64> = (0..n2)
        .map(|k2| -(0..b1.len()).map(|k1| state.payoff[k1 * n2 + k2] * b1[k1]).sum::<f64>())
        .collect();
    from_counterfactual(state, [&cf1, &cf2], [b2, b1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::initial_pbs;
    use crate::game::{CoinGuess, GameSpec, ModifiedRps};

    #[test]
    fn coin_guess_root_value() {
        for prior in [0.5, 0.7, 0.2, 1.0] {
            let tree = Arc::new(PublicTree::build(&CoinGuess::new(prior).unwrap()).unwrap());
            let oracle = OracleValue::new(
                tree.clone(),
                OracleConfig {
                    target: 1e-9,
                    ..Default::default()
                },
            );
            let pbs = initial_pbs(&tree);
            let v = oracle.evaluate(&tree, &[pbs.clone()]).unwrap().remove(0);
            let v2 = v.expectation(tree.root(), &pbs, 1);
            let expected = 2.0 * prior.max(1.0 - prior) - 1.0;
            assert!((v2 - expected).abs() < 1e-6, "prior {prior}: {v2} vs {expected}");
        }
    }

    #[test]
    fn rps_nash_beliefs_make_p2_indifferent() {
        let tree = Arc::new(PublicTree::build(&ModifiedRps).unwrap());
        let after = tree.root().children[0];
        let pbs = Pbs::new(&tree, after, [vec![0.4, 0.4, 0.2], vec![1.0]]).unwrap();
        let oracle = OracleValue::new(tree.clone(), OracleConfig::default());
        let s = oracle.solve(&pbs).unwrap();
        assert!(s.converged);
        // P2's best-response value against a Nash-mixing P1 is zero
        assert!(s.values.values[1][0].abs() < 1e-9);
    }

    #[test]
    fn terminal_values_are_exact() {
        let tree = Arc::new(PublicTree::build(&ModifiedRps).unwrap());
        let after = tree.root().children[0];
        // P2 played Paper
        let term = tree.node(after).edges[1].child;
        let pbs = Pbs::new(&tree, term, [vec![1.0, 0.0, 0.0], vec![1.0]]).unwrap();
        let v = OracleValue::new(tree.clone(), OracleConfig::default())
            .evaluate(&tree, &[pbs])
            .unwrap()
            .remove(0);
        assert_eq!(v.values[0][0], -1.0);
        assert_eq!(v.values[1][0], 1.0);
    }

    #[test]
    fn cache_hits_skip_solves() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 2 }.build_tree().unwrap();
        let oracle = OracleValue::new(tree.clone(), OracleConfig::default());
        let pbs = initial_pbs(&tree);
        let a = oracle.evaluate(&tree, &[pbs.clone(), pbs.clone()]).unwrap();
        assert_eq!(oracle.solves(), 1);
        let b = oracle.evaluate(&tree, &[pbs]).unwrap();
        assert_eq!(oracle.solves(), 1);
        assert_eq!(a[0], b[0]);
        assert_eq!(a[0], a[1]);
    }
}
