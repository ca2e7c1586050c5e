use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rebel_core::beliefs::{Pbs, Subgame};
use rebel_core::decomposition::{OracleConfig, OracleValue, ValueFunction, Weighting};
use rebel_core::equilibrium::{exploitability, random_policy, regret_matching, solve_cfr, CfrVariant};
use rebel_core::game::{GameSpec, PublicTree, RandomGame};
use rebel_core::selfplay::sample_iteration;
use rebel_core::valuenet::{encode, encoded_width, Example, ReplayBuffer};

fn example(i: usize) -> Example {
    Example {
        features: vec![i as f32],
        target: vec![0.0],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regret_matching_yields_a_distribution(regrets in prop::collection::vec(-5.0f64..5.0, 1..9)) {
        let mut out = vec![0.0; regrets.len()];
        regret_matching(&regrets, &mut out);
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(out.iter().all(|&p| p >= 0.0));
        for (r, p) in regrets.iter().zip(&out) {
            if *r <= 0.0 && regrets.iter().any(|&x| x > 0.0) {
                prop_assert_eq!(*p, 0.0);
            }
        }
    }

    #[test]
    fn sampled_iteration_skips_the_warm_start(total in 2usize..5000, warm_frac in 0.0f64..0.9, seed: u64, linear: bool) {
        let warm = ((total - 1) as f64 * warm_frac) as usize;
        let law = if linear { Weighting::Linear } else { Weighting::Uniform };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..16 {
            let t = sample_iteration(total, warm, law, &mut rng);
            prop_assert!(t > warm && t <= total);
        }
    }

    #[test]
    fn buffer_keeps_the_newest(capacity in 1usize..64, inserts in 0usize..200) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..inserts {
            buf.add(example(i));
        }
        prop_assert_eq!(buf.len(), inserts.min(capacity));
        let mut kept: Vec<usize> = buf.iter().map(|e| e.features[0] as usize).collect();
        kept.sort_unstable();
        let expected: Vec<usize> = (inserts.saturating_sub(capacity)..inserts).collect();
        prop_assert_eq!(kept, expected);
    }

    #[test]
    fn random_policies_are_exploitable_and_cfr_is_not(seed in 0u64..10_000) {
        let sg = Subgame::full(Arc::new(PublicTree::build(&RandomGame::generate(seed)).unwrap())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = random_policy(&sg, &mut rng);
        let e_random = exploitability(&sg, &policy);
        prop_assert!(e_random >= -1e-12);
        let cfr = solve_cfr::<f64>(&sg, CfrVariant::Linear, 400, |_, _| {});
        let e_cfr = exploitability(&sg, &cfr.average());
        prop_assert!(e_cfr >= -1e-12);
        prop_assert!(e_cfr <= e_random + 1e-9);
    }

    #[test]
    fn encoding_width_matches_for_every_state(faces in 2usize..6, node_pick in 0usize..10_000, w in prop::collection::vec(0.01f64..1.0, 12)) {
        let tree = GameSpec::LiarsDice { dice: 1, faces }.build_tree().unwrap();
        let node = node_pick % tree.len();
        let pbs = Pbs::from_weights(node, [w[..faces].to_vec(), w[6..6 + faces].to_vec()]);
        let x = encode(&tree, &pbs, 0).unwrap();
        prop_assert_eq!(x.len(), encoded_width(&tree).unwrap());
        let tail = &x[x.len() - 2 * faces..];
        prop_assert!((tail[..faces].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((tail[faces..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Best-response values of both players sum to twice the solve's
    /// exploitability, so they lie in `[0, 2 * target]`.
    #[test]
    fn oracle_values_are_nearly_zero_sum(w in prop::collection::vec(0.01f64..1.0, 6), node_pick in 0usize..1000) {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let target = 1e-4;
        let oracle = OracleValue::new(tree.clone(), OracleConfig { target, ..Default::default() });
        let node = node_pick % tree.len();
        let pbs = Pbs::from_weights(node, [w[..3].to_vec(), w[3..].to_vec()]);
        let v = oracle.evaluate(&tree, std::slice::from_ref(&pbs)).unwrap().remove(0);
        let state = tree.node(node);
        let sum = v.expectation(state, &pbs, 0) + v.expectation(state, &pbs, 1);
        prop_assert!(sum >= -1e-9, "{sum}");
        prop_assert!(sum <= 2.0 * target + 1e-9, "{sum}");
    }
}
