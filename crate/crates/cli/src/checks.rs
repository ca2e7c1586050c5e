//! Invariant suite with measured slack per property.

use std::sync::Arc;
use std::time::Instant;

use anyhow::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebel_core::beliefs::{initial_pbs, Subgame};
use rebel_core::decomposition::{
    belief_line, solve_subgame_traced, supergradient_check, Algorithm, OracleConfig, OracleValue, SolveConfig,
    Weighting, ZeroValue,
};
use rebel_core::equilibrium::{exploitability, mixture_equivalence_gap, random_policy, Cfr, CfrVariant};
use rebel_core::game::{CoinGuess, GameSpec, ModifiedRps, PublicTree, RandomGame};
use rebel_core::selfplay::{play_unsafe, SafeSearch, SelfPlayConfig};
use rebel_core::valuenet::{gradient_check, train_step, Adam, Mlp, NetConfig};
use serde::Serialize;

use crate::config::{ChecksConfig, Resolved};
use crate::report::{prepare_out, write_summary};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Measured quantity compared against `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub seconds: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChecksSummary {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

type Check = fn(&ChecksConfig, u64) -> Result<(bool, f64, f64, String)>;

const SUITE: [(&str, Check); 6] = [
    ("supergradient_coin_guess", supergradient),
    ("gradient_check", gradients),
    ("overfit_one_batch", overfit),
    ("mixture_equivalence", mixture),
    ("modified_avg_equals_cfr", modified_equals_cfr),
    ("safe_vs_unsafe_rps", safe_vs_unsafe),
];

pub fn run_checks(resolved: &Resolved) -> Result<ChecksSummary> {
    prepare_out(resolved)?;
    let config = resolved.config.checks;
    let start = Instant::now();
    let mut checks = Vec::new();
    for (name, check) in SUITE {
        let t = Instant::now();
        let (passed, measured, threshold, detail) = check(&config, resolved.seed)?;
        let r = CheckResult {
            name,
            passed,
            measured,
            threshold,
            seconds: t.elapsed().as_secs_f64(),
            detail,
        };
        log::info!(
            "{} {name}: measured {measured:.3e} vs {threshold:.3e} ({})",
            if passed { "PASS" } else { "FAIL" },
            r.detail
        );
        checks.push(r);
    }
    let summary = ChecksSummary {
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    let path = resolved.out.join("checks.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
    write_summary(resolved, "checks", start.elapsed().as_secs_f64(), &summary)?;
    Ok(summary)
}

fn supergradient(c: &ChecksConfig, _: u64) -> Result<(bool, f64, f64, String)> {
    let tree = Arc::new(PublicTree::build(&CoinGuess::new(c.coin_prior)?)?);
    let oracle = OracleValue::new(
        tree.clone(),
        OracleConfig {
            target: 1e-10,
            ..Default::default()
        },
    );
    let line = belief_line(&initial_pbs(&tree), 0, 0, 1, c.coin_step);
    let r = supergradient_check(&oracle, &line, 0, c.coin_tolerance)?;
    let detail = format!(
        "{} points, {} violations, {} concavity violations",
        r.points, r.violations, r.concavity_violations
    );
    Ok((
        r.passed(),
        r.max_slack.max(r.max_concavity_gap),
        c.coin_tolerance,
        detail,
    ))
}

fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

fn gradients(c: &ChecksConfig, seed: u64) -> Result<(bool, f64, f64, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..c.gradient_nets {
        let (input, output) = (rng.random_range(2..7), rng.random_range(1..5));
        let config = NetConfig {
            input,
            hidden: vec![rng.random_range(3..10), rng.random_range(3..10)],
            output,
            ..Default::default()
        };
        let net = Mlp::<f64>::new(&config, rng.random())?;
        let x = random_batch(&mut rng, 4, input, 2.0);
        let y = random_batch(&mut rng, 4, output, 2.0);
        worst = worst.max(gradient_check(&net, &x, &y, 1e-5, 1e-7)?);
    }
    let detail = format!("{} random nets", c.gradient_nets);
    Ok((worst <= c.gradient_tolerance, worst, c.gradient_tolerance, detail))
}

fn overfit(c: &ChecksConfig, seed: u64) -> Result<(bool, f64, f64, String)> {
    let config = NetConfig {
        input: 6,
        hidden: vec![32, 32],
        output: 4,
        learning_rate: 3e-3,
        ..Default::default()
    };
    let mut net = Mlp::<f32>::new(&config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let x = random_batch(&mut rng, 16, 6, 1.0).mapv(|v| v as f32);
    let y = random_batch(&mut rng, 16, 4, 1.0).mapv(|v| v as f32);
    let mut opt = Adam::new(&net);
    let mut loss = f64::INFINITY;
    for _ in 0..c.overfit_steps {
        loss = train_step(&mut net, &mut opt, &x, &y, config.learning_rate)?;
    }
    let detail = format!("{} Adam steps on 16 examples", c.overfit_steps);
    Ok((loss < c.overfit_loss, loss, c.overfit_loss, detail))
}

fn mixture(c: &ChecksConfig, seed: u64) -> Result<(bool, f64, f64, String)> {
    let mut worst = 0.0f64;
    for i in 0..c.mixture_games as u64 {
        let game = RandomGame::generate(seed.wrapping_add(i));
        let sg = Subgame::full(Arc::new(PublicTree::build(&game)?))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i << 20));
        let a = random_policy(&sg, &mut rng);
        let b = random_policy(&sg, &mut rng);
        let alpha = rng.random::<f64>();
        for player in 0..2 {
            worst = worst.max(mixture_equivalence_gap(&sg, &a, &b, alpha, player, 64, &mut rng));
        }
    }
    let detail = format!("{} random games, both players", c.mixture_games);
    Ok((worst <= c.mixture_tolerance, worst, c.mixture_tolerance, detail))
}

/// Largest policy difference between CFR-AVG with telescoped leaf values
/// and tabular CFR, iteration by iteration, on games without depth limit.
pub fn modified_gap(spec: GameSpec, iterations: usize) -> Result<f64> {
    let sg = Subgame::full(spec.build_tree()?)?;
    let config = SolveConfig {
        algorithm: Algorithm::CfrAvgModified,
        iterations,
        cfr_variant: CfrVariant::Vanilla,
        ..Default::default()
    };
    let mut cfr = Cfr::<f64>::new(&sg, CfrVariant::Vanilla);
    let mut worst = 0.0f64;
    solve_subgame_traced(&sg, &ZeroValue, &config, None, None, |_, policy| {
        worst = worst.max(policy.max_abs_diff(cfr.current()));
        cfr.step(&sg);
    })?;
    Ok(worst)
}

fn modified_equals_cfr(c: &ChecksConfig, _: u64) -> Result<(bool, f64, f64, String)> {
    let mut worst = 0.0f64;
    for spec in [GameSpec::ModifiedRps, GameSpec::LiarsDice { dice: 1, faces: 4 }] {
        worst = worst.max(modified_gap(spec, c.modified_iterations)?);
    }
    let detail = format!("rps and 1x4f, {} iterations", c.modified_iterations);
    Ok((worst <= c.modified_tolerance, worst, c.modified_tolerance, detail))
}

/// Search settings of the rock-paper-scissors safety demonstration.
pub fn rps_search_config(iterations: usize) -> SelfPlayConfig {
    let mut c = SelfPlayConfig {
        depth: 1,
        law: Weighting::Linear,
        ..Default::default()
    };
    c.solve.algorithm = Algorithm::CfrD;
    c.solve.cfr_variant = CfrVariant::Linear;
    c.solve.iterations = iterations;
    c
}

fn safe_vs_unsafe(c: &ChecksConfig, seed: u64) -> Result<(bool, f64, f64, String)> {
    let tree = Arc::new(PublicTree::build(&ModifiedRps)?);
    let oracle = OracleValue::new(tree.clone(), OracleConfig::default());
    let config = rps_search_config(c.safe_iterations);
    let unsafe_play = play_unsafe(tree.clone(), &oracle, &config)?;
    let unsafe_e = exploitability(&unsafe_play.full, &unsafe_play.policy);
    let safe_e = SafeSearch::new(tree, &oracle, &config)?.exploitability(c.safe_playthroughs, seed)?;
    let ratio = unsafe_e / safe_e.max(1e-12);
    let detail = format!("unsafe {unsafe_e:.4}, safe {safe_e:.4}");
    Ok((ratio >= c.safe_ratio, ratio, c.safe_ratio, detail))
}
