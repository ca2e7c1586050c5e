//! Full-game tabular solvers with exploitability at power-of-two
//! iterations.

use std::time::Instant;

use anyhow::Result;
use rebel_core::beliefs::Subgame;
use rebel_core::equilibrium::{exploitability, solve_cfr, solve_fp};
use serde::Serialize;

use crate::config::{ConfigError, Resolved, Solver};
use crate::report::{prepare_out, write_summary, CsvSink, ResultRow};

#[derive(Debug, Clone, Serialize)]
pub struct BaselineSummary {
    pub game: String,
    pub solver: String,
    pub iterations: usize,
    pub exploitability: f64,
}

/// Whether `t` gets a row: powers of two and the final iteration.
pub fn is_checkpoint(t: usize, total: usize) -> bool {
    t.is_power_of_two() || t == total
}

pub fn run_baseline(resolved: &Resolved) -> Result<BaselineSummary> {
    resolved.check_baseline()?;
    let config = &resolved.config;
    let b = config.baseline;
    let tree = config.game.build_tree().map_err(|e| ConfigError(e.to_string()))?;
    let sg = Subgame::full(tree)?;
    prepare_out(resolved)?;
    let mut sink = CsvSink::create(&resolved.out.join("results.csv"))?;
    let (solver, phase) = match b.solver {
        Solver::Cfr => (format!("cfr_{:?}", b.cfr_variant).to_lowercase(), "cfr"),
        Solver::Fp => (format!("fp_{:?}", b.fp_variant).to_lowercase(), "fp"),
    };
    log::info!(
        "baseline {solver} on {} for {} iterations",
        config.game.short_name(),
        b.iterations
    );

    let start = Instant::now();
    let mut rows = Vec::new();
    let mut record = |t: usize, e: f64| {
        rows.push(ResultRow {
            experiment: config.experiment.clone(),
            phase: phase.to_string(),
            step: t as u64,
            exploitability: Some(e),
            loss: None,
            seconds: start.elapsed().as_secs_f64(),
        });
    };
    match b.solver {
        Solver::Cfr => {
            solve_cfr::<f64>(&sg, b.cfr_variant, b.iterations, |t, cfr| {
                if is_checkpoint(t, b.iterations) {
                    record(t, exploitability(&sg, &cfr.average()));
                }
            });
        }
        Solver::Fp => {
            solve_fp::<f64>(&sg, b.fp_variant, b.iterations, false, |t, fp, _| {
                if is_checkpoint(t, b.iterations) {
                    record(t, exploitability(&sg, &fp.average()));
                }
            });
        }
    }
    let final_e = rows.last().and_then(|r| r.exploitability).unwrap_or(f64::NAN);
    for row in rows {
        log::info!(
            "iteration {:>6}  exploitability {:.6}",
            row.step,
            row.exploitability.unwrap_or(f64::NAN)
        );
        sink.push(row)?;
    }
    let summary = BaselineSummary {
        game: config.game.short_name(),
        solver,
        iterations: b.iterations,
        exploitability: final_e,
    };
    write_summary(resolved, "baseline", start.elapsed().as_secs_f64(), &summary)?;
    Ok(summary)
}
