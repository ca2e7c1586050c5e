//! Value-network training by self-play, with periodic exploitability
//! evaluation of the safe-search policy.

use std::fs;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rebel_core::decomposition::{OracleConfig, OracleValue, ValueFunction, ZeroValue};
use rebel_core::game::PublicTree;
use rebel_core::selfplay::{SafeSearch, SelfPlayConfig, Trainer};
use rebel_core::Scalar;
use serde::Serialize;

use crate::config::{ConfigError, Precision, Resolved, ValueSource};
use crate::report::{prepare_out, write_summary, CsvSink, ResultRow};

#[derive(Debug, Clone, Serialize)]
pub struct RebelSummary {
    pub game: String,
    pub value: ValueSource,
    pub epochs: usize,
    /// Mean of the last evaluations.
    pub exploitability: f64,
    pub evaluations: Vec<(usize, f64)>,
    pub final_loss: Option<f64>,
}

/// Mean of the last `n` values (all of them if fewer).
pub fn mean_of_last(values: &[f64], n: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(n)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

struct Run<'a> {
    resolved: &'a Resolved,
    tree: Arc<PublicTree>,
    sink: CsvSink,
    start: Instant,
    evaluations: Vec<(usize, f64)>,
}

impl Run<'_> {
    fn row(&mut self, phase: &str, step: usize, exploitability: Option<f64>, loss: Option<f64>) -> Result<()> {
        let row = ResultRow {
            experiment: self.resolved.config.experiment.clone(),
            phase: phase.to_string(),
            step: step as u64,
            exploitability,
            loss,
            seconds: self.start.elapsed().as_secs_f64(),
        };
        self.sink.push(row)
    }

    fn due(&self, epoch: usize) -> bool {
        let c = &self.resolved.config;
        epoch % c.eval.every == 0 || epoch == c.rebel.epochs
    }

    fn search_config(&self) -> SelfPlayConfig {
        self.resolved.config.rebel.trainer.selfplay
    }

    fn evaluate(&mut self, vf: &dyn ValueFunction, epoch: usize) -> Result<f64> {
        let eval = self.resolved.config.eval;
        let search = SafeSearch::new(self.tree.clone(), vf, &self.search_config())?;
        let seed = self.resolved.seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let e = search.exploitability(eval.playthroughs, seed)?;
        log::info!("epoch {epoch:>4}  exploitability {e:.5}");
        self.row("eval", epoch, Some(e), None)?;
        self.evaluations.push((epoch, e));
        Ok(e)
    }
}

pub fn run_rebel(resolved: &Resolved) -> Result<RebelSummary> {
    resolved.check_rebel()?;
    let config = &resolved.config;
    let tree = config.game.build_tree().map_err(|e| ConfigError(e.to_string()))?;
    prepare_out(resolved)?;
    let mut run = Run {
        resolved,
        sink: CsvSink::create(&resolved.out.join("results.csv"))?,
        tree: tree.clone(),
        start: Instant::now(),
        evaluations: Vec::new(),
    };
    let final_loss = match config.rebel.value {
        ValueSource::Net => match config.rebel.precision {
            Precision::F32 => train::<f32>(&mut run)?,
            Precision::F64 => train::<f64>(&mut run)?,
        },
        ValueSource::Oracle => {
            let oracle = OracleValue::new(
                tree,
                OracleConfig {
                    target: config.eval.oracle_target,
                    ..Default::default()
                },
            );
            fixed(&mut run, &oracle)?;
            None
        }
        ValueSource::Zero => {
            fixed(&mut run, &ZeroValue)?;
            None
        }
    };
    let values: Vec<f64> = run.evaluations.iter().map(|e| e.1).collect();
    let summary = RebelSummary {
        game: config.game.short_name(),
        value: config.rebel.value,
        epochs: config.rebel.epochs,
        exploitability: mean_of_last(&values, config.eval.last),
        evaluations: run.evaluations.clone(),
        final_loss,
    };
    write_summary(resolved, "rebel", run.start.elapsed().as_secs_f64(), &summary)?;
    Ok(summary)
}

/// Ablation without learning: the evaluation schedule is kept so curves
/// line up with trained runs.
fn fixed(run: &mut Run, vf: &dyn ValueFunction) -> Result<()> {
    for epoch in 1..=run.resolved.config.rebel.epochs {
        if run.due(epoch) {
            run.evaluate(vf, epoch)?;
        }
    }
    Ok(())
}

fn train<S: Scalar>(run: &mut Run) -> Result<Option<f64>> {
    let rebel = &run.resolved.config.rebel;
    let mut trainer = Trainer::<S>::new(run.tree.clone(), rebel.trainer.clone())?;
    let dir = run.resolved.out.join("checkpoints");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut last = None;
    for epoch in 1..=rebel.epochs {
        let added = trainer.collect()?;
        let loss = trainer.train_epoch()?;
        if !loss.is_finite() {
            bail!(
                "training diverged at epoch {epoch}: loss {loss}, buffer {} examples, learning rate {:.3e}, {} episodes played",
                trainer.buffer().len(),
                rebel.trainer.net.learning_rate_at(epoch - 1),
                trainer.episodes()
            );
        }
        log::info!("epoch {epoch:>4}  +{added} examples  loss {loss:.6}");
        run.row("train", epoch, None, Some(loss))?;
        let path = dir.join(format!("epoch-{epoch:04}.json"));
        fs::write(&path, serde_json::to_string(&trainer.checkpoint())?)
            .with_context(|| format!("writing {}", path.display()))?;
        last = Some(loss);
        if run.due(epoch) {
            let vf = trainer.value_function()?;
            run.evaluate(&vf, epoch)?;
        }
    }
    Ok(last)
}
