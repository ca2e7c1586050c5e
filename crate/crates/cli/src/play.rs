//! Text play against the safe-search agent, for manual smoke testing.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rebel_core::beliefs::{initial_pbs, leaf_pbs, NodeKind, ReachProfile};
use rebel_core::decomposition::{OracleConfig, OracleValue, ValueFunction, ZeroValue};
use rebel_core::game::{Player, PublicTree};
use rebel_core::selfplay::{advance, sample_deal, SafeSearch};
use rebel_core::valuenet::{Checkpoint, Mlp, NetValue};

use crate::config::{ConfigError, Resolved, ValueSource};

/// Plays one game with the human in seat `human` (0 or 1). Returns the
/// human's payoff, or `None` if input ended early.
pub fn run_play(
    resolved: &Resolved,
    human: Player,
    checkpoint: Option<&Path>,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Option<f64>> {
    resolved.check_tractable()?;
    let config = &resolved.config;
    let tree = config.game.build_tree().map_err(|e| ConfigError(e.to_string()))?;
    let vf: Box<dyn ValueFunction> = match (config.rebel.value, checkpoint) {
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let ck: Checkpoint = serde_json::from_str(&text)?;
            let net = Mlp::<f32>::from_checkpoint(&ck)?;
            Box::new(NetValue::new(&tree, Arc::new(net))?)
        }
        (ValueSource::Net, None) => {
            return Err(ConfigError("value = \"net\" needs --checkpoint".into()).into());
        }
        (ValueSource::Oracle, None) => Box::new(OracleValue::new(
            tree.clone(),
            OracleConfig {
                target: config.eval.oracle_target,
                ..Default::default()
            },
        )),
        (ValueSource::Zero, None) => Box::new(ZeroValue),
    };
    let search = SafeSearch::new(tree.clone(), vf.as_ref(), &config.rebel.trainer.selfplay)?;
    play_game(&search, &tree, human, resolved.seed, input, output)
}

fn read_choice(input: &mut dyn BufRead, output: &mut dyn Write, n: usize) -> Result<Option<usize>> {
    loop {
        write!(output, "> ")?;
        output.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        match line.trim().parse::<usize>() {
            Ok(i) if i < n => return Ok(Some(i)),
            _ => writeln!(output, "enter a number from 0 to {}", n - 1)?,
        }
    }
}

fn play_game(
    search: &SafeSearch,
    tree: &Arc<PublicTree>,
    human: Player,
    seed: u64,
    input: &mut dyn BufRead,
    output: &mut dyn Write,
) -> Result<Option<f64>> {
    if human > 1 {
        bail!("seat must be 1 or 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut root = initial_pbs(tree);
    let mut k = sample_deal(tree, &root, &mut rng);
    let deal = k;
    writeln!(output, "You are player {}.", human + 1)?;
    writeln!(
        output,
        "Your private observations: {:?}",
        tree.root().infostate_keys[human][k[human]]
    )?;
    let algorithm = search.config().solve.algorithm;
    loop {
        let solved = search.solve(&root)?;
        let snap = search.sample(&solved, &mut rng);
        let sg = &solved.sg;
        let mut node = 0;
        while sg.layout.is_decision(node) {
            let actor = sg.nodes[node].player.expect("decision node");
            let edges = &tree.node(sg.nodes[node].public).edges;
            let a = if actor == human {
                writeln!(output, "Your move:")?;
                for (i, e) in edges.iter().enumerate() {
                    writeln!(output, "  [{i}] {}", e.action.label)?;
                }
                match read_choice(input, output, edges.len())? {
                    Some(a) => a,
                    None => return Ok(None),
                }
            } else {
                let row = snap.current.row(node, k[actor]);
                let a = WeightedIndex::new(row)
                    .context("agent policy row has no mass")?
                    .sample(&mut rng);
                writeln!(output, "Agent plays {}", edges[a].action.label)?;
                a
            };
            (node, k) = advance(sg, node, k, a);
        }
        if sg.nodes[node].kind == NodeKind::Terminal {
            let state = tree.node(sg.nodes[node].public);
            let c = state.compat_at(k[0], k[1]);
            let n2 = state.num_infostates(1);
            let r1 = if c > 0.0 {
                state.payoff[k[0] * n2 + k[1]] / c
            } else {
                0.0
            };
            let mine = if human == 0 { r1 } else { -r1 };
            let keys = &tree.root().infostate_keys;
            writeln!(
                output,
                "Game over. Agent's private observations: {:?}. Your payoff: {mine}",
                keys[1 - human][deal[1 - human]]
            )?;
            return Ok(Some(mine));
        }
        let belief = ReachProfile::of(sg, snap.belief_policy(algorithm));
        root = leaf_pbs(sg, &belief, node);
    }
}
