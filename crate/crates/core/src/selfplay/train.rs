use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, value_example};
use super::{run_selfplay, SelfPlayConfig, SelfPlayError};
use crate::beliefs::{DepthLimit, Pbs, Subgame};
use crate::decomposition::{solve_subgame, ValueFunction, ValueVector};
use crate::game::PublicTree;
use crate::valuenet::{
    encoded_width, output_width, train_step, Adam, Checkpoint, Mlp, NetConfig, NetError, NetValue, ReplayBuffer,
};
use crate::Scalar;

/// Where value targets come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Root PBSs visited by self-play.
    SelfPlay,
    /// PBSs drawn uniformly: a random non-terminal public state with
    /// beliefs uniform on the simplex.
    RandomBeliefs { per_epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RebelConfig {
    pub selfplay: SelfPlayConfig,
    /// Hidden sizes and optimizer settings; input and output widths are
    /// taken from the game.
    pub net: NetConfig,
    pub buffer_capacity: usize,
    /// Examples consumed by the optimizer per epoch.
    pub examples_per_epoch: usize,
    /// Epoch before which the oldest half of the buffer is dropped once.
    pub purge_epoch: Option<usize>,
    pub data: DataSource,
    pub net_seed: u64,
}

impl Default for RebelConfig {
    fn default() -> Self {
        Self {
            selfplay: SelfPlayConfig::default(),
            net: NetConfig::default(),
            buffer_capacity: 200_000,
            examples_per_epoch: 25_600,
            purge_epoch: Some(20),
            data: DataSource::SelfPlay,
            net_seed: 0,
        }
    }
}

/// Owns the value network, its optimizer and the replay buffer, and
/// alternates data collection with optimizer epochs.
pub struct Trainer<S: Scalar> {
    tree: Arc<PublicTree>,
    config: RebelConfig,
    net: Mlp<S>,
    adam: Adam<S>,
    buffer: ReplayBuffer,
    epoch: usize,
    episodes: u64,
    rng: ChaCha8Rng,
}

impl<S: Scalar> Trainer<S> {
    pub fn new(tree: Arc<PublicTree>, mut config: RebelConfig) -> Result<Self, SelfPlayError> {
        config.selfplay.validate()?;
        config.net.input = encoded_width(&tree)?;
        config.net.output = output_width(&tree)?;
        if config.buffer_capacity == 0 || config.examples_per_epoch == 0 {
            return Err(SelfPlayError::Config(
                "buffer capacity and epoch size must be positive".into(),
            ));
        }
        let net = Mlp::new(&config.net, config.net_seed)?;
        Ok(Self {
            adam: Adam::new(&net),
            net,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epoch: 0,
            episodes: 0,
            rng: ChaCha8Rng::seed_from_u64(config.selfplay.seed ^ 0x5eed_7a11),
            tree,
            config,
        })
    }

    pub fn config(&self) -> &RebelConfig {
        &self.config
    }

    pub fn net(&self) -> &Mlp<S> {
        &self.net
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Completed optimizer epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Self-play episodes played so far.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Immutable single-precision copy of the current weights.
    pub fn snapshot(&self) -> Arc<Mlp<f32>> {
        Arc::new(self.net.cast())
    }

    pub fn value_function(&self) -> Result<NetValue, SelfPlayError> {
        Ok(NetValue::new(&self.tree, self.snapshot())?)
    }

    /// Generates one epoch's worth of targets with the current weights and
    /// adds them to the buffer. Returns how many were added.
    pub fn collect(&mut self) -> Result<usize, SelfPlayError> {
        let vf = self.value_function()?;
        let before = self.buffer.total_inserted();
        match self.config.data {
            DataSource::SelfPlay => {
                let n = self.config.selfplay.episodes_per_epoch as u64;
                let range = self.episodes..self.episodes + n;
                run_selfplay(
                    &self.tree,
                    &vf,
                    &self.config.selfplay,
                    None,
                    range,
                    Some(&mut self.buffer),
                )?;
                self.episodes += n;
            }
            DataSource::RandomBeliefs { per_epoch } => {
                let seed = self.rng.random();
                for (pbs, values) in random_beliefs_targets(&self.tree, &vf, &self.config.selfplay, per_epoch, seed)? {
                    self.buffer.add(value_example(&self.tree, &pbs, &values)?);
                }
            }
        }
        self.buffer.drain_pending();
        Ok((self.buffer.total_inserted() - before) as usize)
    }

    /// One epoch of optimizer steps on uniform samples from the buffer.
    /// Returns the mean training loss.
    pub fn train_epoch(&mut self) -> Result<f64, SelfPlayError> {
        self.buffer.drain_pending();
        if self.config.purge_epoch == Some(self.epoch) {
            self.buffer.purge_oldest_half();
        }
        let batch = self.config.net.batch_size;
        let steps = (self.config.examples_per_epoch / batch).max(1);
        let lr = self.config.net.learning_rate_at(self.epoch);
        let (input, output) = (self.config.net.input, self.config.net.output);
        let mut total = 0.0;
        for _ in 0..steps {
            let sample = self.buffer.sample(batch, &mut self.rng)?;
            let mut x = Array2::<S>::zeros((batch, input));
            let mut y = Array2::<S>::zeros((batch, output));
            for (r, ex) in sample.iter().enumerate() {
                for (c, &v) in ex.features.iter().enumerate() {
                    x[[r, c]] = S::c(v as f64);
                }
                for (c, &v) in ex.target.iter().enumerate() {
                    y[[r, c]] = S::c(v as f64);
                }
            }
            total += train_step(&mut self.net, &mut self.adam, &x, &y, lr)?;
        }
        self.epoch += 1;
        Ok(total / steps as f64)
    }

    /// Mean loss of the current weights over the whole buffer.
    pub fn buffer_loss(&self) -> Result<f64, SelfPlayError> {
        if self.buffer.is_empty() {
            return Err(NetError::EmptyBuffer.into());
        }
        let (input, output) = (self.config.net.input, self.config.net.output);
        let n = self.buffer.len();
        let mut x = Array2::<S>::zeros((n, input));
        let mut y = Array2::<S>::zeros((n, output));
        for (r, ex) in self.buffer.iter().enumerate() {
            for (c, &v) in ex.features.iter().enumerate() {
                x[[r, c]] = S::c(v as f64);
            }
            for (c, &v) in ex.target.iter().enumerate() {
                y[[r, c]] = S::c(v as f64);
            }
        }
        Ok(self.net.loss_and_grad(&x, &y)?.0)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.net.to_checkpoint()
    }

    /// Replaces the weights; the optimizer state is reset.
    pub fn load(&mut self, ck: &Checkpoint) -> Result<(), SelfPlayError> {
        let net = Mlp::from_checkpoint(ck)?;
        if net.config.input != self.config.net.input || net.config.output != self.config.net.output {
            return Err(NetError::Width {
                expected: self.config.net.input,
                got: net.config.input,
            }
            .into());
        }
        self.adam = Adam::new(&net);
        self.net = net;
        Ok(())
    }
}

/// Value targets at `count` random PBSs: solves each subgame and keeps its
/// root values.
pub fn random_beliefs_targets(
    tree: &Arc<PublicTree>,
    vf: &dyn ValueFunction,
    config: &SelfPlayConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<(Pbs, ValueVector)>, SelfPlayError> {
    config.validate()?;
    let open: Vec<usize> = tree.nodes().iter().filter(|n| !n.is_terminal()).map(|n| n.id).collect();
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = episode_rng(seed, i);
            let node = open[rng.random_range(0..open.len())];
            let state = tree.node(node);
            let weights = [0, 1].map(|p| {
                // exponential draws normalize to a uniform point on the simplex
                (0..state.num_infostates(p))
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect::<Vec<f64>>()
            });
            let pbs = Pbs::from_weights(node, weights);
            let sg = Subgame::new(tree.clone(), pbs.clone(), DepthLimit::Public(config.depth))?;
            let result = solve_subgame(&sg, vf, &config.solve_config(), None, None)?;
            Ok((pbs, result.root_values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::ZeroValue;
    use crate::game::GameSpec;

    fn tiny() -> RebelConfig {
        let mut c = RebelConfig {
            net: NetConfig {
                hidden: vec![16, 16],
                batch_size: 32,
                learning_rate: 1e-3,
                ..Default::default()
            },
            examples_per_epoch: 256,
            purge_epoch: Some(1),
            ..Default::default()
        };
        c.selfplay.solve.iterations = 16;
        c.selfplay.episodes_per_epoch = 4;
        c
    }

    #[test]
    fn training_reduces_buffer_loss() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let mut trainer = Trainer::<f64>::new(tree, tiny()).unwrap();
        assert_eq!(trainer.config().net.input, 2 + 6 + 6);
        assert!(trainer.collect().unwrap() > 0);
        let before = trainer.buffer_loss().unwrap();
        for _ in 0..5 {
            trainer.train_epoch().unwrap();
        }
        assert!(trainer.buffer_loss().unwrap() < before);
        assert_eq!(trainer.epoch(), 5);
    }

    #[test]
    fn purge_drops_half_at_configured_epoch() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let mut trainer = Trainer::<f32>::new(tree, tiny()).unwrap();
        trainer.collect().unwrap();
        trainer.train_epoch().unwrap();
        let full = trainer.buffer().len();
        trainer.train_epoch().unwrap();
        assert_eq!(trainer.buffer().len(), full - full / 2);
    }

    #[test]
    fn f64_training_is_reproducible() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let run = || {
            let mut t = Trainer::<f64>::new(tree.clone(), tiny()).unwrap();
            t.collect().unwrap();
            let loss = t.train_epoch().unwrap();
            (loss, t.checkpoint())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn random_beliefs_cover_public_states() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let mut config = SelfPlayConfig::default();
        config.solve.iterations = 4;
        let out = random_beliefs_targets(&tree, &ZeroValue, &config, 64, 1).unwrap();
        assert_eq!(out.len(), 64);
        let distinct: std::collections::HashSet<usize> = out.iter().map(|(p, _)| p.node).collect();
        assert!(distinct.len() > 10);
        assert!(out.iter().all(|(p, _)| p.is_normalized()));
    }

    #[test]
    fn checkpoint_round_trip_through_trainer() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 3 }.build_tree().unwrap();
        let a = Trainer::<f32>::new(tree.clone(), tiny()).unwrap();
        let mut b = Trainer::<f32>::new(tree, RebelConfig { net_seed: 9, ..tiny() }).unwrap();
        b.load(&a.checkpoint()).unwrap();
        assert_eq!(a.checkpoint(), b.checkpoint());
    }
}
