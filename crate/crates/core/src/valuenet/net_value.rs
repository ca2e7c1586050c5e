use std::sync::Arc;

use super::{encode_batch, encoded_width, output_width, Mlp, NetError};
use crate::beliefs::Pbs;
use crate::decomposition::{exact_terminal_values, DecompError, ValueFunction, ValueVector};
use crate::game::PublicTree;

/// Value function backed by a network. Output columns hold the first
/// player's infostate values followed by the second's; terminal queries are
/// answered exactly.
#[derive(Debug, Clone)]
pub struct NetValue {
    net: Arc<Mlp<f32>>,
}

impl NetValue {
    pub fn new(tree: &PublicTree, net: Arc<Mlp<f32>>) -> Result<Self, NetError> {
        let (input, output) = (encoded_width(tree)?, output_width(tree)?);
        let c = &net.config;
        if c.input != input {
            return Err(NetError::Width {
                expected: input,
                got: c.input,
            });
        }
        if c.output != output {
            return Err(NetError::Width {
                expected: output,
                got: c.output,
            });
        }
        Ok(Self { net })
    }

    pub fn net(&self) -> &Arc<Mlp<f32>> {
        &self.net
    }
}

impl ValueFunction for NetValue {
    fn evaluate(&self, tree: &PublicTree, queries: &[Pbs]) -> Result<Vec<ValueVector>, DecompError> {
        let open: Vec<Pbs> = queries
            .iter()
            .filter(|q| !tree.node(q.node).is_terminal())
            .cloned()
            .collect();
        let fail = |e: NetError| DecompError::ValueFunction(e.to_string());
        let y = if open.is_empty() {
            None
        } else {
            let x = encode_batch::<f32>(tree, &open, 0).map_err(fail)?;
            Some(self.net.forward(&x).map_err(fail)?)
        };
        let mut row = 0;
        queries
            .iter()
            .map(|q| {
                let state = tree.node(q.node);
                if state.is_terminal() {
                    return Ok(exact_terminal_values(state, q));
                }
                let out = y.as_ref().expect("network output").row(row);
                row += 1;
                let n1 = state.num_infostates(0);
                let v = ValueVector {
                    values: [
                        out.iter().take(n1).map(|&v| v as f64).collect(),
                        out.iter().skip(n1).map(|&v| v as f64).collect(),
                    ],
                };
                v.validate(state)?;
                Ok(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beliefs::initial_pbs;
    use crate::game::GameSpec;
    use crate::valuenet::NetConfig;

    #[test]
    fn splits_outputs_per_player() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let config = NetConfig {
            input: 18,
            hidden: vec![8],
            output: 8,
            ..Default::default()
        };
        let mut net = Mlp::<f32>::new(&config, 1).unwrap();
        net.out.w.fill(0.0);
        for (i, b) in net.out.b.iter_mut().enumerate() {
            *b = i as f32;
        }
        let vf = NetValue::new(&tree, Arc::new(net)).unwrap();
        let v = vf.evaluate(&tree, &[initial_pbs(&tree)]).unwrap().remove(0);
        assert_eq!(v.values[0], vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(v.values[1], vec![4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn rejects_mismatched_widths() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let config = NetConfig {
            input: 17,
            hidden: vec![8],
            output: 8,
            ..Default::default()
        };
        let net = Arc::new(Mlp::<f32>::new(&config, 1).unwrap());
        assert!(matches!(
            NetValue::new(&tree, net),
            Err(NetError::Width { expected: 18, .. })
        ));
    }
}
