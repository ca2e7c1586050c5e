use ndarray::Array2;

use super::NetError;
use crate::beliefs::Pbs;
use crate::game::{GameSpec, Player, PublicTree};
use crate::Scalar;

fn dice_shape(tree: &PublicTree) -> Result<(usize, usize), NetError> {
    match tree.spec() {
        Some(GameSpec::LiarsDice { dice, faces }) => Ok((dice, faces)),
        Some(other) => Err(NetError::Unsupported(other.short_name())),
        None => Err(NetError::Unsupported("unnamed game".to_string())),
    }
}

/// Feature width: agent index, acting agent, last-bid one-hot over the
/// whole bid space, then both players' beliefs.
pub fn encoded_width(tree: &PublicTree) -> Result<usize, NetError> {
    let (d, f) = dice_shape(tree)?;
    Ok(2 + 2 * d * f + 2 * f.pow(d as u32))
}

/// Network output width: one value per infostate of each player.
pub fn output_width(tree: &PublicTree) -> Result<usize, NetError> {
    let (d, f) = dice_shape(tree)?;
    Ok(2 * f.pow(d as u32))
}

/// Features of `pbs` as seen by `agent`, laid out as
/// `[agent, acting player, last bid one-hot, beliefs of P1, beliefs of P2]`.
/// Before the first bid the one-hot block is all zeros.
pub fn encode(tree: &PublicTree, pbs: &Pbs, agent: Player) -> Result<Vec<f64>, NetError> {
    let (d, f) = dice_shape(tree)?;
    let bids = 2 * d * f;
    let state = tree.node(pbs.node);
    let mut x = Vec::with_capacity(encoded_width(tree)?);
    x.push(agent as f64);
    x.push(state.player.unwrap_or(0) as f64);
    let mut onehot = vec![0.0; bids];
    if let Some(&last) = state.public_key.last() {
        if last < bids {
            onehot[last] = 1.0;
        }
    }
    x.extend(onehot);
    for b in &pbs.beliefs {
        x.extend(b.iter().copied());
    }
    Ok(x)
}

/// Row-stacked features of a batch.
pub fn encode_batch<S: Scalar>(tree: &PublicTree, pbss: &[Pbs], agent: Player) -> Result<Array2<S>, NetError> {
    let width = encoded_width(tree)?;
    let mut data = Vec::with_capacity(width * pbss.len());
    for p in pbss {
        data.extend(encode(tree, p, agent)?.into_iter().map(S::c));
    }
    Ok(Array2::from_shape_vec((pbss.len(), width), data).expect("encoded width"))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::beliefs::initial_pbs;
    use crate::game::{LiarsDice, ModifiedRps};

    #[test]
    fn root_encoding_for_small_dice() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let x = encode(&tree, &initial_pbs(&tree), 1).unwrap();
        assert_eq!(x.len(), 18);
        assert_eq!(encoded_width(&tree).unwrap(), 18);
        assert_eq!(x[0], 1.0);
        assert_eq!(x[1], 0.0);
        assert!(x[2..10].iter().all(|&v| v == 0.0));
        assert!(x[10..].iter().all(|&v| v == 0.25));
    }

    #[test]
    fn last_bid_is_one_hot() {
        let tree = GameSpec::LiarsDice { dice: 1, faces: 4 }.build_tree().unwrap();
        let game = LiarsDice::new(1, 4).unwrap();
        let code = game.bid_code(1, 2);
        let root = tree.root();
        let edge = root.edges.iter().find(|e| e.action.code == code).unwrap();
        let pbs = initial_pbs(&tree);
        let child = Pbs::new(&tree, edge.child, pbs.beliefs.clone()).unwrap();
        let x = encode(&tree, &child, 0).unwrap();
        assert_eq!(x[1], 1.0);
        let hot: Vec<usize> = (0..8).filter(|&i| x[2 + i] == 1.0).collect();
        assert_eq!(hot, vec![code]);
    }

    #[test]
    fn other_games_are_unsupported() {
        let tree = Arc::new(PublicTree::build(&ModifiedRps).unwrap());
        assert!(matches!(encoded_width(&tree), Err(NetError::Unsupported(_))));
    }
}
