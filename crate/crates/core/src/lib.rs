//! Search and self-play learning over public belief states for two-player
//! zero-sum imperfect-information games.
//!
//! Tabular solvers and networks are generic over [`Scalar`]; the aliases
//! below fix the common precisions.

pub mod beliefs;
pub mod decomposition;
pub mod equilibrium;
pub mod game;
pub mod scalar;
pub mod selfplay;
pub mod valuenet;

pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Policy32 = equilibrium::Policy<f32>;
pub type Policy64 = equilibrium::Policy<f64>;
pub type Cfr32 = equilibrium::Cfr<f32>;
pub type Cfr64 = equilibrium::Cfr<f64>;
pub type Fp32 = equilibrium::Fp<f32>;
pub type Fp64 = equilibrium::Fp<f64>;
/// Network used for inference during search.
pub type ValueNet = valuenet::Mlp<f32>;
/// Network in 64-bit deterministic training.
pub type ValueNet64 = valuenet::Mlp<f64>;
