//! Planning in two-player general-sum stochastic games.
//!
//! * [`matrix_games`]: bimatrix games, zero-sum and security solvers, Nash
//!   enumeration and the deterministic selection functions.
//! * [`game_model`]: explicit stochastic games, the generative-model trait
//!   and random instance generators.
//! * [`finite_planner`]: finite-horizon value iteration over backup
//!   matrices, with exact evaluation and a best-response certificate.
//! * [`sparse_planner`]: on-line sparse-sampling planning from a generative
//!   model and its induced global policy.
//! * [`discounted_planner`]: discounted value iteration with security
//!   selection, contraction and security checks.

pub mod discounted_planner;
pub mod error;
pub mod finite_planner;
pub mod game_model;
pub mod matrix_games;
pub mod seed;
pub mod sparse_planner;

pub use error::{Error, Result};
pub use game_model::{StateId, StochasticGame, TimeDependentPolicy};
pub use matrix_games::{Matrix, MatrixGame, MixedStrategy, Player, Selection, StrategyProfile};
pub use seed::SeedSpec;
