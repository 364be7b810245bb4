//! Neural-guided symbolic regression.
//!
//! An autoregressive recurrent policy emits pre-order token sequences under
//! in-situ constraints; sequences are turned into expressions, constants are
//! fitted, and the reward `1 / (1 + NMSE)` drives one of three trainers
//! (vanilla policy gradient, risk-seeking policy gradient, priority-queue
//! training), optionally hybridized with a genetic-programming inner loop.

pub mod benchmark;
pub mod constopt;
pub mod error;
pub mod expr;
pub mod gp;
pub mod policy;
pub mod priors;
pub mod reward;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{Dataset, ExpressionTree, Token, TokenId, TokenLibrary, Traversal};
pub use policy::{PolicyParams, SampleBatch};
pub use priors::LogitAdjusters;
pub use train::{RunResult, TrainerConfig, TrainerKind};
