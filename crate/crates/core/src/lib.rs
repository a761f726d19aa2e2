//! Mixed-integer solving with learned cut selection.

pub mod cuts;
pub mod error;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod parallel;
pub mod policy;
pub mod rl;
pub mod simplex;
pub mod state_graph;
pub mod tensor;
pub mod tree;

pub use error::{Error, Result};
