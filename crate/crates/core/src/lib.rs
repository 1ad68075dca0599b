//! Lagrangian view of Q-function learning on episodic learning processes.

pub mod bellman;
pub mod cli;
pub mod elp;
pub mod error;
pub mod io;
pub mod lagrangian;
pub mod lamin;
mod linalg;
pub mod seqgen;

pub use error::{Error, Result};
