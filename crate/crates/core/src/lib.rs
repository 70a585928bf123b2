pub mod bench;
pub mod cli;
pub mod engine;
pub mod error;
pub mod export;
pub mod format;
pub mod goal;
pub mod lts;
pub mod problem;
pub mod soe;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
