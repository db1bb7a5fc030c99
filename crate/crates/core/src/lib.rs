//! Dynamic maintenance of random-walk powers under batched edge updates,
//! with an exact-arithmetic expansion tester built on top.

pub mod cli;
pub mod dyncore;
pub mod error;
pub mod expander;
pub mod graph;
pub mod linalg;
pub mod matpow;
pub mod muddle;
pub mod numerics;
pub mod oracle;
pub mod poly;

pub use error::{Error, Result};
pub use numerics::{BitRational, PrecisionBudget, Q};
