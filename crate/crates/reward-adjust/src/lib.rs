//! Std companion to `reward-adjust-core`: JSONL adjustment, benchmarking,
//! invariant checks and a tabular GRPO / GRPOVI simulator.

pub mod bench;
pub mod check;
pub mod error;
pub mod io;
pub mod sim;
pub mod simulate;

pub use error::SimError;
