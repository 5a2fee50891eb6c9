pub mod analysis;
pub mod bench;
pub mod cli;
pub mod engine;
pub mod storage;

pub use hepskim_core as core;
