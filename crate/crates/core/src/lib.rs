//! Pre-RTL cost evaluation and design-space exploration for CNN accelerators
//! running layer-by-layer or with fused layer groups.

pub mod cli;
pub mod costmodel;
pub mod error;
pub mod explorer;
pub mod fixed;
pub mod fusion;
pub mod hwmodel;
pub mod netmodel;
pub mod report;

pub use error::{Error, Result};
