//! Exact dense simulation of port-based teleportation over arbitrary
//! bipartite resources, and of controlled port-based teleportation over
//! three-qudit pure states.

pub mod cpbt;
pub mod error;
pub mod fidelity;
pub mod pbt;
pub mod registry;
pub mod statefile;
pub mod states;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
