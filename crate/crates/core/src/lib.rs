//! Non-local BV energies on grids: kernels, K-variation and K-perimeter,
//! exact geometric and TV-L¹ solvers by min-cut, Cheeger sets, fidelity
//! analysis and rearrangement checks.

pub mod cheeger;
pub mod energy;
pub mod error;
pub mod fidelity;
pub mod fixed;
pub mod func;
pub mod geom;
pub mod grid;
pub mod kernel;
pub mod maxflow;
pub mod pnm;
pub mod rearrange;
pub mod verify;
mod quad;

pub use error::{Error, Result};
