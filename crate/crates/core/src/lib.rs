//! Random-key optimization for robot trajectory sequencing over composite nodes.
//!
//! The crate is organised around one problem-independent search space, the
//! random-key [`rko::Chromosome`], and one problem-dependent decoder that maps
//! chromosomes to tours of an [`instance::Instance`]. Two optimizers move
//! through that space ([`brkga`] and [`danneal`]); [`greedy`] provides the
//! baseline, [`qubo`] the binary quadratic formulation, and [`bench`] the
//! benchmarking harness.

pub mod error;
pub mod instance;
pub mod rko;
pub mod trace;
pub mod brkga;
pub mod danneal;
pub mod greedy;
pub mod qubo;
pub mod bench;

pub use error::{Error, Result};
pub use instance::{DimSizes, GeneratorParams, Instance, Node};
pub use rko::{Chromosome, CostMode, Tour};
