//! Samplers and exact lattice oracles for critical geometric branching
//! random walks on `Z^d`, their survival-conditioned ("double") versions, and
//! windowed branching interlacements.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]
extern crate alloc;

pub mod bounds;
pub mod brw;
pub mod double;
pub mod error;
pub mod green;
pub mod gw;
pub mod interlacement;
pub mod lattice;
pub mod relations;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use lattice::{gauge, neighbors, tree_gauge, Direction, GaugeValue, Point, Site};
pub use rng::RngStream;
