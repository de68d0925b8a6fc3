//! A numerical laboratory for the threshold condition in bulk-chasing
//! (Dörfler) marking.
//!
//! The crate builds the lattice of bisection refinements of a 1D partition
//! into unit macro cells, a synthetic per-element error indicator whose
//! reliability constant `K` is a free parameter, executable checkers for the
//! adaptivity axioms, three marking strategies, and the adaptive
//! estimate-mark-refine loop. Together they realise a configuration where
//! exponential convergence is achievable, every axiom holds, and yet Dörfler
//! marking above the threshold `1/K` fails any prescribed algebraic rate.
//!
//! Indicator arithmetic runs entirely in base-2 log domain
//! ([`LogScalar`]) and partitions compress uniformly refined regions, so
//! trajectories may be followed for hundreds of marking cycles (squared
//! indicators far below `2^-400`, cells with `2^400` leaves) without
//! underflow or blowup.

pub mod axioms;
pub mod driver;
mod error;
pub mod estimator;
mod logscalar;
pub mod marking;
pub mod mesh;
pub mod params;

pub use error::{Error, Result};
pub use estimator::EstimatorParams;
pub use logscalar::LogScalar;
pub use marking::MarkerConfig;
pub use mesh::{Element, MarkItem, MarkedSet, Partition};
pub use params::{solve_params, thresholds, ParamSolution, Thresholds};
