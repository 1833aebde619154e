//! Glauber dynamics of the Ising model on random `d`-regular graphs.
//!
//! The crate is organised around the objects a study of these dynamics needs:
//!
//! * [`graph`]: configuration-model multigraphs, cuts, balls and the exact
//!   isoperimetric number of small graphs.
//! * [`landscape`]: the annealed fixed-magnetization free energy, its critical
//!   points, the annealed critical field and the exact finite-size weights.
//! * [`tree`]: the Ising recursion on the `d`-ary tree, its fixed points,
//!   the uniqueness threshold and boundary-influence decay.
//! * [`chain`]: birth-death projection chains with exact spectral, hitting and
//!   total-variation analysis.
//! * [`glauber`]: heat-bath dynamics on a concrete graph and exact analysis of
//!   full state spaces for tiny systems.
//! * [`quenched`]: exact fixed-spin partition functions and the inequalities
//!   relating them.
//! * [`acceptance`]: the reproducibility suite used by the CLI and the
//!   `acceptance` test target.

pub mod acceptance;
pub mod chain;
pub mod error;
pub mod glauber;
pub mod graph;
pub mod landscape;
pub mod numerics;
pub mod params;
pub mod quenched;
pub mod tree;

pub use error::{Error, Result};
pub use params::ModelParams;
