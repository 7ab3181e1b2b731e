//! Solver toolkit for finite-horizon zero-sum stochastic games between two
//! teams with asymmetric information.
//!
//! The crate computes upper (min-max) and lower (max-min) game values with
//! dynamic programs over the common-information belief (CIB), extracts
//! executable min-max team strategies, and evaluates them by best response
//! and Monte Carlo rollout.
//!
//! Everything in here is pure computation over in-memory game models; file
//! formats and the command line live in the companion `cib-cli` crate. The
//! crate is `no_std` (with `alloc`) so the numeric core stays free of
//! platform dependencies.
//!
//! Layout:
//! - [`model`]: normalized game representation and built-in examples
//! - [`belief`]: the CIB, its update, and the reduced stage cost
//! - [`prescriptions`]: behavioral/pure prescriptions
//! - [`solver`]: sampled-belief backward induction (upper and lower)
//! - [`strategy`]: online min-max policy execution
//! - [`bestresponse`]: Team-2 best response and exploitability
//! - [`sim`]: seeded Monte Carlo rollouts
//! - [`oracle`]: brute-force ground truth for tiny instances

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod belief;
pub mod bestresponse;
pub mod error;
mod kdtree;
pub mod model;
pub mod oracle;
pub mod prescriptions;
pub mod rng;
pub mod runner;
pub mod sim;
pub mod solver;
pub mod strategy;
pub mod testing;

pub use error::Error;
pub use model::{CibControl, GameModel, Team};
