//! Discovery of probabilistic actual causes (PAC) of an effect predicate in
//! acyclic discrete-time Markov chains.
//!
//! Two discovery pipelines are provided: exact candidate checking on the
//! concrete chain, and an abstraction-refinement loop over predicate-induced
//! abstract MDPs whose results are always re-verified concretely. All
//! probabilities are exact rationals end-to-end.

pub mod abs_check;
pub mod abstraction;
pub mod bench;
pub mod concrete;
pub mod fixtures;
pub mod mdp;
pub mod model;
pub mod predicate;
pub mod rational;
pub mod reach;
pub mod refine;

pub use model::{Dtmc, Mdp, ModelError, State};
pub use predicate::{CmpOp, Predicate, PredicateError};
pub use rational::{format_rat, parse_rat, Probability, Rat};
