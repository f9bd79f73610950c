//! Single-vehicle routing with landmark placement: an exact solver and a
//! closed-loop localization simulator.
//!
//! A vehicle must tour a set of target points and return to its start while
//! localizing from bearing measurements to landmarks chosen from candidate
//! sites. The plan couples two decisions: which tour to drive, and which
//! sites to equip so that every tour edge sees at least two landmarks. This
//! crate provides the instance model ([`instance`]), the integer program
//! and its solution types ([`model`]), a bounded-variable simplex engine
//! ([`lp`]), cutting-plane separation ([`separation`]), the branch-and-cut
//! driver ([`bnc`]), and a simulator that flies the plan with an extended
//! information filter ([`sim`]).

pub mod bnc;
pub mod geom;
pub mod instance;
pub mod lp;
pub mod model;
pub mod separation;
pub mod sim;

pub use geom::Point2;
pub use instance::{EdgeId, Instance};
