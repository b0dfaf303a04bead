//! Weighted norm inequalities for martingale operators on finite filtered
//! measure spaces.
//!
//! The crate models a filtration by refining partitions of a finite set of
//! atoms and provides conditional expectations, Doob-type maximal operators,
//! positive operators `T_alpha`, the weight characteristics `A_p` and
//! `A_inf`, Sawyer-type testing constants, Carleson constants, stopping-time
//! constructions, and randomized verification suites.

pub mod constants;
pub mod error;
pub mod experiment;
pub mod json;
pub mod operators;
pub mod space;
pub mod stopping;
pub mod verify;

pub use error::{LabError, Result};
pub use operators::{AdaptedFamily, AtomFunction};
pub use space::{FilteredSpace, MassRule, MeasurableSet, WeightVector};
