//! Finite information transition systems.
//!
//! The crate models a sensed dynamical process as a finite transition system
//! whose symbols are observations, actions, or action-observation pairs, and
//! asks when a labeling of its states carries enough information to keep
//! tracking itself: the labeling is *sufficient* when the label of a state
//! plus the next symbol determine the label of the successor. Sufficient
//! labelings are exactly the ones that quotient into a deterministic filter.
//!
//! On top of that test the crate provides:
//!
//! * coarsest sufficient refinements of a labeling ([`refine`]), with an
//!   exhaustive oracle and single-merge minimality certificates;
//! * truncated history trees, task machines that label them, and learning of
//!   filters from recorded trials ([`history`]);
//! * derived deterministic filters, set-valued belief filters over a hidden
//!   state, and localization machines ([`filters`]);
//! * coupled simulation of an internal filter against an external system,
//!   reachability, feasibility checking, and policy synthesis ([`plan`]);
//! * small worlds used throughout the examples and tests ([`worlds`]);
//! * JSON and DOT interchange ([`io`]) and a command line front end.

pub mod error;
pub mod filters;
pub mod history;
pub mod io;
pub mod partition;
pub mod plan;
pub mod refine;
pub mod ts;
pub mod worlds;

pub use error::{Error, Result};
pub use partition::{Labeling, Partition};
pub use ts::{LabeledSystem, StateId, SymbolId, TransitionSystem};
