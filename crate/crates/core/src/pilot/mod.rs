//! Stage I: pilot assignment under the intra-cluster orthogonality
//! constraint.
//!
//! RUEs that share an RRH must use different pilots, which makes the
//! minimum pilot count a graph coloring problem ([`dsatur_color`]). The
//! PSA ([`psa_schedule`]) starts from the Dsatur coloring and moves the most
//! contaminated RUEs onto the least contaminated admissible pilots, driven by
//! the large-scale metric in [`ContaminationMetrics`]. [`es_schedule`] is
//! the exhaustive reference for small instances.

mod assignment;
mod dsatur;
mod exhaustive;
mod graph;
mod metrics;
mod mse;
mod psa;

pub use assignment::{PilotAssignment, ReuseSets};
pub use dsatur::{dsatur_color, Coloring};
pub use exhaustive::{es_schedule, ES_SEARCH_LIMIT};
pub use graph::ConflictGraph;
pub use metrics::ContaminationMetrics;
pub use mse::sum_mse;
pub use psa::{dsatur_random_schedule, effective_tau, psa_refine, psa_schedule};
