//! Age of Information toolkit for multi-sensor status-update systems with
//! correlated packet content and probabilistic source-level preemption.
//!
//! * [`model`]: system description and the informative-rate algebra.
//! * [`analysis`]: closed-form stationary occupancy and average ages.
//! * [`shs`]: independent linear-system oracle for the same ages.
//! * [`sim`]: continuous-time discrete-event simulator.
//! * [`optimize`]: sum-of-ratios program and branch-and-bound over preemption probabilities.
//! * [`sweep`]: parameter sweeps and CSV output.

pub mod analysis;
pub mod document;
pub mod error;
mod linalg;
pub mod model;
pub mod optimize;
pub mod shs;
pub mod sim;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{informative_rates, Coverage, PreemptionPolicy, RateSummary, SystemConfig};
