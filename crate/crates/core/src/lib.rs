//! Coarsening-based online stochastic bipartite matching.
//!
//! Offline, patients are grouped into capacitated clusters and a linear
//! program over cluster-level representative weights yields dispatch flows.
//! Online, each arriving donor is routed to a cluster at random according to
//! those flows and matched to a free member. The crate also carries the
//! baselines (hindsight optimum, greedy, status-quo tiers), closed-form
//! performance bounds, drift and outcome metrics, a synthetic instance
//! generator and a Monte Carlo experiment runner.

pub mod bounds;
pub mod clustering;
pub mod error;
pub mod experiment;
pub mod instance;
pub mod lp;
pub mod metrics;
pub mod par;
pub mod policies;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use instance::{load_instance, validate_instance, ArrivalEvent, BloodType, DonorType, MatchingInstance, PatientNode};
