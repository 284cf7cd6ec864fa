//! Discovery and characterization of spatio-temporal mobility clusters in
//! origin-destination trip data.
//!
//! The pipeline runs in stages:
//!
//! 1. [`geo`] defines the discrete tract state space and maps coordinates onto it.
//! 2. [`ingest`] cleans raw trip records into [`ingest::Trip`]s.
//! 3. [`tensorfac`] builds the hour-of-week × pickup × dropoff count tensor and
//!    factorizes it with non-negative CP decomposition; every component is a cluster.
//! 4. [`clusters`] turns components into concrete trip subsets via top-N selection.
//! 5. [`hypotheses`] builds belief matrices from mobility theories and tract properties.
//! 6. [`evidence`] elicits Dirichlet priors from belief matrices and ranks them by
//!    Markov-chain marginal likelihood.
//!
//! [`synth`] generates seeded synthetic cities and trips with planted clusters.

pub mod clusters;
pub mod error;
pub mod evidence;
pub mod geo;
pub mod hypotheses;
pub mod ingest;
pub mod synth;
pub mod tensorfac;

pub use error::{Error, Result};
