//! Upper bounds on device-independent QKD key rates from convex-combination
//! eavesdropping: local-polytope decompositions of noisy correlations, one-way
//! and two-way bound construction for a range of preprocessing strategies, and
//! root-finding of critical detection efficiencies and visibilities.

pub mod ccattack;
pub mod correlations;
pub mod error;
pub mod infotheory;
pub mod localset;
pub mod postselect;
pub mod protocols;
pub mod thresholds;
pub mod twoway;

pub use ccattack::{PreprocessingStrategy, TripartiteDistribution};
pub use correlations::{Correlation, QubitStrategy, Scenario};
pub use error::{Error, Result};
pub use infotheory::{JointDistribution, StochasticMap};
pub use localset::{CcDecomposition, DeterministicVertex};
