//! Estimation of the Index of Concentration at the Extremes (ICE) as a
//! difference of two binomial proportion surfaces over areal units.
//!
//! The ICE for county `i` contrasts the count of privileged residents
//! (high-income White, `A_i`) with the count of deprived residents
//! (low-income Black, `P_i`) over a shared denominator `T_i`:
//! `ICE_i = A_i/T_i - P_i/T_i`, hence a value in `[-1, 1]`. Treating the two
//! components as sample proportions lets us estimate each side with a model
//! that carries spatial and sampling uncertainty, then combine per draw.
//!
//! Crate layout:
//! - [`graph`]: areal adjacency structures, Moran's I, GAL/edge-list readers.
//! - [`car`]: CAR precision matrices and Gaussian Markov random field sampling.
//! - [`model`]: observations, model specifications, likelihood primitives.
//! - [`mcmc`]: Metropolis-within-Gibbs fits for the ICAR/BYM/Leroux globally
//!   smooth models and the clustered-intercept locally smooth model.
//! - [`ice`]: raw, bootstrap, and posterior ICE summaries with 95% intervals.
//! - [`diag`]: WAIC, simulation evaluation metrics, convergence summaries.
//! - [`sim`]: segregation scenario generators and the model-comparison
//!   experiment harness.

pub mod car;
pub mod diag;
mod error;
pub mod graph;
pub mod ice;
pub mod mcmc;
pub mod model;
pub(crate) mod seeds;
pub mod sim;

pub use error::{Error, Result};
pub use graph::AdjacencyGraph;
pub use ice::IceSummary;
pub use mcmc::PosteriorDraws;
pub use model::{Approach, CountyObservation, GroupState, ModelSpec};
