//! Hierarchical Bayesian latent-space modelling of cognitive social structures.
//!
//! A cognitive social structure (CSS) records, for every actor `j` of a closed
//! group of `I` actors, the full directed network that `j` *believes* exists
//! among the group: a binary tensor `y[i, i', j]` with `y = 1` when perceiver
//! `j` reports a tie sent by `i` to `i'`. This crate fits a probit bilinear
//! mixed-effects model to such tensors:
//!
//! ```text
//! y[i, i', j] ~ Bernoulli(Φ(x[i, i']ᵀ β_j + u[i, j]ᵀ v[i', j]))
//! ```
//!
//! Perceiver-specific sender positions `u[i, j]` concentrate around a
//! consensus sender position `η_i` (receiver positions `v` around `ζ`), while
//! each actor's *self* positions `u[i, i]`, `v[i, i]` follow a two-component
//! mixture whose binary indicators `γ_i`, `ξ_i` measure whether the actor's
//! self-perception agrees with the group consensus. Estimation is by a Gibbs
//! sampler over the exact full conditionals obtained from probit data
//! augmentation.
//!
//! Modules follow the pipeline:
//!
//! * [`css_data`]   — tensors, loaders, threshold consensus, degrees, dyadic covariates
//! * [`model`]      — hyperparameters, latent state, likelihood and joint density
//! * [`probit`]     — normal CDF / quantile and truncated-normal sampling
//! * [`sampler`]    — Gibbs sweep, chain driver, convergence diagnostics
//! * [`postprocess`]— Procrustes alignment, agreement and consensus summaries
//! * [`model_selection`] — DIC / WAIC and sweeps over the latent dimension
//! * [`ppc`]        — posterior predictive replication and network statistics
//! * [`synth`]      — synthetic scenarios and the joint-distribution (Geweke) harness

pub mod css_data;
pub mod error;
pub mod model;
pub mod model_selection;
pub mod postprocess;
pub mod ppc;
pub mod probit;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
