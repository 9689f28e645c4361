//! Gibbs sampler with truncated-normal data augmentation.
//!
//! Each observed cell gets an auxiliary variable
//! `z[i,i',j] ~ N(x[i,i']ᵀβ_j + u[i,j]ᵀv[i',j], 1)` truncated to `[0, ∞)` when
//! `y = 1` and `(−∞, 0)` when `y = 0`; conditional on `z` every parameter
//! block has a conjugate full conditional. One sweep performs a fixed
//! systematic scan:
//!
//! 1. `z` cells;
//! 2. regression vectors `β_j`;
//! 3. sender positions `u[i,j]`;
//! 4. receiver positions `v[i',j]`;
//! 5. consensus positions `η_i`, `ζ_i`;
//! 6. agreement indicators `γ_i`, `ξ_i` (log-space Bernoulli);
//! 7. position variances `σ_u²`, `τ_u²`, `σ_v²`, `τ_v²`;
//! 8. regression mean `ν` and variance `ς²`;
//! 9. agreement rate `ψ`.
//!
//! Chains are deterministic given `(seed, config, data)`: chain `c` uses a
//! counter-based generator seeded with the configured seed on stream `c + 1`.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::css_data::{CssTensor, DyadCovariates};
use crate::error::{Error, Result};
use crate::model::{
    dot, sample_beta, sample_gaussian, sample_inv_gamma, Hyperparameters, LatentState,
};
use crate::probit::inverse_phi;
pub use crate::probit::{sample_truncated_normal, TruncationSide};

// ---------------------------------------------------------------------------
// Configuration and output types
// ---------------------------------------------------------------------------

/// How a chain's initial state is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Draw every block from its prior.
    PriorDraw,
    /// Probit-transformed slice densities for the intercepts, small noise for
    /// the latent positions, all indicators on.
    DataInformed,
}

/// Sweep counts, thinning, chain multiplicity, seed, and latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub rng_seed: u64,
    pub k: usize,
    pub init: InitMode,
}

impl ChainConfig {
    /// Reference-scale settings: 4 chains of 60,000 sweeps, 10,000 burn-in,
    /// thinned every 25.
    pub fn reference_scale(k: usize, rng_seed: u64) -> Self {
        Self {
            n_iterations: 60_000,
            burn_in: 10_000,
            thin: 25,
            n_chains: 4,
            rng_seed,
            k,
            init: InitMode::DataInformed,
        }
    }

    /// Desk-scale settings for interactive use and tests.
    pub fn desk_scale(k: usize, rng_seed: u64) -> Self {
        Self {
            n_iterations: 4_000,
            burn_in: 1_500,
            thin: 5,
            n_chains: 2,
            rng_seed,
            k,
            init: InitMode::DataInformed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidArgument(format!(
                "burn_in ({}) must be smaller than n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        if self.thin < 1 {
            return Err(Error::InvalidArgument("thin must be ≥ 1".into()));
        }
        if self.n_chains < 1 {
            return Err(Error::InvalidArgument("n_chains must be ≥ 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("K must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of retained samples: `⌊(n_iterations − burn_in)/thin⌋`.
    pub fn n_retained(&self) -> usize {
        (self.n_iterations - self.burn_in) / self.thin
    }
}

/// One chain's retained draws and per-sample density traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    pub config: ChainConfig,
    pub chain_index: usize,
    pub samples: Vec<LatentState>,
    pub loglik_trace: Vec<f64>,
    pub logjoint_trace: Vec<f64>,
    pub seconds: f64,
}

/// JSONL header line for a stored chain.
#[derive(Debug, Serialize, Deserialize)]
struct ChainHeader {
    kind: String,
    version: u32,
    chain_index: usize,
    n_samples: usize,
    seconds: f64,
    config: ChainConfig,
}

/// JSONL sample line.
#[derive(Debug, Serialize, Deserialize)]
struct SampleLine {
    loglik: f64,
    logjoint: f64,
    state: LatentState,
}

impl ChainOutput {
    /// Write the chain as JSON lines: one header object, then one object per
    /// retained sample.
    pub fn write_jsonl(&self, w: &mut dyn Write) -> Result<()> {
        let header = ChainHeader {
            kind: "cognet-chain".into(),
            version: 1,
            chain_index: self.chain_index,
            n_samples: self.samples.len(),
            seconds: self.seconds,
            config: self.config.clone(),
        };
        serde_json::to_writer(&mut *w, &header)?;
        writeln!(w)?;
        for (idx, state) in self.samples.iter().enumerate() {
            let line = SampleLine {
                loglik: self.loglik_trace[idx],
                logjoint: self.logjoint_trace[idx],
                state: state.clone(),
            };
            serde_json::to_writer(&mut *w, &line)?;
            writeln!(w)?;
        }
        Ok(())
    }

    /// Parse a chain written by [`ChainOutput::write_jsonl`].
    pub fn read_jsonl(r: impl BufRead) -> Result<ChainOutput> {
        let mut lines = r.lines();
        let header_line = lines.next().transpose()?.ok_or(Error::Parse {
            line: 1,
            message: "empty chain file".into(),
        })?;
        let header: ChainHeader = serde_json::from_str(&header_line)?;
        if header.kind != "cognet-chain" || header.version != 1 {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "unsupported chain header (kind '{}', version {})",
                    header.kind, header.version
                ),
            });
        }
        let mut samples = Vec::with_capacity(header.n_samples);
        let mut loglik_trace = Vec::with_capacity(header.n_samples);
        let mut logjoint_trace = Vec::with_capacity(header.n_samples);
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SampleLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 2,
                message: format!("bad sample line: {e}"),
            })?;
            samples.push(parsed.state);
            loglik_trace.push(parsed.loglik);
            logjoint_trace.push(parsed.logjoint);
        }
        if samples.len() != header.n_samples {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "chain file declares {} samples but holds {}",
                    header.n_samples,
                    samples.len()
                ),
            });
        }
        Ok(ChainOutput {
            config: header.config,
            chain_index: header.chain_index,
            samples,
            loglik_trace,
            logjoint_trace,
            seconds: header.seconds,
        })
    }
}

/// Periodic checkpointing of the raw Markov state during a run.
#[derive(Debug, Clone)]
pub struct CheckpointSpec {
    pub dir: PathBuf,
    pub every: usize,
}

// ---------------------------------------------------------------------------
// Full conditionals
// ---------------------------------------------------------------------------

/// Exact full-conditional parameters for each Gibbs block.
///
/// These are the single source of truth: the sweep draws from exactly what
/// these functions return, and tests verify them against hand-built
/// instances.
pub mod full_conditionals {
    use super::*;

    /// Gaussian full conditional of `β_j`: precision `I_p/ς² + Σ x xᵀ` and
    /// right-hand side `ν/ς² + Σ x·(z − uᵀv)` (mean solves `P·m = rhs`).
    pub fn beta_block(
        state: &LatentState,
        x: &DyadCovariates,
        j: usize,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = state.n_actors;
        let p = state.p;
        let z = state.z.as_ref().ok_or_else(|| {
            Error::InvalidArgument("beta conditional needs augmentation variables".into())
        })?;
        let mut prec = DMatrix::<f64>::identity(p, p) / state.varsigma2;
        let mut rhs = DVector::<f64>::from_row_slice(&state.nu) / state.varsigma2;
        for i in 0..n {
            for ip in 0..n {
                if ip == i {
                    continue;
                }
                let xv = x.x(i, ip);
                let resid = z[state.z_index(i, ip, j)] - dot(state.u(i, j), state.v(ip, j));
                for a in 0..p {
                    rhs[a] += xv[a] * resid;
                    for b in 0..p {
                        prec[(a, b)] += xv[a] * xv[b];
                    }
                }
            }
        }
        Ok((rhs, prec))
    }

    /// Gaussian full conditional of `u[i,j]`: prior `(η_i, σ_u²)` for third
    /// parties and agreeing self-slices, `(0, τ_u²)` otherwise; likelihood
    /// rows are the receiver positions `v[i',j]` with residuals `z − xᵀβ_j`.
    pub fn u_block(
        state: &LatentState,
        x: &DyadCovariates,
        i: usize,
        j: usize,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = state.n_actors;
        let k = state.k;
        let z = state.z.as_ref().ok_or_else(|| {
            Error::InvalidArgument("u conditional needs augmentation variables".into())
        })?;
        let slab = j != i || state.gamma[i] == 1;
        let (prior_var, prior_mean): (f64, &[f64]) = if slab {
            (state.sigma_u2, state.eta(i))
        } else {
            (state.tau_u2, &[])
        };
        let mut prec = DMatrix::<f64>::identity(k, k) / prior_var;
        let mut rhs = DVector::<f64>::zeros(k);
        if slab {
            for d in 0..k {
                rhs[d] = prior_mean[d] / prior_var;
            }
        }
        let beta_j = state.beta(j);
        for ip in 0..n {
            if ip == i {
                continue;
            }
            let resid = z[state.z_index(i, ip, j)] - dot(x.x(i, ip), beta_j);
            let vv = state.v(ip, j);
            for a in 0..k {
                rhs[a] += vv[a] * resid;
                for b in 0..k {
                    prec[(a, b)] += vv[a] * vv[b];
                }
            }
        }
        Ok((rhs, prec))
    }

    /// Gaussian full conditional of `v[i',j]`, mirroring [`u_block`] with
    /// senders `i ≠ i'` and indicator `ξ`.
    pub fn v_block(
        state: &LatentState,
        x: &DyadCovariates,
        ip: usize,
        j: usize,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = state.n_actors;
        let k = state.k;
        let z = state.z.as_ref().ok_or_else(|| {
            Error::InvalidArgument("v conditional needs augmentation variables".into())
        })?;
        let slab = j != ip || state.xi[ip] == 1;
        let (prior_var, prior_mean): (f64, &[f64]) = if slab {
            (state.sigma_v2, state.zeta(ip))
        } else {
            (state.tau_v2, &[])
        };
        let mut prec = DMatrix::<f64>::identity(k, k) / prior_var;
        let mut rhs = DVector::<f64>::zeros(k);
        if slab {
            for d in 0..k {
                rhs[d] = prior_mean[d] / prior_var;
            }
        }
        let beta_j = state.beta(j);
        for i in 0..n {
            if i == ip {
                continue;
            }
            let resid = z[state.z_index(i, ip, j)] - dot(x.x(i, ip), beta_j);
            let uu = state.u(i, j);
            for a in 0..k {
                rhs[a] += uu[a] * resid;
                for b in 0..k {
                    prec[(a, b)] += uu[a] * uu[b];
                }
            }
        }
        Ok((rhs, prec))
    }

    /// Spherical Gaussian full conditional of `η_i`: scalar precision
    /// `1/κ² + n_i/σ_u²` with `n_i = (I−1) + γ_i`; the mean averages the
    /// contributing sender positions.
    pub fn eta_block(
        state: &LatentState,
        hyper: &Hyperparameters,
        i: usize,
    ) -> (Vec<f64>, f64) {
        let n = state.n_actors;
        let k = state.k;
        let n_i = (n - 1) as f64 + state.gamma[i] as f64;
        let prec = 1.0 / hyper.kappa2 + n_i / state.sigma_u2;
        let mut mean = vec![0.0; k];
        for j in 0..n {
            if j != i || state.gamma[i] == 1 {
                for (m, &ud) in mean.iter_mut().zip(state.u(i, j)) {
                    *m += ud;
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= state.sigma_u2 * prec;
        }
        (mean, prec)
    }

    /// `ζ_i` analogue of [`eta_block`] (receiver positions, indicator ξ).
    pub fn zeta_block(
        state: &LatentState,
        hyper: &Hyperparameters,
        i: usize,
    ) -> (Vec<f64>, f64) {
        let n = state.n_actors;
        let k = state.k;
        let n_i = (n - 1) as f64 + state.xi[i] as f64;
        let prec = 1.0 / hyper.kappa2 + n_i / state.sigma_v2;
        let mut mean = vec![0.0; k];
        for j in 0..n {
            if j != i || state.xi[i] == 1 {
                for (m, &vd) in mean.iter_mut().zip(state.v(i, j)) {
                    *m += vd;
                }
            }
        }
        for m in mean.iter_mut() {
            *m /= state.sigma_v2 * prec;
        }
        (mean, prec)
    }

    /// Bernoulli slab probability for an agreement indicator:
    /// `p₁ = ψ·N(w; mean, σ²I) / [ψ·N(w; mean, σ²I) + (1−ψ)·N(w; 0, τ²I)]`,
    /// evaluated in log space.
    pub fn agreement_probability(
        w_self: &[f64],
        slab_mean: &[f64],
        sigma2: f64,
        tau2: f64,
        psi: f64,
    ) -> f64 {
        let k = w_self.len() as f64;
        let ss_slab: f64 = w_self
            .iter()
            .zip(slab_mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let ss_spike: f64 = w_self.iter().map(|a| a * a).sum();
        let l1 = psi.ln() - 0.5 * k * (2.0 * std::f64::consts::PI * sigma2).ln()
            - 0.5 * ss_slab / sigma2;
        let l0 = (1.0 - psi).ln() - 0.5 * k * (2.0 * std::f64::consts::PI * tau2).ln()
            - 0.5 * ss_spike / tau2;
        1.0 / (1.0 + (l0 - l1).exp())
    }

    /// Inverse-gamma parameters of `σ_u²`: pools every third-party sender
    /// position plus the agreeing self-positions around `η`.
    pub fn sigma_u2_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let n = state.n_actors;
        let mut count = 0usize;
        let mut ss = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j != i || state.gamma[i] == 1 {
                    count += 1;
                    ss += state
                        .u(i, j)
                        .iter()
                        .zip(state.eta(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
        }
        (
            hyper.a_sigma + state.k as f64 * count as f64 / 2.0,
            hyper.b_sigma + 0.5 * ss,
        )
    }

    /// Inverse-gamma parameters of `τ_u²`: disagreeing self-positions around
    /// the origin (none ⇒ the prior).
    pub fn tau_u2_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let mut count = 0usize;
        let mut ss = 0.0;
        for i in 0..state.n_actors {
            if state.gamma[i] == 0 {
                count += 1;
                ss += state.u(i, i).iter().map(|a| a * a).sum::<f64>();
            }
        }
        (
            hyper.a_tau + state.k as f64 * count as f64 / 2.0,
            hyper.b_tau + 0.5 * ss,
        )
    }

    /// `σ_v²` analogue of [`sigma_u2_params`].
    pub fn sigma_v2_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let n = state.n_actors;
        let mut count = 0usize;
        let mut ss = 0.0;
        for i in 0..n {
            for j in 0..n {
                if j != i || state.xi[i] == 1 {
                    count += 1;
                    ss += state
                        .v(i, j)
                        .iter()
                        .zip(state.zeta(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
            }
        }
        (
            hyper.a_sigma + state.k as f64 * count as f64 / 2.0,
            hyper.b_sigma + 0.5 * ss,
        )
    }

    /// `τ_v²` analogue of [`tau_u2_params`].
    pub fn tau_v2_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let mut count = 0usize;
        let mut ss = 0.0;
        for i in 0..state.n_actors {
            if state.xi[i] == 0 {
                count += 1;
                ss += state.v(i, i).iter().map(|a| a * a).sum::<f64>();
            }
        }
        (
            hyper.a_tau + state.k as f64 * count as f64 / 2.0,
            hyper.b_tau + 0.5 * ss,
        )
    }

    /// Coordinate-wise Gaussian full conditional of `ν`: precision
    /// `1/ω² + I/ς²`, mean `(Σ_j β_j)/ς²` scaled by the variance.
    pub fn nu_block(state: &LatentState, hyper: &Hyperparameters) -> (Vec<f64>, f64) {
        let n = state.n_actors;
        let prec = 1.0 / hyper.omega2 + n as f64 / state.varsigma2;
        let mut mean = vec![0.0; state.p];
        for j in 0..n {
            for (m, &b) in mean.iter_mut().zip(state.beta(j)) {
                *m += b;
            }
        }
        for m in mean.iter_mut() {
            *m /= state.varsigma2 * prec;
        }
        (mean, prec)
    }

    /// Inverse-gamma parameters of `ς²` given the current `ν`.
    pub fn varsigma2_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let n = state.n_actors;
        let mut ss = 0.0;
        for j in 0..n {
            ss += state
                .beta(j)
                .iter()
                .zip(&state.nu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        (
            hyper.a_varsigma + (n * state.p) as f64 / 2.0,
            hyper.b_varsigma + 0.5 * ss,
        )
    }

    /// Beta parameters of `ψ`: `(c + Σγ + Σξ, d + 2I − Σγ − Σξ)`.
    pub fn psi_params(state: &LatentState, hyper: &Hyperparameters) -> (f64, f64) {
        let on: u32 = state
            .gamma
            .iter()
            .chain(state.xi.iter())
            .map(|&g| g as u32)
            .sum();
        let total = 2 * state.n_actors as u32;
        (hyper.c + on as f64, hyper.d + (total - on) as f64)
    }
}

/// Deliberate single-block faults, used to confirm the joint-distribution
/// test has teeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SweepFault {
    None,
    /// Swap the sign of the log-odds in the γ update.
    GammaFlip,
}

/// Draw from `N(P⁻¹·rhs, P⁻¹)` given the precision `P` and `rhs`.
fn sample_gaussian_precision<R: Rng + ?Sized>(
    rhs: DVector<f64>,
    prec: DMatrix<f64>,
    block: &'static str,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let chol = Cholesky::new(prec).ok_or(Error::SolveFailed { block })?;
    let mean = chol.solve(&rhs);
    let dim = mean.len();
    let eps = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
    // If P = LLᵀ then w solving Lᵀw = ε has covariance P⁻¹.
    let w = chol
        .l()
        .transpose()
        .solve_upper_triangular(&eps)
        .ok_or(Error::SolveFailed { block })?;
    Ok(mean + w)
}

fn ensure_compatible(
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    state: &LatentState,
) -> Result<()> {
    state.validate_dims()?;
    state.validate_values()?;
    hyper.validate()?;
    if state.n_actors != y.n_actors() || x.n_actors() != y.n_actors() {
        return Err(Error::DimensionMismatch(format!(
            "state/covariates/tensor actor counts disagree: {}, {}, {}",
            state.n_actors,
            x.n_actors(),
            y.n_actors()
        )));
    }
    if state.p != x.p() || state.p != hyper.p || state.k != hyper.k {
        return Err(Error::DimensionMismatch(
            "state, covariates, and hyperparameters disagree on K or p".into(),
        ));
    }
    Ok(())
}

/// One systematic-scan Gibbs sweep; see the module docs for the scan order.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: LatentState,
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<LatentState> {
    let mut state = state;
    sweep_in_place(&mut state, y, x, hyper, SweepFault::None, rng)?;
    Ok(state)
}

pub(crate) fn sweep_in_place<R: Rng + ?Sized>(
    state: &mut LatentState,
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    fault: SweepFault,
    rng: &mut R,
) -> Result<()> {
    ensure_compatible(y, x, hyper, state)?;
    let n = state.n_actors;
    let k = state.k;

    // 1. Augmentation variables.
    if state.z.is_none() {
        state.z = Some(vec![0.0; n * n * n]);
    }
    for j in 0..n {
        for i in 0..n {
            for ip in 0..n {
                if ip == i {
                    continue;
                }
                let m = state.predictor(x, i, ip, j);
                let side = if y.get_unchecked(i, ip, j) == 1 {
                    TruncationSide::NonNegative
                } else {
                    TruncationSide::Negative
                };
                let draw = sample_truncated_normal(m, 1.0, side, rng)?;
                let idx = state.z_index(i, ip, j);
                state.z.as_mut().expect("z allocated")[idx] = draw;
            }
        }
    }

    // 2. Regression vectors.
    for j in 0..n {
        let (rhs, prec) = full_conditionals::beta_block(state, x, j)?;
        let draw = sample_gaussian_precision(rhs, prec, "beta", rng)?;
        state.beta_mut(j).copy_from_slice(draw.as_slice());
    }

    // 3. Sender positions.
    for j in 0..n {
        for i in 0..n {
            let (rhs, prec) = full_conditionals::u_block(state, x, i, j)?;
            let draw = sample_gaussian_precision(rhs, prec, "u", rng)?;
            state.u_mut(i, j).copy_from_slice(draw.as_slice());
        }
    }

    // 4. Receiver positions.
    for j in 0..n {
        for ip in 0..n {
            let (rhs, prec) = full_conditionals::v_block(state, x, ip, j)?;
            let draw = sample_gaussian_precision(rhs, prec, "v", rng)?;
            state.v_mut(ip, j).copy_from_slice(draw.as_slice());
        }
    }

    // 5. Consensus positions.
    for i in 0..n {
        let (mean, prec) = full_conditionals::eta_block(state, hyper, i);
        let sd2 = 1.0 / prec;
        for d in 0..k {
            let val = sample_gaussian(mean[d], sd2, rng);
            state.eta_mut(i)[d] = val;
        }
        let (mean, prec) = full_conditionals::zeta_block(state, hyper, i);
        let sd2 = 1.0 / prec;
        for d in 0..k {
            let val = sample_gaussian(mean[d], sd2, rng);
            state.zeta_mut(i)[d] = val;
        }
    }

    // 6. Agreement indicators.
    for i in 0..n {
        let mut p1 = full_conditionals::agreement_probability(
            state.u(i, i),
            state.eta(i),
            state.sigma_u2,
            state.tau_u2,
            state.psi,
        );
        if fault == SweepFault::GammaFlip {
            p1 = 1.0 - p1;
        }
        state.gamma[i] = u8::from(rng.random::<f64>() < p1);
        let p1 = full_conditionals::agreement_probability(
            state.v(i, i),
            state.zeta(i),
            state.sigma_v2,
            state.tau_v2,
            state.psi,
        );
        state.xi[i] = u8::from(rng.random::<f64>() < p1);
    }

    // 7. Position variances.
    let (a, b) = full_conditionals::sigma_u2_params(state, hyper);
    state.sigma_u2 = sample_inv_gamma(a, b, rng);
    let (a, b) = full_conditionals::tau_u2_params(state, hyper);
    state.tau_u2 = sample_inv_gamma(a, b, rng);
    let (a, b) = full_conditionals::sigma_v2_params(state, hyper);
    state.sigma_v2 = sample_inv_gamma(a, b, rng);
    let (a, b) = full_conditionals::tau_v2_params(state, hyper);
    state.tau_v2 = sample_inv_gamma(a, b, rng);

    // 8. Regression mean and variance.
    let (mean, prec) = full_conditionals::nu_block(state, hyper);
    let sd2 = 1.0 / prec;
    for c in 0..state.p {
        state.nu[c] = sample_gaussian(mean[c], sd2, rng);
    }
    let (a, b) = full_conditionals::varsigma2_params(state, hyper);
    state.varsigma2 = sample_inv_gamma(a, b, rng);

    // 9. Agreement rate.
    let (c, d) = full_conditionals::psi_params(state, hyper);
    state.psi = sample_beta(c, d, rng);

    Ok(())
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Build a starting state; see [`InitMode`].
pub fn init_state<R: Rng + ?Sized>(
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    mode: InitMode,
    rng: &mut R,
) -> Result<LatentState> {
    hyper.validate()?;
    if x.n_actors() != y.n_actors() {
        return Err(Error::DimensionMismatch(format!(
            "covariates cover {} actors, tensor has {}",
            x.n_actors(),
            y.n_actors()
        )));
    }
    let n = y.n_actors();
    let (k, p) = (hyper.k, hyper.p);
    let mut s = LatentState::neutral(n, k, p);
    match mode {
        InitMode::PriorDraw => {
            s.psi = sample_beta(hyper.c, hyper.d, rng);
            for i in 0..n {
                s.gamma[i] = u8::from(rng.random::<f64>() < s.psi);
                s.xi[i] = u8::from(rng.random::<f64>() < s.psi);
            }
            s.sigma_u2 = sample_inv_gamma(hyper.a_sigma, hyper.b_sigma, rng);
            s.sigma_v2 = sample_inv_gamma(hyper.a_sigma, hyper.b_sigma, rng);
            s.tau_u2 = sample_inv_gamma(hyper.a_tau, hyper.b_tau, rng);
            s.tau_v2 = sample_inv_gamma(hyper.a_tau, hyper.b_tau, rng);
            s.varsigma2 = sample_inv_gamma(hyper.a_varsigma, hyper.b_varsigma, rng);
            for c in 0..p {
                s.nu[c] = sample_gaussian(0.0, hyper.omega2, rng);
            }
            for j in 0..n {
                for c in 0..p {
                    let val = sample_gaussian(s.nu[c], s.varsigma2, rng);
                    s.beta_mut(j)[c] = val;
                }
            }
            for i in 0..n {
                for d in 0..k {
                    let e = sample_gaussian(0.0, hyper.kappa2, rng);
                    s.eta_mut(i)[d] = e;
                    let z = sample_gaussian(0.0, hyper.kappa2, rng);
                    s.zeta_mut(i)[d] = z;
                }
            }
            for i in 0..n {
                for j in 0..n {
                    for d in 0..k {
                        let (mu, var) = if j != i || s.gamma[i] == 1 {
                            (s.eta(i)[d], s.sigma_u2)
                        } else {
                            (0.0, s.tau_u2)
                        };
                        let val = sample_gaussian(mu, var, rng);
                        s.u_mut(i, j)[d] = val;
                        let (mv, var) = if j != i || s.xi[i] == 1 {
                            (s.zeta(i)[d], s.sigma_v2)
                        } else {
                            (0.0, s.tau_v2)
                        };
                        let val = sample_gaussian(mv, var, rng);
                        s.v_mut(i, j)[d] = val;
                    }
                }
            }
        }
        InitMode::DataInformed => {
            // Intercept per perceiver from the slice density; variances at
            // the prior means (shape 2 ⇒ scale).
            //
            // Indicators start in the spike state.  A wrong spike start is
            // self-correcting (the self-row's likelihood outweighs the loose
            // spike prior and promotes the actor within a few sweeps), while
            // a wrong slab start can lock in once the slab tightens around
            // the hierarchical mean, so the conservative start is the spike.
            s.gamma.fill(0);
            s.xi.fill(0);
            let mut intercept_sum = 0.0;
            for j in 0..n {
                let density = y.slice_density(j)?.clamp(0.01, 0.99);
                let b0 = inverse_phi(density)?;
                s.beta_mut(j)[0] = b0;
                intercept_sum += b0;
            }
            s.nu[0] = intercept_sum / n as f64;
            // Spectral seed for the latent positions: probit-transform the
            // perceiver-averaged network, centre it, and split its rank-K
            // factorization evenly between the sender and receiver sides.
            // Starting every chain near the dominant bilinear structure
            // avoids locally-stable misarrangements that short chains cannot
            // anneal out of.
            let mut q = nalgebra::DMatrix::<f64>::zeros(n, n);
            let mut q_sum = 0.0;
            for i in 0..n {
                for ip in 0..n {
                    if ip == i {
                        continue;
                    }
                    let (mut hits, mut cells) = (0.0, 0.0);
                    for j in 0..n {
                        if let Ok(obs) = y.get(i, ip, j) {
                            hits += f64::from(obs);
                            cells += 1.0;
                        }
                    }
                    let density = if cells > 0.0 { hits / cells } else { 0.5 };
                    q[(i, ip)] = inverse_phi(density.clamp(0.02, 0.98))?;
                    q_sum += q[(i, ip)];
                }
            }
            let q_mean = q_sum / (n * (n - 1)) as f64;
            for i in 0..n {
                for ip in 0..n {
                    if ip != i {
                        q[(i, ip)] -= q_mean;
                    }
                }
            }
            let svd = q.svd(true, true);
            let (left, right) = (svd.u.as_ref().unwrap(), svd.v_t.as_ref().unwrap());
            for i in 0..n {
                for d in 0..k.min(n) {
                    let scale = svd.singular_values[d].max(0.0).sqrt();
                    s.eta_mut(i)[d] = scale * left[(i, d)];
                    s.zeta_mut(i)[d] = scale * right[(d, i)];
                }
            }
            // Positions as the hierarchical seed plus small noise; the
            // self-positions start near the origin to match the spike state.
            let noise = 0.1;
            for i in 0..n {
                for j in 0..n {
                    for d in 0..k {
                        let (eu, zv) = if j == i {
                            (0.0, 0.0)
                        } else {
                            (s.eta(i)[d], s.zeta(i)[d])
                        };
                        s.u_mut(i, j)[d] = eu + sample_gaussian(0.0, noise * noise, rng);
                        s.v_mut(i, j)[d] = zv + sample_gaussian(0.0, noise * noise, rng);
                    }
                }
            }
            s.sigma_u2 = hyper.b_sigma / (hyper.a_sigma - 1.0).max(1.0);
            s.sigma_v2 = s.sigma_u2;
            s.tau_u2 = hyper.b_tau / (hyper.a_tau - 1.0).max(1.0);
            s.tau_v2 = s.tau_u2;
            s.varsigma2 = hyper.b_varsigma / (hyper.a_varsigma - 1.0).max(1.0);
            s.psi = hyper.c / (hyper.c + hyper.d);
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

/// The generator for chain `chain_index`: configured seed, stream
/// `chain_index + 1`.
pub fn chain_rng(rng_seed: u64, chain_index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    rng.set_stream(chain_index as u64 + 1);
    rng
}

/// Mix a tag into a master seed (splitmix64 finalizer) for derived runs.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E3779B97F4A7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(tag))
}

/// Run one chain, optionally writing periodic checkpoints.
pub fn run_chain_checkpointed(
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    config: &ChainConfig,
    chain_index: usize,
    checkpoint: Option<&CheckpointSpec>,
) -> Result<ChainOutput> {
    config.validate()?;
    if hyper.k != config.k {
        return Err(Error::DimensionMismatch(format!(
            "config K = {} but hyperparameters have K = {}",
            config.k, hyper.k
        )));
    }
    if let Some(c) = checkpoint {
        if c.every == 0 {
            return Err(Error::InvalidArgument(
                "checkpoint interval must be ≥ 1".into(),
            ));
        }
    }
    let watch = Stopwatch::start();
    let mut rng = chain_rng(config.rng_seed, chain_index);
    let mut state = init_state(y, x, hyper, config.init, &mut rng)?;
    let n_retained = config.n_retained();
    let mut samples = Vec::with_capacity(n_retained);
    let mut loglik_trace = Vec::with_capacity(n_retained);
    let mut logjoint_trace = Vec::with_capacity(n_retained);
    for sweep in 1..=config.n_iterations {
        sweep_in_place(&mut state, y, x, hyper, SweepFault::None, &mut rng)?;
        if let Some(c) = checkpoint {
            if sweep % c.every == 0 {
                let path = c
                    .dir
                    .join(format!("chain{chain_index}_sweep{sweep:07}.state"));
                let mut file = std::fs::File::create(path)?;
                state.write_text(&mut file)?;
            }
        }
        if sweep > config.burn_in && (sweep - config.burn_in) % config.thin == 0 {
            let retained = state.without_z();
            let ll = crate::model::log_likelihood(y, x, &retained)?;
            let lj = crate::model::log_joint(y, x, &retained, hyper)?;
            samples.push(retained);
            loglik_trace.push(ll);
            logjoint_trace.push(lj);
        }
    }
    samples.truncate(n_retained);
    loglik_trace.truncate(n_retained);
    logjoint_trace.truncate(n_retained);
    Ok(ChainOutput {
        config: config.clone(),
        chain_index,
        samples,
        loglik_trace,
        logjoint_trace,
        seconds: watch.seconds(),
    })
}

/// Run one chain with no checkpointing.
pub fn run_chain(
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    config: &ChainConfig,
    chain_index: usize,
) -> Result<ChainOutput> {
    run_chain_checkpointed(y, x, hyper, config, chain_index, None)
}

/// Run all configured chains. Each chain owns its state and generator, so
/// results do not depend on scheduling; chains run on separate threads when
/// more than one is requested.
pub fn run_chains(
    y: &CssTensor,
    x: &DyadCovariates,
    hyper: &Hyperparameters,
    config: &ChainConfig,
) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    if config.n_chains == 1 {
        return Ok(vec![run_chain(y, x, hyper, config, 0)?]);
    }
    #[cfg(not(target_arch = "wasm32"))]
    {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..config.n_chains)
                .map(|ci| scope.spawn(move || run_chain(y, x, hyper, config, ci)))
                .collect();
            handles
                .into_iter()
                .map(|h| match h.join() {
                    Ok(res) => res,
                    Err(_) => Err(Error::InvalidArgument("chain thread panicked".into())),
                })
                .collect()
        })
    }
    #[cfg(target_arch = "wasm32")]
    {
        (0..config.n_chains)
            .map(|ci| run_chain(y, x, hyper, config, ci))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Convergence diagnostics
// ---------------------------------------------------------------------------

/// Classical potential-scale-reduction factor over per-chain scalar traces:
/// `R̂ = √[((n−1)/n)·W + B/n) / W]`. Constant identical chains give 1;
/// between-chain spread with zero within-chain variance gives +∞.
pub fn gelman_rubin(traces: &[Vec<f64>]) -> Result<f64> {
    let m = traces.len();
    if m < 2 {
        return Err(Error::NotEnough {
            what: "chains for the potential scale reduction factor",
            need: 2,
            got: m,
        });
    }
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(Error::DimensionMismatch(
            "chains have unequal lengths".into(),
        ));
    }
    if n < 10 {
        return Err(Error::NotEnough {
            what: "samples per chain for the potential scale reduction factor",
            need: 10,
            got: n,
        });
    }
    let nf = n as f64;
    let means: Vec<f64> = traces.iter().map(|t| t.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = nf / (m as f64 - 1.0)
        * means.iter().map(|&mu| (mu - grand) * (mu - grand)).sum::<f64>();
    let w = traces
        .iter()
        .zip(&means)
        .map(|(t, &mu)| {
            t.iter().map(|&x| (x - mu) * (x - mu)).sum::<f64>() / (nf - 1.0)
        })
        .sum::<f64>()
        / m as f64;
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    if w == 0.0 {
        return Ok(if var_plus == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok((var_plus / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::elicit_hyperparameters;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn small_problem(
        n: usize,
        k: usize,
        seed: u64,
    ) -> (CssTensor, DyadCovariates, Hyperparameters) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let y = CssTensor::from_fn(n, None, |_, _, _| rng.random_range(0..=1u8)).unwrap();
        let x = DyadCovariates::intercept_only(n).unwrap();
        let hyper = elicit_hyperparameters(k, 1).unwrap();
        (y, x, hyper)
    }

    // -- full conditionals against hand-built instances -----------------------

    #[test]
    fn agreement_probability_matches_closed_forms() {
        // Equal variances, zero slab mean: the densities coincide.
        let p1 = full_conditionals::agreement_probability(&[0.3, -0.4], &[0.0, 0.0], 0.7, 0.7, 0.5);
        assert_abs_diff_eq!(p1, 0.5, epsilon = 1e-15);
        // K = 1, u = 1, η = 1, σ² = τ² = 1, ψ = ½ → φ(0)/(φ(0)+φ(1)).
        let p1 = full_conditionals::agreement_probability(&[1.0], &[1.0], 1.0, 1.0, 0.5);
        let expected = 1.0 / (1.0 + (-0.5f64).exp());
        assert_relative_eq!(p1, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(p1, 0.6225, epsilon = 5e-5);
        // Extreme separation stays finite in log space.
        let p1 = full_conditionals::agreement_probability(&[40.0], &[40.0], 1e-4, 1e-4, 0.5);
        assert!(p1 > 0.999999);
    }

    #[test]
    fn psi_params_count_indicators() {
        let hyper = elicit_hyperparameters(2, 1).unwrap();
        let mut s = LatentState::neutral(3, 2, 1);
        s.gamma = vec![1, 1, 1];
        s.xi = vec![1, 1, 1];
        assert_eq!(full_conditionals::psi_params(&s, &hyper), (7.0, 1.0));
        s.gamma = vec![0, 1, 0];
        s.xi = vec![1, 0, 0];
        assert_eq!(full_conditionals::psi_params(&s, &hyper), (3.0, 5.0));
    }

    #[test]
    fn beta_block_matches_scalar_hand_computation() {
        // I = 2, K = 1, p = 1 (intercept x = 1 on both dyads): the posterior
        // precision and mean have one-line closed forms.
        let x = DyadCovariates::intercept_only(2).unwrap();
        let mut s = LatentState::neutral(2, 1, 1);
        s.varsigma2 = 0.5;
        s.nu = vec![0.3];
        s.u_mut(0, 0)[0] = 0.7;
        s.u_mut(1, 0)[0] = -0.2;
        s.v_mut(0, 0)[0] = 0.4;
        s.v_mut(1, 0)[0] = 1.1;
        let mut z = vec![0.0; 8];
        z[s.z_index(0, 1, 0)] = 0.9;
        z[s.z_index(1, 0, 0)] = -0.6;
        s.z = Some(z);

        let (rhs, prec) = full_conditionals::beta_block(&s, &x, 0).unwrap();
        let prec_hand = 1.0 / 0.5 + 2.0; // prior + two dyads with x = 1
        let r01 = 0.9 - 0.7 * 1.1; // z − u₀·v₁
        let r10 = -0.6 - (-0.2) * 0.4; // z − u₁·v₀
        let rhs_hand = 0.3 / 0.5 + r01 + r10;
        assert_relative_eq!(prec[(0, 0)], prec_hand, epsilon = 1e-14);
        assert_relative_eq!(rhs[0], rhs_hand, epsilon = 1e-14);
    }

    #[test]
    fn u_block_switches_prior_with_the_indicator() {
        let x = DyadCovariates::intercept_only(2).unwrap();
        let mut s = LatentState::neutral(2, 1, 1);
        s.sigma_u2 = 0.5;
        s.tau_u2 = 0.125;
        s.eta_mut(0)[0] = 1.5;
        s.beta_mut(0)[0] = 0.2;
        s.v_mut(1, 0)[0] = 0.8;
        let mut z = vec![0.0; 8];
        z[s.z_index(0, 1, 0)] = 1.0;
        s.z = Some(z);

        // Self-slice (j = i = 0), γ₀ = 1: slab prior (η₀, σ_u²).
        s.gamma[0] = 1;
        let (rhs, prec) = full_conditionals::u_block(&s, &x, 0, 0).unwrap();
        let resid = 1.0 - 0.2;
        assert_relative_eq!(prec[(0, 0)], 1.0 / 0.5 + 0.8 * 0.8, epsilon = 1e-14);
        assert_relative_eq!(rhs[0], 1.5 / 0.5 + 0.8 * resid, epsilon = 1e-14);

        // γ₀ = 0: spike prior (0, τ_u²).
        s.gamma[0] = 0;
        let (rhs, prec) = full_conditionals::u_block(&s, &x, 0, 0).unwrap();
        assert_relative_eq!(prec[(0, 0)], 1.0 / 0.125 + 0.8 * 0.8, epsilon = 1e-14);
        assert_relative_eq!(rhs[0], 0.8 * resid, epsilon = 1e-14);

        // Third-party slice (j = 1 ≠ i = 0): always the slab prior.
        let (rhs, _) = full_conditionals::u_block(&s, &x, 0, 1).unwrap();
        assert_relative_eq!(rhs[0], 1.5 / 0.5 + 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eta_block_has_the_documented_scalar_precision() {
        let hyper = elicit_hyperparameters(1, 1).unwrap();
        let mut s = LatentState::neutral(3, 1, 1);
        s.sigma_u2 = 0.4;
        s.u_mut(0, 0)[0] = 0.5; // self, counted only when γ₀ = 1
        s.u_mut(0, 1)[0] = -0.3;
        s.u_mut(0, 2)[0] = 0.9;
        s.gamma[0] = 1;
        let (mean, prec) = full_conditionals::eta_block(&s, &hyper, 0);
        let n_i = 2.0 + 1.0;
        let prec_hand = 1.0 / hyper.kappa2 + n_i / 0.4;
        assert_relative_eq!(prec, prec_hand, epsilon = 1e-14);
        assert_relative_eq!(mean[0], (0.5 - 0.3 + 0.9) / 0.4 / prec_hand, epsilon = 1e-14);

        s.gamma[0] = 0;
        let (mean, prec) = full_conditionals::eta_block(&s, &hyper, 0);
        let prec_hand = 1.0 / hyper.kappa2 + 2.0 / 0.4;
        assert_relative_eq!(prec, prec_hand, epsilon = 1e-14);
        assert_relative_eq!(mean[0], (-0.3 + 0.9) / 0.4 / prec_hand, epsilon = 1e-14);
    }

    #[test]
    fn variance_params_pool_the_documented_sets() {
        let hyper = elicit_hyperparameters(1, 1).unwrap();
        let mut s = LatentState::neutral(3, 1, 1);
        s.gamma = vec![1, 0, 1];
        for i in 0..3 {
            for j in 0..3 {
                s.u_mut(i, j)[0] = (i + 3 * j) as f64 * 0.1;
            }
            s.eta_mut(i)[0] = 0.05 * i as f64;
        }
        let (a, b) = full_conditionals::sigma_u2_params(&s, &hyper);
        // Slab set: all j ≠ i (6 pairs) plus self-pairs of actors 0 and 2.
        let mut ss = 0.0;
        let mut count = 0;
        for i in 0..3usize {
            for j in 0..3usize {
                if j != i || [1u8, 0, 1][i] == 1 {
                    count += 1;
                    let d = (i + 3 * j) as f64 * 0.1 - 0.05 * i as f64;
                    ss += d * d;
                }
            }
        }
        assert_eq!(count, 8);
        assert_relative_eq!(a, hyper.a_sigma + 8.0 / 2.0, epsilon = 1e-14);
        assert_relative_eq!(b, hyper.b_sigma + 0.5 * ss, epsilon = 1e-12);

        let (a, b) = full_conditionals::tau_u2_params(&s, &hyper);
        let u11 = s.u(1, 1)[0];
        assert_relative_eq!(a, hyper.a_tau + 0.5, epsilon = 1e-14);
        assert_relative_eq!(b, hyper.b_tau + 0.5 * u11 * u11, epsilon = 1e-14);

        // No spike actors → the prior itself.
        s.gamma = vec![1, 1, 1];
        let (a, b) = full_conditionals::tau_u2_params(&s, &hyper);
        assert_eq!((a, b), (hyper.a_tau, hyper.b_tau));
    }

    #[test]
    fn nu_and_varsigma_blocks_match_hand_formulas() {
        let hyper = elicit_hyperparameters(1, 2).unwrap();
        let mut s = LatentState::neutral(2, 1, 2);
        s.varsigma2 = 0.3;
        s.beta_mut(0).copy_from_slice(&[0.4, -0.6]);
        s.beta_mut(1).copy_from_slice(&[1.0, 0.2]);
        s.nu = vec![0.1, -0.1];
        let (mean, prec) = full_conditionals::nu_block(&s, &hyper);
        let prec_hand = 1.0 / hyper.omega2 + 2.0 / 0.3;
        assert_relative_eq!(prec, prec_hand, epsilon = 1e-14);
        assert_relative_eq!(mean[0], (0.4 + 1.0) / 0.3 / prec_hand, epsilon = 1e-14);
        assert_relative_eq!(mean[1], (-0.6 + 0.2) / 0.3 / prec_hand, epsilon = 1e-14);

        let (a, b) = full_conditionals::varsigma2_params(&s, &hyper);
        let ss = (0.4f64 - 0.1).powi(2)
            + (-0.6f64 + 0.1).powi(2)
            + (1.0f64 - 0.1).powi(2)
            + (0.2f64 + 0.1).powi(2);
        assert_relative_eq!(a, hyper.a_varsigma + 2.0 * 2.0 / 2.0, epsilon = 1e-14);
        assert_relative_eq!(b, hyper.b_varsigma + 0.5 * ss, epsilon = 1e-12);
    }

    // -- sweep and chain plumbing ---------------------------------------------

    #[test]
    fn sweep_keeps_z_signs_consistent_and_values_finite() {
        let (y, x, hyper) = small_problem(4, 2, 7);
        let mut rng = chain_rng(99, 0);
        let mut state = init_state(&y, &x, &hyper, InitMode::PriorDraw, &mut rng).unwrap();
        for _ in 0..25 {
            sweep_in_place(&mut state, &y, &x, &hyper, SweepFault::None, &mut rng).unwrap();
            state.check_z_signs(&y).unwrap();
            assert!(state.validate_values().is_ok());
            for block in [&state.beta, &state.u, &state.v, &state.eta, &state.zeta, &state.nu]
            {
                assert!(block.iter().all(|v| v.is_finite()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sweeps_are_finite_on_random_problems(seed in 0u64..10_000, n in 3usize..6) {
            let (y, x, hyper) = small_problem(n, 2, seed);
            let mut rng = chain_rng(seed, 0);
            let mut state = init_state(&y, &x, &hyper, InitMode::PriorDraw, &mut rng).unwrap();
            for _ in 0..3 {
                sweep_in_place(&mut state, &y, &x, &hyper, SweepFault::None, &mut rng).unwrap();
            }
            state.check_z_signs(&y).unwrap();
            prop_assert!(state.validate_values().is_ok());
        }
    }

    #[test]
    fn retained_sample_count_follows_the_formula() {
        let (y, x, hyper) = small_problem(3, 2, 3);
        let config = ChainConfig {
            n_iterations: 100,
            burn_in: 50,
            thin: 5,
            n_chains: 1,
            rng_seed: 11,
            k: 2,
            init: InitMode::DataInformed,
        };
        let out = run_chain(&y, &x, &hyper, &config, 0).unwrap();
        assert_eq!(out.samples.len(), 10);
        assert_eq!(out.loglik_trace.len(), 10);
        assert_eq!(out.logjoint_trace.len(), 10);
        assert_eq!(config.n_retained(), 10);
        assert!(out.samples.iter().all(|s| s.z.is_none()));
        assert!(out.seconds >= 0.0);
    }

    #[test]
    fn identical_seeds_reproduce_chains_byte_for_byte() {
        let (y, x, hyper) = small_problem(3, 2, 5);
        let config = ChainConfig {
            n_iterations: 40,
            burn_in: 10,
            thin: 3,
            n_chains: 2,
            rng_seed: 2024,
            k: 2,
            init: InitMode::PriorDraw,
        };
        let a = run_chains(&y, &x, &hyper, &config).unwrap();
        let b = run_chains(&y, &x, &hyper, &config).unwrap();
        let ser = |o: &[ChainOutput]| {
            o.iter()
                .map(|c| {
                    let mut mem = Vec::new();
                    // Timing varies run to run; compare everything else.
                    let mut c = c.clone();
                    c.seconds = 0.0;
                    c.write_jsonl(&mut mem).unwrap();
                    String::from_utf8(mem).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(ser(&a), ser(&b));
        // Different chains use different streams.
        assert_ne!(a[0].samples.last(), a[1].samples.last());
    }

    #[test]
    fn chain_jsonl_round_trips() {
        let (y, x, hyper) = small_problem(3, 1, 8);
        let config = ChainConfig {
            n_iterations: 30,
            burn_in: 10,
            thin: 4,
            n_chains: 1,
            rng_seed: 7,
            k: 1,
            init: InitMode::DataInformed,
        };
        let out = run_chain(&y, &x, &hyper, &config, 0).unwrap();
        let mut mem = Vec::new();
        out.write_jsonl(&mut mem).unwrap();
        let back = ChainOutput::read_jsonl(mem.as_slice()).unwrap();
        assert_eq!(out, back);
        assert!(ChainOutput::read_jsonl("not json\n".as_bytes()).is_err());
    }

    #[test]
    fn checkpoints_are_written_and_parse_back() {
        let (y, x, hyper) = small_problem(3, 1, 12);
        let dir = tempfile::tempdir().unwrap();
        let config = ChainConfig {
            n_iterations: 20,
            burn_in: 5,
            thin: 1,
            n_chains: 1,
            rng_seed: 4,
            k: 1,
            init: InitMode::DataInformed,
        };
        let spec = CheckpointSpec { dir: dir.path().to_path_buf(), every: 10 };
        run_chain_checkpointed(&y, &x, &hyper, &config, 0, Some(&spec)).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, vec!["chain0_sweep0000010.state", "chain0_sweep0000020.state"]);
        let file = std::fs::File::open(dir.path().join(&names[0])).unwrap();
        let state = LatentState::read_text(std::io::BufReader::new(file)).unwrap();
        assert_eq!(state.n_actors, 3);
    }

    #[test]
    fn config_validation_rejects_bad_settings() {
        let mut c = ChainConfig::desk_scale(2, 1);
        assert!(c.validate().is_ok());
        c.burn_in = c.n_iterations;
        assert!(c.validate().is_err());
        let mut c = ChainConfig::desk_scale(2, 1);
        c.thin = 0;
        assert!(c.validate().is_err());
        let mut c = ChainConfig::desk_scale(2, 1);
        c.n_chains = 0;
        assert!(c.validate().is_err());
        assert_eq!(ChainConfig::reference_scale(3, 9).n_retained(), 2_000);
    }

    // -- initialization --------------------------------------------------------

    #[test]
    fn prior_draw_is_reproducible_and_data_informed_uses_densities() {
        let (y, x, hyper) = small_problem(4, 2, 15);
        let a = init_state(&y, &x, &hyper, InitMode::PriorDraw, &mut chain_rng(3, 0)).unwrap();
        let b = init_state(&y, &x, &hyper, InitMode::PriorDraw, &mut chain_rng(3, 0)).unwrap();
        assert_eq!(a, b);

        // All-zero network: every intercept is Φ⁻¹(0.01).
        let empty = CssTensor::from_fn(4, None, |_, _, _| 0).unwrap();
        let s = init_state(&empty, &x, &hyper, InitMode::DataInformed, &mut chain_rng(3, 0))
            .unwrap();
        let phi_inv = inverse_phi(0.01).unwrap();
        for j in 0..4 {
            assert_relative_eq!(s.beta(j)[0], phi_inv, epsilon = 1e-12);
        }
        // Indicators start in the spike state (see init_state).
        assert!(s.gamma.iter().all(|&g| g == 0));
        assert!(s.xi.iter().all(|&g| g == 0));

        // Density-matched intercepts on a structured tensor.
        let s = init_state(&y, &x, &hyper, InitMode::DataInformed, &mut chain_rng(3, 0)).unwrap();
        for j in 0..4 {
            let d = y.slice_density(j).unwrap().clamp(0.01, 0.99);
            assert_relative_eq!(s.beta(j)[0], inverse_phi(d).unwrap(), epsilon = 1e-12);
        }
    }

    // -- diagnostics ------------------------------------------------------------

    #[test]
    fn gelman_rubin_matches_its_three_regimes() {
        // Identical constant chains → exactly 1.
        let constant = vec![vec![2.5; 50], vec![2.5; 50]];
        assert_eq!(gelman_rubin(&constant).unwrap(), 1.0);

        // Two i.i.d. chains from the same normal → near 1.
        let mut rng = chain_rng(31, 0);
        let draw = |rng: &mut ChaCha20Rng| -> Vec<f64> {
            (0..10_000)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(rng);
                    e
                })
                .collect()
        };
        let same = vec![draw(&mut rng), draw(&mut rng)];
        let r = gelman_rubin(&same).unwrap();
        assert!((0.99..=1.01).contains(&r), "R-hat {r} outside [0.99, 1.01]");

        // Means 0 and 10, unit variance → far above 1.
        let shifted: Vec<Vec<f64>> = vec![
            draw(&mut rng),
            draw(&mut rng).into_iter().map(|x| x + 10.0).collect(),
        ];
        let r = gelman_rubin(&shifted).unwrap();
        assert!(r > 5.0, "R-hat {r} should exceed 5");

        assert!(gelman_rubin(&[vec![1.0; 50]]).is_err());
        assert!(gelman_rubin(&[vec![1.0; 5], vec![1.0; 5]]).is_err());
        assert!(gelman_rubin(&[vec![1.0; 50], vec![1.0; 40]]).is_err());
    }

    #[test]
    fn derive_seed_separates_tags() {
        let s = derive_seed(42, 1);
        assert_ne!(s, derive_seed(42, 2));
        assert_ne!(s, derive_seed(43, 1));
        assert_eq!(s, derive_seed(42, 1));
    }
}
