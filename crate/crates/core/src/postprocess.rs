//! Posterior post-processing: Procrustes alignment and summaries.
//!
//! The likelihood only sees latent positions through inner products, so each
//! retained sample lives in its own arbitrary rotation of latent space.
//! Stacking the consensus positions into `W^(s)` (the `2I×K` matrix with rows
//! `η_iᵀ` then `ζ_iᵀ`) and solving the orthogonal Procrustes problem
//!
//! ```text
//! Q̃^(s) = argmin over orthogonal Q of ‖W^(1) − W^(s) Q‖²_F
//! ```
//!
//! via the SVD `W^(s)ᵀ W^(1) = U Σ Vᵀ`, `Q = U Vᵀ`, maps every sample into
//! the frame of the first retained sample. Rotation-invariant summaries
//! (agreement probabilities, consensus link probabilities `ϑ_{i,i'} =
//! Φ(νᵀx + η_iᵀζ_{i'})` averaged over draws) are computed from raw samples;
//! only position summaries require alignment.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, LatentState};
use crate::probit::phi;
use crate::sampler::ChainOutput;

/// Relative singular-value cutoff below which the Procrustes cross-product
/// is treated as rank-deficient and the alignment flagged.
const DEGENERATE_SV_RATIO: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Procrustes rotation
// ---------------------------------------------------------------------------

fn procrustes_with_flag(
    w_ref: &DMatrix<f64>,
    w_s: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, bool)> {
    if w_ref.shape() != w_s.shape() {
        return Err(Error::DimensionMismatch(format!(
            "Procrustes shapes disagree: {:?} vs {:?}",
            w_ref.shape(),
            w_s.shape()
        )));
    }
    let k = w_ref.ncols();
    if k > w_ref.nrows() {
        return Err(Error::DimensionMismatch(
            "Procrustes needs K ≤ number of stacked rows".into(),
        ));
    }
    let m = w_s.transpose() * w_ref;
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().ok_or(Error::SolveFailed { block: "procrustes" })?;
    let v_t = svd.v_t.as_ref().ok_or(Error::SolveFailed { block: "procrustes" })?;
    let max_sv = svd.singular_values.max();
    let degenerate =
        max_sv == 0.0 || svd.singular_values.iter().any(|&s| s < DEGENERATE_SV_RATIO * max_sv);
    Ok((u * v_t, degenerate))
}

/// The orthogonal `K×K` matrix minimizing `‖W_ref − W_s·Q‖²_F`.
pub fn procrustes_rotation(w_ref: &DMatrix<f64>, w_s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    procrustes_with_flag(w_ref, w_s).map(|(q, _)| q)
}

/// Stack a sample's consensus positions into the `2I×K` Procrustes matrix.
pub fn stack_consensus_positions(state: &LatentState) -> DMatrix<f64> {
    let n = state.n_actors;
    let k = state.k;
    DMatrix::from_fn(2 * n, k, |row, col| {
        if row < n {
            state.eta(row)[col]
        } else {
            state.zeta(row - n)[col]
        }
    })
}

/// Rotate every latent vector of `state` by `Qᵀ` (rows of `W` map to `wᵀQ`).
fn apply_rotation(state: &LatentState, q: &DMatrix<f64>) -> LatentState {
    let k = state.k;
    let mut out = state.clone();
    let rotate = |src: &[f64], dst: &mut [f64]| {
        for (d, slot) in dst.iter_mut().enumerate() {
            // (Qᵀ w)_d = Σ_a Q[a,d]·w_a
            *slot = (0..k).map(|a| q[(a, d)] * src[a]).sum();
        }
    };
    let mut buf = vec![0.0; k];
    for idx in 0..(state.n_actors * state.n_actors) {
        let o = idx * k;
        rotate(&state.u[o..o + k], &mut buf);
        out.u[o..o + k].copy_from_slice(&buf);
        rotate(&state.v[o..o + k], &mut buf);
        out.v[o..o + k].copy_from_slice(&buf);
    }
    for i in 0..state.n_actors {
        let o = i * k;
        rotate(&state.eta[o..o + k], &mut buf);
        out.eta[o..o + k].copy_from_slice(&buf);
        rotate(&state.zeta[o..o + k], &mut buf);
        out.zeta[o..o + k].copy_from_slice(&buf);
    }
    out
}

/// Samples mapped into a common latent frame.
#[derive(Debug, Clone)]
pub struct AlignedSamples {
    pub n_actors: usize,
    pub k: usize,
    /// Index of the reference sample (always 0: the first retained sample of
    /// the first chain).
    pub reference_index: usize,
    /// Per-sample rotation applied (reference gets the identity).
    pub rotations: Vec<DMatrix<f64>>,
    pub samples: Vec<LatentState>,
    /// Rank-deficient cross-products make position summaries unstable;
    /// indicator and consensus outputs are unaffected.
    pub degenerate: Vec<bool>,
}

impl AlignedSamples {
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

fn pooled_samples<'a>(chains: &'a [ChainOutput]) -> Result<Vec<&'a LatentState>> {
    let pooled: Vec<&LatentState> = chains.iter().flat_map(|c| c.samples.iter()).collect();
    if pooled.is_empty() {
        return Err(Error::NotEnough { what: "retained samples", need: 1, got: 0 });
    }
    Ok(pooled)
}

fn align_states(states: &[&LatentState]) -> Result<AlignedSamples> {
    let first = states[0];
    let (n, k) = (first.n_actors, first.k);
    for s in states {
        if s.n_actors != n || s.k != k {
            return Err(Error::DimensionMismatch(
                "samples disagree on I or K; chains must share a configuration".into(),
            ));
        }
    }
    let w_ref = stack_consensus_positions(first);
    let mut rotations = Vec::with_capacity(states.len());
    let mut aligned = Vec::with_capacity(states.len());
    let mut degenerate = Vec::with_capacity(states.len());
    for s in states {
        let w_s = stack_consensus_positions(s);
        let (q, flag) = procrustes_with_flag(&w_ref, &w_s)?;
        aligned.push(apply_rotation(s, &q));
        rotations.push(q);
        degenerate.push(flag);
    }
    Ok(AlignedSamples {
        n_actors: n,
        k,
        reference_index: 0,
        rotations,
        samples: aligned,
        degenerate,
    })
}

/// Align one chain's samples to its first retained sample.
pub fn align_samples(chain: &ChainOutput) -> Result<AlignedSamples> {
    align_chains(std::slice::from_ref(chain))
}

/// Pool samples across chains and align all of them to the first retained
/// sample of the first chain, so position summaries pool correctly.
pub fn align_chains(chains: &[ChainOutput]) -> Result<AlignedSamples> {
    let pooled = pooled_samples(chains)?;
    align_states(&pooled)
}

// ---------------------------------------------------------------------------
// Rotation-invariant summaries
// ---------------------------------------------------------------------------

/// Posterior self-perception agreement rates for one actor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActorAgreement {
    /// `Pr(γ_i = 1 | Y)`: the actor's own out-tie perceptions match the slab.
    pub p_gamma: f64,
    /// `Pr(ξ_i = 1 | Y)` for in-tie perceptions.
    pub p_xi: f64,
}

/// Empirical means of the sampled agreement indicators, pooled over chains.
pub fn agreement_probabilities(chains: &[ChainOutput]) -> Result<Vec<ActorAgreement>> {
    let pooled = pooled_samples(chains)?;
    let n = pooled[0].n_actors;
    let s = pooled.len() as f64;
    let mut out = vec![ActorAgreement { p_gamma: 0.0, p_xi: 0.0 }; n];
    for state in &pooled {
        if state.gamma.len() != n {
            return Err(Error::DimensionMismatch("samples disagree on I".into()));
        }
        for i in 0..n {
            out[i].p_gamma += state.gamma[i] as f64;
            out[i].p_xi += state.xi[i] as f64;
        }
    }
    for a in &mut out {
        a.p_gamma /= s;
        a.p_xi /= s;
    }
    Ok(out)
}

/// Posterior mean consensus link probabilities
/// `E[Φ(νᵀx_base + η_iᵀζ_{i'}) | Y]`, row-major `I×I` with `NaN` diagonal.
/// `x_baseline` defaults to the intercept-only vector.
pub fn consensus_probabilities(
    chains: &[ChainOutput],
    x_baseline: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let pooled = pooled_samples(chains)?;
    let n = pooled[0].n_actors;
    let p = pooled[0].p;
    let default_base = {
        let mut b = vec![0.0; p];
        b[0] = 1.0;
        b
    };
    let base = x_baseline.unwrap_or(&default_base);
    if base.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "baseline covariate vector has {} coordinates, model has p = {}",
            base.len(),
            p
        )));
    }
    let mut acc = vec![0.0; n * n];
    for state in &pooled {
        let shift = dot(&state.nu, base);
        for i in 0..n {
            for ip in 0..n {
                if ip != i {
                    acc[i * n + ip] += phi(shift + dot(state.eta(i), state.zeta(ip)));
                }
            }
        }
    }
    let s = pooled.len() as f64;
    for (idx, slot) in acc.iter_mut().enumerate() {
        if idx / n == idx % n {
            *slot = f64::NAN;
        } else {
            *slot /= s;
        }
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Position summaries (alignment-dependent)
// ---------------------------------------------------------------------------

/// Posterior means of the aligned latent positions, with coordinates ordered
/// by decreasing across-actor variance of the consensus sender means.
#[derive(Debug, Clone)]
pub struct PositionSummaries {
    pub n_actors: usize,
    pub k: usize,
    /// Original coordinate index of each reported dimension.
    pub dim_order: Vec<usize>,
    /// `[i·K + r]` in reordered coordinates.
    pub eta_mean: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    /// `[(j·I + i)·K + r]` in reordered coordinates.
    pub u_mean: Vec<f64>,
    pub v_mean: Vec<f64>,
}

pub fn position_summaries(aligned: &AlignedSamples) -> PositionSummaries {
    let (n, k) = (aligned.n_actors, aligned.k);
    let s = aligned.samples.len() as f64;
    let mut eta = vec![0.0; n * k];
    let mut zeta = vec![0.0; n * k];
    let mut u = vec![0.0; n * n * k];
    let mut v = vec![0.0; n * n * k];
    for sample in &aligned.samples {
        for (slot, val) in eta.iter_mut().zip(&sample.eta) {
            *slot += val;
        }
        for (slot, val) in zeta.iter_mut().zip(&sample.zeta) {
            *slot += val;
        }
        for (slot, val) in u.iter_mut().zip(&sample.u) {
            *slot += val;
        }
        for (slot, val) in v.iter_mut().zip(&sample.v) {
            *slot += val;
        }
    }
    for block in [&mut eta, &mut zeta, &mut u, &mut v] {
        for slot in block.iter_mut() {
            *slot /= s;
        }
    }
    // Rank coordinates by across-actor variance of the η means.
    let mut keyed: Vec<(usize, f64)> = (0..k)
        .map(|d| {
            let mean = (0..n).map(|i| eta[i * k + d]).sum::<f64>() / n as f64;
            let var =
                (0..n).map(|i| (eta[i * k + d] - mean).powi(2)).sum::<f64>() / n as f64;
            (d, var)
        })
        .collect();
    keyed.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let dim_order: Vec<usize> = keyed.into_iter().map(|(d, _)| d).collect();
    let reorder = |src: Vec<f64>, vectors: usize| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for idx in 0..vectors {
            for (r, &d) in dim_order.iter().enumerate() {
                out[idx * k + r] = src[idx * k + d];
            }
        }
        out
    };
    PositionSummaries {
        n_actors: n,
        k,
        eta_mean: reorder(eta, n),
        zeta_mean: reorder(zeta, n),
        u_mean: reorder(u, n * n),
        v_mean: reorder(v, n * n),
        dim_order,
    }
}

// ---------------------------------------------------------------------------
// Combined summary + CSV artifacts
// ---------------------------------------------------------------------------

/// Equal-tailed credible interval for one regression coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaInterval {
    pub perceiver: usize,
    pub coord: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Everything a consensus report needs: link probabilities, agreement rates,
/// consensus position means, and regression intervals.
#[derive(Debug, Clone)]
pub struct ConsensusSummary {
    pub n_actors: usize,
    pub k: usize,
    /// Row-major `I×I`, `NaN` diagonal.
    pub consensus: Vec<f64>,
    pub agreement: Vec<ActorAgreement>,
    /// Aligned posterior means, original coordinate order, `[i·K + d]`.
    pub eta_mean: Vec<f64>,
    pub zeta_mean: Vec<f64>,
    /// 95% equal-tailed intervals for every β coordinate.
    pub beta_intervals: Vec<BetaInterval>,
}

/// Type-7 (linear interpolation) sample quantile of a sorted slice.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Build the consensus summary from pooled chains.
pub fn summarize(chains: &[ChainOutput], x_baseline: Option<&[f64]>) -> Result<ConsensusSummary> {
    let consensus = consensus_probabilities(chains, x_baseline)?;
    let agreement = agreement_probabilities(chains)?;
    let aligned = align_chains(chains)?;
    let n = aligned.n_actors;
    let k = aligned.k;
    let s = aligned.samples.len() as f64;
    let mut eta_mean = vec![0.0; n * k];
    let mut zeta_mean = vec![0.0; n * k];
    for sample in &aligned.samples {
        for (slot, val) in eta_mean.iter_mut().zip(&sample.eta) {
            *slot += val;
        }
        for (slot, val) in zeta_mean.iter_mut().zip(&sample.zeta) {
            *slot += val;
        }
    }
    for block in [&mut eta_mean, &mut zeta_mean] {
        for slot in block.iter_mut() {
            *slot /= s;
        }
    }
    let p = aligned.samples[0].p;
    let mut beta_intervals = Vec::with_capacity(n * p);
    let mut draws = Vec::with_capacity(aligned.samples.len());
    for j in 0..n {
        for c in 0..p {
            draws.clear();
            draws.extend(aligned.samples.iter().map(|st| st.beta(j)[c]));
            let mean = draws.iter().sum::<f64>() / s;
            draws.sort_by(f64::total_cmp);
            beta_intervals.push(BetaInterval {
                perceiver: j,
                coord: c,
                mean,
                lower: quantile_sorted(&draws, 0.025),
                upper: quantile_sorted(&draws, 0.975),
            });
        }
    }
    Ok(ConsensusSummary {
        n_actors: n,
        k,
        consensus,
        agreement,
        eta_mean,
        zeta_mean,
        beta_intervals,
    })
}

/// `agreement.csv`: `actor,p_gamma,p_xi` with 1-based actors.
pub fn write_agreement_csv(agreement: &[ActorAgreement], w: &mut dyn Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["actor", "p_gamma", "p_xi"])?;
    for (i, a) in agreement.iter().enumerate() {
        wtr.write_record(&[
            (i + 1).to_string(),
            a.p_gamma.to_string(),
            a.p_xi.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `consensus.csv`: `i,i_prime,prob` over ordered off-diagonal pairs.
pub fn write_consensus_csv(consensus: &[f64], n_actors: usize, w: &mut dyn Write) -> Result<()> {
    if consensus.len() != n_actors * n_actors {
        return Err(Error::DimensionMismatch(format!(
            "consensus matrix has {} entries for {} actors",
            consensus.len(),
            n_actors
        )));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["i", "i_prime", "prob"])?;
    for i in 0..n_actors {
        for ip in 0..n_actors {
            if ip == i {
                continue;
            }
            wtr.write_record(&[
                (i + 1).to_string(),
                (ip + 1).to_string(),
                consensus[i * n_actors + ip].to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `positions.csv`: `actor,perceiver,space,dim,mean`; consensus rows leave
/// the perceiver blank, and `dim` counts reordered dimensions from 1.
pub fn write_positions_csv(summary: &PositionSummaries, w: &mut dyn Write) -> Result<()> {
    let (n, k) = (summary.n_actors, summary.k);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["actor", "perceiver", "space", "dim", "mean"])?;
    for i in 0..n {
        for r in 0..k {
            wtr.write_record(&[
                (i + 1).to_string(),
                String::new(),
                "consensus_sender".into(),
                (r + 1).to_string(),
                summary.eta_mean[i * k + r].to_string(),
            ])?;
            wtr.write_record(&[
                (i + 1).to_string(),
                String::new(),
                "consensus_receiver".into(),
                (r + 1).to_string(),
                summary.zeta_mean[i * k + r].to_string(),
            ])?;
        }
    }
    for j in 0..n {
        for i in 0..n {
            for r in 0..k {
                let o = (j * n + i) * k + r;
                wtr.write_record(&[
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    "sender".into(),
                    (r + 1).to_string(),
                    summary.u_mean[o].to_string(),
                ])?;
                wtr.write_record(&[
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    "receiver".into(),
                    (r + 1).to_string(),
                    summary.v_mean[o].to_string(),
                ])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
