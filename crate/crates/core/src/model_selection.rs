//! Latent-dimension selection by DIC and WAIC.
//!
//! Both criteria condition on the latent positions (conditional likelihood):
//!
//! ```text
//! DIC  = −2·log p(Y | Υ̂) + 2·p_DIC,   p_DIC = 2·[log p(Y | Υ̂) − mean_s log p(Y | Υ^(s))]
//! WAIC = −2·Σ_c log mean_s p(y_c | Υ^(s)) + 2·p_WAIC,
//! p_WAIC = 2·Σ_c [log mean_s p(y_c | Υ^(s)) − mean_s log p(y_c | Υ^(s))]
//! ```
//!
//! where `c` ranges over every observed cell (perceiver, ordered dyad). The
//! plug-in state `Υ̂` averages the continuous blocks `β`, `u`, `v` after
//! Procrustes alignment — θ depends on the parameters only through those
//! blocks, and alignment makes their posterior means well-defined under
//! rotation invariance. Per-cell averages use a streaming log-sum-exp, so
//! long chains never overflow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::css_data::{CssTensor, DyadCovariates};
use crate::error::{Error, Result};
use crate::model::{elicit_hyperparameters, log_likelihood, LatentState};
use crate::postprocess::align_chains;
use crate::probit::log_phi;
use crate::sampler::{derive_seed, run_chains, ChainConfig, ChainOutput};

/// Selection criteria for one candidate latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionRow {
    pub k: usize,
    pub dic: f64,
    pub p_dic: f64,
    pub waic: f64,
    pub p_waic: f64,
    pub mean_loglik: f64,
    pub plugin_loglik: f64,
    pub n_samples: usize,
    pub seconds: f64,
}

/// Criteria across a sweep of candidate dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub rows: Vec<CriterionRow>,
}

impl CriterionReport {
    /// Candidate K minimizing DIC.
    pub fn best_dic(&self) -> Option<usize> {
        self.rows
            .iter()
            .min_by(|a, b| a.dic.total_cmp(&b.dic))
            .map(|r| r.k)
    }

    /// Candidate K minimizing WAIC.
    pub fn best_waic(&self) -> Option<usize> {
        self.rows
            .iter()
            .min_by(|a, b| a.waic.total_cmp(&b.waic))
            .map(|r| r.k)
    }

    /// `criteria.csv`: `K,DIC,p_DIC,WAIC,p_WAIC,n_samples,seconds`.
    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["K", "DIC", "p_DIC", "WAIC", "p_WAIC", "n_samples", "seconds"])?;
        for r in &self.rows {
            wtr.write_record(&[
                r.k.to_string(),
                r.dic.to_string(),
                r.p_dic.to_string(),
                r.waic.to_string(),
                r.p_waic.to_string(),
                r.n_samples.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn pooled_states<'a>(chains: &'a [ChainOutput]) -> Result<Vec<&'a LatentState>> {
    let pooled: Vec<&LatentState> = chains.iter().flat_map(|c| c.samples.iter()).collect();
    if pooled.len() < 2 {
        return Err(Error::NotEnough {
            what: "posterior samples for information criteria",
            need: 2,
            got: pooled.len(),
        });
    }
    Ok(pooled)
}

/// Per-cell Bernoulli log probability at one state.
#[inline]
fn cell_log_prob(
    state: &LatentState,
    x: &DyadCovariates,
    i: usize,
    ip: usize,
    j: usize,
    obs: u8,
) -> f64 {
    let m = state.predictor(x, i, ip, j);
    if obs == 1 {
        log_phi(m)
    } else {
        log_phi(-m)
    }
}

/// Deviance information criterion: `(DIC, p_DIC)`.
pub fn dic(chains: &[ChainOutput], y: &CssTensor, x: &DyadCovariates) -> Result<(f64, f64)> {
    let pooled = pooled_states(chains)?;
    let s = pooled.len() as f64;
    // Plug-in state from aligned continuous blocks.
    let aligned = align_chains(chains)?;
    let first = &aligned.samples[0];
    let mut plugin = LatentState::neutral(first.n_actors, first.k, first.p);
    for sample in &aligned.samples {
        for (slot, val) in plugin.beta.iter_mut().zip(&sample.beta) {
            *slot += val;
        }
        for (slot, val) in plugin.u.iter_mut().zip(&sample.u) {
            *slot += val;
        }
        for (slot, val) in plugin.v.iter_mut().zip(&sample.v) {
            *slot += val;
        }
    }
    for block in [&mut plugin.beta, &mut plugin.u, &mut plugin.v] {
        for slot in block.iter_mut() {
            *slot /= s;
        }
    }
    let plugin_ll = log_likelihood(y, x, &plugin)?;
    let mean_ll = pooled
        .iter()
        .map(|st| log_likelihood(y, x, st))
        .sum::<Result<f64>>()?
        / s;
    let p_dic = 2.0 * (plugin_ll - mean_ll);
    Ok((-2.0 * plugin_ll + 2.0 * p_dic, p_dic))
}

/// Widely applicable information criterion: `(WAIC, p_WAIC)`.
pub fn waic(chains: &[ChainOutput], y: &CssTensor, x: &DyadCovariates) -> Result<(f64, f64)> {
    let pooled = pooled_states(chains)?;
    let s = pooled.len() as f64;
    let n = y.n_actors();
    let first = pooled[0];
    if first.n_actors != n || first.p != x.p() {
        return Err(Error::DimensionMismatch(
            "samples, tensor, and covariates disagree".into(),
        ));
    }
    let n_cells = n * n * (n - 1);
    // Streaming log-sum-exp per cell: running max, rescaled exponent sum,
    // and plain sum of the log probabilities.
    let mut run_max = vec![f64::NEG_INFINITY; n_cells];
    let mut sum_exp = vec![0.0f64; n_cells];
    let mut sum_log = vec![0.0f64; n_cells];
    for state in &pooled {
        for (c, (i, ip, j, obs)) in y.cells().enumerate() {
            let l = cell_log_prob(state, x, i, ip, j, obs);
            sum_log[c] += l;
            if l <= run_max[c] {
                sum_exp[c] += (l - run_max[c]).exp();
            } else {
                sum_exp[c] = sum_exp[c] * (run_max[c] - l).exp() + 1.0;
                run_max[c] = l;
            }
        }
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for c in 0..n_cells {
        let log_mean = run_max[c] + sum_exp[c].ln() - s.ln();
        debug_assert!(log_mean <= 1e-12, "lppd term must be ≤ 0");
        lppd += log_mean;
        p_waic += 2.0 * (log_mean - sum_log[c] / s);
    }
    Ok((-2.0 * lppd + 2.0 * p_waic, p_waic))
}

/// Fit a fresh chain set per candidate K (hyperparameters re-elicited each
/// time, seeds derived from the base seed) and tabulate both criteria.
pub fn k_sweep(
    y: &CssTensor,
    x: &DyadCovariates,
    k_list: &[usize],
    base_config: &ChainConfig,
) -> Result<CriterionReport> {
    if k_list.is_empty() {
        return Err(Error::NotEnough {
            what: "candidate latent dimensions",
            need: 1,
            got: 0,
        });
    }
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let hyper = elicit_hyperparameters(k, x.p())?;
        let mut config = base_config.clone();
        config.k = k;
        config.rng_seed = derive_seed(base_config.rng_seed, k as u64);
        let chains = run_chains(y, x, &hyper, &config)?;
        let seconds = chains.iter().map(|c| c.seconds).sum();
        let n_samples: usize = chains.iter().map(|c| c.samples.len()).sum();
        let (dic_val, p_dic) = dic(&chains, y, x)?;
        let (waic_val, p_waic) = waic(&chains, y, x)?;
        let pooled = pooled_states(&chains)?;
        let mean_loglik = pooled
            .iter()
            .map(|st| log_likelihood(y, x, st))
            .sum::<Result<f64>>()?
            / pooled.len() as f64;
        let plugin_loglik = mean_loglik + 0.5 * p_dic; // p_DIC = 2·(plugin − mean)
        rows.push(CriterionRow {
            k,
            dic: dic_val,
            p_dic,
            waic: waic_val,
            p_waic,
            mean_loglik,
            plugin_loglik,
            n_samples,
            seconds,
        });
    }
    Ok(CriterionReport { rows })
}
