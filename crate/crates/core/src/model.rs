//! Model parameters, hyperparameter elicitation, and density evaluation.
//!
//! The observation model for a CSS tensor is, per cell,
//!
//! ```text
//! y[i, i', j] | θ ~ Bernoulli(θ[i, i', j]),   θ = Φ(x[i, i']ᵀ β_j + u[i, j]ᵀ v[i', j])
//! ```
//!
//! with the hierarchy
//!
//! ```text
//! u[i, j] ~ N(η_i, σ_u² I_K)                       j ≠ i
//! u[i, i] ~ γ_i N(η_i, σ_u² I_K) + (1−γ_i) N(0, τ_u² I_K)
//! v[i, j], v[i, i], ξ_i          symmetrically with σ_v², τ_v², ζ_i
//! η_i, ζ_i ~ N(0, κ² I_K)        (κ² fixed by elicitation)
//! β_j ~ N(ν, ς² I_p),  ν ~ N(0, ω² I_p)
//! γ_i, ξ_i ~ Bernoulli(ψ),  ψ ~ Beta(c, d)
//! σ_u², σ_v² ~ IG(a_σ, b_σ);  τ_u², τ_v² ~ IG(a_τ, b_τ);  ς² ~ IG(a_ς, b_ς)
//! ```
//!
//! Elicitation splits the prior variance of the linear predictor equally
//! between the regression and bilinear parts: `ω² = b_ς = 1/4` and
//! `κ² = b_σ = b_τ = 1/√(8K)`, which makes the marginal predictor variance
//! `(ω² + b_ς) + K(κ² + b)²` equal 1 exactly.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Beta as BetaDist, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::css_data::{validate_permutation, CssTensor, DyadCovariates};
use crate::error::{Error, Result};
use crate::probit::{log_phi, phi};

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

/// Prior hyperparameters; see the module docs for the roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    /// Beta prior shapes for ψ.
    pub c: f64,
    pub d: f64,
    /// Inverse-gamma shape/scale for σ_u², σ_v².
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Inverse-gamma shape/scale for τ_u², τ_v².
    pub a_tau: f64,
    pub b_tau: f64,
    /// Inverse-gamma shape/scale for ς².
    pub a_varsigma: f64,
    pub b_varsigma: f64,
    /// Prior variance of each ν coordinate.
    pub omega2: f64,
    /// Fixed prior variance of η, ζ coordinates.
    pub kappa2: f64,
    /// Latent dimension K.
    pub k: usize,
    /// Covariate dimension p (including the intercept).
    pub p: usize,
}

/// Default elicitation: uniform ψ prior, second-moment-free inverse gammas
/// with unit-information scales, and the equal-split variance rule.
pub fn elicit_hyperparameters(k: usize, p: usize) -> Result<Hyperparameters> {
    if k < 1 {
        return Err(Error::InvalidArgument("latent dimension K must be ≥ 1".into()));
    }
    if p < 1 {
        return Err(Error::InvalidArgument("covariate dimension p must be ≥ 1".into()));
    }
    let b = 1.0 / (8.0 * k as f64).sqrt();
    Ok(Hyperparameters {
        c: 1.0,
        d: 1.0,
        a_sigma: 2.0,
        b_sigma: b,
        a_tau: 2.0,
        b_tau: b,
        a_varsigma: 2.0,
        b_varsigma: 0.25,
        omega2: 0.25,
        kappa2: b,
        k,
        p,
    })
}

impl Hyperparameters {
    /// The marginal prior variance of the linear predictor,
    /// `(ω² + b_ς) + K(κ² + b_σ)²`; elicited instances return 1.
    pub fn predictor_prior_variance(&self) -> f64 {
        let bilinear = self.kappa2 + self.b_sigma;
        (self.omega2 + self.b_varsigma) + self.k as f64 * bilinear * bilinear
    }

    /// Check positivity of every shape/scale/variance entry.
    pub fn validate(&self) -> Result<()> {
        for (what, value) in [
            ("beta shape c", self.c),
            ("beta shape d", self.d),
            ("a_sigma", self.a_sigma),
            ("b_sigma", self.b_sigma),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("a_varsigma", self.a_varsigma),
            ("b_varsigma", self.b_varsigma),
            ("omega2", self.omega2),
            ("kappa2", self.kappa2),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "hyperparameter {what} must be strictly positive, got {value}"
                )));
            }
        }
        if self.k < 1 || self.p < 1 {
            return Err(Error::InvalidArgument("K and p must be ≥ 1".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// LatentState
// ---------------------------------------------------------------------------

/// Every model parameter, plus the optional probit augmentation variables.
///
/// Flat storage layouts (0-based internally):
/// * `beta[j·p + c]` — perceiver `j`'s regression vector;
/// * `u[(j·I + i)·K + d]`, `v` likewise — perceiver-major latent positions,
///   so a perceiver's slice is contiguous;
/// * `eta[i·K + d]`, `zeta` likewise — consensus positions;
/// * `z[(j·I + i)·I + i']` — augmentation variables aligned with the tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub n_actors: usize,
    pub k: usize,
    pub p: usize,
    pub beta: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub eta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub gamma: Vec<u8>,
    pub xi: Vec<u8>,
    pub sigma_u2: f64,
    pub sigma_v2: f64,
    pub tau_u2: f64,
    pub tau_v2: f64,
    pub nu: Vec<f64>,
    pub varsigma2: f64,
    pub psi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
}

impl LatentState {
    /// A dimension-consistent state with all positions at the origin, unit
    /// variances, ψ = ½, and all agreement indicators set.
    pub fn neutral(n_actors: usize, k: usize, p: usize) -> Self {
        Self {
            n_actors,
            k,
            p,
            beta: vec![0.0; n_actors * p],
            u: vec![0.0; n_actors * n_actors * k],
            v: vec![0.0; n_actors * n_actors * k],
            eta: vec![0.0; n_actors * k],
            zeta: vec![0.0; n_actors * k],
            gamma: vec![1; n_actors],
            xi: vec![1; n_actors],
            sigma_u2: 1.0,
            sigma_v2: 1.0,
            tau_u2: 1.0,
            tau_v2: 1.0,
            nu: vec![0.0; p],
            varsigma2: 1.0,
            psi: 0.5,
            z: None,
        }
    }

    #[inline]
    pub fn beta(&self, j: usize) -> &[f64] {
        &self.beta[j * self.p..(j + 1) * self.p]
    }

    #[inline]
    pub fn beta_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.beta[j * self.p..(j + 1) * self.p]
    }

    #[inline]
    pub fn u(&self, i: usize, j: usize) -> &[f64] {
        let o = (j * self.n_actors + i) * self.k;
        &self.u[o..o + self.k]
    }

    #[inline]
    pub fn u_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = (j * self.n_actors + i) * self.k;
        &mut self.u[o..o + self.k]
    }

    #[inline]
    pub fn v(&self, i: usize, j: usize) -> &[f64] {
        let o = (j * self.n_actors + i) * self.k;
        &self.v[o..o + self.k]
    }

    #[inline]
    pub fn v_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = (j * self.n_actors + i) * self.k;
        &mut self.v[o..o + self.k]
    }

    #[inline]
    pub fn eta(&self, i: usize) -> &[f64] {
        &self.eta[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn eta_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.eta[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn zeta(&self, i: usize) -> &[f64] {
        &self.zeta[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn zeta_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.zeta[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn z_index(&self, i: usize, ip: usize, j: usize) -> usize {
        (j * self.n_actors + i) * self.n_actors + ip
    }

    /// Linear predictor `x[i,i']ᵀ β_j + u[i,j]ᵀ v[i',j]`.
    #[inline]
    pub fn predictor(&self, x: &DyadCovariates, i: usize, ip: usize, j: usize) -> f64 {
        dot(x.x(i, ip), self.beta(j)) + dot(self.u(i, j), self.v(ip, j))
    }

    /// Check array lengths against the declared dimensions.
    pub fn validate_dims(&self) -> Result<()> {
        let (n, k, p) = (self.n_actors, self.k, self.p);
        let checks = [
            ("beta", self.beta.len(), n * p),
            ("u", self.u.len(), n * n * k),
            ("v", self.v.len(), n * n * k),
            ("eta", self.eta.len(), n * k),
            ("zeta", self.zeta.len(), n * k),
            ("gamma", self.gamma.len(), n),
            ("xi", self.xi.len(), n),
            ("nu", self.nu.len(), p),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if let Some(z) = &self.z {
            if z.len() != n * n * n {
                return Err(Error::DimensionMismatch(format!(
                    "z has {} entries, expected {}",
                    z.len(),
                    n * n * n
                )));
            }
        }
        Ok(())
    }

    /// Check value-level invariants: positive variances, ψ ∈ (0,1), binary
    /// indicators.
    pub fn validate_values(&self) -> Result<()> {
        for (what, value) in [
            ("sigma_u2", self.sigma_u2),
            ("sigma_v2", self.sigma_v2),
            ("tau_u2", self.tau_u2),
            ("tau_v2", self.tau_v2),
            ("varsigma2", self.varsigma2),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "{what} must be strictly positive, got {value}"
                )));
            }
        }
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "psi must lie in (0,1), got {}",
                self.psi
            )));
        }
        if self.gamma.iter().chain(self.xi.iter()).any(|&g| g > 1) {
            return Err(Error::InvalidArgument(
                "agreement indicators must be 0 or 1".into(),
            ));
        }
        Ok(())
    }

    /// Verify the augmentation sign convention `z ≥ 0 ⇔ y = 1` against a
    /// tensor. States without `z` pass trivially.
    pub fn check_z_signs(&self, y: &CssTensor) -> Result<()> {
        let Some(z) = &self.z else { return Ok(()) };
        for (i, ip, j, obs) in y.cells() {
            let zv = z[self.z_index(i, ip, j)];
            let consistent = if obs == 1 { zv >= 0.0 } else { zv < 0.0 };
            if !consistent {
                return Err(Error::InvalidArgument(format!(
                    "augmentation sign mismatch at cell ({}, {}, {}): z = {zv}, y = {obs}",
                    i + 1,
                    ip + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// Copy of the state without the augmentation block (retained samples).
    pub fn without_z(&self) -> LatentState {
        let mut s = self.clone();
        s.z = None;
        s
    }

    /// Relabel actors: block `i` of the result is block `perm[i]` of `self`.
    pub fn permute_actors(&self, perm: &[usize]) -> Result<LatentState> {
        let n = self.n_actors;
        validate_permutation(perm, n)?;
        let mut out = self.clone();
        for j in 0..n {
            out.beta_mut(j).copy_from_slice(self.beta(perm[j]));
        }
        for i in 0..n {
            out.eta_mut(i).copy_from_slice(self.eta(perm[i]));
            out.zeta_mut(i).copy_from_slice(self.zeta(perm[i]));
            out.gamma[i] = self.gamma[perm[i]];
            out.xi[i] = self.xi[perm[i]];
            for j in 0..n {
                out.u_mut(i, j).copy_from_slice(self.u(perm[i], perm[j]));
                out.v_mut(i, j).copy_from_slice(self.v(perm[i], perm[j]));
            }
        }
        if let Some(z) = &self.z {
            let mut zp = vec![0.0; z.len()];
            for j in 0..n {
                for i in 0..n {
                    for ip in 0..n {
                        zp[(j * n + i) * n + ip] =
                            z[(perm[j] * n + perm[i]) * n + perm[ip]];
                    }
                }
            }
            out.z = Some(zp);
        }
        Ok(out)
    }

    // -- line-oriented text serialization ------------------------------------

    /// Write the flat key-value text form (1-based block indices, matching
    /// the on-disk CSS formats). The augmentation block is omitted: a resumed
    /// sweep regenerates it from the data before first use.
    pub fn write_text(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "cognet-state v1")?;
        writeln!(w, "n_actors {}", self.n_actors)?;
        writeln!(w, "k {}", self.k)?;
        writeln!(w, "p {}", self.p)?;
        for (name, value) in [
            ("sigma_u2", self.sigma_u2),
            ("sigma_v2", self.sigma_v2),
            ("tau_u2", self.tau_u2),
            ("tau_v2", self.tau_v2),
            ("varsigma2", self.varsigma2),
            ("psi", self.psi),
        ] {
            writeln!(w, "{name} {value}")?;
        }
        writeln!(w, "nu {}", join(&self.nu))?;
        writeln!(
            w,
            "gamma {}",
            self.gamma.iter().map(u8::to_string).collect::<Vec<_>>().join(" ")
        )?;
        writeln!(
            w,
            "xi {}",
            self.xi.iter().map(u8::to_string).collect::<Vec<_>>().join(" ")
        )?;
        for j in 0..self.n_actors {
            writeln!(w, "beta/{} {}", j + 1, join(self.beta(j)))?;
        }
        for i in 0..self.n_actors {
            writeln!(w, "eta/{} {}", i + 1, join(self.eta(i)))?;
        }
        for i in 0..self.n_actors {
            writeln!(w, "zeta/{} {}", i + 1, join(self.zeta(i)))?;
        }
        for i in 0..self.n_actors {
            for j in 0..self.n_actors {
                writeln!(w, "u/{}/{} {}", i + 1, j + 1, join(self.u(i, j)))?;
            }
        }
        for i in 0..self.n_actors {
            for j in 0..self.n_actors {
                writeln!(w, "v/{}/{} {}", i + 1, j + 1, join(self.v(i, j)))?;
            }
        }
        Ok(())
    }

    /// Parse the text form written by [`LatentState::write_text`].
    pub fn read_text(r: impl BufRead) -> Result<LatentState> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "cognet-state v1" {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected 'cognet-state v1' header, got '{header}'"),
            });
        }
        let mut dims = [None::<usize>; 3];
        let mut entries: Vec<(String, Vec<String>)> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace().map(str::to_string);
            let key = parts.next().ok_or(Error::Parse {
                line: lineno,
                message: "empty line".into(),
            })?;
            let rest: Vec<String> = parts.collect();
            match key.as_str() {
                "n_actors" | "k" | "p" => {
                    let slot = match key.as_str() {
                        "n_actors" => 0,
                        "k" => 1,
                        _ => 2,
                    };
                    let value = rest.first().and_then(|s| s.parse().ok()).ok_or(Error::Parse {
                        line: lineno,
                        message: format!("bad {key} line"),
                    })?;
                    dims[slot] = Some(value);
                }
                _ => entries.push((key, rest)),
            }
        }
        let (Some(n), Some(k), Some(p)) = (dims[0], dims[1], dims[2]) else {
            return Err(Error::Parse {
                line: 0,
                message: "missing n_actors/k/p declarations".into(),
            });
        };
        let mut state = LatentState::neutral(n, k, p);
        let mut seen = std::collections::HashSet::new();
        let parse_f64s = |vals: &[String], want: usize, key: &str| -> Result<Vec<f64>> {
            if vals.len() != want {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("{key}: expected {want} values, got {}", vals.len()),
                });
            }
            vals.iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line: 0,
                        message: format!("{key}: '{s}' is not a number"),
                    })
                })
                .collect()
        };
        for (key, vals) in &entries {
            if !seen.insert(key.clone()) {
                return Err(Error::Parse {
                    line: 0,
                    message: format!("duplicate block '{key}'"),
                });
            }
            let mut parts = key.split('/');
            let base = parts.next().unwrap_or_default();
            let idx1: Option<usize> = parts.next().map(|s| s.parse().unwrap_or(0));
            let idx2: Option<usize> = parts.next().map(|s| s.parse().unwrap_or(0));
            let bounds = |idx: Option<usize>| -> Result<usize> {
                match idx {
                    Some(i) if (1..=n).contains(&i) => Ok(i - 1),
                    _ => Err(Error::Parse {
                        line: 0,
                        message: format!("block '{key}' has an out-of-range index"),
                    }),
                }
            };
            match base {
                "sigma_u2" => state.sigma_u2 = parse_f64s(vals, 1, key)?[0],
                "sigma_v2" => state.sigma_v2 = parse_f64s(vals, 1, key)?[0],
                "tau_u2" => state.tau_u2 = parse_f64s(vals, 1, key)?[0],
                "tau_v2" => state.tau_v2 = parse_f64s(vals, 1, key)?[0],
                "varsigma2" => state.varsigma2 = parse_f64s(vals, 1, key)?[0],
                "psi" => state.psi = parse_f64s(vals, 1, key)?[0],
                "nu" => state.nu = parse_f64s(vals, p, key)?,
                "gamma" | "xi" => {
                    let parsed = parse_f64s(vals, n, key)?;
                    let bits: Vec<u8> = parsed.iter().map(|&x| (x != 0.0) as u8).collect();
                    if base == "gamma" {
                        state.gamma = bits;
                    } else {
                        state.xi = bits;
                    }
                }
                "beta" => {
                    let j = bounds(idx1)?;
                    state.beta_mut(j).copy_from_slice(&parse_f64s(vals, p, key)?);
                }
                "eta" => {
                    let i = bounds(idx1)?;
                    state.eta_mut(i).copy_from_slice(&parse_f64s(vals, k, key)?);
                }
                "zeta" => {
                    let i = bounds(idx1)?;
                    state.zeta_mut(i).copy_from_slice(&parse_f64s(vals, k, key)?);
                }
                "u" | "v" => {
                    let i = bounds(idx1)?;
                    let j = bounds(idx2)?;
                    let parsed = parse_f64s(vals, k, key)?;
                    if base == "u" {
                        state.u_mut(i, j).copy_from_slice(&parsed);
                    } else {
                        state.v_mut(i, j).copy_from_slice(&parsed);
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("unknown block '{other}'"),
                    })
                }
            }
        }
        let expected_blocks = 6 + 3 + n * 3 + 2 * n * n;
        if entries.len() != expected_blocks {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "expected {expected_blocks} blocks, found {}",
                    entries.len()
                ),
            });
        }
        state.validate_dims()?;
        Ok(state)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate_state_for(y: &CssTensor, x: &DyadCovariates, state: &LatentState) -> Result<()> {
    state.validate_dims()?;
    if state.n_actors != y.n_actors() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} actors, tensor has {}",
            state.n_actors,
            y.n_actors()
        )));
    }
    if x.n_actors() != y.n_actors() {
        return Err(Error::DimensionMismatch(format!(
            "covariates cover {} actors, tensor has {}",
            x.n_actors(),
            y.n_actors()
        )));
    }
    if x.p() != state.p {
        return Err(Error::DimensionMismatch(format!(
            "covariates have p = {}, state has p = {}",
            x.p(),
            state.p
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Density evaluation
// ---------------------------------------------------------------------------

/// `Φ(xᵀβ_j + uᵀv)` — the per-cell interaction probability.
pub fn interaction_probability(beta_j: &[f64], x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
    if beta_j.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} coordinates, x has {}",
            beta_j.len(),
            x.len()
        )));
    }
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} coordinates, v has {}",
            u.len(),
            v.len()
        )));
    }
    Ok(phi(dot(x, beta_j) + dot(u, v)))
}

/// Bernoulli log likelihood of the whole tensor, summed over all perceivers
/// and ordered dyads, evaluated through log-Φ for stability.
pub fn log_likelihood(y: &CssTensor, x: &DyadCovariates, state: &LatentState) -> Result<f64> {
    validate_state_for(y, x, state)?;
    let mut total = 0.0;
    for (i, ip, j, obs) in y.cells() {
        let m = state.predictor(x, i, ip, j);
        total += if obs == 1 { log_phi(m) } else { log_phi(-m) };
    }
    Ok(total)
}

/// Multivariate spherical Gaussian log density `N(x; mean, var·I)`.
fn log_gaussian_vec(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let k = x.len() as f64;
    let ss: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    -0.5 * ss / var - 0.5 * k * (2.0 * std::f64::consts::PI * var).ln()
}

fn log_gaussian_vec_origin(x: &[f64], var: f64) -> f64 {
    let k = x.len() as f64;
    let ss: f64 = x.iter().map(|a| a * a).sum();
    -0.5 * ss / var - 0.5 * k * (2.0 * std::f64::consts::PI * var).ln()
}

/// Inverse-gamma log density with shape `a` and scale `b`.
pub(crate) fn log_inv_gamma(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - libm::lgamma(a) - (a + 1.0) * x.ln() - b / x
}

/// Beta log density.
pub(crate) fn log_beta(x: f64, c: f64, d: f64) -> f64 {
    let ln_b = libm::lgamma(c) + libm::lgamma(d) - libm::lgamma(c + d);
    (c - 1.0) * x.ln() + (d - 1.0) * (1.0 - x).ln() - ln_b
}

/// Log likelihood plus the log prior density of every parameter block.
pub fn log_joint(
    y: &CssTensor,
    x: &DyadCovariates,
    state: &LatentState,
    hyper: &Hyperparameters,
) -> Result<f64> {
    validate_state_for(y, x, state)?;
    hyper.validate()?;
    state.validate_values()?;
    if state.k != hyper.k || state.p != hyper.p {
        return Err(Error::DimensionMismatch(format!(
            "state is (K = {}, p = {}), hyperparameters are (K = {}, p = {})",
            state.k, state.p, hyper.k, hyper.p
        )));
    }
    let n = state.n_actors;
    let mut total = log_likelihood(y, x, state)?;

    // Latent positions around (or away from) the consensus.
    for i in 0..n {
        for j in 0..n {
            if j != i {
                total += log_gaussian_vec(state.u(i, j), state.eta(i), state.sigma_u2);
                total += log_gaussian_vec(state.v(i, j), state.zeta(i), state.sigma_v2);
            }
        }
        total += if state.gamma[i] == 1 {
            log_gaussian_vec(state.u(i, i), state.eta(i), state.sigma_u2)
        } else {
            log_gaussian_vec_origin(state.u(i, i), state.tau_u2)
        };
        total += if state.xi[i] == 1 {
            log_gaussian_vec(state.v(i, i), state.zeta(i), state.sigma_v2)
        } else {
            log_gaussian_vec_origin(state.v(i, i), state.tau_v2)
        };
        total += log_gaussian_vec_origin(state.eta(i), hyper.kappa2);
        total += log_gaussian_vec_origin(state.zeta(i), hyper.kappa2);
        // Agreement indicators.
        let lp1 = state.psi.ln();
        let lp0 = (1.0 - state.psi).ln();
        total += if state.gamma[i] == 1 { lp1 } else { lp0 };
        total += if state.xi[i] == 1 { lp1 } else { lp0 };
    }

    // Regression block.
    for j in 0..n {
        total += log_gaussian_vec(state.beta(j), &state.nu, state.varsigma2);
    }
    total += log_gaussian_vec_origin(&state.nu, hyper.omega2);

    // Variances and ψ.
    total += log_inv_gamma(state.sigma_u2, hyper.a_sigma, hyper.b_sigma);
    total += log_inv_gamma(state.sigma_v2, hyper.a_sigma, hyper.b_sigma);
    total += log_inv_gamma(state.tau_u2, hyper.a_tau, hyper.b_tau);
    total += log_inv_gamma(state.tau_v2, hyper.a_tau, hyper.b_tau);
    total += log_inv_gamma(state.varsigma2, hyper.a_varsigma, hyper.b_varsigma);
    total += log_beta(state.psi, hyper.c, hyper.d);

    Ok(total)
}

// ---------------------------------------------------------------------------
// Prior simulation helpers
// ---------------------------------------------------------------------------

/// Gaussian draw tolerating a degenerate (zero) variance.
pub(crate) fn sample_gaussian<R: Rng + ?Sized>(mean: f64, var: f64, rng: &mut R) -> f64 {
    if var == 0.0 {
        return mean;
    }
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

/// Inverse-gamma draw (shape `a`, scale `b`); `b = 0` degenerates to 0.
pub(crate) fn sample_inv_gamma<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    // X ~ IG(a, b)  ⇔  1/X ~ Gamma(shape a, rate b) = Gamma(shape a, scale 1/b).
    let g = Gamma::new(a, 1.0 / b).expect("valid gamma parameters");
    1.0 / g.sample(rng)
}

/// Beta draw.
pub(crate) fn sample_beta<R: Rng + ?Sized>(c: f64, d: f64, rng: &mut R) -> f64 {
    BetaDist::new(c, d).expect("valid beta parameters").sample(rng)
}

/// Draws from the marginal prior of the linear predictor `β₀ + uᵀv` for a
/// covariate-free dyad seen by a third-party perceiver: ν₀, ς², β₀, η, ζ,
/// σ_u², σ_v², then u, v.
///
/// Degenerate hyperparameters (zero variances/scales) are tolerated so the
/// collapsed-predictor sanity case can be simulated.
pub fn prior_predictive_predictor<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_draws < 1 {
        return Err(Error::NotEnough {
            what: "prior predictive draws",
            need: 1,
            got: 0,
        });
    }
    let k = hyper.k;
    let mut out = Vec::with_capacity(n_draws);
    let mut u = vec![0.0; k];
    let mut v = vec![0.0; k];
    for _ in 0..n_draws {
        let nu0 = sample_gaussian(0.0, hyper.omega2, rng);
        let varsigma2 = sample_inv_gamma(hyper.a_varsigma, hyper.b_varsigma, rng);
        let beta0 = sample_gaussian(nu0, varsigma2, rng);
        let sigma_u2 = sample_inv_gamma(hyper.a_sigma, hyper.b_sigma, rng);
        let sigma_v2 = sample_inv_gamma(hyper.a_sigma, hyper.b_sigma, rng);
        let mut bilinear = 0.0;
        for d in 0..k {
            let eta_d = sample_gaussian(0.0, hyper.kappa2, rng);
            let zeta_d = sample_gaussian(0.0, hyper.kappa2, rng);
            u[d] = sample_gaussian(eta_d, sigma_u2, rng);
            v[d] = sample_gaussian(zeta_d, sigma_v2, rng);
            bilinear += u[d] * v[d];
        }
        out.push(beta0 + bilinear);
    }
    Ok(out)
}

/// Draws from the marginal prior of θ: `Φ` applied to
/// [`prior_predictive_predictor`] draws.
pub fn prior_predictive_theta<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    n_draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let preds = prior_predictive_predictor(hyper, n_draws, rng)?;
    Ok(preds.into_iter().map(phi).collect())
}
