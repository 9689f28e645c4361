//! Standard-normal CDF, log-CDF, quantile, and truncated-normal sampling.
//!
//! The probit link and its data augmentation step are the numerical core of
//! the sampler, so these routines favour accuracy in the far tails:
//!
//! * [`phi`] evaluates Φ through the complementary error function (libm's
//!   fdlibm port, < 1 ulp), accurate across the whole real line;
//! * [`log_phi`] switches to an asymptotic expansion of the Mills ratio once
//!   Φ(x) underflows, keeping log-likelihoods finite for any finite predictor;
//! * [`inverse_phi`] polishes a rational approximation with Newton steps on
//!   the exact CDF;
//! * [`sample_truncated_normal`] uses plain rejection around the mode and the
//!   exponential envelope of Robert (1995) in the tail, so augmentation stays
//!   exact even when |mean|/sd is large.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74; // ln √(2π)

/// Where `log_phi` switches from direct evaluation to the tail expansion.
/// Φ(−37) ≈ 5.7e−300 is still representable, so the direct branch is exact
/// there; much beyond it the logarithm's argument would underflow.
const LOG_PHI_TAIL_CUT: f64 = -37.0;

/// Standard normal density φ(x).
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// log φ(x).
pub fn log_norm_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF Φ(x) = ½ erfc(−x/√2).
pub fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// log Φ(x), finite for every finite `x`.
///
/// For `x` below −37 the direct logarithm would underflow, so the asymptotic
/// expansion Φ(x) ≈ φ(x)/|x| · (1 − 1/x² + 3/x⁴ − 15/x⁶) is used instead.
pub fn log_phi(x: f64) -> f64 {
    if x >= LOG_PHI_TAIL_CUT {
        phi(x).ln()
    } else {
        let inv_x2 = 1.0 / (x * x);
        let series = 1.0 - inv_x2 * (1.0 - inv_x2 * (3.0 - 15.0 * inv_x2));
        log_norm_pdf(x) - (-x).ln() + series.ln()
    }
}

/// Standard normal quantile Φ⁻¹(p) for `p` in (0, 1).
///
/// A rational approximation (Acklam) supplies the starting point; two Newton
/// steps against the exact CDF bring the result to full double precision.
/// Upper-tail arguments are solved through the complement so the Newton
/// residual never suffers cancellation against a CDF value near 1; what
/// remains is the inherent ~ulp(p)/φ(x) limit of representing tail
/// probabilities as doubles.
pub fn inverse_phi(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile argument must lie in (0, 1), got {p}"
        )));
    }
    if p > 0.5 {
        Ok(-inverse_phi_lower(1.0 - p))
    } else {
        Ok(inverse_phi_lower(p))
    }
}

/// Φ⁻¹ restricted to `p` in (0, ½], where Φ(x) − p is free of cancellation.
fn inverse_phi_lower(p: f64) -> f64 {
    let mut x = acklam_guess(p);
    for _ in 0..2 {
        let pdf = norm_pdf(x);
        if pdf < 1e-290 {
            break; // beyond ±36 sd the guess is already as good as φ allows
        }
        x -= (phi(x) - p) / pdf;
    }
    x
}

/// Acklam's rational approximation to Φ⁻¹, |relative error| < 1.2e−9.
fn acklam_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |p_small: f64| {
        let q = (-2.0 * p_small.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// Truncation side for [`sample_truncated_normal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationSide {
    /// Support `[0, ∞)`.
    NonNegative,
    /// Support `(−∞, 0)`.
    Negative,
}

/// Draw from `N(mean, sd²)` restricted to the chosen side of zero.
///
/// Draws on the negative side are strictly `< 0` and draws on the
/// non-negative side are `≥ 0`, so augmentation variables always agree in
/// sign with the tie they encode. The exponential-envelope branch stays exact
/// for truncation points far beyond `|mean|/sd = 10`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    side: TruncationSide,
    rng: &mut R,
) -> Result<f64> {
    if !(sd > 0.0) {
        return Err(Error::NotPositive {
            what: "truncated normal sd",
            value: sd,
        });
    }
    if !mean.is_finite() {
        return Err(Error::NotFinite {
            what: "truncated normal mean",
            value: mean,
        });
    }
    match side {
        TruncationSide::NonNegative => {
            // z ≥ (0 − mean)/sd in standard units.
            let z = sample_std_lower_truncated((0.0 - mean) / sd, rng);
            Ok(mean + sd * z)
        }
        TruncationSide::Negative => {
            // By symmetry: −X with X ~ N(−mean, sd²) restricted to [0, ∞).
            let z = sample_std_lower_truncated(mean / sd, rng);
            let mut x = mean - sd * z;
            if x >= 0.0 {
                // Rounding can land exactly on 0; nudge into the open side.
                x = -f64::MIN_POSITIVE;
            }
            Ok(x)
        }
    }
}

/// Standard normal conditioned on `z ≥ a`.
fn sample_std_lower_truncated<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a <= 0.0 {
        // Acceptance probability 1 − Φ(a) ≥ ½ here.
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a {
                return z;
            }
        }
    } else {
        // Robert (1995): envelope a + Exp(α) with the optimal rate
        // α = (a + √(a² + 4))/2; acceptance probability exp(−(z − α)²/2).
        let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = a + e / alpha;
            let d = z - alpha;
            let u: f64 = rng.random();
            if u <= (-0.5 * d * d).exp() {
                return z;
            }
        }
    }
}
