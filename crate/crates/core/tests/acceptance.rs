//! End-to-end acceptance checks, one test per stated criterion.
//!
//! Each test prints a single `PASS criterion N: …` line on success (visible
//! with `cargo test --test acceptance -- --nocapture`) or panics with the
//! matching `FAIL criterion N: …` message. Criterion 8's observed-data half
//! needs the Krackhardt CSS files described in the README; when they are
//! absent it prints a SKIP line instead of faking a result.

use cognet::css_data::{
    build_dyadic_covariates, load_attributes, load_css, CovariateTerm, CssFormat, CssTensor,
    DyadCovariates,
};
use cognet::model::{
    elicit_hyperparameters, log_joint, log_likelihood, prior_predictive_predictor, LatentState,
};
use cognet::model_selection::{dic, k_sweep, waic};
use cognet::postprocess::{agreement_probabilities, align_samples, consensus_probabilities};
use cognet::ppc::ppc_run;
use cognet::probit::phi;
use cognet::sampler::{
    chain_rng, derive_seed, full_conditionals, run_chain, run_chains, ChainConfig, ChainOutput,
    InitMode,
};
use cognet::synth::{geweke_harness, simulate_css, true_consensus, SynthScenario};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn random_state(n: usize, k: usize, p: usize, rng: &mut ChaCha20Rng) -> LatentState {
    let mut s = LatentState::neutral(n, k, p);
    for block in [&mut s.beta, &mut s.u, &mut s.v, &mut s.eta, &mut s.zeta, &mut s.nu] {
        for e in block.iter_mut() {
            *e = rng.random_range(-1.2..1.2);
        }
    }
    s.sigma_u2 = rng.random_range(0.3..1.5);
    s.sigma_v2 = rng.random_range(0.3..1.5);
    s.tau_u2 = rng.random_range(0.3..1.5);
    s.tau_v2 = rng.random_range(0.3..1.5);
    s.varsigma2 = rng.random_range(0.3..1.5);
    s.psi = rng.random_range(0.2..0.8);
    for e in s.gamma.iter_mut().chain(s.xi.iter_mut()) {
        *e = u8::from(rng.random::<f64>() < 0.7);
    }
    s
}

fn random_tensor(n: usize, rng: &mut ChaCha20Rng) -> CssTensor {
    CssTensor::from_fn(n, None, |_, _, _| rng.random_range(0..=1u8)).unwrap()
}

fn random_orthogonal(k: usize, rng: &mut ChaCha20Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0f64));
    let qr = m.qr();
    qr.q()
}

fn rotate_state(state: &LatentState, r: &DMatrix<f64>) -> LatentState {
    let k = state.k;
    let mut out = state.clone();
    let rotate = |src: &[f64], dst: &mut [f64]| {
        for (d, slot) in dst.iter_mut().enumerate() {
            *slot = (0..k).map(|a| r[(d, a)] * src[a]).sum();
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

fn synthetic_chain(samples: Vec<LatentState>, k: usize) -> ChainOutput {
    let config = ChainConfig {
        n_iterations: samples.len(),
        burn_in: 0,
        thin: 1,
        n_chains: 1,
        rng_seed: 0,
        k,
        init: InitMode::PriorDraw,
    };
    ChainOutput {
        config,
        chain_index: 0,
        samples,
        loglik_trace: Vec::new(),
        logjoint_trace: Vec::new(),
        seconds: 0.0,
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    cov / (vx * vy).sqrt()
}

/// Type-7 quantile of an unsorted sample.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

// ---------------------------------------------------------------------------
// 1. Elicitation identity
// ---------------------------------------------------------------------------

#[test]
fn c01_elicitation_identity_holds_for_k_up_to_64() {
    let mut worst = 0.0f64;
    for k in 1..=64 {
        let hyper = elicit_hyperparameters(k, 1).unwrap();
        let gap = (hyper.predictor_prior_variance() - 1.0).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 1e-12,
            "FAIL criterion 1: prior predictor variance off by {gap:.3e} at K = {k}"
        );
    }
    println!("PASS criterion 1: (ω²+b_ς)+K(κ²+b)² = 1 for K = 1..64, max |gap| = {worst:.2e}");
}

// ---------------------------------------------------------------------------
// 2. Prior variance Monte Carlo
// ---------------------------------------------------------------------------

#[test]
fn c02_prior_predictor_moments_and_theta_shape() {
    let n_draws = 100_000usize;
    for k in [3usize, 6] {
        let hyper = elicit_hyperparameters(k, 1).unwrap();
        let mut rng = chain_rng(202_608, k);
        let preds = prior_predictive_predictor(&hyper, n_draws, &mut rng).unwrap();
        let n = n_draws as f64;
        let mean = preds.iter().sum::<f64>() / n;
        let var = preds.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
        assert!(
            (-0.02..=0.02).contains(&mean),
            "FAIL criterion 2: predictor mean {mean:.4} outside ±0.02 at K = {k}"
        );
        assert!(
            (0.97..=1.03).contains(&var),
            "FAIL criterion 2: predictor variance {var:.4} outside [0.97, 1.03] at K = {k}"
        );
        let thetas: Vec<f64> = preds.iter().map(|&p| phi(p)).collect();
        let mass = |lo: f64, hi: f64| thetas.iter().filter(|t| **t >= lo && **t < hi).count() as f64 / n;
        let (low, mid, high) = (mass(0.0, 0.05), mass(0.475, 0.525), mass(0.95, 1.01));
        for (name, m) in [("0", low), ("0.5", mid), ("1", high)] {
            assert!(
                m > 0.03,
                "FAIL criterion 2: only {m:.3} prior mass near θ = {name} at K = {k}"
            );
        }
        println!(
            "  criterion 2, K = {k}: predictor mean {mean:+.4}, variance {var:.4}; \
             θ mass near 0/0.5/1 = {low:.3}/{mid:.3}/{high:.3}"
        );
    }

    // Peakedness ranking: the bin-mass difference at θ ≈ 0.5 is a few parts
    // per thousand, so resolve it with a larger draw count and bin [0.4, 0.6).
    let mut central_mass = [0.0f64; 2];
    for (slot, k) in [3usize, 6].into_iter().enumerate() {
        let hyper = elicit_hyperparameters(k, 1).unwrap();
        let mut rng = chain_rng(202_609, k);
        let preds = prior_predictive_predictor(&hyper, 500_000, &mut rng).unwrap();
        central_mass[slot] = preds
            .iter()
            .filter(|p| {
                let t = phi(**p);
                (0.4..0.6).contains(&t)
            })
            .count() as f64
            / 500_000.0;
    }
    assert!(
        central_mass[1] < central_mass[0],
        "FAIL criterion 2: K = 6 central mass {:.4} not below K = 3 mass {:.4}",
        central_mass[1],
        central_mass[0]
    );
    println!(
        "PASS criterion 2: moments within bounds; K = 6 less peaked at 0.5 ({:.4} < {:.4})",
        central_mass[1], central_mass[0]
    );
}

// ---------------------------------------------------------------------------
// 3. Sampler correctness (joint-distribution test)
// ---------------------------------------------------------------------------

#[test]
fn c03_joint_distribution_test_passes_at_50k_iterations() {
    let hyper = elicit_hyperparameters(2, 1).unwrap();
    let report = geweke_harness(6, 2, &hyper, 50_000, &mut chain_rng(33, 0)).unwrap();
    for s in &report.stats {
        println!(
            "  criterion 3: {:<14} mc {:+.4}  sc {:+.4}  z {:+.2}",
            s.name, s.mc_mean, s.sc_mean, s.z
        );
        assert!(
            s.z.abs() < 4.0,
            "FAIL criterion 3: statistic {} has |z| = {:.2} ≥ 4",
            s.name,
            s.z.abs()
        );
    }
    println!(
        "PASS criterion 3: all {} statistics within |z| < 4 (max {:.2})",
        report.stats.len(),
        report.max_abs_z()
    );
}

// ---------------------------------------------------------------------------
// 4. Conditional oracles
// ---------------------------------------------------------------------------

#[test]
fn c04_full_conditionals_match_hand_arithmetic() {
    // γ update: K = 1, u_self = η = 1, σ² = τ² = 1, ψ = ½ ⇒ the log-density
    // gap is −½, so p₁ = 1/(1+e^{−1/2}) ≈ 0.6225.
    let p1 = full_conditionals::agreement_probability(&[1.0], &[1.0], 1.0, 1.0, 0.5);
    let expected = 1.0 / (1.0 + (-0.5f64).exp());
    assert!(
        (p1 - expected).abs() <= 1e-12,
        "FAIL criterion 4: γ probability {p1:.15} vs closed form {expected:.15}"
    );
    let p_eq = full_conditionals::agreement_probability(&[0.3, -0.4], &[0.0, 0.0], 0.7, 0.7, 0.5);
    assert!(
        (p_eq - 0.5).abs() <= 1e-12,
        "FAIL criterion 4: coinciding mixture components give p₁ = {p_eq}, want ½"
    );

    // ψ update: counts enter the Beta parameters exactly.
    let hyper1 = elicit_hyperparameters(2, 1).unwrap();
    let mut s3 = LatentState::neutral(3, 2, 1);
    s3.gamma = vec![0, 1, 0];
    s3.xi = vec![1, 0, 0];
    assert_eq!(
        full_conditionals::psi_params(&s3, &hyper1),
        (3.0, 5.0),
        "FAIL criterion 4: ψ Beta parameters ≠ (c+2, d+4)"
    );

    // Hand-built 2-actor instance, K = 1, p = 1.
    let hyper = elicit_hyperparameters(1, 1).unwrap();
    let x = DyadCovariates::intercept_only(2).unwrap();
    let mut s = LatentState::neutral(2, 1, 1);
    s.varsigma2 = 0.5;
    s.nu = vec![0.4];
    s.sigma_u2 = 0.25;
    s.tau_u2 = 0.5;
    s.gamma = vec![1, 0];
    s.beta_mut(0)[0] = 0.0;
    s.beta_mut(1)[0] = 0.1;
    s.eta_mut(0)[0] = 0.2;
    s.eta_mut(1)[0] = -0.1;
    s.u_mut(0, 0)[0] = 0.6;
    s.u_mut(1, 0)[0] = -0.2;
    s.u_mut(0, 1)[0] = 0.5;
    s.u_mut(1, 1)[0] = 0.3;
    s.v_mut(0, 0)[0] = 0.3;
    s.v_mut(1, 0)[0] = 0.5;
    s.v_mut(0, 1)[0] = 0.4;
    s.v_mut(1, 1)[0] = 0.7;
    let mut z = vec![0.0; 8];
    z[s.z_index(0, 1, 0)] = 0.8;
    z[s.z_index(1, 0, 0)] = -0.3;
    z[s.z_index(0, 1, 1)] = 0.9;
    z[s.z_index(1, 0, 1)] = 0.3;
    s.z = Some(z);

    // β_0 | rest: precision 1/ς² + 2 = 4; rhs = ν/ς² + (0.8−0.30) + (−0.3+0.06).
    let (rhs, prec) = full_conditionals::beta_block(&s, &x, 0).unwrap();
    assert!(
        (prec[(0, 0)] - 4.0).abs() <= 1e-9 && (rhs[0] - 1.06).abs() <= 1e-9,
        "FAIL criterion 4: β block gave rhs {} prec {}, want 1.06 and 4",
        rhs[0],
        prec[(0, 0)]
    );

    // u_{0,1} (third-party ⇒ slab): precision 1/σ² + v² = 4.49;
    // rhs = η₀/σ² + v·(z − β₁) = 0.8 + 0.7·0.8.
    let (rhs, prec) = full_conditionals::u_block(&s, &x, 0, 1).unwrap();
    assert!(
        (prec[(0, 0)] - 4.49).abs() <= 1e-9 && (rhs[0] - 1.36).abs() <= 1e-9,
        "FAIL criterion 4: slab u block gave rhs {} prec {}, want 1.36 and 4.49",
        rhs[0],
        prec[(0, 0)]
    );

    // u_{1,1} with γ₁ = 0 (spike): precision 1/τ² + v(0,1)² = 2.16;
    // rhs = 0 + 0.4·(0.3−0.1).
    let (rhs, prec) = full_conditionals::u_block(&s, &x, 1, 1).unwrap();
    assert!(
        (prec[(0, 0)] - 2.16).abs() <= 1e-9 && (rhs[0] - 0.08).abs() <= 1e-9,
        "FAIL criterion 4: spike u block gave rhs {} prec {}, want 0.08 and 2.16",
        rhs[0],
        prec[(0, 0)]
    );

    // Same block after flipping γ₁ to 1: slab prior takes over.
    s.gamma[1] = 1;
    let (rhs, prec) = full_conditionals::u_block(&s, &x, 1, 1).unwrap();
    assert!(
        (prec[(0, 0)] - 4.16).abs() <= 1e-9 && (rhs[0] + 0.32).abs() <= 1e-9,
        "FAIL criterion 4: γ-switched u block gave rhs {} prec {}, want −0.32 and 4.16",
        rhs[0],
        prec[(0, 0)]
    );
    s.gamma[1] = 0;

    // η₀: precision √8 + n₀/σ² with n₀ = 2; mean = (0.6+0.5)/0.25 / precision.
    let (mean, prec) = full_conditionals::eta_block(&s, &hyper, 0);
    let expected_prec = 8f64.sqrt() + 8.0;
    let expected_mean = 4.4 / expected_prec;
    assert!(
        (prec - expected_prec).abs() <= 1e-9 && (mean[0] - expected_mean).abs() <= 1e-9,
        "FAIL criterion 4: η block gave mean {} prec {prec}, want {expected_mean} and {expected_prec}",
        mean[0]
    );

    println!("PASS criterion 4: γ/ψ/Gaussian full conditionals match hand-computed oracles");
}

// ---------------------------------------------------------------------------
// 5. Procrustes alignment
// ---------------------------------------------------------------------------

#[test]
fn c05_alignment_recovers_rotations_and_preserves_likelihood() {
    let mut rng = chain_rng(55, 0);
    let base = random_state(5, 2, 1, &mut rng);
    let samples: Vec<LatentState> = (0..40)
        .map(|_| rotate_state(&base, &random_orthogonal(2, &mut rng)))
        .collect();
    let chain = synthetic_chain(samples.clone(), 2);
    let aligned = align_samples(&chain).unwrap();
    assert!(!aligned.any_degenerate(), "FAIL criterion 5: degenerate cross-product flagged");

    let reference = &aligned.samples[0];
    let mut worst = 0.0f64;
    for t in 1..aligned.samples.len() {
        let a = &aligned.samples[t];
        for (got, want) in [
            (&a.eta, &reference.eta),
            (&a.zeta, &reference.zeta),
            (&a.u, &reference.u),
            (&a.v, &reference.v),
        ] {
            for (g, w) in got.iter().zip(want.iter()) {
                worst = worst.max((g - w).abs());
            }
        }
    }
    assert!(
        worst < 1e-8,
        "FAIL criterion 5: rotated copies realigned with residual {worst:.3e} ≥ 1e-8"
    );

    let y = random_tensor(5, &mut rng);
    let x = DyadCovariates::intercept_only(5).unwrap();
    let mut worst_ll = 0.0f64;
    for t in 0..samples.len() {
        let raw = log_likelihood(&y, &x, &samples[t]).unwrap();
        let rot = log_likelihood(&y, &x, &aligned.samples[t]).unwrap();
        worst_ll = worst_ll.max((raw - rot).abs());
    }
    assert!(
        worst_ll < 1e-10,
        "FAIL criterion 5: alignment moved a log-likelihood by {worst_ll:.3e} ≥ 1e-10"
    );
    println!(
        "PASS criterion 5: rotation residual {worst:.2e} < 1e-8, \
         log-likelihood drift {worst_ll:.2e} < 1e-10"
    );
}

// ---------------------------------------------------------------------------
// 6. Criteria oracles
// ---------------------------------------------------------------------------

fn brute_phi(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

fn brute_loglik(y: &CssTensor, x: &DyadCovariates, s: &LatentState) -> f64 {
    let n = s.n_actors;
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            for ip in 0..n {
                if ip == i {
                    continue;
                }
                let mut pred = 0.0;
                for (c, xc) in x.x(i, ip).iter().enumerate() {
                    pred += xc * s.beta(j)[c];
                }
                for d in 0..s.k {
                    pred += s.u(i, j)[d] * s.v(ip, j)[d];
                }
                let theta = brute_phi(pred);
                total += if y.get(i, ip, j).unwrap() == 1 {
                    theta.ln()
                } else {
                    (1.0 - theta).ln()
                };
            }
        }
    }
    total
}

#[test]
fn c06_information_criteria_match_brute_force() {
    // Real chain on I = 3 with consensus positions frozen across samples so
    // the alignment step is exactly the identity and an alignment-free brute
    // force is comparable.
    let scenario = SynthScenario::prior_draw(3, 1, 1);
    let hyper = elicit_hyperparameters(1, 1).unwrap();
    let (y, _) = simulate_css(&scenario, &hyper, &mut chain_rng(66, 0)).unwrap();
    let x = DyadCovariates::intercept_only(3).unwrap();
    let config = ChainConfig {
        n_iterations: 240,
        burn_in: 40,
        thin: 4,
        n_chains: 1,
        rng_seed: 661,
        k: 1,
        init: InitMode::DataInformed,
    };
    let mut chain = run_chain(&y, &x, &hyper, &config, 0).unwrap();
    let frozen_eta = chain.samples[0].eta.clone();
    let frozen_zeta = chain.samples[0].zeta.clone();
    for s in chain.samples.iter_mut() {
        s.eta = frozen_eta.clone();
        s.zeta = frozen_zeta.clone();
    }
    let chains = vec![chain];

    // Brute-force DIC.
    let samples = &chains[0].samples;
    let s_count = samples.len() as f64;
    let mean_ll = samples.iter().map(|s| brute_loglik(&y, &x, s)).sum::<f64>() / s_count;
    let mut plug = samples[0].clone();
    for field in 0..plug.beta.len() {
        plug.beta[field] = samples.iter().map(|s| s.beta[field]).sum::<f64>() / s_count;
    }
    for field in 0..plug.u.len() {
        plug.u[field] = samples.iter().map(|s| s.u[field]).sum::<f64>() / s_count;
        plug.v[field] = samples.iter().map(|s| s.v[field]).sum::<f64>() / s_count;
    }
    let plug_ll = brute_loglik(&y, &x, &plug);
    let p_dic_bf = 2.0 * (plug_ll - mean_ll);
    let dic_bf = -2.0 * plug_ll + 2.0 * p_dic_bf;
    let (dic_val, p_dic) = dic(&chains, &y, &x).unwrap();
    assert!(
        (dic_val - dic_bf).abs() <= 1e-9 && (p_dic - p_dic_bf).abs() <= 1e-9,
        "FAIL criterion 6: DIC {dic_val}/{p_dic} vs brute force {dic_bf}/{p_dic_bf}"
    );

    // Brute-force WAIC over ordered cells.
    let mut lppd = 0.0;
    let mut p_waic_bf = 0.0;
    for j in 0..3 {
        for i in 0..3 {
            for ip in 0..3 {
                if ip == i {
                    continue;
                }
                let probs: Vec<f64> = samples
                    .iter()
                    .map(|s| {
                        let mut pred = s.beta(j)[0];
                        for d in 0..s.k {
                            pred += s.u(i, j)[d] * s.v(ip, j)[d];
                        }
                        let theta = brute_phi(pred);
                        if y.get(i, ip, j).unwrap() == 1 {
                            theta
                        } else {
                            1.0 - theta
                        }
                    })
                    .collect();
                let mean_p = probs.iter().sum::<f64>() / s_count;
                let mean_log = probs.iter().map(|p| p.ln()).sum::<f64>() / s_count;
                lppd += mean_p.ln();
                p_waic_bf += 2.0 * (mean_p.ln() - mean_log);
            }
        }
    }
    let waic_bf = -2.0 * lppd + 2.0 * p_waic_bf;
    let (waic_val, p_waic) = waic(&chains, &y, &x).unwrap();
    assert!(
        (waic_val - waic_bf).abs() <= 1e-9 && (p_waic - p_waic_bf).abs() <= 1e-9,
        "FAIL criterion 6: WAIC {waic_val}/{p_waic} vs brute force {waic_bf}/{p_waic_bf}"
    );

    // p_WAIC ≥ 0 on randomized chains.
    let mut rng = chain_rng(67, 0);
    let mut min_p_waic = f64::INFINITY;
    for _ in 0..100 {
        let n_samples = rng.random_range(3..=8);
        let states: Vec<LatentState> =
            (0..n_samples).map(|_| random_state(3, 1, 1, &mut rng)).collect();
        let chain = synthetic_chain(states, 1);
        let y_r = random_tensor(3, &mut rng);
        let (_, p_w) = waic(&[chain], &y_r, &x).unwrap();
        min_p_waic = min_p_waic.min(p_w);
        assert!(
            p_w >= -1e-9,
            "FAIL criterion 6: p_WAIC = {p_w} < 0 on a randomized chain"
        );
    }
    println!(
        "PASS criterion 6: DIC/WAIC match brute force to 1e-9; \
         min p_WAIC over 100 random chains = {min_p_waic:.3e}"
    );
}

// ---------------------------------------------------------------------------
// 7. Recovery study
// ---------------------------------------------------------------------------

#[test]
fn c07_strong_signal_recovery_over_five_seeds() {
    let spikes = [0usize, 10];
    let scenario = SynthScenario::strong_signal(20, &spikes);
    let hyper = elicit_hyperparameters(2, 1).unwrap();
    let x = DyadCovariates::intercept_only(20).unwrap();
    let mut passes = 0usize;
    for seed in 0..5u64 {
        let (y, truth) = simulate_css(&scenario, &hyper, &mut chain_rng(700 + seed, 0)).unwrap();
        let config = ChainConfig {
            n_iterations: 4000,
            burn_in: 1500,
            thin: 5,
            n_chains: 1,
            rng_seed: derive_seed(700 + seed, 1),
            k: 2,
            init: InitMode::DataInformed,
        };
        let chain = run_chain(&y, &x, &hyper, &config, 0).unwrap();
        let chains = vec![chain];
        let agreement = agreement_probabilities(&chains).unwrap();
        let spike_ok = spikes.iter().all(|&i| agreement[i].p_gamma < 0.2);
        let others_ok = (0..20)
            .filter(|i| !spikes.contains(i))
            .all(|i| agreement[i].p_gamma > 0.8);
        let fitted = consensus_probabilities(&chains, None).unwrap();
        let r = pearson(&fitted, &true_consensus(&truth));
        let ok = spike_ok && others_ok && r > 0.8;
        println!(
            "  criterion 7, seed {seed}: spikes {} others {} consensus r = {r:.3} → {}",
            if spike_ok { "<0.2 ✓" } else { "✗" },
            if others_ok { ">0.8 ✓" } else { "✗" },
            if ok { "pass" } else { "fail" }
        );
        passes += usize::from(ok);
    }
    assert!(
        passes >= 4,
        "FAIL criterion 7: only {passes}/5 seeds recovered the planted structure"
    );
    println!("PASS criterion 7: {passes}/5 seeds recovered spikes, slabs, and consensus");
}

// ---------------------------------------------------------------------------
// 8. Dimension-selection direction
// ---------------------------------------------------------------------------

#[test]
fn c08a_synthetic_k2_never_selects_k1() {
    let scenario = SynthScenario::strong_signal(16, &[]);
    let hyper = elicit_hyperparameters(2, 1).unwrap();
    let x = DyadCovariates::intercept_only(16).unwrap();
    for seed in 0..10u64 {
        let (y, _) = simulate_css(&scenario, &hyper, &mut chain_rng(800 + seed, 0)).unwrap();
        let config = ChainConfig {
            n_iterations: 1200,
            burn_in: 400,
            thin: 4,
            n_chains: 1,
            rng_seed: derive_seed(800 + seed, 1),
            k: 2,
            init: InitMode::DataInformed,
        };
        let report = k_sweep(&y, &x, &[1, 2, 3, 4], &config).unwrap();
        let (by_dic, by_waic) = (report.best_dic().unwrap(), report.best_waic().unwrap());
        println!("  criterion 8a, seed {seed}: DIC picks K = {by_dic}, WAIC picks K = {by_waic}");
        assert!(
            by_dic != 1 && by_waic != 1,
            "FAIL criterion 8a: seed {seed} selected K = 1 (DIC → {by_dic}, WAIC → {by_waic})"
        );
    }
    println!("PASS criterion 8a: K = 1 never selected on K_true = 2 data (10/10 seeds)");
}

#[test]
fn c08b_observed_css_criterion_ordering() {
    let css_path = "data/krackhardt_1987_friendship.txt";
    let attr_path = "data/krackhardt_1987_attributes.csv";
    let (Ok(css_file), Ok(attr_file)) =
        (std::fs::File::open(css_path), std::fs::File::open(attr_path))
    else {
        println!(
            "SKIP criterion 8b: observed CSS not found ({css_path}, {attr_path}); \
             see README for the expected layout"
        );
        return;
    };
    let y = load_css(css_file, CssFormat::MatrixStack).unwrap();
    assert_eq!(y.n_actors(), 21, "FAIL criterion 8b: expected 21 actors");
    let attrs = load_attributes(attr_file).unwrap();
    let recipe = [
        CovariateTerm::SameCategory("dept".into()),
        CovariateTerm::AbsDifference("tenure".into()),
    ];
    let x_cov = build_dyadic_covariates(&attrs, &recipe).unwrap();
    let x_flat = DyadCovariates::intercept_only(21).unwrap();

    let fit = |x: &DyadCovariates, k: usize, tag: u64| {
        let hyper = elicit_hyperparameters(k, x.p()).unwrap();
        let config = ChainConfig {
            n_iterations: 10_000,
            burn_in: 4_000,
            thin: 20,
            n_chains: 4,
            rng_seed: derive_seed(880, tag),
            k,
            init: InitMode::DataInformed,
        };
        let chains = run_chains(&y, x, &hyper, &config).unwrap();
        dic(&chains, &y, x).unwrap().0
    };
    let dic_k5_cov = fit(&x_cov, 5, 1);
    let dic_k2_cov = fit(&x_cov, 2, 2);
    let dic_k5_flat = fit(&x_flat, 5, 3);
    println!(
        "  criterion 8b: DIC(K=5, cov) = {dic_k5_cov:.1}, DIC(K=2, cov) = {dic_k2_cov:.1}, \
         DIC(K=5, intercept) = {dic_k5_flat:.1}"
    );
    assert!(
        dic_k5_cov < dic_k2_cov,
        "FAIL criterion 8b: DIC(K=5) = {dic_k5_cov:.1} not below DIC(K=2) = {dic_k2_cov:.1}"
    );
    assert!(
        dic_k5_cov < dic_k5_flat,
        "FAIL criterion 8b: covariate DIC {dic_k5_cov:.1} not below covariate-free {dic_k5_flat:.1}"
    );
    println!("PASS criterion 8b: criterion ordering matches the reported direction");
}

// ---------------------------------------------------------------------------
// 9. Posterior predictive calibration
// ---------------------------------------------------------------------------

#[test]
fn c09_ppc_calibration_on_self_simulated_data() {
    let hyper = elicit_hyperparameters(1, 1).unwrap();
    let x = DyadCovariates::intercept_only(12).unwrap();
    let scenario = SynthScenario::prior_draw(12, 1, 1);
    let mut covered_seeds = 0usize;
    for seed in 0..20u64 {
        let (y, _) = simulate_css(&scenario, &hyper, &mut chain_rng(900 + seed, 0)).unwrap();
        let config = ChainConfig {
            n_iterations: 2400,
            burn_in: 900,
            thin: 5,
            n_chains: 1,
            rng_seed: derive_seed(900 + seed, 1),
            k: 1,
            init: InitMode::DataInformed,
        };
        let chain = run_chain(&y, &x, &hyper, &config, 0).unwrap();
        let report = ppc_run(&chain, &y, &x, 150, &mut chain_rng(900 + seed, 7)).unwrap();
        let mut all_inside = true;
        for (name, stat) in report.stats() {
            let (Some(obs), false) = (stat.observed, stat.replicates.is_empty()) else {
                continue; // undefined on this data: nothing to cover
            };
            let lo = quantile(&stat.replicates, 0.025);
            let hi = quantile(&stat.replicates, 0.975);
            if obs < lo || obs > hi {
                println!(
                    "  criterion 9, seed {seed}: {name} observed {obs:.3} outside [{lo:.3}, {hi:.3}]"
                );
                all_inside = false;
            }
        }
        covered_seeds += usize::from(all_inside);
    }
    assert!(
        covered_seeds >= 18,
        "FAIL criterion 9: central-95% coverage in only {covered_seeds}/20 seeds"
    );
    println!("PASS criterion 9: all three statistics covered in {covered_seeds}/20 seeds");
}

// ---------------------------------------------------------------------------
// 10. Joint exchangeability
// ---------------------------------------------------------------------------

#[test]
fn c10_log_joint_is_permutation_invariant() {
    use rand::seq::SliceRandom;
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let mut rng = chain_rng(1000 + case, 0);
        let n = rng.random_range(3..=6);
        let k = rng.random_range(1..=3);
        let state = random_state(n, k, 1, &mut rng);
        let y = random_tensor(n, &mut rng);
        let x = DyadCovariates::intercept_only(n).unwrap();
        let hyper = elicit_hyperparameters(k, 1).unwrap();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let lj = log_joint(&y, &x, &state, &hyper).unwrap();
        let lj_perm = log_joint(
            &y.permute_actors(&perm).unwrap(),
            &x,
            &state.permute_actors(&perm).unwrap(),
            &hyper,
        )
        .unwrap();
        let gap = (lj - lj_perm).abs();
        worst = worst.max(gap);
        assert!(
            gap <= 1e-10,
            "FAIL criterion 10: case {case} (I = {n}, K = {k}) moved log-joint by {gap:.3e}"
        );
    }
    println!("PASS criterion 10: log-joint invariant under relabeling, max |Δ| = {worst:.2e} over 200 cases");
}
