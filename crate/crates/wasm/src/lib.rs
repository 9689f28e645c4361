//! Browser bindings for the interactive model demo.
//!
//! Three entry points back the demo page: a prior-predictive histogram of
//! the consensus-tie probability θ (showing how the latent dimension K
//! reshapes the prior), a scenario simulator with δ₀-thresholded consensus
//! networks, and a miniature in-browser Gibbs fit that recovers planted
//! spike rosters and the consensus network from a simulated tensor.
//!
//! Every function takes an explicit seed, is deterministic given it, and
//! returns a JSON string (an object with an `"error"` key on failure) so
//! the page needs no generated bindings beyond plain strings and numbers.
//! The crate also compiles on non-wasm targets, where the same functions
//! are exercised by the host test suite.

use cognet::css_data::{threshold_consensus, CssTensor};
use cognet::model::elicit_hyperparameters;
use cognet::postprocess::{agreement_probabilities, consensus_probabilities};
use cognet::sampler::{chain_rng, run_chain, ChainConfig, InitMode};
use cognet::synth::{simulate_css, true_consensus, SynthScenario};
use wasm_bindgen::prelude::wasm_bindgen;

fn error_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

/// Histogram of the prior predictive consensus-tie probability θ for the
/// elicited hyperparameters at latent dimension `k`: `n_bins` equal-width
/// bins on [0, 1], masses summing to 1.
#[wasm_bindgen]
pub fn prior_theta_histogram(k: u32, n_draws: u32, n_bins: u32, seed: u64) -> String {
    if n_bins == 0 || n_draws == 0 {
        return error_json("n_draws and n_bins must be ≥ 1");
    }
    let hyper = match elicit_hyperparameters(k as usize, 1) {
        Ok(h) => h,
        Err(e) => return error_json(e),
    };
    let draws = match cognet::model::prior_predictive_theta(
        &hyper,
        n_draws as usize,
        &mut chain_rng(seed, 0),
    ) {
        Ok(d) => d,
        Err(e) => return error_json(e),
    };
    let bins = n_bins as usize;
    let mut masses = vec![0.0f64; bins];
    for theta in &draws {
        let idx = ((theta * bins as f64) as usize).min(bins - 1);
        masses[idx] += 1.0 / draws.len() as f64;
    }
    serde_json::json!({ "k": k, "n_bins": bins, "masses": masses }).to_string()
}

/// Row-major I×I matrix with −1.0 on the diagonal (self-ties are not
/// modelled) for rendering as a heatmap.
fn matrix_json(values: impl Fn(usize, usize) -> f64, n: usize) -> Vec<f64> {
    let mut out = vec![-1.0; n * n];
    for i in 0..n {
        for ip in 0..n {
            if ip != i {
                out[i * n + ip] = values(i, ip);
            }
        }
    }
    out
}

fn scenario_by_name(name: &str, actors: usize) -> Result<SynthScenario, String> {
    if actors < 4 {
        return Err("the demo needs at least 4 actors".to_string());
    }
    match name {
        "prior-draw" => Ok(SynthScenario::prior_draw(actors, 2, 1)),
        "zero-signal" => Ok(SynthScenario::zero_signal(actors)),
        "strong-signal" => Ok(SynthScenario::strong_signal(actors, &[0, actors / 2])),
        other => Err(format!("unknown scenario: {other}")),
    }
}

fn simulate_scenario(name: &str, actors: usize, seed: u64) -> Result<(CssTensor, cognet::model::LatentState), String> {
    let scenario = scenario_by_name(name, actors)?;
    let hyper = elicit_hyperparameters(scenario.k, scenario.p).map_err(|e| e.to_string())?;
    simulate_css(&scenario, &hyper, &mut chain_rng(seed, 0)).map_err(|e| e.to_string())
}

/// Simulate a CSS tensor from a named scenario and return the
/// perceiver-averaged tie frequencies, their δ₀-thresholded consensus
/// network, and the scenario's true consensus probabilities.
#[wasm_bindgen]
pub fn simulate_consensus(scenario: &str, actors: u32, seed: u64, delta0: f64) -> String {
    let n = actors as usize;
    let (y, truth) = match simulate_scenario(scenario, n, seed) {
        Ok(pair) => pair,
        Err(e) => return error_json(e),
    };
    let network = match threshold_consensus(&y, delta0) {
        Ok(net) => net,
        Err(e) => return error_json(e),
    };
    let theta = true_consensus(&truth);
    serde_json::json!({
        "n": n,
        "mean": matrix_json(|i, ip| y.perceiver_mean(i, ip).unwrap_or(0.0), n),
        "thresholded": matrix_json(|i, ip| f64::from(network.get(i, ip)), n),
        "truth": matrix_json(|i, ip| theta[i * n + ip], n),
    })
    .to_string()
}

/// Simulate the strong-signal scenario (spike roster {0, I/2}) and fit it
/// with one short chain, returning per-actor agreement probabilities, the
/// fitted and true consensus networks, their Pearson correlation, and the
/// log-likelihood trace.
#[wasm_bindgen]
pub fn fit_demo(actors: u32, iters: u32, seed: u64) -> String {
    let n = actors as usize;
    let iters = iters as usize;
    if iters < 40 {
        return error_json("iters must be ≥ 40");
    }
    let (y, truth) = match simulate_scenario("strong-signal", n, seed) {
        Ok(pair) => pair,
        Err(e) => return error_json(e),
    };
    let x = match cognet::css_data::DyadCovariates::intercept_only(n) {
        Ok(x) => x,
        Err(e) => return error_json(e),
    };
    let hyper = match elicit_hyperparameters(2, 1) {
        Ok(h) => h,
        Err(e) => return error_json(e),
    };
    let config = ChainConfig {
        n_iterations: iters,
        burn_in: iters / 2,
        thin: 2,
        n_chains: 1,
        rng_seed: seed,
        k: 2,
        init: InitMode::DataInformed,
    };
    let chain = match run_chain(&y, &x, &hyper, &config, 0) {
        Ok(c) => c,
        Err(e) => return error_json(e),
    };
    let chains = vec![chain];
    let agreement = match agreement_probabilities(&chains) {
        Ok(a) => a,
        Err(e) => return error_json(e),
    };
    let fitted = match consensus_probabilities(&chains, None) {
        Ok(f) => f,
        Err(e) => return error_json(e),
    };
    let theta = true_consensus(&truth);
    let r = pearson_offdiag(&fitted, &theta);
    serde_json::json!({
        "n": n,
        "spike": [0, n / 2],
        "p_gamma": agreement.iter().map(|a| a.p_gamma).collect::<Vec<_>>(),
        "p_xi": agreement.iter().map(|a| a.p_xi).collect::<Vec<_>>(),
        "fitted": matrix_json(|i, ip| fitted[i * n + ip], n),
        "truth": matrix_json(|i, ip| theta[i * n + ip], n),
        "r": r,
        "loglik": chains[0].loglik_trace,
    })
    .to_string()
}

/// Pearson correlation over the finite (off-diagonal) entries.
fn pearson_offdiag(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x, y))
        .collect();
    let n = pairs.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
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
