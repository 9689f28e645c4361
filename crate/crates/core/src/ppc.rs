//! Posterior predictive checks on replicated pseudo-networks.
//!
//! A replicate draws every cell independently as
//! `y*[i,i',j] ~ Bernoulli(Φ(x[i,i']ᵀβ_j + u[i,j]ᵀv[i',j]))` at one retained
//! state. Each replicate is summarized by three directed network statistics
//! computed per perceiver slice and averaged over slices:
//!
//! * density — edge count over `I·(I−1)`;
//! * transitivity — closed ordered triples `i→i', i'→i'', i→i''` (all three
//!   actors distinct) over ordered two-paths;
//! * assortativity — Pearson correlation, over directed edges, of the
//!   sender's out-degree with the receiver's in-degree.
//!
//! Statistics that are undefined (no two-paths, or degenerate degree
//! variance) carry explicit markers and never silently become 0. The
//! two-sided posterior predictive p-value is `2·min(F̂, 1−F̂)` with
//! `F̂ = #{replicate ≤ observed}/n_reps`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::css_data::{BinaryNetwork, CssTensor, DyadCovariates};
use crate::error::{Error, Result};
use crate::model::LatentState;
use crate::probit::phi;
use crate::sampler::ChainOutput;

// ---------------------------------------------------------------------------
// Replication
// ---------------------------------------------------------------------------

/// Draw one replicated CSS tensor from the observation model at `state`.
pub fn replicate_css<R: Rng + ?Sized>(
    state: &LatentState,
    x: &DyadCovariates,
    rng: &mut R,
) -> Result<CssTensor> {
    state.validate_dims()?;
    if x.n_actors() != state.n_actors || x.p() != state.p {
        return Err(Error::DimensionMismatch(
            "state and covariates disagree on I or p".into(),
        ));
    }
    let n = state.n_actors;
    CssTensor::from_fn(n, None, |i, ip, j| {
        let theta = phi(state.predictor(x, i, ip, j));
        u8::from(rng.random::<f64>() < theta)
    })
}

// ---------------------------------------------------------------------------
// Network statistics
// ---------------------------------------------------------------------------

/// Directed density, transitivity, and degree assortativity; `None` marks a
/// statistic whose defining ratio is 0/0 on this network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkStatistics {
    pub density: f64,
    pub transitivity: Option<f64>,
    pub assortativity: Option<f64>,
}

/// Compute the three statistics on one directed binary network.
pub fn network_statistics(net: &BinaryNetwork) -> NetworkStatistics {
    let n = net.n_actors();
    let mut edges = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && net.get(i, j) == 1 {
                edges += 1;
            }
        }
    }
    let density = edges as f64 / (n * (n - 1)) as f64;

    // Ordered two-paths i→i'→i'' with all actors distinct, and their closures.
    let mut paths = 0u64;
    let mut closed = 0u64;
    for i in 0..n {
        for ip in 0..n {
            if ip == i || net.get(i, ip) == 0 {
                continue;
            }
            for ipp in 0..n {
                if ipp == i || ipp == ip || net.get(ip, ipp) == 0 {
                    continue;
                }
                paths += 1;
                closed += net.get(i, ipp) as u64;
            }
        }
    }
    let transitivity = (paths > 0).then(|| closed as f64 / paths as f64);

    // Degree correlation over directed edges: sender out-degree vs receiver
    // in-degree.
    let out_deg: Vec<f64> = (0..n).map(|i| net.out_degree(i) as f64).collect();
    let in_deg: Vec<f64> = (0..n).map(|i| net.in_degree(i) as f64).collect();
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && net.get(i, j) == 1 {
                sx += out_deg[i];
                sy += in_deg[j];
                count += 1;
            }
        }
    }
    let assortativity = if count >= 2 {
        let mx = sx / count as f64;
        let my = sy / count as f64;
        let mut cov = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j && net.get(i, j) == 1 {
                    let dx = out_deg[i] - mx;
                    let dy = in_deg[j] - my;
                    cov += dx * dy;
                    vx += dx * dx;
                    vy += dy * dy;
                }
            }
        }
        if vx > 0.0 && vy > 0.0 {
            Some(cov / (vx * vy).sqrt())
        } else {
            None
        }
    } else {
        None
    };

    NetworkStatistics { density, transitivity, assortativity }
}

/// Per-slice statistics averaged over the perceivers for which they are
/// defined; `None` when undefined on every slice.
pub fn slice_averaged_statistics(y: &CssTensor) -> Result<NetworkStatistics> {
    let n = y.n_actors();
    let mut density_sum = 0.0;
    let mut trans = (0.0, 0usize);
    let mut assort = (0.0, 0usize);
    for j in 0..n {
        let stats = network_statistics(&y.slice(j)?);
        density_sum += stats.density;
        if let Some(t) = stats.transitivity {
            trans.0 += t;
            trans.1 += 1;
        }
        if let Some(a) = stats.assortativity {
            assort.0 += a;
            assort.1 += 1;
        }
    }
    Ok(NetworkStatistics {
        density: density_sum / n as f64,
        transitivity: (trans.1 > 0).then(|| trans.0 / trans.1 as f64),
        assortativity: (assort.1 > 0).then(|| assort.0 / assort.1 as f64),
    })
}

// ---------------------------------------------------------------------------
// PPC report
// ---------------------------------------------------------------------------

/// Replicated distribution, observed value, and p-value for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcStat {
    /// Defined replicate values in replicate order (undefined ones skipped).
    pub replicates: Vec<f64>,
    /// Replicates on which the statistic was undefined.
    pub n_undefined: usize,
    pub observed: Option<f64>,
    /// `2·min(F̂, 1−F̂)`; `None` when the observed value or every replicate
    /// is undefined.
    pub p_value: Option<f64>,
}

impl PpcStat {
    fn build(observed: Option<f64>, values: Vec<Option<f64>>) -> Self {
        let n_total = values.len();
        let replicates: Vec<f64> = values.into_iter().flatten().collect();
        let n_undefined = n_total - replicates.len();
        let p_value = match (observed, replicates.is_empty()) {
            (Some(obs), false) => {
                let below = replicates.iter().filter(|&&r| r <= obs).count() as f64;
                let f_hat = below / replicates.len() as f64;
                Some(2.0 * f_hat.min(1.0 - f_hat))
            }
            _ => None,
        };
        PpcStat { replicates, n_undefined, observed, p_value }
    }
}

/// The three per-statistic posterior predictive check results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub n_reps: usize,
    pub density: PpcStat,
    pub transitivity: PpcStat,
    pub assortativity: PpcStat,
}

impl PpcReport {
    pub fn stats(&self) -> [(&'static str, &PpcStat); 3] {
        [
            ("density", &self.density),
            ("transitivity", &self.transitivity),
            ("assortativity", &self.assortativity),
        ]
    }

    /// `ppc.csv`: `statistic,replicate_index,value` (defined replicates only,
    /// indices keep their original positions).
    pub fn write_replicates_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["statistic", "replicate_index", "value"])?;
        for (name, stat) in self.stats() {
            for (idx, value) in stat.replicates.iter().enumerate() {
                wtr.write_record(&[name.to_string(), (idx + 1).to_string(), value.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// `ppc_observed.csv`: `statistic,value` (blank when undefined).
    pub fn write_observed_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["statistic", "value"])?;
        for (name, stat) in self.stats() {
            let value = stat.observed.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record(&[name.to_string(), value])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// `ppc_pvalues.csv`: `statistic,p_value,n_replicates,n_undefined`.
    pub fn write_pvalues_csv(&self, w: &mut dyn Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["statistic", "p_value", "n_replicates", "n_undefined"])?;
        for (name, stat) in self.stats() {
            let p = stat.p_value.map(|v| v.to_string()).unwrap_or_default();
            wtr.write_record(&[
                name.to_string(),
                p,
                stat.replicates.len().to_string(),
                stat.n_undefined.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Run the posterior predictive check: pick `n_reps` evenly spaced retained
/// states, replicate one tensor from each, and compare slice-averaged
/// statistics with the observed tensor's.
pub fn ppc_run<R: Rng + ?Sized>(
    chain: &ChainOutput,
    y: &CssTensor,
    x: &DyadCovariates,
    n_reps: usize,
    rng: &mut R,
) -> Result<PpcReport> {
    let s = chain.samples.len();
    if n_reps < 1 || n_reps > s {
        return Err(Error::InvalidArgument(format!(
            "n_reps must lie in 1..={s}, got {n_reps}"
        )));
    }
    let observed = slice_averaged_statistics(y)?;
    let mut density = Vec::with_capacity(n_reps);
    let mut transitivity = Vec::with_capacity(n_reps);
    let mut assortativity = Vec::with_capacity(n_reps);
    for t in 0..n_reps {
        let state = &chain.samples[t * s / n_reps];
        let rep = replicate_css(state, x, rng)?;
        let stats = slice_averaged_statistics(&rep)?;
        density.push(Some(stats.density));
        transitivity.push(stats.transitivity);
        assortativity.push(stats.assortativity);
    }
    Ok(PpcReport {
        n_reps,
        density: PpcStat::build(Some(observed.density), density),
        transitivity: PpcStat::build(observed.transitivity, transitivity),
        assortativity: PpcStat::build(observed.assortativity, assortativity),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::elicit_hyperparameters;
    use crate::sampler::{chain_rng, run_chain, ChainConfig, InitMode};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn net_from_edges(n: usize, edges: &[(usize, usize)]) -> BinaryNetwork {
        let mut net = BinaryNetwork::new(n);
        for &(i, j) in edges {
            net.set(i, j, 1);
        }
        net
    }

    // -- replication -----------------------------------------------------------

    #[test]
    fn extreme_intercepts_give_empty_replicates() {
        let mut s = LatentState::neutral(4, 2, 1);
        for j in 0..4 {
            s.beta_mut(j)[0] = -10.0;
        }
        let x = DyadCovariates::intercept_only(4).unwrap();
        let rep = replicate_css(&s, &x, &mut chain_rng(1, 0)).unwrap();
        assert!(rep.cells().all(|(_, _, _, v)| v == 0));
    }

    #[test]
    fn neutral_state_replicates_near_half_density() {
        let s = LatentState::neutral(10, 2, 1);
        let x = DyadCovariates::intercept_only(10).unwrap();
        let mut rng = chain_rng(2, 0);
        for _ in 0..10 {
            let rep = replicate_css(&s, &x, &mut rng).unwrap();
            let total: f64 = (0..10)
                .map(|j| rep.slice_density(j).unwrap())
                .sum::<f64>()
                / 10.0;
            assert!((0.4..=0.6).contains(&total), "density {total} drifted");
        }
    }

    #[test]
    fn replication_is_deterministic_for_a_fixed_seed() {
        let s = LatentState::neutral(5, 1, 1);
        let x = DyadCovariates::intercept_only(5).unwrap();
        let a = replicate_css(&s, &x, &mut chain_rng(9, 1)).unwrap();
        let b = replicate_css(&s, &x, &mut chain_rng(9, 1)).unwrap();
        assert_eq!(a, b);
    }

    // -- network statistics ------------------------------------------------------

    #[test]
    fn statistics_on_canonical_graphs() {
        // Complete directed graph.
        let n = 4;
        let mut net = BinaryNetwork::new(n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    net.set(i, j, 1);
                }
            }
        }
        let s = network_statistics(&net);
        assert_eq!(s.density, 1.0);
        assert_eq!(s.transitivity, Some(1.0));
        assert_eq!(s.assortativity, None, "uniform degrees have no variance");

        // Empty graph.
        let s = network_statistics(&BinaryNetwork::new(4));
        assert_eq!(s.density, 0.0);
        assert_eq!(s.transitivity, None);
        assert_eq!(s.assortativity, None);

        // Directed 3-cycle: density ½, no transitive closure.
        let s = network_statistics(&net_from_edges(3, &[(0, 1), (1, 2), (2, 0)]));
        assert_relative_eq!(s.density, 0.5);
        assert_eq!(s.transitivity, Some(0.0));

        // Hand-computed assortativity: edges 1→2, 3→2, 1→3 give r = −½.
        let s = network_statistics(&net_from_edges(3, &[(0, 1), (2, 1), (0, 2)]));
        assert_relative_eq!(s.assortativity.unwrap(), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn density_equals_cell_mean_and_slice_average_matches_loop() {
        let mut rng = chain_rng(5, 0);
        use rand::Rng as _;
        let y = CssTensor::from_fn(5, None, |_, _, _| rng.random_range(0..=1u8)).unwrap();
        let stats = slice_averaged_statistics(&y).unwrap();
        // Direct loop over slices.
        let mut dsum = 0.0;
        let mut tsum = (0.0, 0);
        for j in 0..5 {
            let net = y.slice(j).unwrap();
            let mut edges = 0;
            for i in 0..5 {
                for ip in 0..5 {
                    if i != ip {
                        edges += net.get(i, ip) as usize;
                    }
                }
            }
            dsum += edges as f64 / 20.0;
            let s = network_statistics(&net);
            if let Some(t) = s.transitivity {
                tsum.0 += t;
                tsum.1 += 1;
            }
        }
        assert_relative_eq!(stats.density, dsum / 5.0, epsilon = 1e-14);
        if tsum.1 > 0 {
            assert_relative_eq!(
                stats.transitivity.unwrap(),
                tsum.0 / tsum.1 as f64,
                epsilon = 1e-14
            );
        }
        // Mean of all cells equals the slice-density average.
        let mean_cells =
            y.cells().map(|(_, _, _, v)| v as f64).sum::<f64>() / (5.0 * 5.0 * 4.0);
        assert_relative_eq!(stats.density, mean_cells, epsilon = 1e-14);
    }

    // -- ppc_run -----------------------------------------------------------------

    fn fitted(n: usize, seed: u64, all_zero: bool) -> (CssTensor, DyadCovariates, ChainOutput) {
        let mut rng = chain_rng(seed, 5);
        use rand::Rng as _;
        let y = if all_zero {
            CssTensor::from_fn(n, None, |_, _, _| 0).unwrap()
        } else {
            CssTensor::from_fn(n, None, |_, _, _| rng.random_range(0..=1u8)).unwrap()
        };
        let x = DyadCovariates::intercept_only(n).unwrap();
        let hyper = elicit_hyperparameters(1, 1).unwrap();
        let config = ChainConfig {
            n_iterations: 60,
            burn_in: 20,
            thin: 2,
            n_chains: 1,
            rng_seed: seed,
            k: 1,
            init: InitMode::DataInformed,
        };
        let chain = run_chain(&y, &x, &hyper, &config, 0).unwrap();
        (y, x, chain)
    }

    #[test]
    fn ppc_is_deterministic_and_bounded() {
        let (y, x, chain) = fitted(4, 21, false);
        let a = ppc_run(&chain, &y, &x, 12, &mut chain_rng(3, 7)).unwrap();
        let b = ppc_run(&chain, &y, &x, 12, &mut chain_rng(3, 7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_reps, 12);
        assert_eq!(a.density.replicates.len(), 12);
        for (_, stat) in a.stats() {
            if let Some(p) = stat.p_value {
                assert!((0.0..=1.0).contains(&p));
            }
        }
        assert!(ppc_run(&chain, &y, &x, 0, &mut chain_rng(3, 7)).is_err());
        assert!(
            ppc_run(&chain, &y, &x, chain.samples.len() + 1, &mut chain_rng(3, 7)).is_err()
        );
    }

    #[test]
    fn single_replicate_has_degenerate_p_value() {
        let (y, x, chain) = fitted(4, 23, false);
        let report = ppc_run(&chain, &y, &x, 1, &mut chain_rng(4, 2)).unwrap();
        assert_eq!(report.density.replicates.len(), 1);
        let p = report.density.p_value.unwrap();
        assert!(p == 0.0 || p == 1.0 || (0.0..=1.0).contains(&p));
    }

    #[test]
    fn all_zero_data_sits_at_the_left_edge() {
        let (y, x, chain) = fitted(4, 25, true);
        let report = ppc_run(&chain, &y, &x, 10, &mut chain_rng(6, 1)).unwrap();
        let obs = report.density.observed.unwrap();
        assert_eq!(obs, 0.0);
        assert!(report.density.replicates.iter().all(|&r| r >= obs));
        assert!(report.density.p_value.is_some());
    }

    #[test]
    fn csv_artifacts_have_expected_headers() {
        let (y, x, chain) = fitted(4, 27, false);
        let report = ppc_run(&chain, &y, &x, 5, &mut chain_rng(8, 3)).unwrap();
        let mut buf = Vec::new();
        report.write_replicates_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("statistic,replicate_index,value"));
        assert!(text.contains("density,1,"));

        let mut buf = Vec::new();
        report.write_observed_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);

        let mut buf = Vec::new();
        report.write_pvalues_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("statistic,p_value,n_replicates,n_undefined"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn ppc_stat_build_handles_undefined_values() {
        let stat = PpcStat::build(Some(0.3), vec![Some(0.1), None, Some(0.5), Some(0.3)]);
        assert_eq!(stat.replicates, vec![0.1, 0.5, 0.3]);
        assert_eq!(stat.n_undefined, 1);
        // F̂ = 2/3 → p = 2·min(2/3, 1/3) = 2/3.
        assert_abs_diff_eq!(stat.p_value.unwrap(), 2.0 / 3.0, epsilon = 1e-14);
        assert_eq!(PpcStat::build(None, vec![Some(0.1)]).p_value, None);
        assert_eq!(PpcStat::build(Some(0.1), vec![None, None]).p_value, None);
    }
}
