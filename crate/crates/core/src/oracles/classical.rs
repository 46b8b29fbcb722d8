//! Classical Ising oracles for the square-root state: Metropolis sampling
//! and exhaustive enumeration.
//!
//! Spins follow the qubit convention: basis state 0 is `s = +1`. Gibbs
//! weights are `exp(βJ Σ_edges s_a s_b)`, the squared amplitudes of the
//! square-root state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MAX_ENUMERATION_VERTICES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McStart {
    /// All spins up.
    Cold,
    /// Independent uniform spins.
    Hot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub beta: f64,
    pub j: f64,
    /// Total sweeps including burn-in; one sweep is `N` proposed flips.
    pub sweeps: usize,
    pub burn_in: usize,
    pub batches: usize,
    pub seed: u64,
    pub start: McStart,
}

impl McConfig {
    pub fn new(beta: f64, j: f64, sweeps: usize, burn_in: usize, seed: u64) -> Self {
        McConfig {
            beta,
            j,
            sweeps,
            burn_in,
            batches: 50,
            seed,
            start: McStart::Cold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub config: McConfig,
    /// Per-site `⟨s_a⟩`.
    pub magnetization: Vec<f64>,
    /// Batch-means standard error of each `⟨s_a⟩`.
    pub magnetization_err: Vec<f64>,
    /// Per-edge `⟨s_a s_b⟩`, graph edge order.
    pub edge_correlation: Vec<f64>,
    pub edge_correlation_err: Vec<f64>,
    /// `(1/N) Σ_a |⟨s_a⟩|`.
    pub mean_abs_magnetization: f64,
    /// `(1/N) Σ_a err_a`, the fully correlated propagation of the per-site
    /// errors.
    pub mean_abs_magnetization_err: f64,
    pub samples: usize,
}

/// Cold-start Metropolis run with 50 batches.
pub fn classical_ising_mc(
    g: &Graph,
    beta: f64,
    j: f64,
    sweeps: usize,
    burn_in: usize,
    seed: u64,
) -> Result<McResult> {
    classical_ising_mc_with(g, &McConfig::new(beta, j, sweeps, burn_in, seed))
}

/// Single-spin-flip Metropolis estimates of site magnetizations and edge
/// correlations with batch-means error bars.
pub fn classical_ising_mc_with(g: &Graph, cfg: &McConfig) -> Result<McResult> {
    if cfg.sweeps <= cfg.burn_in {
        return Err(Error::InvalidArgument("sweeps must exceed burn_in".into()));
    }
    let samples = cfg.sweeps - cfg.burn_in;
    if cfg.batches < 2 || samples < cfg.batches {
        return Err(Error::InvalidArgument(format!(
            "{samples} samples cannot fill {} batches",
            cfg.batches
        )));
    }
    let n = g.n_vertices();
    let m = g.n_edges();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut spins: Vec<i8> = match cfg.start {
        McStart::Cold => vec![1; n],
        McStart::Hot => (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
    };
    let coupling = cfg.beta * cfg.j;
    // acceptance exp(-2 βJ s_a h_a) for local field h_a ∈ [-r, r]
    let max_deg = (0..n).map(|a| g.degree(a)).max().unwrap_or(0) as i32;
    let accept: Vec<f64> = (-max_deg..=max_deg)
        .map(|sh| (-2.0 * coupling * sh as f64).exp().min(1.0))
        .collect();

    let batch_len = samples / cfg.batches;
    let used = batch_len * cfg.batches;
    let mut batch_mag = vec![vec![0.0; n]; cfg.batches];
    let mut batch_corr = vec![vec![0.0; m]; cfg.batches];

    for sweep in 0..cfg.sweeps {
        for _ in 0..n {
            let a = rng.random_range(0..n);
            let field: i32 = g.neighbors(a).iter().map(|&b| spins[b] as i32).sum();
            let sh = spins[a] as i32 * field;
            let p = accept[(sh + max_deg) as usize];
            if p >= 1.0 || rng.random::<f64>() < p {
                spins[a] = -spins[a];
            }
        }
        if sweep < cfg.burn_in {
            continue;
        }
        let k = sweep - cfg.burn_in;
        if k >= used {
            continue;
        }
        let b = k / batch_len;
        for a in 0..n {
            batch_mag[b][a] += spins[a] as f64;
        }
        for (e, &(a, c)) in g.edges().iter().enumerate() {
            batch_corr[b][e] += (spins[a] * spins[c]) as f64;
        }
    }
    // an estimator cannot resolve below one sample's weight
    let floor = 1.0 / used as f64;
    let (magnetization, magnetization_err) = batch_stats(&batch_mag, batch_len, floor);
    let (edge_correlation, edge_correlation_err) = batch_stats(&batch_corr, batch_len, floor);
    let mean_abs_magnetization = magnetization.iter().map(|x| x.abs()).sum::<f64>() / n as f64;
    let mean_abs_magnetization_err = magnetization_err.iter().sum::<f64>() / n as f64;
    Ok(McResult {
        config: cfg.clone(),
        magnetization,
        magnetization_err,
        edge_correlation,
        edge_correlation_err,
        mean_abs_magnetization,
        mean_abs_magnetization_err,
        samples,
    })
}

fn batch_stats(sums: &[Vec<f64>], batch_len: usize, floor: f64) -> (Vec<f64>, Vec<f64>) {
    let nb = sums.len() as f64;
    let width = sums[0].len();
    let mut mean = vec![0.0; width];
    let mut err = vec![0.0; width];
    for q in 0..width {
        let means: Vec<f64> = sums.iter().map(|b| b[q] / batch_len as f64).collect();
        let mu = means.iter().sum::<f64>() / nb;
        let var = means.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nb - 1.0);
        mean[q] = mu;
        err[q] = (var / nb).sqrt().max(floor);
    }
    (mean, err)
}

/// Runs independent chains (one per seed) in parallel; results come back in
/// seed order.
pub fn classical_ising_mc_chains(g: &Graph, base: &McConfig, seeds: &[u64]) -> Result<Vec<McResult>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = McConfig { seed, ..base.clone() };
            classical_ising_mc_with(g, &cfg)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalExact {
    /// `⟨Z_a⟩` in the square-root state, i.e. the Gibbs average of `s_a`.
    pub z: Vec<f64>,
    /// `⟨X_a⟩ = Σ_s w(s) w(s^(a)) / Σ_s w(s)²`.
    pub x: Vec<f64>,
    /// `⟨Z_a Z_b⟩` per edge.
    pub zz: Vec<f64>,
}

/// Exhaustive `2^N` sum over spin configurations.
pub fn classical_exact_expectations(g: &Graph, beta: f64, j: f64) -> Result<ClassicalExact> {
    let n = g.n_vertices();
    if n > MAX_ENUMERATION_VERTICES {
        return Err(Error::TooLarge {
            what: "vertex count for enumeration",
            limit: MAX_ENUMERATION_VERTICES,
            got: n,
        });
    }
    let half = beta * j / 2.0;
    let spin = |cfg: usize, a: usize| -> f64 {
        if (cfg >> (n - 1 - a)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    };
    let bond_sum = |cfg: usize| -> f64 {
        g.edges().iter().map(|&(a, b)| spin(cfg, a) * spin(cfg, b)).sum()
    };
    let total = 1usize << n;
    let log_w: Vec<f64> = (0..total).map(|c| half * bond_sum(c)).collect();
    let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
    let z_norm: f64 = w.iter().map(|x| x * x).sum();

    let mut z = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut zz = vec![0.0; g.n_edges()];
    for c in 0..total {
        let p = w[c] * w[c];
        for a in 0..n {
            z[a] += p * spin(c, a);
            x[a] += w[c] * w[c ^ (1 << (n - 1 - a))];
        }
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            zz[e] += p * spin(c, a) * spin(c, b);
        }
    }
    for v in z.iter_mut().chain(x.iter_mut()).chain(zz.iter_mut()) {
        *v /= z_norm;
    }
    Ok(ClassicalExact { z, x, zz })
}
