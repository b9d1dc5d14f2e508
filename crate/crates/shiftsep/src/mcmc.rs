//! Posterior sampling with the robust adaptive Metropolis algorithm: the
//! proposal covariance factor is adapted every step to coerce a target
//! acceptance rate, with step size n^(-decay).

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub chain_length: usize,
    pub burn_in: usize,
    pub target_acceptance: f64,
    /// Adaptation step decay exponent; step size is dim * n^(-decay).
    pub adaptation_decay: f64,
    pub seed: u64,
    /// Uniform prior box per parameter.
    pub priors: Vec<(f64, f64)>,
    /// Initial proposal scale per parameter; `None` uses 5% of the prior
    /// width.
    pub initial_scale: Option<f64>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            chain_length: 100_000,
            burn_in: 10_000,
            target_acceptance: 0.234,
            adaptation_decay: 0.66,
            seed: 0,
            priors: Vec::new(),
            initial_scale: None,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.burn_in >= self.chain_length {
            return Err(Error::invalid("burn_in must be smaller than chain_length"));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::invalid("target_acceptance must lie in (0, 1)"));
        }
        if self.priors.is_empty() {
            return Err(Error::invalid("priors must cover every parameter"));
        }
        if self.priors.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::invalid("every prior must satisfy lo < hi"));
        }
        Ok(())
    }
}

/// Sampled chain plus its realized acceptance rate.
#[derive(Debug, Clone)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

/// Adaptive Metropolis state; exposed at crate level so adaptation behavior
/// can be observed directly in tests.
pub(crate) struct RamSampler<'a, F: Fn(&[f64]) -> f64> {
    log_likelihood: &'a F,
    config: &'a McmcConfig,
    rng: ChaCha8Rng,
    pub(crate) position: Vec<f64>,
    current_ll: f64,
    /// Lower-triangular proposal factor, row-major.
    pub(crate) factor: Vec<Vec<f64>>,
    step_index: usize,
    accepted: usize,
}

impl<'a, F: Fn(&[f64]) -> f64> RamSampler<'a, F> {
    pub fn new(log_likelihood: &'a F, start: &[f64], config: &'a McmcConfig) -> Result<Self> {
        config.validate()?;
        let dim = config.priors.len();
        if start.len() != dim {
            return Err(Error::invalid(format!(
                "start point has {} parameters but {} priors were given",
                start.len(),
                dim
            )));
        }
        if !in_box(start, &config.priors) {
            return Err(Error::invalid("start point lies outside the prior box"));
        }
        let ll = log_likelihood(start);
        if !ll.is_finite() {
            return Err(Error::invalid("log-likelihood is not finite at the chain start"));
        }
        let mut factor = vec![vec![0.0; dim]; dim];
        for (axis, row) in factor.iter_mut().enumerate() {
            let (lo, hi) = config.priors[axis];
            row[axis] = config.initial_scale.unwrap_or(0.05 * (hi - lo));
        }
        Ok(RamSampler {
            log_likelihood,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            position: start.to_vec(),
            current_ll: ll,
            factor,
            step_index: 0,
            accepted: 0,
        })
    }

    pub fn step(&mut self) {
        let dim = self.position.len();
        self.step_index += 1;
        let u: Vec<f64> = (0..dim).map(|_| self.rng.sample(StandardNormal)).collect();
        // Proposal increment z = S u.
        let mut z = vec![0.0; dim];
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.factor[i][j] * u[j];
            }
            z[i] = acc;
        }
        let proposal: Vec<f64> = self.position.iter().zip(z.iter()).map(|(p, dz)| p + dz).collect();
        let alpha = if in_box(&proposal, &self.config.priors) {
            let ll = (self.log_likelihood)(proposal.as_slice());
            if ll.is_finite() {
                (ll - self.current_ll).exp().min(1.0)
            } else {
                0.0
            }
        } else {
            0.0
        };
        if self.rng.random::<f64>() < alpha {
            let ll = (self.log_likelihood)(proposal.as_slice());
            self.position = proposal;
            self.current_ll = ll;
            self.accepted += 1;
        }
        self.adapt(&u, &z, alpha);
    }

    /// Rank-one covariance update S S^T <- S (I + eta (alpha - target)
    /// u u^T / |u|^2) S^T, refactored by Cholesky.
    fn adapt(&mut self, u: &[f64], z: &[f64], alpha: f64) {
        let dim = self.position.len();
        let u_norm_sq: f64 = u.iter().map(|x| x * x).sum();
        if u_norm_sq == 0.0 {
            return;
        }
        let eta = (dim as f64 * (self.step_index as f64).powf(-self.config.adaptation_decay)).min(1.0);
        let coeff = eta * (alpha - self.config.target_acceptance) / u_norm_sq;
        let mut cov = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in 0..=i {
                let mut acc = 0.0;
                for l in 0..dim {
                    acc += self.factor[i][l] * self.factor[j][l];
                }
                acc += coeff * z[i] * z[j];
                cov[i][j] = acc;
                cov[j][i] = acc;
            }
        }
        if let Some(next) = cholesky(&cov) {
            self.factor = next;
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.step_index == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.step_index as f64
    }
}

fn in_box(x: &[f64], priors: &[(f64, f64)]) -> bool {
    x.iter()
        .zip(priors.iter())
        .all(|(&value, &(lo, hi))| value >= lo && value <= hi)
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = a[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k];
            }
            if i == j {
                if acc <= 0.0 {
                    return None;
                }
                l[i][j] = acc.sqrt();
            } else {
                l[i][j] = acc / l[j][j];
            }
        }
    }
    Some(l)
}

/// Sample a Metropolis chain of `chain_length` states (the start included)
/// whose proposal is adapted toward the target acceptance rate. Proposals
/// outside the prior box are rejected. Deterministic for a given seed.
pub fn ram_sample<F: Fn(&[f64]) -> f64>(
    log_likelihood: F,
    start: &[f64],
    config: &McmcConfig,
) -> Result<Chain> {
    let mut sampler = RamSampler::new(&log_likelihood, start, config)?;
    let mut samples = Vec::with_capacity(config.chain_length);
    samples.push(sampler.position.clone());
    for _ in 1..config.chain_length {
        sampler.step();
        samples.push(sampler.position.clone());
    }
    Ok(Chain {
        samples,
        acceptance_rate: sampler.acceptance_rate(),
    })
}

/// Post-burn-in moments, intervals, correlations and effective sample
/// sizes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub two_sigma: Vec<f64>,
    pub correlation: Array2<f64>,
    pub effective_sample_size: Vec<f64>,
    pub acceptance_rate: f64,
    /// Marks parameters whose chain was constant (correlations reported as
    /// zero for them).
    pub degenerate: Vec<bool>,
}

pub fn summarize(chain: &Chain, burn_in: usize) -> Result<PosteriorSummary> {
    if chain.samples.len() <= burn_in {
        return Err(Error::invalid("chain is not longer than the burn-in"));
    }
    let rows = &chain.samples[burn_in..];
    let count = rows.len();
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for row in rows {
        for (m, x) in mean.iter_mut().zip(row.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);

    let mut cov = Array2::<f64>::zeros((dim, dim));
    for row in rows {
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[[i, j]] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (count as f64 - 1.0).max(1.0);
    for i in 0..dim {
        for j in 0..=i {
            cov[[i, j]] /= denom;
            cov[[j, i]] = cov[[i, j]];
        }
    }
    let std: Vec<f64> = (0..dim).map(|i| cov[[i, i]].sqrt()).collect();
    let degenerate: Vec<bool> = std.iter().map(|&s| s == 0.0).collect();
    let mut correlation = Array2::<f64>::zeros((dim, dim));
    for i in 0..dim {
        correlation[[i, i]] = 1.0;
        for j in 0..i {
            let value = if degenerate[i] || degenerate[j] {
                0.0
            } else {
                cov[[i, j]] / (std[i] * std[j])
            };
            correlation[[i, j]] = value;
            correlation[[j, i]] = value;
        }
    }
    let ess = (0..dim)
        .map(|axis| effective_sample_size(rows, axis, mean[axis], std[axis]))
        .collect();
    Ok(PosteriorSummary {
        two_sigma: std.iter().map(|s| 2.0 * s).collect(),
        mean,
        std,
        correlation,
        effective_sample_size: ess,
        acceptance_rate: chain.acceptance_rate,
        degenerate,
    })
}

/// ESS via the initial-positive-sequence estimator on lag autocorrelations.
fn effective_sample_size(rows: &[Vec<f64>], axis: usize, mean: f64, std: f64) -> f64 {
    let n = rows.len();
    if std == 0.0 || n < 4 {
        return n as f64;
    }
    let values: Vec<f64> = rows.iter().map(|r| r[axis] - mean).collect();
    let var = std * std;
    let max_lag = (n - 1).min(2000);
    let rho = |lag: usize| -> f64 {
        let mut acc = 0.0;
        for i in 0..n - lag {
            acc += values[i] * values[i + lag];
        }
        acc / ((n - lag) as f64 * var)
    };
    let mut tail = 0.0;
    let mut lag = 1;
    while lag + 1 <= max_lag {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tail += pair;
        lag += 2;
    }
    (n as f64 / (1.0 + 2.0 * tail)).min(n as f64)
}
