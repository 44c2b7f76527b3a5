use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{CellState, Simulator, TrialMode, TrialOutcome};
use crate::error::{Error, Result};

/// Spike-count moments and mean energies over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    /// Mean output spike count per input spike.
    pub mu_f: f64,
    /// Variance of the spike count (of the empirical distribution).
    pub sigma2_f: f64,
    /// Mean ATP per trial from the synaptic current.
    pub eps_sig: f64,
    /// Mean ATP per trial from the Na⁺ channel and Na⁺ leak currents.
    pub eps_bg: f64,
    pub n_trials: usize,
    /// Empirical distribution of the spike count, index = count.
    pub count_pmf: Vec<f64>,
}

impl TrialStats {
    pub fn from_counts(counts: &[u32], eps_sig: &[f64], eps_bg: &[f64]) -> Result<Self> {
        let n = counts.len();
        if n == 0 || eps_sig.len() != n || eps_bg.len() != n {
            return Err(Error::InsufficientData("need matching, nonempty count and energy samples".into()));
        }
        let nf = n as f64;
        let top = *counts.iter().max().unwrap_or(&0) as usize;
        let mut pmf = vec![0.0; top + 1];
        for &c in counts {
            pmf[c as usize] += 1.0;
        }
        pmf.iter_mut().for_each(|p| *p /= nf);
        let mu_f = counts.iter().map(|&c| c as f64).sum::<f64>() / nf;
        let sigma2_f = counts.iter().map(|&c| (c as f64 - mu_f).powi(2)).sum::<f64>() / nf;
        Ok(Self {
            mu_f,
            sigma2_f,
            eps_sig: eps_sig.iter().sum::<f64>() / nf,
            eps_bg: eps_bg.iter().sum::<f64>() / nf,
            n_trials: n,
            count_pmf: pmf,
        })
    }

    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Result<Self> {
        let counts: Vec<u32> = outcomes.iter().map(|o| o.spikes).collect();
        let sig: Vec<f64> = outcomes.iter().map(|o| o.eps_sig).collect();
        let bg: Vec<f64> = outcomes.iter().map(|o| o.eps_bg).collect();
        Self::from_counts(&counts, &sig, &bg)
    }

    /// `σ²_F / (μ_F(1 − μ_F))`, the single-state dispersion.
    pub fn dispersion(&self) -> f64 {
        self.sigma2_f / (self.mu_f * (1.0 - self.mu_f))
    }
}

/// Mixes a base seed with a stream index (splitmix64 finalizer), so every
/// trial gets an independent, position-determined seed.
pub fn trial_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `n_trials` trials with seeds `trial_seed(seed, i)`.
///
/// Trials run in parallel; results are reduced in trial order, so the
/// statistics do not depend on the thread count. In [`TrialMode::CountOnly`]
/// the energy fields are partial and reported as NaN.
pub fn estimate_stats(sim: &Simulator, cell: &CellState, n_trials: usize, seed: u64, mode: TrialMode) -> Result<TrialStats> {
    if n_trials < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 trials, got {n_trials}")));
    }
    cell.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| sim.trial(cell, trial_seed(seed, i), mode, false))
        .collect::<Result<_>>()?;
    let mut stats = TrialStats::from_outcomes(&outcomes)?;
    if mode == TrialMode::CountOnly {
        stats.eps_sig = f64::NAN;
        stats.eps_bg = f64::NAN;
    }
    Ok(stats)
}

/// Finds the synaptic conductance whose stochastic mean count is within
/// `tol` of `target`, by bisection on `[0, 250]` µS/cm².
///
/// All evaluations share the same trial seeds, which keeps the estimated
/// mean count close to monotone in the conductance.
pub fn calibrate_gsyn(
    sim: &Simulator,
    v_rest: f64,
    g_leak: f64,
    target: f64,
    tol: f64,
    n_trials: usize,
    seed: u64,
) -> Result<f64> {
    let cell = CellState::new(v_rest, g_leak, 0.0)?;
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mean = |g: f64| estimate_stats(sim, &cell.with_g_syn(g), n_trials, seed, TrialMode::CountOnly).map(|s| s.mu_f);
    let (mut lo, mut hi) = CellState::G_SYN_RANGE;
    let mu_hi = mean(hi)?;
    if mu_hi < target - tol {
        return Err(Error::Unreachable { target, lo, hi, mu_lo: 0.0, mu_hi });
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let mu = mean(mid)?;
        if (mu - target).abs() < best.0 {
            best = ((mu - target).abs(), mid);
        }
        if (mu - target).abs() < tol {
            return Ok(mid);
        }
        if mu < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Err(Error::NoConvergence { solver: "calibrate_gsyn", iterations: 60, residual: best.0 })
}

/// Conductances at which the noise-free cell starts to fire 1, 2, …
/// spikes, up to `max_spikes` or the top of the conductance range.
pub fn spike_thresholds(sim: &Simulator, v_rest: f64, g_leak: f64, max_spikes: u32) -> Result<Vec<f64>> {
    let quiet = sim.with_sim(sim.config().sim.noise_free())?;
    let cell = CellState::new(v_rest, g_leak, 0.0)?;
    let count = |g: f64| quiet.trial(&cell.with_g_syn(g), 0, TrialMode::CountOnly, false).map(|o| o.spikes);
    let (g_min, g_max) = CellState::G_SYN_RANGE;
    let top = count(g_max)?;
    let mut thresholds = Vec::new();
    let mut lo = g_min;
    for k in 1..=max_spikes.min(top) {
        let mut hi = g_max;
        for _ in 0..45 {
            let mid = 0.5 * (lo + hi);
            if count(mid)? >= k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        thresholds.push(hi);
        lo = hi;
    }
    Ok(thresholds)
}

/// Mean count of the noise-free cell when only the synaptic amplitude is
/// noisy: `Σ_k P(A ≥ g*_k)` with `A ~ N(g, (cv·g)²)`.
pub fn deterministic_mean_count(g_syn: f64, thresholds: &[f64], cv: f64) -> f64 {
    thresholds
        .iter()
        .map(|&t| {
            if g_syn <= 0.0 {
                0.0
            } else if cv == 0.0 {
                if g_syn >= t {
                    1.0
                } else {
                    0.0
                }
            } else {
                0.5 * erfc((t - g_syn) / (cv * g_syn * std::f64::consts::SQRT_2))
            }
        })
        .sum()
}

/// Conductances at which [`deterministic_mean_count`] equals `lo_target`
/// and `hi_target`.
pub fn gsyn_bounds(thresholds: &[f64], cv: f64, lo_target: f64, hi_target: f64) -> Result<(f64, f64)> {
    let (g_min, g_max) = CellState::G_SYN_RANGE;
    let at_max = deterministic_mean_count(g_max, thresholds, cv);
    if at_max < hi_target {
        return Err(Error::Unreachable { target: hi_target, lo: g_min, hi: g_max, mu_lo: 0.0, mu_hi: at_max });
    }
    let solve = |target: f64| {
        let (mut lo, mut hi) = (g_min, g_max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if deterministic_mean_count(mid, thresholds, cv) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    Ok((solve(lo_target), solve(hi_target)))
}

/// Moments of the output count over a window with Poisson input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrainMoments {
    pub mean: f64,
    pub variance: f64,
    pub fano: f64,
}

/// Compound-Poisson moments: `E[O] = λTμ_F`, `Var[O] = λT(σ²_F + μ_F²)`.
pub fn spike_train_moments(lambda_rate: f64, window: f64, stats: &TrialStats) -> Result<SpikeTrainMoments> {
    let lt = lambda_rate * window;
    if !(lt > 0.0) {
        return Err(Error::InvalidArgument(format!("need λT > 0, got {lt}")));
    }
    let mean = lt * stats.mu_f;
    let variance = lt * (stats.sigma2_f + stats.mu_f * stats.mu_f);
    let fano = if mean > 0.0 { variance / mean } else { 0.0 };
    Ok(SpikeTrainMoments { mean, variance, fano })
}
