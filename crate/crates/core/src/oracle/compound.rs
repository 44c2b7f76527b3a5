use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

/// Empirical moments of a compound Poisson count with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompoundMoments {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub n_draws: usize,
}

impl CompoundMoments {
    pub fn fano(&self) -> f64 {
        if self.mean > 0.0 {
            self.variance / self.mean
        } else {
            0.0
        }
    }
}

/// Draws `O = Σ_{i<K} F_i` with `K ~ Poisson(lambda_t)` and i.i.d. `F_i`
/// distributed on `{0, 1, .., pmf.len()-1}` by `pmf`.
pub fn compound_sampler(lambda_t: f64, pmf: &[f64], n_draws: usize, seed: u64) -> Result<CompoundMoments> {
    if !(lambda_t >= 0.0) || !lambda_t.is_finite() {
        return Err(Error::InvalidArgument(format!("rate-duration product must be finite and nonnegative, got {lambda_t}")));
    }
    if pmf.is_empty() || pmf.iter().any(|&p| !(p >= 0.0)) {
        return Err(Error::InvalidArgument("per-spike distribution must be a nonnegative pmf".into()));
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("per-spike distribution sums to {total}")));
    }
    if n_draws < 2 {
        return Err(Error::InvalidArgument("need at least two draws".into()));
    }
    let cdf: Vec<f64> = pmf
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = if lambda_t > 0.0 {
        Some(Poisson::new(lambda_t).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let draws: Vec<f64> = (0..n_draws)
        .map(|_| {
            let k = poisson.as_ref().map_or(0, |d| d.sample(&mut rng) as u64);
            (0..k)
                .map(|_| {
                    let u: f64 = rng.random();
                    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u64
                })
                .sum::<u64>() as f64
        })
        .collect();
    let n = n_draws as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let m2 = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = draws.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let variance = m2 * n / (n - 1.0);
    Ok(CompoundMoments {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        n_draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_thinning_mean() {
        let m = compound_sampler(10.0, &[0.9, 0.1], 100_000, 7).unwrap();
        assert!((m.mean - 1.0).abs() < 3.0 * m.se_mean);
        // thinned Poisson is Poisson
        assert!((m.variance - 1.0).abs() < 3.0 * m.se_variance);
    }

    #[test]
    fn zero_rate_is_always_zero() {
        let m = compound_sampler(0.0, &[0.2, 0.5, 0.3], 1000, 1).unwrap();
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.0);
    }

    #[test]
    fn rejects_bad_pmf() {
        assert!(compound_sampler(1.0, &[0.5, 0.4], 10, 0).is_err());
        assert!(compound_sampler(1.0, &[], 10, 0).is_err());
        assert!(compound_sampler(-1.0, &[1.0], 10, 0).is_err());
    }

    #[test]
    fn same_seed_same_moments() {
        let a = compound_sampler(3.0, &[0.5, 0.3, 0.1, 0.1], 5000, 42).unwrap();
        let b = compound_sampler(3.0, &[0.5, 0.3, 0.1, 0.1], 5000, 42).unwrap();
        assert_eq!(a, b);
    }
}
