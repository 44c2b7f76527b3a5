//! Per-cell dispersion, energy-to-density maps, the dispersion hyperbola
//! along optimal paths and its trends in κ.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::poly::{polyfit, Polynomial};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParabolaFit {
    /// Scale of `σ² = η μ (1 - μ)`.
    pub eta: f64,
    pub rms: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares `η` for `σ² ≈ η μ (1 - μ)`.
pub fn fit_dispersion(mu: &[f64], sigma2: &[f64]) -> Result<ParabolaFit> {
    if mu.len() != sigma2.len() {
        return Err(Error::InvalidArgument("mu and sigma2 must have equal length".into()));
    }
    let pts: Vec<(f64, f64)> = mu
        .iter()
        .zip(sigma2)
        .filter(|(m, s)| m.is_finite() && s.is_finite())
        .map(|(&m, &s)| (m * (1.0 - m), s))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!("need at least 5 (mu, sigma2) points, got {}", pts.len())));
    }
    let sbb: f64 = pts.iter().map(|(b, _)| b * b).sum();
    if sbb == 0.0 {
        return Err(Error::Degenerate("every mu is 0 or 1".into()));
    }
    let eta = pts.iter().map(|(b, s)| b * s).sum::<f64>() / sbb;
    let n = pts.len() as f64;
    let mean = pts.iter().map(|(_, s)| s).sum::<f64>() / n;
    let ss_res: f64 = pts.iter().map(|(b, s)| (s - eta * b).powi(2)).sum();
    let ss_tot: f64 = pts.iter().map(|(_, s)| (s - mean).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { f64::NEG_INFINITY };
    Ok(ParabolaFit { eta, rms: (ss_res / n).sqrt(), r_squared, n_points: pts.len() })
}

/// `y ≈ slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Affine least squares of tuning density against energy.
pub fn fit_energy_affine(epsilon: &[f64], density: &[f64]) -> Result<AffineFit> {
    if epsilon.len() != density.len() {
        return Err(Error::InvalidArgument("epsilon and density must have equal length".into()));
    }
    if epsilon.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 samples, got {}", epsilon.len())));
    }
    let n = epsilon.len() as f64;
    let mx = epsilon.iter().sum::<f64>() / n;
    let my = density.iter().sum::<f64>() / n;
    let sxx: f64 = epsilon.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("constant epsilon".into()));
    }
    let sxy: f64 = epsilon.iter().zip(density).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = epsilon.iter().zip(density).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = density.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(AffineFit { slope, intercept, r_squared })
}

/// `η(ε) = η₀ + b₁ / (ε - b₂)` with the pole below the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolaFit {
    pub eta0: f64,
    pub b1: f64,
    pub b2: f64,
    pub sse: f64,
}

impl HyperbolaFit {
    pub fn eval(&self, eps: f64) -> f64 {
        self.eta0 + self.b1 / (eps - self.b2)
    }
}

/// Linear sub-solve for `(η₀, b₁)` at a fixed pole; returns the SSE too.
fn hyperbola_at(eps: &[f64], eta: &[f64], b2: f64) -> (f64, f64, f64) {
    let x: Vec<f64> = eps.iter().map(|e| 1.0 / (e - b2)).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = eta.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(eta).map(|(v, y)| (v - mx) * (y - my)).sum();
    let b1 = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let eta0 = my - b1 * mx;
    let sse = x.iter().zip(eta).map(|(v, y)| (eta0 + b1 * v - y).powi(2)).sum();
    (eta0, b1, sse)
}

/// Fits the dispersion hyperbola to `(ε, η)` path samples.
///
/// The pole is searched on a log scale of its distance below `min ε`, then
/// refined by golden section and a few Gauss-Newton steps on all three
/// parameters.
pub fn fit_dispersion_hyperbola(epsilon: &[f64], eta: &[f64]) -> Result<HyperbolaFit> {
    if epsilon.len() != eta.len() {
        return Err(Error::InvalidArgument("epsilon and eta must have equal length".into()));
    }
    if epsilon.len() < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 samples, got {}", epsilon.len())));
    }
    let mut pts: Vec<(f64, f64)> = epsilon.iter().copied().zip(eta.iter().copied()).collect();
    if pts.iter().any(|(e, n)| !e.is_finite() || !n.is_finite()) {
        return Err(Error::InvalidArgument("hyperbola data must be finite".into()));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (eps, eta): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let span = eps[eps.len() - 1] - eps[0];
    if !(span > 0.0) {
        return Err(Error::Degenerate("constant epsilon".into()));
    }
    let scale = eta.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if eta.windows(2).any(|w| w[1] > w[0] + 1e-12 * scale) {
        return Err(Error::NonMonotone("eta must not increase with epsilon".into()));
    }
    let e_min = eps[0];
    let profile = |log_gap: f64| hyperbola_at(&eps, &eta, e_min - span * log_gap.exp()).2;

    let (lo, hi, steps) = ((1e-6f64).ln(), (1e6f64).ln(), 400);
    let at = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;
    let best = (0..=steps).min_by(|&a, &b| profile(at(a)).total_cmp(&profile(at(b)))).unwrap_or(0);
    let (mut a, mut b) = (at(best.saturating_sub(1)), at((best + 1).min(steps)));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (profile(c), profile(d));
    for _ in 0..200 {
        if b - a < 1e-14 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = profile(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = profile(d);
        }
    }
    let mut b2 = e_min - span * (0.5 * (a + b)).exp();
    let (mut eta0, mut b1, mut sse) = hyperbola_at(&eps, &eta, b2);

    for _ in 0..50 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&e, &y) in eps.iter().zip(&eta) {
            let x = 1.0 / (e - b2);
            let j = Vector3::new(1.0, x, b1 * x * x);
            jtj += j * j.transpose();
            jtr += j * (eta0 + b1 * x - y);
        }
        let Some(step) = jtj.lu().solve(&jtr) else { break };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let nb2 = b2 - t * step[2];
            if nb2 < e_min {
                let (n0, n1) = (eta0 - t * step[0], b1 - t * step[1]);
                let nsse: f64 = eps.iter().zip(&eta).map(|(e, y)| (n0 + n1 / (e - nb2) - y).powi(2)).sum();
                if nsse < sse {
                    (eta0, b1, b2, sse) = (n0, n1, nb2, nsse);
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved || step.norm() < 1e-15 * (1.0 + b2.abs()) {
            break;
        }
    }
    Ok(HyperbolaFit { eta0, b1, b2, sse })
}

/// Energy map and dispersion hyperbola along the optimal path at one κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub kappa: f64,
    /// Tuning density `E = a₁ ε + a₂`.
    pub a1: f64,
    pub a2: f64,
    pub affine_r2: f64,
    pub eta0: f64,
    pub b1: f64,
    pub b2: f64,
    pub sse: f64,
}

impl DispersionModel {
    pub fn new(kappa: f64, energy: AffineFit, hyperbola: HyperbolaFit) -> Result<Self> {
        if energy.slope == 0.0 || !energy.slope.is_finite() {
            return Err(Error::Degenerate("energy map slope is zero".into()));
        }
        Ok(Self {
            kappa,
            a1: energy.slope,
            a2: energy.intercept,
            affine_r2: energy.r_squared,
            eta0: hyperbola.eta0,
            b1: hyperbola.b1,
            b2: hyperbola.b2,
            sse: hyperbola.sse,
        })
    }

    pub fn eta_at_epsilon(&self, eps: f64) -> f64 {
        self.eta0 + self.b1 / (eps - self.b2)
    }

    /// `(c₁, c₂)` with `η = η₀ + c₁ / (E - c₂)`.
    pub fn c(&self) -> (f64, f64) {
        (self.a1 * self.b1, self.a2 + self.a1 * self.b2)
    }

    pub fn eta_at_energy(&self, energy: f64) -> f64 {
        let (c1, c2) = self.c();
        self.eta0 + c1 / (energy - c2)
    }
}

/// Degrees of the κ trends for `(a₁, a₂, b₁, b₂, η₀)`.
pub const TREND_DEGREES: [usize; 5] = [1, 1, 2, 4, 2];
/// Smallest κ used for the trend fits.
pub const TREND_KAPPA_MIN: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTrends {
    pub a1: Polynomial,
    pub a2: Polynomial,
    pub b1: Polynomial,
    pub b2: Polynomial,
    pub eta0: Polynomial,
    /// Per-κ residuals `model - trend` for `(a₁, a₂, b₁, b₂, η₀)`.
    pub residuals: Vec<(f64, [f64; 5])>,
}

impl KappaTrends {
    pub fn model_at(&self, kappa: f64) -> DispersionModel {
        DispersionModel {
            kappa,
            a1: self.a1.eval(kappa),
            a2: self.a2.eval(kappa),
            affine_r2: f64::NAN,
            eta0: self.eta0.eval(kappa),
            b1: self.b1.eval(kappa),
            b2: self.b2.eval(kappa),
            sse: f64::NAN,
        }
    }
}

fn fields(m: &DispersionModel) -> [f64; 5] {
    [m.a1, m.a2, m.b1, m.b2, m.eta0]
}

/// Polynomial trends of the per-κ models, fitted on `κ ≥ 100`.
pub fn fit_kappa_trends(models: &[DispersionModel]) -> Result<KappaTrends> {
    if models.len() < 7 {
        return Err(Error::InsufficientData(format!("need at least 7 kappa samples, got {}", models.len())));
    }
    let used: Vec<&DispersionModel> = models.iter().filter(|m| m.kappa >= TREND_KAPPA_MIN).collect();
    let kappa: Vec<f64> = used.iter().map(|m| m.kappa).collect();
    let fit = |k: usize| {
        let y: Vec<f64> = used.iter().map(|m| fields(m)[k]).collect();
        polyfit(&kappa, &y, TREND_DEGREES[k])
    };
    let [a1, a2, b1, b2, eta0] = [fit(0)?, fit(1)?, fit(2)?, fit(3)?, fit(4)?];
    let trends = [&a1, &a2, &b1, &b2, &eta0];
    let residuals = models
        .iter()
        .map(|m| {
            let f = fields(m);
            (m.kappa, std::array::from_fn(|k| f[k] - trends[k].eval(m.kappa)))
        })
        .collect();
    Ok(KappaTrends { a1, a2, b1, b2, eta0, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bernoulli_gives_unit_eta() {
        let mu: Vec<f64> = (0..7).map(|i| 0.2 + 0.1 * i as f64).collect();
        let s: Vec<f64> = mu.iter().map(|m| m * (1.0 - m)).collect();
        let fit = fit_dispersion(&mu, &s).unwrap();
        assert!((fit.eta - 1.0).abs() < 1e-14);
        assert!(fit.rms < 1e-15);
    }

    #[test]
    fn parabola_rejects_short_slices() {
        assert!(fit_dispersion(&[0.2, 0.3, 0.4, 0.5], &[0.1; 4]).is_err());
        assert!(fit_dispersion(&[0.2, 0.3, 0.4, 0.5, f64::NAN], &[0.1; 5]).is_err());
    }

    #[test]
    fn hyperbola_limit_and_c_substitution() {
        let eps: Vec<f64> = (0..9).map(|i| 2.0 + i as f64).collect();
        let eta: Vec<f64> = eps.iter().map(|e| 2.0 + 5.0 / (e - 1.0)).collect();
        let h = fit_dispersion_hyperbola(&eps, &eta).unwrap();
        assert!((h.eval(1e12) - h.eta0).abs() < 1e-9);
        let m = DispersionModel::new(120.0, AffineFit { slope: 0.3, intercept: 1.7, r_squared: 1.0 }, h).unwrap();
        for &e in &eps {
            let energy = m.a1 * e + m.a2;
            assert!((m.eta_at_energy(energy) - m.eta_at_epsilon(e)).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperbola_rejects_increasing_eta() {
        let eps = [1.0, 2.0, 3.0, 4.0];
        assert!(matches!(fit_dispersion_hyperbola(&eps, &[1.0, 0.9, 0.95, 0.8]), Err(Error::NonMonotone(_))));
        assert!(matches!(fit_dispersion_hyperbola(&eps[..3], &[1.0, 0.9, 0.8]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn affine_recovery_and_degenerate() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v| 0.25 * v - 3.0).collect();
        let f = fit_energy_affine(&x, &y).unwrap();
        assert!((f.slope - 0.25).abs() < 1e-14 && (f.intercept + 3.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(matches!(fit_energy_affine(&[2.0; 3], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    }

    proptest! {
        #[test]
        fn parabola_exact_for_any_eta(eta in 0.0f64..5.0, lo in 0.05f64..0.3, n in 5usize..20) {
            let mu: Vec<f64> = (0..n).map(|i| lo + (0.9 - lo) * i as f64 / (n - 1) as f64).collect();
            let s: Vec<f64> = mu.iter().map(|m| eta * m * (1.0 - m)).collect();
            let fit = fit_dispersion(&mu, &s).unwrap();
            prop_assert!((fit.eta - eta).abs() < 1e-12 * eta.max(1.0));
        }

        #[test]
        fn hyperbola_beats_affine_on_convex_decreasing(
            eta0 in -1.0f64..3.0, b1 in 0.1f64..10.0, gap in 0.05f64..5.0, n in 4usize..12
        ) {
            let eps: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let b2 = 1.0 - gap;
            let eta: Vec<f64> = eps.iter().map(|e| eta0 + b1 / (e - b2)).collect();
            let h = fit_dispersion_hyperbola(&eps, &eta).unwrap();
            let a = fit_energy_affine(&eps, &eta).unwrap();
            let affine_sse: f64 = eps.iter().zip(&eta).map(|(e, y)| (a.slope * e + a.intercept - y).powi(2)).sum();
            prop_assert!(h.sse < affine_sse);
            prop_assert!(h.b2 < 1.0);
        }
    }
}
