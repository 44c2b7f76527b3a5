//! Tuning widths from a measured conductance-to-response map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative peak boost of the probe tuning curve above the calibrated
/// conductance.
pub const PROBE_BOOST: f64 = 0.02;
/// Width of the Gaussian probe, degrees.
pub const PROBE_SIGMA_DEG: f64 = 170.0;
/// Circular stimulus domain `[-90, 90)`.
pub const STIMULUS_PERIOD_DEG: f64 = 180.0;
const PROBE_STEP_DEG: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fwhm {
    pub width: f64,
    /// The curve never drops below half its maximum; `width` is the period.
    pub full_domain: bool,
}

/// Pool-adjacent-violators: the nondecreasing sequence closest to `y` in
/// least squares.
pub fn isotonic_increasing(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(m, n)| std::iter::repeat_n(m, n)).collect()
}

/// Monotone piecewise-linear map from conductance to mean count, extended
/// linearly beyond the sampled range and clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    g: Vec<f64>,
    mu: Vec<f64>,
}

impl ResponseMap {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.iter().copied().filter(|(g, m)| g.is_finite() && m.is_finite()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.dedup_by(|a, b| a.0 == b.0);
        if pts.len() < 2 {
            return Err(Error::InsufficientData("response map needs two distinct conductances".into()));
        }
        let (g, raw): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Ok(Self { g, mu: isotonic_increasing(&raw) })
    }

    pub fn eval(&self, g: f64) -> f64 {
        let n = self.g.len();
        let i = self.g.partition_point(|&x| x <= g).clamp(1, n - 1);
        let (g0, g1, m0, m1) = (self.g[i - 1], self.g[i], self.mu[i - 1], self.mu[i]);
        (m0 + (m1 - m0) * (g - g0) / (g1 - g0)).max(0.0)
    }
}

/// FWHM of samples on a circular domain of `period`, measured from the
/// peak outwards, with linear interpolation of the half-max crossings.
pub fn fwhm_circular(y: &[f64], step: f64, period: f64) -> Result<Fwhm> {
    let n = y.len();
    if n < 3 || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("need at least 3 finite samples".into()));
    }
    let (peak, &max) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap_or((0, &0.0));
    if !(max > 0.0) {
        return Err(Error::Degenerate("curve has no positive peak".into()));
    }
    let half = 0.5 * max;
    let crossing = |dir: isize| -> Option<f64> {
        let mut prev = max;
        for k in 1..n {
            let v = y[(peak as isize + dir * k as isize).rem_euclid(n as isize) as usize];
            if v < half {
                return Some(step * ((k - 1) as f64 + (prev - half) / (prev - v)));
            }
            prev = v;
        }
        None
    };
    match (crossing(-1), crossing(1)) {
        (Some(l), Some(r)) if l + r < period => Ok(Fwhm { width: l + r, full_domain: false }),
        _ => Ok(Fwhm { width: period, full_domain: true }),
    }
}

/// Probe tuning curve `(1 + boost) ĝ exp(-s² / 2σ²)` on `[-90, 90)`.
pub fn probe_curve(g_hat: f64, boost: f64, sigma_deg: f64) -> (Vec<f64>, f64) {
    let n = (STIMULUS_PERIOD_DEG / PROBE_STEP_DEG).round() as usize;
    let curve = (0..n)
        .map(|i| {
            let s = -0.5 * STIMULUS_PERIOD_DEG + i as f64 * PROBE_STEP_DEG;
            (1.0 + boost) * g_hat * (-0.5 * (s / sigma_deg).powi(2)).exp()
        })
        .collect();
    (curve, PROBE_STEP_DEG)
}

/// Width of the response to the probe tuning curve after passing it through
/// the cell's measured conductance-to-count map.
pub fn compute_fwhm(response: &[(f64, f64)], g_hat: f64) -> Result<Fwhm> {
    if !(g_hat > 0.0) {
        return Err(Error::InvalidArgument(format!("calibrated conductance must be positive, got {g_hat}")));
    }
    let map = ResponseMap::new(response)?;
    let (probe, step) = probe_curve(g_hat, PROBE_BOOST, PROBE_SIGMA_DEG);
    let mu: Vec<f64> = probe.iter().map(|&g| map.eval(g)).collect();
    fwhm_circular(&mu, step, STIMULUS_PERIOD_DEG)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gaussian_fwhm() {
        let sigma = 7.0;
        let step = 0.01;
        let y: Vec<f64> = (0..18000).map(|i| (-0.5 * ((-90.0 + i as f64 * step) / sigma).powi(2)).exp()).collect();
        let w = fwhm_circular(&y, step, 180.0).unwrap();
        assert!(!w.full_domain);
        assert!((w.width - 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma).abs() < 1e-4);
    }

    #[test]
    fn broad_probe_never_halves() {
        // with an identity map the σ = 170° probe stays above half height
        let (probe, step) = probe_curve(1.0, 0.0, PROBE_SIGMA_DEG);
        let w = fwhm_circular(&probe, step, STIMULUS_PERIOD_DEG).unwrap();
        assert!(w.full_domain);
        assert_eq!(w.width, 180.0);
    }

    #[test]
    fn crossing_wraps_around_the_domain() {
        // peak near the edge; the left crossing lies past -90
        let step = 0.05;
        let y: Vec<f64> = (0..3600)
            .map(|i| {
                let s = -90.0 + i as f64 * step;
                let d = (s - 85.0 + 90.0).rem_euclid(180.0) - 90.0;
                (-0.5 * (d / 10.0).powi(2)).exp()
            })
            .collect();
        let w = fwhm_circular(&y, step, 180.0).unwrap();
        assert!((w.width - 2.0 * (2.0 * 2f64.ln()).sqrt() * 10.0).abs() < 1e-3);
    }

    #[test]
    fn steeper_map_gives_narrower_width() {
        let g_hat = 60.0;
        let map = |slope: f64| -> Vec<(f64, f64)> {
            (0..11).map(|k| {
                let g = g_hat * (0.84 + 0.02 * k as f64);
                (g, 0.1 * (slope * (g / g_hat - 1.0)).exp())
            }).collect()
        };
        let steep = compute_fwhm(&map(30.0), g_hat).unwrap();
        let shallow = compute_fwhm(&map(15.0), g_hat).unwrap();
        assert!(!steep.full_domain && !shallow.full_domain);
        assert!(shallow.width > steep.width);
    }

    proptest! {
        #[test]
        fn isotonic_is_monotone_and_mean_preserving(y in proptest::collection::vec(-5.0f64..5.0, 1..40)) {
            let z = isotonic_increasing(&y);
            prop_assert_eq!(z.len(), y.len());
            prop_assert!(z.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            let (a, b): (f64, f64) = (y.iter().sum(), z.iter().sum());
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
