use crate::analytic::PopulationSolution;
use crate::error::{Error, Result};
use crate::grid::{Prior, RateTarget, StimulusGrid};
use crate::scalar::Real;

/// Unit-height Gaussian base shape `ĥ(x) = exp(-x² / 2σ²)` in cumulative-density units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseShape<T> {
    pub sigma: T,
}

impl<T: Real> Default for BaseShape<T> {
    fn default() -> Self {
        Self { sigma: T::one() }
    }
}

impl<T: Real> BaseShape<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidArgument(format!("base width {sigma} must be positive")));
        }
        Ok(Self { sigma })
    }

    pub fn eval(&self, x: T) -> T {
        let z = x / self.sigma;
        (-T::lit(0.5) * z * z).exp()
    }

    /// `∫ ĥ(x) dx = σ √(2π)`.
    pub fn area(&self) -> T {
        self.sigma * T::lit((2.0 * std::f64::consts::PI).sqrt())
    }

    /// Continuum tiling constant `∫ ĥ'² / ĥ dx = √(2π) / σ` for unit spacing.
    pub fn tiling_constant(&self) -> T {
        T::lit((2.0 * std::f64::consts::PI).sqrt()) / self.sigma
    }

    /// FWHM of the base shape in cumulative-density units.
    pub fn fwhm(&self) -> T {
        T::lit(2.0 * (2.0 * std::f64::consts::LN_2).sqrt()) * self.sigma
    }
}

/// A population of tuning curves `h_n(s) = g(s) ĥ(D(s) - D(s_n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningCurveBank<T> {
    pub grid: StimulusGrid<T>,
    pub gain: Vec<T>,
    pub density: Vec<T>,
    /// `D(s)`, the running integral of the density.
    pub cumulative: Vec<T>,
    /// `∫ d` over the whole domain.
    pub total: T,
    pub shape: BaseShape<T>,
    pub preferred: Vec<T>,
    pub curves: Vec<Vec<T>>,
}

impl<T: Real> TuningCurveBank<T> {
    /// Cumulative density at an arbitrary stimulus.
    pub fn cumulative_at(&self, s: T) -> T {
        if !self.grid.is_periodic() {
            return self.grid.interpolate(&self.cumulative, s);
        }
        // D is not periodic: unwrap s into [s_0, s_0 + period) and use the wrap segment
        let x = self.grid.points();
        let n = x.len();
        let period = self.grid.period();
        let mut u = (s - x[0]) % period;
        if u < T::zero() {
            u = u + period;
        }
        let u = x[0] + u;
        if u <= x[n - 1] {
            self.grid.interpolate(&self.cumulative, u)
        } else {
            let t = (u - x[n - 1]) / (x[0] + period - x[n - 1]);
            self.cumulative[n - 1] + t * (self.total - self.cumulative[n - 1])
        }
    }

    /// Stimulus whose cumulative density equals `target` (linear inverse of `D`).
    pub fn inverse_cumulative(&self, target: T) -> T {
        let x = self.grid.points();
        let c = &self.cumulative;
        let n = x.len();
        if target <= T::zero() {
            return x[0];
        }
        if target >= c[n - 1] {
            if !self.grid.is_periodic() {
                return x[n - 1];
            }
            let span = self.total - c[n - 1];
            let t = if span > T::zero() { (target - c[n - 1]) / span } else { T::zero() };
            let end = x[0] + self.grid.period();
            return x[n - 1] + t.min(T::one()) * (end - x[n - 1]);
        }
        let i = c.partition_point(|&v| v <= target).max(1) - 1;
        let dc = c[i + 1] - c[i];
        let t = if dc > T::zero() { (target - c[i]) / dc } else { T::zero() };
        x[i] + t * (x[i + 1] - x[i])
    }

    /// Tuning curve of a neuron preferring stimulus `s_pref`, on the bank's grid.
    pub fn curve_at(&self, s_pref: T) -> Vec<T> {
        let anchor = self.cumulative_at(s_pref);
        self.curve_from_anchor(anchor)
    }

    fn curve_from_anchor(&self, anchor: T) -> Vec<T> {
        let images: &[i32] = if self.grid.is_periodic() { &[-3, -2, -1, 0, 1, 2, 3] } else { &[0] };
        self.cumulative
            .iter()
            .zip(&self.gain)
            .map(|(&c, &g)| {
                let base: T = images
                    .iter()
                    .map(|&k| self.shape.eval(c - anchor + T::lit(k as f64) * self.total))
                    .sum();
                g * base
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Places `n_neurons` Gaussian tuning curves evenly in cumulative-density space.
///
/// Neuron `n` (1-based) sits where `D(s_n) = (n - 1/2) · ∫d / N`, which is the
/// `n - 1/2` lattice when the density integrates to `N`.
pub fn build_tuning_bank<T: Real>(
    sol: &PopulationSolution<T>,
    n_neurons: usize,
    shape: BaseShape<T>,
) -> Result<TuningCurveBank<T>> {
    if n_neurons < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 neurons, got {n_neurons}"
        )));
    }
    let (cumulative, total) = sol.grid.cumulative(&sol.density);
    if !(total > T::zero()) {
        return Err(Error::InvalidArgument("density has no mass".into()));
    }
    let mut bank = TuningCurveBank {
        grid: sol.grid.clone(),
        gain: sol.gain.clone(),
        density: sol.density.clone(),
        cumulative,
        total,
        shape,
        preferred: Vec::with_capacity(n_neurons),
        curves: Vec::with_capacity(n_neurons),
    };
    let spacing = total / T::from_count(n_neurons);
    for n in 0..n_neurons {
        let anchor = (T::from_count(n) + T::lit(0.5)) * spacing;
        bank.preferred.push(bank.inverse_cumulative(anchor));
        let curve = bank.curve_from_anchor(anchor);
        bank.curves.push(curve);
    }
    Ok(bank)
}

/// Population Fisher information `Σ h_n'² / (η h_n)` under dispersed-Poisson noise.
///
/// Derivatives are central differences on the grid; terms where a curve is
/// below `1e-12` are dropped.
pub fn exact_fisher<T: Real>(bank: &TuningCurveBank<T>, eta: T) -> Vec<T> {
    let floor = T::lit(1e-12);
    let mut fi = vec![T::zero(); bank.grid.len()];
    for curve in &bank.curves {
        let slope = bank.grid.derivative(curve);
        for ((acc, &h), &dh) in fi.iter_mut().zip(curve).zip(&slope) {
            if h >= floor {
                *acc = *acc + dh * dh / (eta * h);
            }
        }
    }
    fi
}

/// Relative deviation of each neuron's expected rate `∫ p h_n / ∫ĥ` from `R(s_n)`.
pub fn homeostasis_residual<T: Real>(
    bank: &TuningCurveBank<T>,
    prior: &Prior<T>,
    target: &RateTarget<T>,
) -> Vec<T> {
    let area = bank.shape.area();
    bank.curves
        .iter()
        .zip(&bank.preferred)
        .map(|(curve, &s_n)| {
            let rate = bank.grid.integrate_product(prior.values(), curve) / area;
            let r = bank.grid.interpolate(target.values(), s_n);
            (rate - r) / r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{solve_optimal_code, EnergyConstraint, Objective, PopulationSpec};
    use approx::assert_relative_eq;

    fn solution(prior: Prior<f64>, grid: StimulusGrid<f64>, obj: Objective<f64>, budget: f64, rate: f64) -> (PopulationSpec<f64>, PopulationSolution<f64>) {
        let rate = RateTarget::constant(&grid, rate).unwrap();
        let spec = PopulationSpec::new(grid, prior, rate, obj, EnergyConstraint::new(budget, 1.0).unwrap()).unwrap();
        let sol = solve_optimal_code(&spec).unwrap();
        (spec, sol)
    }

    #[test]
    fn uniform_bank_is_evenly_spaced_identical_shapes() {
        let grid = StimulusGrid::orientation(720).unwrap();
        let prior = Prior::uniform(&grid);
        let (_, sol) = solution(prior, grid, Objective::Infomax, 10.0, 1.0);
        let bank = build_tuning_bank(&sol, 10, BaseShape::default()).unwrap();
        for w in bank.preferred.windows(2) {
            assert_relative_eq!(w[1] - w[0], 18.0, epsilon = 1e-9);
        }
        assert_relative_eq!(bank.preferred[0], -81.0, epsilon = 1e-9);
        let peaks: Vec<f64> = bank.curves.iter().map(|c| c.iter().cloned().fold(0.0, f64::max)).collect();
        for p in &peaks {
            assert_relative_eq!(*p, peaks[0], max_relative = 1e-6);
        }
    }

    #[test]
    fn single_gaussian_fisher_matches_closed_form() {
        let grid = StimulusGrid::<f64>::closed(-60.0, 60.0, 2001).unwrap();
        let sigma: f64 = 10.0;
        let curve: Vec<f64> = grid.points().iter().map(|s| (-0.5 * (s / sigma).powi(2)).exp()).collect();
        let bank = TuningCurveBank {
            grid: grid.clone(),
            gain: vec![1.0; 2001],
            density: vec![1.0 / sigma; 2001],
            cumulative: grid.points().iter().map(|s| (s + 60.0) / sigma).collect(),
            total: 12.0,
            shape: BaseShape::default(),
            preferred: vec![0.0],
            curves: vec![curve],
        };
        let fi = exact_fisher(&bank, 1.0);
        for (i, &s) in grid.points().iter().enumerate().skip(1).take(1998) {
            let h = (-0.5 * (s / sigma).powi(2)).exp();
            let dh = -s / (sigma * sigma) * h;
            assert_relative_eq!(fi[i], dh * dh / h, epsilon = 1e-6, max_relative = 1e-4);
        }
    }

    #[test]
    fn dense_tiling_matches_approximate_fisher() {
        let grid = StimulusGrid::orientation(1024).unwrap();
        let prior = Prior::cardinal(&grid, 0.3).unwrap();
        let (_, sol) = solution(prior, grid, Objective::Infomax, 40.0, 1.0);
        let n = sol.population_size().round() as usize;
        let shape = BaseShape::default();
        let bank = build_tuning_bank(&sol, n, shape).unwrap();
        let fi = exact_fisher(&bank, 1.0);
        let i_conv = shape.tiling_constant();
        for i in bank.grid.central_indices(0.8) {
            let approx = i_conv * sol.gain[i] * sol.density[i].powi(2);
            assert!((fi[i] / approx - 1.0).abs() < 0.05, "i={i} {} vs {approx}", fi[i]);
        }
    }

    #[test]
    fn uniform_homeostasis_is_exact() {
        let grid = StimulusGrid::orientation(512).unwrap();
        let prior = Prior::uniform(&grid);
        let (spec, sol) = solution(prior.clone(), grid, Objective::Infomax, 12.0, 1.0);
        let bank = build_tuning_bank(&sol, 12, BaseShape::default()).unwrap();
        let res = homeostasis_residual(&bank, &prior, &spec.rate);
        assert!(res.iter().all(|r| r.abs() < 1e-9), "{res:?}");
    }

    #[test]
    fn nonuniform_widths_follow_inverse_density() {
        let grid = StimulusGrid::orientation(2048).unwrap();
        let prior = Prior::cardinal(&grid, 0.5).unwrap();
        let (spec, sol) = solution(prior.clone(), grid, Objective::Infomax, 30.0, 1.0);
        let bank = build_tuning_bank(&sol, 30, BaseShape::default()).unwrap();
        for (curve, &s_n) in bank.curves.iter().zip(&bank.preferred) {
            let d = bank.grid.interpolate(&sol.density, s_n);
            // curvature at the peak: h''/h = -(d/σ)² for slowly varying d
            let (above, total): (usize, usize) = (curve.iter().filter(|&&h| h > 0.5 * 30.0).count(), curve.len());
            let width = above as f64 * 180.0 / total as f64;
            let half = 0.5 * BaseShape::<f64>::default().fwhm();
            let at = bank.cumulative_at(s_n);
            if at < half || at + half > bank.total {
                continue;
            }
            let exact = bank.inverse_cumulative(at + half) - bank.inverse_cumulative(at - half);
            assert!((width - exact).abs() < 0.5, "s_n={s_n}: {width} vs {exact}");
            let local = 2.0 * half / d;
            assert!((width / local - 1.0).abs() < 0.15, "s_n={s_n}: {width} vs {local}");
        }
        let res = homeostasis_residual(&bank, &prior, &spec.rate);
        assert!(res.iter().all(|r| r.abs() < 0.02));
    }

    #[test]
    fn needs_three_neurons() {
        let grid = StimulusGrid::orientation(128).unwrap();
        let prior = Prior::uniform(&grid);
        let (_, sol) = solution(prior, grid, Objective::Infomax, 6.0, 1.0);
        assert!(build_tuning_bank(&sol, 2, BaseShape::default()).is_err());
    }
}
