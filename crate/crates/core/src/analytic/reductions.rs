//! Earlier optimal-coding models recovered as special cases: the mean firing
//! rate + population size model (`α = 1`, `E := R`, `R(s) := R/N`) and the
//! fixed-gain coding-capacity model (`α = 3/2`, `g ∝ 1`, `R(s) := E/C`).

use crate::analytic::{Objective, PopulationSolution, PopulationSpec, PRIOR_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{Prior, StimulusGrid};
use crate::oracle::{gs_numeric, OracleOptions};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanRateParams<T> {
    /// Population mean firing rate `∫ p g = R`.
    pub mean_rate: T,
    /// Population size `∫ d = N`.
    pub n_neurons: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityParams<T> {
    /// Coding capacity `∫ √(g d²) = C`.
    pub capacity: T,
    /// The fixed (maximum-rate) gain.
    pub gain: T,
}

fn powered_mass<T: Real>(grid: &StimulusGrid<T>, p: &[T], exponent: T) -> T {
    let floor = T::lit(PRIOR_FLOOR);
    grid.weights()
        .iter()
        .zip(p)
        .filter(|(_, &p)| p >= floor)
        .map(|(&w, &p)| w * p.powf(exponent))
        .sum()
}

/// Optimal code under a mean firing rate and population size constraint.
///
/// `g ∝ R p^{2β/(1-3β)}` (constant for infomax) and `d = N p g / R`, which
/// integrates to `N` whenever `∫ p g = R`.
pub fn mean_rate_model<T: Real>(
    grid: &StimulusGrid<T>,
    prior: &Prior<T>,
    objective: Objective<T>,
    params: MeanRateParams<T>,
) -> Result<PopulationSolution<T>> {
    objective.validate(T::one())?;
    let MeanRateParams { mean_rate, n_neurons } = params;
    if !(mean_rate > T::zero()) || !(n_neurons > T::zero()) {
        return Err(Error::InvalidArgument("mean rate and population size must be positive".into()));
    }
    let p = prior.values();
    let exponent = match objective.beta() {
        None => T::zero(),
        Some(b) => T::lit(2.0) * b / (T::one() - T::lit(3.0) * b),
    };
    let mass = powered_mass(grid, p, T::one() + exponent);
    let floor = T::lit(PRIOR_FLOOR);
    let gain: Vec<T> = p
        .iter()
        .map(|&p| if p >= floor { mean_rate * p.powf(exponent) / mass } else { T::zero() })
        .collect();
    let density: Vec<T> = p.iter().zip(&gain).map(|(&p, &g)| n_neurons * p * g / mean_rate).collect();
    let rate = vec![mean_rate / n_neurons; p.len()];
    Ok(PopulationSolution::from_gain_density(
        grid.clone(),
        p,
        &rate,
        gain,
        density,
        T::one(),
        T::one(),
        T::one(),
        mass,
    ))
}

/// Optimal code with a fixed gain under a coding-capacity constraint.
///
/// `d ∝ p^{1/(1-2β)}` (`p` for infomax, `p^{1/3}` for discrimax), scaled so
/// that `∫ √(g d²) = C`.
pub fn capacity_model<T: Real>(
    grid: &StimulusGrid<T>,
    prior: &Prior<T>,
    objective: Objective<T>,
    params: CapacityParams<T>,
) -> Result<PopulationSolution<T>> {
    let CapacityParams { capacity, gain } = params;
    if !(capacity > T::zero()) || !(gain > T::zero()) {
        return Err(Error::InvalidArgument("capacity and gain must be positive".into()));
    }
    if let Some(b) = objective.beta() {
        if !(b < T::lit(0.5)) {
            return Err(Error::Objective(format!("beta = {b} must be below 1/2 for the capacity model")));
        }
    }
    let p = prior.values();
    let exponent = match objective.beta() {
        None => T::one(),
        Some(b) => (T::one() - T::lit(2.0) * b).recip(),
    };
    let mass = powered_mass(grid, p, exponent);
    let floor = T::lit(PRIOR_FLOOR);
    let scale = capacity / (gain.sqrt() * mass);
    let density: Vec<T> = p
        .iter()
        .map(|&p| if p >= floor { scale * p.powf(exponent) } else { T::zero() })
        .collect();
    let gains = vec![gain; p.len()];
    let rate: Vec<T> = p
        .iter()
        .zip(&density)
        .map(|(&p, &d)| if d > T::zero() { p * gain / d } else { T::zero() })
        .collect();
    Ok(PopulationSolution::from_gain_density(
        grid.clone(),
        p,
        &rate,
        gains,
        density,
        T::one(),
        T::one(),
        T::lit(1.5),
        mass,
    ))
}

/// The mean-rate model obtained from `spec` with `E := R` and `R(s) := R/N`.
pub fn reduce_to_mean_rate_model<T: Real>(
    spec: &PopulationSpec<T>,
    n_neurons: T,
) -> Result<PopulationSolution<T>> {
    if spec.energy.alpha() != T::one() {
        return Err(Error::Energy(format!(
            "the mean-rate reduction needs alpha = 1, got {}",
            spec.energy.alpha()
        )));
    }
    mean_rate_model(
        &spec.grid,
        &spec.prior,
        spec.objective,
        MeanRateParams { mean_rate: spec.energy.budget(), n_neurons },
    )
}

/// The capacity model obtained from `spec` with a fixed gain `E^{2/3}` and `R(s) := E/C`.
pub fn reduce_to_capacity_model<T: Real>(
    spec: &PopulationSpec<T>,
    capacity: T,
) -> Result<PopulationSolution<T>> {
    let alpha = spec.energy.alpha();
    if alpha != T::lit(1.5) {
        return Err(Error::Energy(format!(
            "the capacity reduction needs alpha = 3/2, got {alpha}"
        )));
    }
    capacity_model(
        &spec.grid,
        &spec.prior,
        spec.objective,
        CapacityParams { capacity, gain: spec.energy.budget().powf(alpha.recip()) },
    )
}

/// Maximum relative deviation of `p g / d` from `R / N` over points with `p > 1e-6`.
pub fn gs_homeostasis_deviation<T: Real>(prior: &[T], gain: &[T], density: &[T], mean_rate: T, n_neurons: T) -> T {
    let target = mean_rate / n_neurons;
    let floor = T::lit(1e-6);
    prior
        .iter()
        .zip(gain.iter().zip(density))
        .filter(|(&p, _)| p > floor)
        .map(|(&p, (&g, &d))| ((p * g / d - target) / target).abs())
        .fold(T::zero(), T::max)
}

/// Solves the mean-rate + population-size problem numerically (no homeostasis
/// imposed) and reports how far the optimum is from `p g / d = R / N`.
pub fn verify_gs_homeostasis_emergence<T: Real>(
    grid: &StimulusGrid<T>,
    prior: &Prior<T>,
    mean_rate: T,
    n_neurons: T,
    objective: Objective<T>,
) -> Result<T> {
    let (g, d) = gs_numeric(grid, prior, mean_rate, n_neurons, objective, &OracleOptions::default(), None)?;
    Ok(gs_homeostasis_deviation(prior.values(), &g, &d, mean_rate, n_neurons))
}
