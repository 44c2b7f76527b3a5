//! Closed-form optimal population codes under approximate homeostasis
//! (`p g / d = R`) and the generalized energy budget `∫ p g^α = E`.
//!
//! Eliminating the density through the homeostasis constraint leaves a
//! separable problem in the gain alone,
//!
//! ```text
//! max_g ∫ p f(I_conv g³ p² / (η R²))   s.t.   ∫ p g^α = E,
//! ```
//!
//! whose stationary point is `g ∝ (R/p)^{2β/(3β-α)}` for `f(x) = -x^β`
//! (`β = -1` is discrimax) and a constant gain for `f = log`. The
//! proportionality constant is fixed by quadrature so the energy constraint
//! binds exactly on the grid.

mod reductions;
mod tuning;

pub use reductions::{
    capacity_model, gs_homeostasis_deviation, mean_rate_model, reduce_to_capacity_model,
    reduce_to_mean_rate_model, verify_gs_homeostasis_emergence, CapacityParams, MeanRateParams,
};
pub use tuning::{build_tuning_bank, exact_fisher, homeostasis_residual, BaseShape, TuningCurveBank};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Prior, RateTarget, StimulusGrid};
use crate::scalar::Real;

/// Prior mass below which a grid point is excluded from the gain/density formulas.
pub const PRIOR_FLOOR: f64 = 1e-12;

/// Function of Fisher information being maximized in expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective<T> {
    /// `f(x) = log x`
    Infomax,
    /// `f(x) = -1/x`
    Discrimax,
    /// `f(x) = -x^β`, the asymptotic `L_p` error with `p = -2β`.
    LpError { beta: T },
}

impl<T: Real> Objective<T> {
    /// The `L_p` reconstruction error objective, `β = -p/2`.
    pub fn lp(p: T) -> Self {
        Objective::LpError { beta: -p * T::lit(0.5) }
    }

    /// Exponent `β` of the power-law family; `None` for infomax.
    pub fn beta(&self) -> Option<T> {
        match *self {
            Objective::Infomax => None,
            Objective::Discrimax => Some(-T::one()),
            Objective::LpError { beta } => Some(beta),
        }
    }

    pub fn validate(&self, alpha: T) -> Result<()> {
        if let Objective::LpError { beta } = *self {
            if !beta.is_finite() {
                return Err(Error::Objective("beta must be finite".into()));
            }
            if beta == T::zero() {
                return Err(Error::Objective("beta = 0 gives a constant objective".into()));
            }
            if !(T::lit(3.0) * beta < alpha) {
                return Err(Error::Objective(format!(
                    "beta = {beta} must satisfy beta < alpha/3 = {}, otherwise the objective is unbounded",
                    alpha / T::lit(3.0)
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: T) -> T {
        match self.beta() {
            None => x.ln(),
            Some(b) => -x.powf(b),
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self.beta() {
            None => x.recip(),
            Some(b) => -b * x.powf(b - T::one()),
        }
    }

    /// Exponent `e` in the optimal gain `g ∝ (R/p)^e`.
    pub fn gain_exponent(&self, alpha: T) -> T {
        match self.beta() {
            None => T::zero(),
            Some(b) => T::lit(2.0) * b / (T::lit(3.0) * b - alpha),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Objective::Infomax => "infomax".into(),
            Objective::Discrimax => "discrimax".into(),
            Objective::LpError { beta } => format!("lp(beta={beta})"),
        }
    }
}

/// Energy budget `∫ p g^α = E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstraint<T> {
    budget: T,
    alpha: T,
}

impl<T: Real> EnergyConstraint<T> {
    pub fn new(budget: T, alpha: T) -> Result<Self> {
        if !(budget > T::zero()) || !budget.is_finite() {
            return Err(Error::Energy(format!("budget {budget} must be positive")));
        }
        if !(alpha >= T::one()) || !alpha.is_finite() {
            return Err(Error::Energy(format!("alpha {alpha} must be at least 1")));
        }
        Ok(Self { budget, alpha })
    }

    pub fn budget(&self) -> T {
        self.budget
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }
}

/// Everything the analytic solver needs, on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec<T> {
    pub grid: StimulusGrid<T>,
    pub prior: Prior<T>,
    pub rate: RateTarget<T>,
    pub objective: Objective<T>,
    pub energy: EnergyConstraint<T>,
    /// Dispersion factor of the dispersed-Poisson noise.
    pub eta: T,
    /// Convolution tiling constant multiplying `g d²`.
    pub i_conv: T,
}

impl<T: Real> PopulationSpec<T> {
    pub fn new(
        grid: StimulusGrid<T>,
        prior: Prior<T>,
        rate: RateTarget<T>,
        objective: Objective<T>,
        energy: EnergyConstraint<T>,
    ) -> Result<Self> {
        let spec = Self {
            grid,
            prior,
            rate,
            objective,
            energy,
            eta: T::one(),
            i_conv: T::one(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_i_conv(mut self, i_conv: T) -> Self {
        self.i_conv = i_conv;
        self
    }

    pub fn with_budget(mut self, budget: T) -> Result<Self> {
        self.energy = EnergyConstraint::new(budget, self.energy.alpha)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.prior.values().len() != n || self.rate.values().len() != n {
            return Err(Error::InvalidArgument(
                "prior, rate target and grid must share the same points".into(),
            ));
        }
        self.objective.validate(self.energy.alpha)?;
        if !(self.eta > T::zero()) || !(self.i_conv > T::zero()) {
            return Err(Error::InvalidArgument("eta and i_conv must be positive".into()));
        }
        Ok(())
    }

    /// Grid points with enough prior mass to enter the gain formulas.
    pub fn support(&self) -> Vec<bool> {
        let floor = T::lit(PRIOR_FLOOR);
        self.prior.values().iter().map(|&p| p >= floor).collect()
    }

    /// Fisher information implied by a gain profile, density eliminated via homeostasis.
    pub fn fisher_from_gain(&self, gain: &[T]) -> Vec<T> {
        let p = self.prior.values();
        let r = self.rate.values();
        gain.iter()
            .zip(p.iter().zip(r))
            .map(|(&g, (&p, &r))| {
                let d = p * g / r;
                self.i_conv * g * d * d / self.eta
            })
            .collect()
    }

    /// Discretized objective `Σ w p f(FI)` over the support.
    pub fn objective_value(&self, gain: &[T]) -> T {
        let fi = self.fisher_from_gain(gain);
        let support = self.support();
        self.grid
            .weights()
            .iter()
            .zip(self.prior.values())
            .zip(fi.iter().zip(&support))
            .filter(|(_, (_, &s))| s)
            .map(|((&w, &p), (&x, _))| w * p * self.objective.value(x))
            .sum()
    }
}

/// Gain, density, Fisher information and discriminability on a stimulus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSolution<T> {
    pub grid: StimulusGrid<T>,
    pub prior: Vec<T>,
    pub rate: Vec<T>,
    pub gain: Vec<T>,
    pub density: Vec<T>,
    pub fisher: Vec<T>,
    /// `FI^{-1/2}`; the Cramér–Rao prefactor is left at one.
    pub discriminability: Vec<T>,
    /// `A = ∫ p (R/p)^{α e}`, the normalization integral fixing the gain scale.
    pub normalization: T,
    pub eta: T,
    pub alpha: T,
    pub budget: T,
}

impl<T: Real> PopulationSolution<T> {
    /// Assembles a solution from a gain profile, deriving `d = p g / R`.
    pub(crate) fn from_gain(
        grid: StimulusGrid<T>,
        prior: &[T],
        rate: &[T],
        gain: Vec<T>,
        eta: T,
        i_conv: T,
        alpha: T,
        normalization: T,
    ) -> Self {
        let floor = T::lit(PRIOR_FLOOR);
        let density: Vec<T> = gain
            .iter()
            .zip(prior.iter().zip(rate))
            .map(|(&g, (&p, &r))| if p < floor { T::zero() } else { p * g / r })
            .collect();
        Self::from_gain_density(grid, prior, rate, gain, density, eta, i_conv, alpha, normalization)
    }

    pub(crate) fn from_gain_density(
        grid: StimulusGrid<T>,
        prior: &[T],
        rate: &[T],
        gain: Vec<T>,
        density: Vec<T>,
        eta: T,
        i_conv: T,
        alpha: T,
        normalization: T,
    ) -> Self {
        let fisher: Vec<T> = gain
            .iter()
            .zip(&density)
            .map(|(&g, &d)| i_conv * g * d * d / eta)
            .collect();
        let discriminability = fisher
            .iter()
            .map(|&f| if f > T::zero() { f.sqrt().recip() } else { T::infinity() })
            .collect();
        let budget = grid
            .weights()
            .iter()
            .zip(prior.iter().zip(&gain))
            .map(|(&w, (&p, &g))| w * p * g.powf(alpha))
            .sum();
        Self {
            grid,
            prior: prior.to_vec(),
            rate: rate.to_vec(),
            gain,
            density,
            fisher,
            discriminability,
            normalization,
            eta,
            alpha,
            budget,
        }
    }

    /// `|∫ p g^α - E| / E` against a requested budget.
    pub fn energy_residual(&self, budget: T) -> T {
        let used: T = self
            .grid
            .weights()
            .iter()
            .zip(self.prior.iter().zip(&self.gain))
            .map(|(&w, (&p, &g))| w * p * g.powf(self.alpha))
            .sum();
        ((used - budget) / budget).abs()
    }

    /// `max |p g/d - R| / R` over points with nonzero density.
    pub fn homeostasis_residual(&self) -> T {
        self.prior
            .iter()
            .zip(self.gain.iter().zip(&self.density))
            .zip(&self.rate)
            .filter(|(_, &r)| r > T::zero())
            .filter(|((_, (_, &d)), _)| d > T::zero())
            .map(|((&p, (&g, &d)), &r)| ((p * g / d - r) / r).abs())
            .fold(T::zero(), T::max)
    }

    /// Total density `∫ d`, the population size implied by the solution.
    pub fn population_size(&self) -> T {
        self.grid.integrate(&self.density)
    }
}

/// One grid point of a solution as written to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub s: f64,
    pub p: f64,
    #[serde(rename = "R")]
    pub rate: f64,
    pub g: f64,
    pub d: f64,
    #[serde(rename = "FI")]
    pub fisher: f64,
    pub delta_min: f64,
}

impl<T: Real> PopulationSolution<T> {
    pub fn rows(&self) -> Vec<SolutionRow> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        (0..self.gain.len())
            .map(|i| SolutionRow {
                s: f(self.grid.points()[i]),
                p: f(self.prior[i]),
                rate: f(self.rate[i]),
                g: f(self.gain[i]),
                d: f(self.density[i]),
                fisher: f(self.fisher[i]),
                delta_min: f(self.discriminability[i]),
            })
            .collect()
    }
}

/// Optimal gain and density for the spec's objective (closed form, quadrature-normalized).
pub fn solve_optimal_code<T: Real>(spec: &PopulationSpec<T>) -> Result<PopulationSolution<T>> {
    spec.validate()?;
    closed_form_with_exponent(spec, spec.objective.gain_exponent(spec.energy.alpha()))
}

/// Gain `∝ (R/p)^exponent` scaled to the energy budget. With the objective's
/// own exponent this is the optimum; other exponents give feasible but
/// suboptimal codes, which is how the oracle checks are mutation-tested.
pub fn closed_form_with_exponent<T: Real>(spec: &PopulationSpec<T>, exponent: T) -> Result<PopulationSolution<T>> {
    let alpha = spec.energy.alpha();
    let budget = spec.energy.budget();
    let support = spec.support();
    let p = spec.prior.values();
    let r = spec.rate.values();

    // shape (R/p)^e on the support
    let shape: Vec<T> = p
        .iter()
        .zip(r)
        .zip(&support)
        .map(|((&p, &r), &s)| if s { (r / p).powf(exponent) } else { T::zero() })
        .collect();
    let normalization: T = spec
        .grid
        .weights()
        .iter()
        .zip(p.iter().zip(&shape))
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|((&w, (&p, &h)), _)| w * p * h.powf(alpha))
        .sum();
    if !(normalization > T::zero()) || !normalization.is_finite() {
        return Err(Error::Prior("no prior mass where the rate target is positive".into()));
    }
    let scale = (budget / normalization).powf(alpha.recip());
    let gain = shape.into_iter().map(|h| scale * h).collect();
    Ok(PopulationSolution::from_gain(
        spec.grid.clone(),
        p,
        r,
        gain,
        spec.eta,
        spec.i_conv,
        alpha,
        normalization,
    ))
}

/// Functional gradient of the eliminated objective per unit of energy,
/// `∂J/∂g / (α p g^{α-1})`, at each supported grid point.
///
/// At a constrained optimum this is constant and equal to the Lagrange
/// multiplier of the energy constraint.
pub fn energy_gradient<T: Real>(spec: &PopulationSpec<T>, gain: &[T]) -> Vec<T> {
    let alpha = spec.energy.alpha();
    let fi = spec.fisher_from_gain(gain);
    gain.iter()
        .zip(&fi)
        .map(|(&g, &x)| spec.objective.derivative(x) * T::lit(3.0) * x / (alpha * g.powf(alpha)))
        .collect()
}

/// Energy-constraint multiplier and relative sup-norm of the Lagrangian
/// gradient at `gain`, over the supported grid points.
pub fn lagrangian_stationarity<T: Real>(spec: &PopulationSpec<T>, gain: &[T]) -> (T, T) {
    let grad = energy_gradient(spec, gain);
    let support = spec.support();
    let p = spec.prior.values();
    let alpha = spec.energy.alpha();
    let mut num = T::zero();
    let mut den = T::zero();
    for i in 0..gain.len() {
        if support[i] {
            let a = spec.grid.weights()[i] * p[i] * alpha * gain[i].powf(alpha - T::one());
            num = num + a * grad[i];
            den = den + a;
        }
    }
    let lambda = num / den;
    let worst = grad
        .iter()
        .zip(&support)
        .filter(|(_, &s)| s)
        .map(|(&g, _)| ((g - lambda) / lambda).abs())
        .fold(T::zero(), T::max);
    (lambda, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec(objective: Objective<f64>, alpha: f64, budget: f64, cardinal: bool) -> PopulationSpec<f64> {
        let grid = StimulusGrid::orientation(512).unwrap();
        let prior = if cardinal {
            Prior::cardinal(&grid, 0.5).unwrap()
        } else {
            Prior::uniform(&grid)
        };
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        PopulationSpec::new(grid, prior, rate, objective, EnergyConstraint::new(budget, alpha).unwrap())
            .unwrap()
    }

    #[test]
    fn uniform_infomax_gain_equals_budget() {
        let sol = solve_optimal_code(&spec(Objective::Infomax, 1.0, 6.0, false)).unwrap();
        for (&g, &d) in sol.gain.iter().zip(&sol.density) {
            assert_relative_eq!(g, 6.0, max_relative = 1e-12);
            assert_relative_eq!(d, 6.0 / 180.0, max_relative = 1e-12);
        }
        assert_relative_eq!(sol.population_size(), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn infomax_gain_matches_e_to_one_over_alpha() {
        let sol = solve_optimal_code(&spec(Objective::Infomax, 2.0, 9.0, true)).unwrap();
        assert!(sol.gain.iter().all(|&g| (g - 3.0).abs() < 1e-9));
    }

    #[test]
    fn discrimax_follows_table_exponents() {
        let alpha = 1.5;
        let s = spec(Objective::Discrimax, alpha, 4.0, true);
        let sol = solve_optimal_code(&s).unwrap();
        let p = s.prior.values();
        // g ∝ p^{-2/(α+3)}, d ∝ p^{(α+1)/(α+3)}
        let g_ratio = sol.gain[0] / sol.gain[100];
        assert_relative_eq!(g_ratio, (p[0] / p[100]).powf(-2.0 / (alpha + 3.0)), max_relative = 1e-12);
        let d_ratio = sol.density[0] / sol.density[100];
        assert_relative_eq!(d_ratio, (p[0] / p[100]).powf((alpha + 1.0) / (alpha + 3.0)), max_relative = 1e-12);
        // FI ∝ p^{2α/(α+3)}
        let fi_ratio = sol.fisher[0] / sol.fisher[100];
        assert_relative_eq!(fi_ratio, (p[0] / p[100]).powf(2.0 * alpha / (alpha + 3.0)), max_relative = 1e-12);
    }

    #[test]
    fn general_objective_matches_normalization_integral() {
        let (alpha, beta) = (2.0, -0.5);
        let s = spec(Objective::LpError { beta }, alpha, 3.0, true);
        let sol = solve_optimal_code(&s).unwrap();
        // A_gen = ∫ p^{1 - 2αβ/(3β-α)} R^{2αβ/(3β-α)}
        let k = 2.0 * alpha * beta / (3.0 * beta - alpha);
        let a: Vec<f64> = s.prior.values().iter().map(|p| p.powf(1.0 - k)).collect();
        assert_relative_eq!(sol.normalization, s.grid.integrate(&a), max_relative = 1e-12);
    }

    #[test]
    fn invariants_hold_for_all_objectives() {
        for obj in [Objective::Infomax, Objective::Discrimax, Objective::lp(1.0)] {
            for alpha in [1.0, 1.5, 2.0] {
                let s = spec(obj, alpha, 5.0, true);
                let sol = solve_optimal_code(&s).unwrap();
                assert!(sol.energy_residual(5.0) < 1e-12);
                assert!(sol.homeostasis_residual() < 1e-12);
                assert!(sol.gain.iter().chain(&sol.density).all(|&v| v > 0.0));
                let (_, stationarity) = lagrangian_stationarity(&s, &sol.gain);
                assert!(stationarity < 1e-6, "{obj:?} alpha={alpha}: {stationarity}");
            }
        }
    }

    #[test]
    fn infomax_multiplier_is_three_over_alpha_e() {
        let s = spec(Objective::Infomax, 1.5, 2.0, true);
        let sol = solve_optimal_code(&s).unwrap();
        let (lambda, _) = lagrangian_stationarity(&s, &sol.gain);
        assert_relative_eq!(lambda, 3.0 / (1.5 * 2.0), max_relative = 1e-12);
    }

    #[test]
    fn rejects_unbounded_beta() {
        assert!(Objective::LpError { beta: 0.5 }.validate(1.0).is_err());
        assert!(Objective::LpError { beta: 1.0 / 3.0 }.validate(1.0).is_err());
        assert!(Objective::LpError { beta: 0.0 }.validate(1.0).is_err());
        assert!(Objective::LpError { beta: 0.2 }.validate(1.0).is_ok());
        assert!(Objective::<f64>::Discrimax.validate(1.0).is_ok());
        let grid = StimulusGrid::orientation(64).unwrap();
        let prior = Prior::uniform(&grid);
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        let res = PopulationSpec::new(
            grid,
            prior,
            rate,
            Objective::LpError { beta: 0.4 },
            EnergyConstraint::new(1.0, 1.0).unwrap(),
        );
        assert!(matches!(res, Err(Error::Objective(_))));
    }

    #[test]
    fn energy_constraint_validation() {
        assert!(EnergyConstraint::new(0.0, 1.0).is_err());
        assert!(EnergyConstraint::new(1.0, 0.5).is_err());
        assert!(EnergyConstraint::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn zero_prior_points_are_excluded() {
        let grid = StimulusGrid::orientation(128).unwrap();
        let mut v: Vec<f64> = vec![1.0; 128];
        for x in v.iter_mut().take(10) {
            *x = 0.0;
        }
        let prior = Prior::normalized(&grid, v).unwrap();
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        let s = PopulationSpec::new(grid, prior, rate, Objective::Discrimax, EnergyConstraint::new(2.0, 1.0).unwrap())
            .unwrap();
        let sol = solve_optimal_code(&s).unwrap();
        assert!(sol.density[..10].iter().all(|&d| d == 0.0));
        assert!(sol.gain.iter().all(|g| g.is_finite()));
        assert!(sol.energy_residual(2.0) < 1e-12);
    }

    #[test]
    fn single_precision_solution() {
        let grid = StimulusGrid::<f32>::orientation(256).unwrap();
        let prior = Prior::cardinal(&grid, 0.5).unwrap();
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        let s = PopulationSpec::new(grid, prior, rate, Objective::Discrimax, EnergyConstraint::new(6.0, 1.0).unwrap())
            .unwrap();
        let sol = solve_optimal_code(&s).unwrap();
        assert!(sol.energy_residual(6.0) < 1e-5);
        assert!(sol.homeostasis_residual() < 1e-5);
    }

    proptest! {
        #[test]
        fn exponent_laws(c in 0.2f64..5.0, alpha in prop::sample::select(vec![1.0, 1.5, 2.0]),
                         which in 0usize..3) {
            let obj = [Objective::Infomax, Objective::Discrimax, Objective::lp(1.0)][which];
            let base = spec(obj, alpha, 3.0, true);
            let scaled = base.clone().with_budget(3.0 * c).unwrap();
            let a = solve_optimal_code(&base).unwrap();
            let b = solve_optimal_code(&scaled).unwrap();
            for i in (0..512).step_by(37) {
                prop_assert!(((b.gain[i] / a.gain[i]) / c.powf(1.0 / alpha) - 1.0).abs() < 1e-10);
                // η is held fixed here, so FI·η scales as c^{3/α}
                prop_assert!(((b.fisher[i] / a.fisher[i]) / c.powf(3.0 / alpha) - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn doubling_eta_halves_fisher(eta in 0.5f64..4.0) {
            let base = spec(Objective::Discrimax, 1.0, 3.0, true).with_eta(eta);
            let a = solve_optimal_code(&base).unwrap();
            let b = solve_optimal_code(&base.clone().with_eta(2.0 * eta)).unwrap();
            for i in (0..512).step_by(51) {
                prop_assert!((a.fisher[i] / b.fisher[i] - 2.0).abs() < 1e-12);
                prop_assert!((a.gain[i] - b.gain[i]).abs() < 1e-12);
            }
        }
    }
}
