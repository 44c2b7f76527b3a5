//! Control-versus-stressed tuning curves under three energy models, and the
//! firing-rate deviation of the energy-homeostatic model across objectives
//! and priors.

use serde::{Deserialize, Serialize};

use crate::analytic::{SolutionRow, 
    capacity_model, mean_rate_model, solve_optimal_code, BaseShape, CapacityParams, EnergyConstraint, MeanRateParams,
    Objective, PopulationSolution, PopulationSpec,
};
use crate::error::{Error, Result};
use crate::fit::fwhm_circular;
use crate::grid::{Prior, RateTarget, StimulusGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub grid_points: usize,
    /// Control energy budget.
    pub budget: f64,
    /// Homeostatic rate target, constant over stimuli.
    pub rate: f64,
    /// `a₂ / (a₁ ε_ctr)` of the affine energy map.
    pub offset_ratio: f64,
    /// `ε_ms / ε_ctr`, the stressed energy expenditure relative to control.
    pub energy_ratio: f64,
    /// Width of the Gaussian base shape in cumulative-density units.
    pub base_sigma: f64,
    /// Amplitude of the cardinal-peaked prior.
    pub cardinal_amplitude: f64,
    /// Preferred stimulus of the neuron whose curve is reported, degrees.
    pub preferred_deg: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            grid_points: 3600,
            budget: 6.0,
            rate: 1.0,
            offset_ratio: 0.19625,
            energy_ratio: 0.71,
            base_sigma: 0.5,
            cardinal_amplitude: 0.5,
            preferred_deg: 90.0,
        }
    }
}

impl CompareConfig {
    /// `E_ms / E_ctr` through the affine map `E = a₁ ε + a₂`.
    pub fn budget_ratio(&self) -> f64 {
        (self.energy_ratio + self.offset_ratio) / (1.0 + self.offset_ratio)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 180 {
            return Err(Error::InvalidArgument("compare needs at least 180 grid points".into()));
        }
        for (name, v) in [
            ("budget", self.budget),
            ("rate", self.rate),
            ("energy_ratio", self.energy_ratio),
            ("base_sigma", self.base_sigma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.budget_ratio() > 0.0) {
            return Err(Error::InvalidArgument("stressed budget must stay positive".into()));
        }
        Ok(())
    }
}

/// Control-to-stressed change for one model of the energy constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model: String,
    /// Stressed over control tuning width.
    pub width_ratio: f64,
    /// Stressed over control peak rate.
    pub peak_ratio: f64,
    /// Change of the reported neuron's mean firing rate, percent.
    pub fr_deviation_pct: f64,
    /// Change of the model's own resource measure, percent.
    pub resource_change_pct: f64,
    pub resource: String,
    pub fwhm_control_deg: f64,
    pub fwhm_stressed_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config: CompareConfig,
    pub control_fwhm_deg: f64,
    pub models: Vec<ModelComparison>,
    pub stimulus: Vec<f64>,
    /// `(label, curve)` normalized by the control peak.
    pub curves: Vec<(String, Vec<f64>)>,
    /// The shared control solution.
    #[serde(skip)]
    pub control: Vec<SolutionRow>,
}

impl ComparisonReport {
    pub fn model(&self, name: &str) -> Option<&ModelComparison> {
        self.models.iter().find(|m| m.model == name)
    }
}

/// Tuning curve of the neuron anchored at `D(preferred)`, wrapped around
/// the circle in cumulative-density space (a sum over periodic images).
pub fn wrapped_curve(sol: &PopulationSolution<f64>, shape: BaseShape<f64>, preferred: f64) -> Vec<f64> {
    let (cum, total) = sol.grid.cumulative(&sol.density);
    let anchor = sol.grid.interpolate(&cum, preferred);
    let images = (12.0 * shape.sigma / total).ceil() as i64 + 1;
    cum.iter()
        .zip(&sol.gain)
        .map(|(&d, &g)| {
            let delta = (d - anchor).rem_euclid(total);
            g * (-images..=images).map(|k| shape.eval(delta + k as f64 * total)).sum::<f64>()
        })
        .collect()
}

/// `∫ p h`, the neuron's mean rate under the prior.
fn mean_rate(sol: &PopulationSolution<f64>, curve: &[f64]) -> f64 {
    sol.grid.integrate_product(&sol.prior, curve)
}

fn peak(curve: &[f64]) -> f64 {
    curve.iter().copied().fold(0.0, f64::max)
}

fn fwhm_deg(sol: &PopulationSolution<f64>, curve: &[f64]) -> Result<f64> {
    let step = sol.grid.period() / sol.grid.len() as f64;
    Ok(fwhm_circular(curve, step, sol.grid.period())?.width)
}

fn spec(grid: &StimulusGrid<f64>, prior: &Prior<f64>, objective: Objective<f64>, rate: f64, budget: f64) -> Result<PopulationSpec<f64>> {
    PopulationSpec::new(
        grid.clone(),
        prior.clone(),
        RateTarget::constant(grid, rate)?,
        objective,
        EnergyConstraint::new(budget, 1.0)?,
    )
}

/// Bisection for the increasing function `f` to hit `target` on `[lo, hi]`.
fn match_parameter(f: impl Fn(f64) -> Result<f64>, target: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if !((flo - target) * (fhi - target) <= 0.0) {
        return Err(Error::InvalidArgument(format!("target {target} outside [{flo}, {fhi}]")));
    }
    let rising = fhi > flo;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? < target) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn pct(ratio: f64) -> f64 {
    100.0 * (ratio - 1.0)
}

/// The energy-homeostatic model against a mean-rate model matched to its
/// peak drop and a fixed-gain capacity model matched to its widening, all
/// starting from one infomax control under a uniform prior.
pub fn compare(cfg: &CompareConfig) -> Result<ComparisonReport> {
    cfg.validate()?;
    let grid = StimulusGrid::orientation(cfg.grid_points)?;
    let prior = Prior::uniform(&grid);
    let shape = BaseShape::new(cfg.base_sigma)?;
    let s_pref = cfg.preferred_deg;
    let curve_of = |sol: &PopulationSolution<f64>| wrapped_curve(sol, shape, s_pref);
    let density_at = |sol: &PopulationSolution<f64>| grid.interpolate(&sol.density, s_pref);

    let control = solve_optimal_code(&spec(&grid, &prior, Objective::Infomax, cfg.rate, cfg.budget)?)?;
    let c_curve = curve_of(&control);
    let (c_peak, c_rate, c_fwhm) = (peak(&c_curve), mean_rate(&control, &c_curve), fwhm_deg(&control, &c_curve)?);
    let c_density = density_at(&control);

    let summarize = |model: &str, sol: &PopulationSolution<f64>, resource: &str, resource_ratio: f64| -> Result<ModelComparison> {
        let curve = curve_of(sol);
        Ok(ModelComparison {
            model: model.into(),
            width_ratio: c_density / density_at(sol),
            peak_ratio: peak(&curve) / c_peak,
            fr_deviation_pct: pct(mean_rate(sol, &curve) / c_rate),
            resource_change_pct: pct(resource_ratio),
            resource: resource.into(),
            fwhm_control_deg: c_fwhm,
            fwhm_stressed_deg: fwhm_deg(sol, &curve)?,
        })
    };

    let ours_sol = solve_optimal_code(&spec(&grid, &prior, Objective::Infomax, cfg.rate, cfg.budget * cfg.budget_ratio())?)?;
    let ours = summarize("ours", &ours_sol, "ATP", cfg.energy_ratio)?;

    // mean-rate model: population size fixed, mean rate lowered until the
    // peak drops as much as ours
    let mr_rate = grid.integrate_product(&control.prior, &control.gain);
    let n = control.population_size();
    let mean_rate_at = |r: f64| mean_rate_model(&grid, &prior, Objective::Infomax, MeanRateParams { mean_rate: r, n_neurons: n });
    let r_ms = match_parameter(|r| Ok(peak(&curve_of(&mean_rate_at(r)?)) / c_peak), ours.peak_ratio, 1e-6 * mr_rate, mr_rate)?;
    let mean_rate_cmp = summarize("mean-rate", &mean_rate_at(r_ms)?, "mean rate", r_ms / mr_rate)?;

    // capacity model: gain fixed, capacity lowered until the curve widens as
    // much as ours
    let gain = control.gain[0];
    let capacity: f64 = grid.integrate(&control.density.iter().map(|d| gain.sqrt() * d).collect::<Vec<_>>());
    let capacity_at = |c: f64| capacity_model(&grid, &prior, Objective::Infomax, CapacityParams { capacity: c, gain });
    let c_ms = match_parameter(|c| Ok(c_density / density_at(&capacity_at(c)?)), ours.width_ratio, 1e-3 * capacity, capacity)?;
    let capacity_cmp = summarize("capacity", &capacity_at(c_ms)?, "coding capacity", c_ms / capacity)?;

    let norm = |sol: &PopulationSolution<f64>| curve_of(sol).iter().map(|h| h / c_peak).collect::<Vec<_>>();
    let curves = vec![
        ("control".to_string(), norm(&control)),
        ("ours".to_string(), norm(&ours_sol)),
        ("mean-rate".to_string(), norm(&mean_rate_at(r_ms)?)),
        ("capacity".to_string(), norm(&capacity_at(c_ms)?)),
    ];
    Ok(ComparisonReport {
        config: cfg.clone(),
        control_fwhm_deg: c_fwhm,
        models: vec![ours, mean_rate_cmp, capacity_cmp],
        stimulus: grid.points().to_vec(),
        curves,
        control: control.rows(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorStudyRow {
    pub prior: String,
    pub objective: String,
    /// Mean-rate change of the reported neuron, percent.
    pub fr_deviation_pct: f64,
    /// Largest mean-rate change over preferred stimuli every 5°, percent.
    pub max_fr_deviation_pct: f64,
    pub peak_ratio: f64,
    pub control_fwhm_deg: f64,
    pub stressed_fwhm_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorStudy {
    pub config: CompareConfig,
    pub rows: Vec<PriorStudyRow>,
    pub stimulus: Vec<f64>,
    /// `(label, curve)` normalized by the control peak of each case.
    pub curves: Vec<(String, Vec<f64>)>,
}

/// Energy-homeostatic adaptation under infomax, discrimax and L₁ error
/// with uniform and cardinal-peaked priors.
pub fn prior_study(cfg: &CompareConfig) -> Result<PriorStudy> {
    cfg.validate()?;
    let grid = StimulusGrid::orientation(cfg.grid_points)?;
    let shape = BaseShape::new(cfg.base_sigma)?;
    let priors = [("uniform", Prior::uniform(&grid)), ("cardinal", Prior::cardinal(&grid, cfg.cardinal_amplitude)?)];
    let objectives = [("infomax", Objective::Infomax), ("discrimax", Objective::Discrimax), ("L1", Objective::lp(1.0))];
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for (pname, prior) in &priors {
        for (oname, objective) in &objectives {
            let ctr = solve_optimal_code(&spec(&grid, prior, *objective, cfg.rate, cfg.budget)?)?;
            let ms = solve_optimal_code(&spec(&grid, prior, *objective, cfg.rate, cfg.budget * cfg.budget_ratio())?)?;
            let deviation = |s: f64| {
                let (a, b) = (wrapped_curve(&ctr, shape, s), wrapped_curve(&ms, shape, s));
                pct(mean_rate(&ms, &b) / mean_rate(&ctr, &a))
            };
            let (a, b) = (wrapped_curve(&ctr, shape, cfg.preferred_deg), wrapped_curve(&ms, shape, cfg.preferred_deg));
            let max_fr_deviation_pct = (0..36).map(|k| deviation(-90.0 + 5.0 * k as f64)).fold(0.0, |m: f64, d| if d.abs() > m.abs() { d } else { m });
            let c_peak = peak(&a);
            rows.push(PriorStudyRow {
                prior: pname.to_string(),
                objective: oname.to_string(),
                fr_deviation_pct: deviation(cfg.preferred_deg),
                max_fr_deviation_pct,
                peak_ratio: peak(&b) / c_peak,
                control_fwhm_deg: fwhm_deg(&ctr, &a)?,
                stressed_fwhm_deg: fwhm_deg(&ms, &b)?,
            });
            curves.push((format!("{pname}/{oname}/control"), a.iter().map(|h| h / c_peak).collect()));
            curves.push((format!("{pname}/{oname}/stressed"), b.iter().map(|h| h / c_peak).collect()));
        }
    }
    Ok(PriorStudy { config: cfg.clone(), rows, stimulus: grid.points().to_vec(), curves })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_ratio_from_affine_map() {
        let cfg = CompareConfig::default();
        assert!((1.0 / cfg.budget_ratio() - 1.32).abs() < 1e-12);
    }

    #[test]
    fn three_models_share_the_control() {
        let cfg = CompareConfig { grid_points: 720, ..Default::default() };
        let r = compare(&cfg).unwrap();
        let ours = r.model("ours").unwrap();
        assert!((ours.width_ratio - 1.32).abs() < 1e-9);
        assert!(ours.fr_deviation_pct.abs() < 1e-9);
        assert!((ours.resource_change_pct + 29.0).abs() < 1e-9);
        let mr = r.model("mean-rate").unwrap();
        assert!((mr.peak_ratio - ours.peak_ratio).abs() < 1e-9);
        assert!((mr.width_ratio - 1.0).abs() < 1e-9);
        let cap = r.model("capacity").unwrap();
        assert!((cap.peak_ratio - 1.0).abs() < 1e-9);
        assert!((cap.fr_deviation_pct - 32.0).abs() < 1e-6);
        assert!(r.curves.iter().all(|(_, c)| c.len() == 720));
        assert!((peak(&r.curves[0].1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_keeps_rates_for_every_objective() {
        let cfg = CompareConfig { grid_points: 720, ..Default::default() };
        let study = prior_study(&cfg).unwrap();
        assert_eq!(study.rows.len(), 6);
        for row in study.rows.iter().filter(|r| r.prior == "uniform") {
            assert!(row.max_fr_deviation_pct.abs() < 1e-9, "{row:?}");
        }
        let infomax = &study.rows[0];
        for row in study.rows.iter().filter(|r| r.prior == "uniform") {
            assert!((row.control_fwhm_deg - infomax.control_fwhm_deg).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = CompareConfig { energy_ratio: -1.0, ..Default::default() };
        assert!(compare(&cfg).is_err());
    }
}
