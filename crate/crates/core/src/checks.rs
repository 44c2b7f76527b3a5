//! Cross-checks of the closed forms and fitted optimizers against the
//! independent oracles.

use serde::{Deserialize, Serialize};

use crate::analytic::{closed_form_with_exponent, verify_gs_homeostasis_emergence, EnergyConstraint, Objective, PopulationSpec};
use crate::error::Result;
use crate::fit::{epsilon_levels, fit_surface, minimize_on_contour, Domain};
use crate::grid::{Prior, RateTarget, StimulusGrid};
use crate::oracle::{compound_sampler, contour_grid_search, solve_numeric, DiscretizedProblem, OracleOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub grid_points: usize,
    pub compound_draws: usize,
    pub seed: u64,
    /// Added to every closed-form gain exponent. Nonzero values must make
    /// the closed-form check fail.
    pub exponent_mutation: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { grid_points: 256, compound_draws: 100_000, seed: 7, exponent_mutation: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Measured error statistic.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: String, value: f64, tolerance: f64, detail: String) -> Self {
        Self { passed: value.is_finite() && value <= tolerance, name, value, tolerance, detail }
    }

    fn failed(name: String, err: impl std::fmt::Display) -> Self {
        Self { name, passed: false, value: f64::NAN, tolerance: f64::NAN, detail: err.to_string() }
    }
}

fn sup_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn objectives() -> [(&'static str, Objective<f64>); 3] {
    [("infomax", Objective::Infomax), ("discrimax", Objective::Discrimax), ("L1", Objective::lp(1.0))]
}

/// Closed-form gains against the numeric optimizer, relative sup norm
/// below `1e-3` for every objective, α ∈ {1, 1.5, 2} and both priors.
pub fn closed_form_checks(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let run = || -> Result<Vec<CheckResult>> {
        let grid = StimulusGrid::<f64>::orientation(cfg.grid_points)?;
        let priors = [("uniform", Prior::uniform(&grid)), ("cardinal", Prior::cardinal(&grid, 0.5)?)];
        let rate = RateTarget::new(&grid, grid.points().iter().map(|s| 1.0 + 0.3 * (s.to_radians() * 2.0).cos()).collect())?;
        let mut out = Vec::new();
        for (oname, objective) in objectives() {
            for alpha in [1.0, 1.5, 2.0] {
                for (pname, prior) in &priors {
                    let name = format!("closed_form/{oname}/alpha={alpha}/{pname}");
                    let spec = PopulationSpec::new(grid.clone(), prior.clone(), rate.clone(), objective, EnergyConstraint::new(6.0, alpha)?)?;
                    let exponent = objective.gain_exponent(alpha) + cfg.exponent_mutation;
                    let result = closed_form_with_exponent(&spec, exponent).and_then(|analytic| {
                        let numeric = solve_numeric(&DiscretizedProblem { spec, start: None }, &OracleOptions::default())?;
                        Ok(sup_rel(&analytic.gain, &numeric.gain))
                    });
                    out.push(match result {
                        Ok(err) => CheckResult::new(name, err, 1e-3, "relative sup norm of gain".into()),
                        Err(e) => CheckResult::failed(name, e),
                    });
                }
            }
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![CheckResult::failed("closed_form".into(), e)])
}

/// Compound Poisson spike-train moments against `E[O] = λT μ` and
/// `Var[O] = λT (σ² + μ²)`, in units of the standard error.
pub fn compound_checks(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let settings: [(f64, &[f64]); 5] = [
        (10.0, &[0.9, 0.1]),
        (3.0, &[0.5, 0.5]),
        (25.0, &[0.7, 0.2, 0.1]),
        (1.5, &[0.4, 0.3, 0.2, 0.1]),
        (50.0, &[0.95, 0.04, 0.01]),
    ];
    settings
        .iter()
        .enumerate()
        .flat_map(|(i, (lt, pmf))| {
            let mu: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
            let m2: f64 = pmf.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
            let name = format!("compound/lambda_t={lt}/pmf={pmf:?}");
            match compound_sampler(*lt, pmf, cfg.compound_draws, cfg.seed.wrapping_add(i as u64)) {
                Ok(m) => vec![
                    CheckResult::new(format!("{name}/mean"), (m.mean - lt * mu).abs() / m.se_mean, 3.0, "standard errors".into()),
                    CheckResult::new(format!("{name}/variance"), (m.variance - lt * m2).abs() / m.se_variance, 3.0, "standard errors".into()),
                ],
                Err(e) => vec![CheckResult::failed(name, e)],
            }
        })
        .collect()
}

/// Golden-section contour minimization against the dense contour scan on
/// a multi-modal degree-8 surface.
pub fn contour_checks() -> Vec<CheckResult> {
    let run = || -> Result<Vec<CheckResult>> {
        let domain = Domain { v: (-75.0, -65.0), g: (0.07, 0.12) };
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for i in 0..9 {
            for j in 0..9 {
                x.push(-75.0 + 1.25 * i as f64);
                y.push(0.07 + 0.00625 * j as f64);
            }
        }
        let eta_f = |v: f64, g: f64| 1.0 + 0.05 * ((v + 70.0) * 0.8).sin() * ((g - 0.07) * 90.0).cos() + 0.002 * (v + 70.0).powi(2);
        let z: Vec<f64> = x.iter().zip(&y).map(|(&v, &g)| eta_f(v, g)).collect();
        let eta = fit_surface(&x, &y, &z, 8)?;
        let e: Vec<f64> = x.iter().zip(&y).map(|(&v, &g)| 2.4e7 - 7.8e5 * (v + 75.0) + 1.0e8 * g).collect();
        let energy = fit_surface(&x, &y, &e, 1)?;
        let mut out = Vec::new();
        for eps in epsilon_levels(&energy, &domain, 9, 0.05)? {
            let p = minimize_on_contour(&eta, &energy, &domain, eps)?;
            let o = contour_grid_search(|v, g| eta.eval(v, g), |v, g| energy.eval(v, g), eps, domain.v, domain.g)?;
            // cells between the two minimizers, in oracle lattice units
            let cells = ((p.v_rest - o.x) / o.spacing.0).abs().max(((p.g_leak - o.y) / o.spacing.1).abs());
            let ok_value = if p.eta <= o.eta + 1e-9 { 0.0 } else { cells };
            out.push(CheckResult::new(
                format!("contour/epsilon={eps:.6e}"),
                ok_value,
                1.0,
                format!("golden eta {:.9} vs scan eta {:.9}, {cells:.2} lattice cells apart", p.eta, o.eta),
            ));
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![CheckResult::failed("contour".into(), e)])
}

/// Firing-rate homeostasis `p g / d = R / N` emerging from the
/// two-constraint numeric optimum.
pub fn homeostasis_checks(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let run = || -> Result<Vec<CheckResult>> {
        let grid = StimulusGrid::<f64>::orientation(cfg.grid_points)?;
        let priors = [("uniform", Prior::uniform(&grid)), ("cardinal", Prior::cardinal(&grid, 0.5)?)];
        let mut out = Vec::new();
        for (oname, objective) in [("infomax", Objective::Infomax), ("discrimax", Objective::Discrimax)] {
            for (pname, prior) in &priors {
                let name = format!("homeostasis/{oname}/{pname}");
                out.push(match verify_gs_homeostasis_emergence(&grid, prior, 5.0, 100.0, objective) {
                    Ok(dev) => CheckResult::new(name, dev, 1e-3, "max relative deviation of p g / d from R / N".into()),
                    Err(e) => CheckResult::failed(name, e),
                });
            }
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![CheckResult::failed("homeostasis".into(), e)])
}

pub fn run_checks(cfg: &VerifyConfig) -> Vec<CheckResult> {
    let mut all = closed_form_checks(cfg);
    all.extend(compound_checks(cfg));
    all.extend(contour_checks());
    all.extend(homeostasis_checks(cfg));
    all
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_exponent_is_caught() {
        let cfg = VerifyConfig { grid_points: 128, exponent_mutation: 0.1, ..Default::default() };
        let checks = closed_form_checks(&cfg);
        assert_eq!(checks.len(), 18);
        // the uniform-prior infomax case has R-dependence only, so every case
        // with a varying R/p must fail
        assert!(checks.iter().filter(|c| !c.passed).count() >= 12);
    }

    #[test]
    fn compound_and_contour_pass() {
        let cfg = VerifyConfig { compound_draws: 20_000, ..Default::default() };
        assert!(compound_checks(&cfg).iter().all(|c| c.passed));
        assert!(contour_checks().iter().all(|c| c.passed));
    }
}
