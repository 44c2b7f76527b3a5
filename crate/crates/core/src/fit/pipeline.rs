use serde::{Deserialize, Serialize};

use super::dispersion::{
    fit_dispersion, fit_dispersion_hyperbola, fit_energy_affine, fit_kappa_trends, AffineFit, DispersionModel,
    HyperbolaFit, KappaTrends,
};
use super::fwhm::compute_fwhm;
use super::path::{epsilon_levels, optimal_path, Domain, OptimalPath};
use super::surface::{fit_surface, SurfaceFit};
use crate::error::{Error, Result};
use crate::neuron::{CellSummary, ResponsePoint, SweepRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub kappas: Vec<f64>,
    pub n_levels: usize,
    /// Fraction of the energy range left out at each end.
    pub level_margin: f64,
    pub eta_degree: usize,
    pub width_degree: usize,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            kappas: (0..7).map(|i| 90.0 + 10.0 * i as f64).collect(),
            n_levels: 25,
            level_margin: 0.02,
            eta_degree: 8,
            width_degree: 2,
        }
    }
}

/// Per-(v_rest, g_leak) quantities used by the path fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFit {
    pub v_rest: f64,
    pub g_leak: f64,
    pub eta: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub eps_sig: f64,
    pub eps_bg: f64,
    pub g_syn_hat: f64,
    pub width: f64,
    pub width_full_domain: bool,
    pub masked_in: bool,
    pub note: String,
}

/// Dispersion, energies and tuning width for each sweep cell. A cell is
/// masked in when it was calibrated and its parabola fit succeeded.
pub fn cell_fits(rows: &[SweepRow], cells: &[CellSummary], response: &[ResponsePoint]) -> Vec<CellFit> {
    cells
        .iter()
        .map(|c| {
            let mut fit = CellFit {
                v_rest: c.v_rest,
                g_leak: c.g_leak,
                eta: f64::NAN,
                r_squared: f64::NAN,
                n_points: 0,
                eps_sig: c.eps_sig,
                eps_bg: c.eps_bg,
                g_syn_hat: c.g_syn_hat,
                width: f64::NAN,
                width_full_domain: false,
                masked_in: false,
                note: c.note.clone(),
            };
            if !c.valid {
                return fit;
            }
            let (mu, s2): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.valid && r.v_rest == c.v_rest && r.g_leak == c.g_leak)
                .map(|r| (r.mu_f, r.sigma2_f))
                .unzip();
            match fit_dispersion(&mu, &s2) {
                Ok(p) => {
                    fit.eta = p.eta;
                    fit.r_squared = p.r_squared;
                    fit.n_points = p.n_points;
                    fit.masked_in = true;
                }
                Err(e) => fit.note = e.to_string(),
            }
            let map: Vec<(f64, f64)> = response
                .iter()
                .filter(|p| p.v_rest == c.v_rest && p.g_leak == c.g_leak)
                .map(|p| (p.g_syn, p.mu_f))
                .collect();
            match compute_fwhm(&map, c.g_syn_hat) {
                Ok(w) => {
                    fit.width = w.width;
                    fit.width_full_domain = w.full_domain;
                }
                Err(e) if fit.note.is_empty() => fit.note = e.to_string(),
                Err(_) => {}
            }
            fit
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRun {
    pub kappa: f64,
    pub energy: SurfaceFit,
    pub path: OptimalPath,
    /// Dispersion never increases along the path.
    pub eta_monotone: bool,
    pub affine: Option<AffineFit>,
    pub hyperbola: Option<HyperbolaFit>,
    pub model: Option<DispersionModel>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsReport {
    pub cells: Vec<CellFit>,
    pub domain: Domain,
    pub eta_surface: SurfaceFit,
    pub width_surface: Option<SurfaceFit>,
    pub runs: Vec<KappaRun>,
    pub trends: Option<KappaTrends>,
    pub trends_error: Option<String>,
}

/// Fits the dispersion and width surfaces once, then for every κ the
/// energy surface, the optimal path, and the energy map and hyperbola along
/// it; finally the κ trends of the per-κ models.
pub fn run_paths(cells: Vec<CellFit>, cfg: &PathsConfig) -> Result<PathsReport> {
    let used: Vec<&CellFit> = cells.iter().filter(|c| c.masked_in).collect();
    if used.is_empty() {
        return Err(Error::InsufficientData("no masked-in cells".into()));
    }
    let v: Vec<f64> = used.iter().map(|c| c.v_rest).collect();
    let g: Vec<f64> = used.iter().map(|c| c.g_leak).collect();
    let eta: Vec<f64> = used.iter().map(|c| c.eta).collect();
    let eta_surface = fit_surface(&v, &g, &eta, cfg.eta_degree)?;
    let domain = Domain { v: eta_surface.x_range, g: eta_surface.y_range };

    let widths: Vec<&&CellFit> = used.iter().filter(|c| c.width.is_finite() && !c.width_full_domain).collect();
    let width_surface = fit_surface(
        &widths.iter().map(|c| c.v_rest).collect::<Vec<_>>(),
        &widths.iter().map(|c| c.g_leak).collect::<Vec<_>>(),
        &widths.iter().map(|c| c.width).collect::<Vec<_>>(),
        cfg.width_degree,
    )
    .ok();

    let mut runs = Vec::with_capacity(cfg.kappas.len());
    for &kappa in &cfg.kappas {
        let total: Vec<f64> = used.iter().map(|c| kappa * c.eps_sig + c.eps_bg).collect();
        let energy = fit_surface(&v, &g, &total, 1)?;
        let levels = epsilon_levels(&energy, &domain, cfg.n_levels, cfg.level_margin)?;
        let path = optimal_path(&eta_surface, &energy, width_surface.as_ref(), &domain, kappa, &levels)?;
        let eta_monotone = path.points.windows(2).all(|w| w[1].eta <= w[0].eta + 1e-12 * w[0].eta.abs());
        let mut errors = Vec::new();
        let eps: Vec<f64> = path.points.iter().map(|p| p.epsilon).collect();
        let affine = if width_surface.is_some() {
            let density: Vec<f64> = path.points.iter().map(|p| 1.0 / p.width).collect();
            fit_energy_affine(&eps, &density).map_err(|e| errors.push(format!("energy map: {e}"))).ok()
        } else {
            errors.push("energy map: no width surface".into());
            None
        };
        let etas: Vec<f64> = path.points.iter().map(|p| p.eta).collect();
        let hyperbola = fit_dispersion_hyperbola(&eps, &etas).map_err(|e| errors.push(format!("hyperbola: {e}"))).ok();
        let model = match (affine, hyperbola) {
            (Some(a), Some(h)) => DispersionModel::new(kappa, a, h).map_err(|e| errors.push(e.to_string())).ok(),
            _ => None,
        };
        runs.push(KappaRun { kappa, energy, path, eta_monotone, affine, hyperbola, model, errors });
    }
    let models: Vec<DispersionModel> = runs.iter().filter_map(|r| r.model).collect();
    let (trends, trends_error) = match fit_kappa_trends(&models) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(PathsReport { cells, domain, eta_surface, width_surface, runs, trends, trends_error })
}
