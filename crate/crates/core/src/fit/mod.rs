//! From sweep tables to dispersion surfaces, tuning widths, optimal
//! adaptation paths and the κ-dependent noise model.

mod dispersion;
mod fwhm;
mod path;
mod pipeline;
mod poly;
mod surface;

pub use dispersion::{
    fit_dispersion, fit_dispersion_hyperbola, fit_energy_affine, fit_kappa_trends, AffineFit, DispersionModel,
    HyperbolaFit, KappaTrends, ParabolaFit, TREND_DEGREES, TREND_KAPPA_MIN,
};
pub use fwhm::{
    compute_fwhm, fwhm_circular, isotonic_increasing, probe_curve, Fwhm, ResponseMap, PROBE_BOOST, PROBE_SIGMA_DEG,
    STIMULUS_PERIOD_DEG,
};
pub use path::{energy_range, epsilon_levels, minimize_on_contour, optimal_path, Domain, OptimalPath, PathPoint};
pub use pipeline::{cell_fits, run_paths, CellFit, KappaRun, PathsConfig, PathsReport};
pub use poly::{polyfit, Polynomial};
pub use surface::{fit_surface, monomials, SurfaceFit};
