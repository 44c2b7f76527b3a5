use std::path::Path;

use popcode::checks::run_checks;
use popcode::fit::{cell_fits, run_paths, PathPoint};
use popcode::neuron::{sweep_grid, CellSummary, ResponsePoint, SweepRow};
use popcode::repro;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{read_csv, Outputs};
use crate::plot::{line_chart, Series};
use crate::CliError;

fn curve_series(stimulus: &[f64], curves: &[(String, Vec<f64>)]) -> Vec<Series> {
    curves
        .iter()
        .map(|(label, c)| Series::new(label.clone(), stimulus.iter().copied().zip(c.iter().copied()).collect()))
        .collect()
}

fn curve_table(out: &mut Outputs, name: &str, stimulus: &[f64], curves: &[(String, Vec<f64>)]) -> Result<(), CliError> {
    let header: Vec<String> = std::iter::once("s".to_string()).chain(curves.iter().map(|(l, _)| l.clone())).collect();
    let columns: Vec<&[f64]> = std::iter::once(stimulus).chain(curves.iter().map(|(_, c)| c.as_slice())).collect();
    out.table(name, &header, &columns)
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let mut out = Outputs::new(cfg.out_dir()?);
    let result = sweep_grid(&cfg.sweep, &cfg.neuron, seed)?;
    out.csv("sweep.csv", &result.rows)?;
    out.csv("cells.csv", &result.cells)?;
    out.csv("response.csv", &result.response_points())?;

    // variance against mean count along v_rest at the middle leak conductance
    let gs = cfg.sweep.g_leak.values();
    let g_mid = gs[gs.len() / 2];
    let series: Vec<Series> = cfg
        .sweep
        .v_rest
        .values()
        .iter()
        .map(|&v| {
            let pts = result.cell_rows(v, g_mid).iter().map(|r| (r.mu_f, r.sigma2_f)).collect();
            Series::new(format!("v_rest {v:.2} mV"), pts)
        })
        .collect();
    line_chart(&out.path("dispersion.svg"), &format!("Count variance, g_leak = {g_mid:.4} mS/cm²"), "mean count", "variance", &series)?;
    out.external("dispersion.svg")?;

    let valid = result.rows.iter().filter(|r| r.valid).count();
    println!("sweep: {} states ({valid} valid), {} cells", result.rows.len(), result.cells.len());
    let meta = out.finish("sweep", cfg)?;
    println!("metadata: {}", meta.display());
    Ok(())
}

#[derive(Serialize)]
struct ModelSummary {
    kappa: f64,
    a1: f64,
    a2: f64,
    b1: f64,
    b2: f64,
    eta0: f64,
    affine_r2: f64,
    eta_monotone: bool,
    path_points: usize,
    errors: String,
}

pub fn paths(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = Outputs::new(cfg.out_dir()?);
    let input = cfg.run.input.clone().or_else(|| cfg.run.out.clone()).unwrap_or_else(|| "results".into());
    let dir = Path::new(&input);
    let rows: Vec<SweepRow> = read_csv(&dir.join("sweep.csv"))?;
    let cells: Vec<CellSummary> = read_csv(&dir.join("cells.csv"))?;
    let response: Vec<ResponsePoint> = read_csv(&dir.join("response.csv"))?;

    let report = run_paths(cell_fits(&rows, &cells, &response), &cfg.paths)?;
    out.csv("cells_fit.csv", &report.cells)?;
    let mut summary = Vec::new();
    for run in &report.runs {
        out.csv::<PathPoint>(&format!("path_kappa{}.csv", run.kappa), &run.path.points)?;
        let m = run.model.as_ref();
        let pick = |f: fn(&popcode::fit::DispersionModel) -> f64| m.map_or(f64::NAN, f);
        summary.push(ModelSummary {
            kappa: run.kappa,
            a1: pick(|m| m.a1),
            a2: pick(|m| m.a2),
            b1: pick(|m| m.b1),
            b2: pick(|m| m.b2),
            eta0: pick(|m| m.eta0),
            affine_r2: run.affine.map_or(f64::NAN, |a| a.r_squared),
            eta_monotone: run.eta_monotone,
            path_points: run.path.points.len(),
            errors: run.errors.join("; "),
        });
        for e in &run.errors {
            eprintln!("kappa {}: {e}", run.kappa);
        }
    }
    out.csv("models.csv", &summary)?;
    out.json("models.json", &report)?;

    let path_series: Vec<Series> = report
        .runs
        .iter()
        .map(|r| Series::new(format!("κ = {}", r.kappa), r.path.points.iter().map(|p| (p.v_rest, p.g_leak)).collect()))
        .collect();
    line_chart(&out.path("paths.svg"), "Optimal paths", "v_rest (mV)", "g_leak (mS/cm²)", &path_series)?;
    out.external("paths.svg")?;
    let eta_series: Vec<Series> = report
        .runs
        .iter()
        .map(|r| Series::new(format!("κ = {}", r.kappa), r.path.points.iter().map(|p| (p.epsilon, p.eta)).collect()))
        .collect();
    line_chart(&out.path("eta_paths.svg"), "Dispersion along optimal paths", "total energy (ATP)", "η", &eta_series)?;
    out.external("eta_paths.svg")?;

    println!("{:>6} {:>12} {:>10} {:>12} {:>12} {:>8} {:>9} {:>9}", "kappa", "a1", "a2", "b1", "b2", "eta0", "affine R2", "monotone");
    for s in &summary {
        println!(
            "{:>6} {:>12.4e} {:>10.4} {:>12.4e} {:>12.4e} {:>8.4} {:>9.4} {:>9}",
            s.kappa, s.a1, s.a2, s.b1, s.b2, s.eta0, s.affine_r2, s.eta_monotone
        );
    }
    if let Some(e) = &report.trends_error {
        eprintln!("kappa trends: {e}");
    }
    out.finish("paths", cfg)?;
    Ok(())
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = Outputs::new(cfg.out_dir()?);
    let report = repro::compare(&cfg.compare)?;
    out.csv("compare.csv", &report.models)?;
    out.csv("control_solution.csv", &report.control)?;
    curve_table(&mut out, "compare_curves.csv", &report.stimulus, &report.curves)?;
    out.json("compare.json", &report)?;
    line_chart(
        &out.path("compare.svg"),
        "Tuning curves after a 29% energy cut",
        "stimulus (deg)",
        "response / control peak",
        &curve_series(&report.stimulus, &report.curves),
    )?;
    out.external("compare.svg")?;
    println!("control FWHM {:.2} deg", report.control_fwhm_deg);
    println!("{:>10} {:>8} {:>8} {:>10} {:>10}  resource", "model", "width", "peak", "FR dev %", "change %");
    for m in &report.models {
        println!(
            "{:>10} {:>8.4} {:>8.4} {:>10.3} {:>10.3}  {}",
            m.model, m.width_ratio, m.peak_ratio, m.fr_deviation_pct, m.resource_change_pct, m.resource
        );
    }
    out.finish("compare", cfg)?;
    Ok(())
}

pub fn prior_study(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = Outputs::new(cfg.out_dir()?);
    let study = repro::prior_study(&cfg.compare)?;
    out.csv("prior_study.csv", &study.rows)?;
    curve_table(&mut out, "prior_study_curves.csv", &study.stimulus, &study.curves)?;
    out.json("prior_study.json", &study)?;
    for prior in ["uniform", "cardinal"] {
        let curves: Vec<_> = study.curves.iter().filter(|(l, _)| l.starts_with(prior)).cloned().collect();
        let name = format!("prior_study_{prior}.svg");
        line_chart(&out.path(&name), &format!("{prior} prior"), "stimulus (deg)", "response / control peak", &curve_series(&study.stimulus, &curves))?;
        out.external(&name)?;
    }
    println!("{:>9} {:>10} {:>10} {:>12} {:>8}", "prior", "objective", "FR dev %", "max dev %", "peak");
    for r in &study.rows {
        println!("{:>9} {:>10} {:>10.4} {:>12.4} {:>8.4}", r.prior, r.objective, r.fr_deviation_pct, r.max_fr_deviation_pct, r.peak_ratio);
    }
    out.finish("prior_study", cfg)?;
    Ok(())
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = Outputs::new(cfg.out_dir()?);
    let checks = run_checks(&cfg.verify);
    for c in &checks {
        println!("{} {} value={:.3e} tol={:.1e} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance, c.detail);
    }
    out.json("verify_results.json", &checks)?;
    out.finish("verify", cfg)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed > 0 {
        return Err(CliError::Verification(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}
