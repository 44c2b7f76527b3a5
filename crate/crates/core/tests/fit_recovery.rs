use popcode::fit::{
    fit_dispersion, fit_dispersion_hyperbola, fit_kappa_trends, fit_surface, minimize_on_contour, polyfit,
    AffineFit, DispersionModel, Domain, HyperbolaFit, Polynomial,
};
use popcode::oracle::contour_grid_search;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn published() -> [Polynomial; 5] {
    [
        Polynomial::new(vec![1.784e-8, -8.249e-11]),
        Polynomial::new(vec![0.6931, 3.786e-4]),
        Polynomial::new(vec![3.333e5, -6.201e3, 3.959e1]),
        Polynomial::new(vec![2.052e8, -7.225e6, 9.986e4, -5.948e2, 1.3]),
        Polynomial::new(vec![2.052e9, 4.202e5, -2.488e3]),
    ]
}

fn models_from(trends: &[Polynomial; 5], kappas: &[f64]) -> Vec<DispersionModel> {
    kappas
        .iter()
        .map(|&k| {
            let v: Vec<f64> = trends.iter().map(|p| p.eval(k)).collect();
            DispersionModel::new(
                k,
                AffineFit { slope: v[0], intercept: v[1], r_squared: 1.0 },
                HyperbolaFit { eta0: v[4], b1: v[2], b2: v[3], sse: 0.0 },
            )
            .unwrap()
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn kappa_trends_recover_published_coefficients() {
    let truth = published();
    let kappas: Vec<f64> = (0..7).map(|i| 90.0 + 10.0 * i as f64).collect();
    let mut models = models_from(&truth, &kappas);
    // outliers below the fitting range must not matter
    models[0].b2 *= 3.0;
    let t = fit_kappa_trends(&models).unwrap();
    for (fit, want) in [&t.a1, &t.a2, &t.b1, &t.b2, &t.eta0].iter().zip(&truth) {
        assert_eq!(fit.coefficients.len(), want.coefficients.len());
        for (a, b) in fit.coefficients.iter().zip(&want.coefficients) {
            assert!(rel(*a, *b) < 1e-6, "{a} vs {b}");
        }
    }
    assert!(fit_kappa_trends(&models[..6]).is_err());
}

#[test]
fn quadratic_b2_trend_fits_worse_than_quartic() {
    let truth = published();
    let kappas: Vec<f64> = (0..11).map(|i| 100.0 + 5.0 * i as f64).collect();
    let y: Vec<f64> = kappas.iter().map(|&k| truth[3].eval(k)).collect();
    let sse = |p: &Polynomial| kappas.iter().zip(&y).map(|(&k, v)| (p.eval(k) - v).powi(2)).sum::<f64>();
    let quad = polyfit(&kappas, &y, 2).unwrap();
    let quart = polyfit(&kappas, &y, 4).unwrap();
    assert!(sse(&quad) > 1e6 * sse(&quart).max(1e-6));
}

#[test]
fn hyperbola_recovers_planted_parameters() {
    let eps: Vec<f64> = (0..33).map(|i| 2.0 + 0.25 * i as f64).collect();
    let eta: Vec<f64> = eps.iter().map(|e| 2.0 + 5.0 / (e - 1.0)).collect();
    let h = fit_dispersion_hyperbola(&eps, &eta).unwrap();
    assert!(rel(h.eta0, 2.0) < 1e-6, "{h:?}");
    assert!(rel(h.b1, 5.0) < 1e-6, "{h:?}");
    assert!(rel(h.b2, 1.0) < 1e-6, "{h:?}");
}

#[test]
fn noisy_parabola_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu: Vec<f64> = (0..15).map(|i| 0.2 + 0.6 * i as f64 / 14.0).collect();
    let s: Vec<f64> = mu.iter().map(|m| 1.5 * m * (1.0 - m) + rng.random_range(-1e-4..1e-4)).collect();
    let fit = fit_dispersion(&mu, &s).unwrap();
    assert!((fit.eta - 1.5).abs() < 0.01);
    assert!(fit.r_squared > 0.99);
}

#[test]
fn planted_linear_and_quadratic_surfaces() {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..9 {
        for j in 0..9 {
            x.push(-75.0 + 1.25 * i as f64);
            y.push(0.07 + 0.00625 * j as f64);
        }
    }
    let lin = [3.0e6, 1.5e5, 2.0e8];
    let z: Vec<f64> = x.iter().zip(&y).map(|(v, g)| lin[0] + lin[1] * v + lin[2] * g).collect();
    let fit = fit_surface(&x, &y, &z, 1).unwrap();
    for (a, b) in fit.raw_coefficients().iter().zip(lin) {
        assert!(rel(*a, b) < 1e-8);
    }
    let quad = [1.2, -0.03, 4.0, 2e-4, 0.5, -20.0];
    let z: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(v, g)| quad[0] + quad[1] * v + quad[2] * g + quad[3] * v * v + quad[4] * v * g + quad[5] * g * g)
        .collect();
    let fit = fit_surface(&x, &y, &z, 2).unwrap();
    for (a, b) in fit.raw_coefficients().iter().zip(quad) {
        assert!(rel(*a, b) < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn golden_section_agrees_with_dense_contour_scan() {
    let domain = Domain { v: (-75.0, -65.0), g: (0.07, 0.12) };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..9 {
        for j in 0..9 {
            x.push(-75.0 + 1.25 * i as f64);
            y.push(0.07 + 0.00625 * j as f64);
        }
    }
    // a bumpy dispersion with several minima along contours
    let eta_f = |v: f64, g: f64| 1.0 + 0.05 * ((v + 70.0) * 0.8).sin() * ((g - 0.07) * 90.0).cos() + 0.002 * (v + 70.0).powi(2);
    let z: Vec<f64> = x.iter().zip(&y).map(|(&v, &g)| eta_f(v, g)).collect();
    let eta = fit_surface(&x, &y, &z, 8).unwrap();
    let e: Vec<f64> = x.iter().zip(&y).map(|(&v, &g)| 120.0 * (2.0e5 - 8.0e3 * (v + 75.0)) + 1.0e8 * g + 2.0e5 * v).collect();
    let energy = fit_surface(&x, &y, &e, 1).unwrap();
    let levels = popcode::fit::epsilon_levels(&energy, &domain, 9, 0.05).unwrap();
    for eps in levels {
        let p = minimize_on_contour(&eta, &energy, &domain, eps).unwrap();
        let o = contour_grid_search(|v, g| eta.eval(v, g), |v, g| energy.eval(v, g), eps, domain.v, domain.g).unwrap();
        // same minimum value, and the fitted point is never worse than the scan
        assert!(p.eta <= o.eta + 1e-9, "{} vs {}", p.eta, o.eta);
        let close = (p.v_rest - o.x).abs() <= 2.0 * o.spacing.0 + 1e-9 || (p.g_leak - o.y).abs() <= 2.0 * o.spacing.1 + 1e-9;
        assert!(close || (p.eta - o.eta).abs() < 1e-6, "{p:?} vs {o:?}");
        if !p.on_boundary {
            assert!(p.tangent_slope.abs() < 1e-3);
        }
    }
}
