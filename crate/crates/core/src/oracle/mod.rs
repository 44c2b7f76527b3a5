//! Independent numerical references for the closed-form results.
//!
//! Nothing here calls into the analytic formulas: the optima are found by
//! projected gradient ascent on the discretized problems, the spike-train
//! moments by brute-force sampling, and the contour minima by dense search.

mod compound;
mod contour;

pub use compound::{compound_sampler, CompoundMoments};
pub use contour::{contour_grid_search, ContourMinimum};

use crate::analytic::{Objective, PopulationSpec, PRIOR_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{Prior, StimulusGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions<T> {
    /// Relative KKT residual at which a solve is accepted.
    pub tol: T,
    pub max_iter: usize,
    /// Lower bound on every variable.
    pub floor: T,
}

impl<T: Real> Default for OracleOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8).max(T::lit(1e3) * T::epsilon()),
            max_iter: 100_000,
            floor: T::lit(1e-9),
        }
    }
}

/// Result of a single-constraint ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult<T> {
    pub x: Vec<T>,
    /// Multiplier of the linear constraint.
    pub multiplier: T,
    pub residual: T,
    pub iterations: usize,
}

/// Maximizes `Σ o_i φ_i(x_i)` subject to `Σ a_i x_i = budget` and `x ≥ floor`
/// for concave `φ_i`, given the slopes `φ_i'`.
///
/// Each step is a constrained Newton step with the (exactly diagonal) Hessian
/// estimated by finite differences of the slopes, followed by a line search
/// on the directional derivative; the iterate is rescaled onto the constraint
/// after each step. Entries with `a_i = 0` are held fixed.
pub fn separable_ascent<T, S>(
    objective_weights: &[T],
    constraint_weights: &[T],
    budget: T,
    x0: Vec<T>,
    slope: S,
    opts: &OracleOptions<T>,
    solver: &'static str,
) -> Result<AscentResult<T>>
where
    T: Real,
    S: Fn(usize, T) -> T,
{
    let n = x0.len();
    let o = objective_weights;
    let a = constraint_weights;
    let active: Vec<bool> = a.iter().map(|&w| w > T::zero()).collect();
    let mut x = x0;
    let project = |x: &mut [T]| {
        let used: T = x.iter().zip(a).zip(&active).filter(|(_, &s)| s).map(|((&x, &a), _)| a * x).sum();
        let scale = budget / used;
        for (xi, &s) in x.iter_mut().zip(&active) {
            if s {
                *xi = (*xi * scale).max(opts.floor);
            }
        }
    };
    for (xi, &s) in x.iter_mut().zip(&active) {
        if s {
            *xi = xi.max(opts.floor);
        }
    }
    project(&mut x);

    let fd_step = T::epsilon().cbrt();
    let mut residual = T::infinity();
    let mut delta = vec![T::zero(); n];
    for iter in 0..opts.max_iter {
        let (multiplier, res) = separable_residual(o, a, &x, &slope, opts.floor);
        residual = res;
        if residual < opts.tol {
            return Ok(AscentResult { x, multiplier, residual, iterations: iter });
        }
        // curvature magnitudes c_i = |o_i φ_i''|
        let mut grad = vec![T::zero(); n];
        let mut curv = vec![T::one(); n];
        let mut max_curv = T::zero();
        for i in 0..n {
            if active[i] {
                grad[i] = o[i] * slope(i, x[i]);
                let h = x[i] * fd_step;
                let c = (o[i] * (slope(i, x[i] + h) - slope(i, x[i] - h)) / (h + h)).abs();
                curv[i] = c;
                max_curv = max_curv.max(c);
            }
        }
        let curv_floor = max_curv * T::epsilon().sqrt() + T::min_positive_value();
        let (mut num, mut den) = (T::zero(), T::zero());
        for i in 0..n {
            if active[i] {
                curv[i] = curv[i].max(curv_floor);
                num = num + a[i] * grad[i] / curv[i];
                den = den + a[i] * a[i] / curv[i];
            }
        }
        let mu = num / den;
        for i in 0..n {
            delta[i] = if active[i] { (grad[i] - mu * a[i]) / curv[i] } else { T::zero() };
            if active[i] && x[i] <= opts.floor && delta[i] < T::zero() {
                delta[i] = T::zero();
            }
        }

        let directional = |t: T| -> T {
            (0..n)
                .filter(|&i| delta[i] != T::zero())
                .map(|i| (o[i] * slope(i, (x[i] + t * delta[i]).max(opts.floor)) - mu * a[i]) * delta[i])
                .sum()
        };
        let mut t_max = T::infinity();
        for i in 0..n {
            if delta[i] < T::zero() {
                t_max = t_max.min((opts.floor - x[i]) / delta[i]);
            }
        }
        let d0 = directional(T::zero());
        if !(d0 > T::zero()) {
            break;
        }
        let mut lo = T::zero();
        let mut hi = T::one().min(t_max);
        let mut d_hi = directional(hi);
        while d_hi > T::zero() && hi < t_max {
            lo = hi;
            hi = (hi * T::lit(2.0)).min(t_max);
            d_hi = directional(hi);
        }
        let mut t = hi;
        if d_hi < T::zero() && d_hi.abs() > T::lit(0.1) * d0 {
            let mut d_lo = d0;
            for _ in 0..60 {
                let mut mid = lo + (hi - lo) * d_lo / (d_lo - d_hi);
                if !(mid > lo && mid < hi) {
                    mid = (lo + hi) * T::lit(0.5);
                }
                let d_mid = directional(mid);
                t = mid;
                if d_mid.abs() <= T::lit(0.1) * d0 {
                    break;
                }
                if d_mid > T::zero() {
                    lo = mid;
                    d_lo = d_mid;
                } else {
                    hi = mid;
                    d_hi = d_mid;
                }
                if hi - lo <= T::epsilon() * hi {
                    break;
                }
            }
        }
        if !(t > T::zero()) || !t.is_finite() {
            break;
        }
        for i in 0..n {
            if active[i] {
                x[i] = (x[i] + t * delta[i]).max(opts.floor);
            }
        }
        project(&mut x);
    }
    let (multiplier, res) = separable_residual(o, a, &x, &slope, opts.floor);
    if res < opts.tol {
        return Ok(AscentResult { x, multiplier, residual: res, iterations: opts.max_iter });
    }
    Err(Error::NoConvergence {
        solver,
        iterations: opts.max_iter,
        residual: residual.min(res).as_f64(),
    })
}

/// Multiplier and relative KKT residual of [`separable_ascent`] at `x`.
pub fn separable_residual<T, S>(objective_weights: &[T], constraint_weights: &[T], x: &[T], slope: &S, floor: T) -> (T, T)
where
    T: Real,
    S: Fn(usize, T) -> T,
{
    let (mut num, mut den) = (T::zero(), T::zero());
    let grad: Vec<T> = (0..x.len())
        .map(|i| {
            let a = constraint_weights[i];
            if a > T::zero() {
                let g = objective_weights[i] * slope(i, x[i]) / a;
                num = num + a * g;
                den = den + a;
                g
            } else {
                T::zero()
            }
        })
        .collect();
    let multiplier = num / den;
    let scale = multiplier.abs().max(T::min_positive_value());
    let mut residual = T::zero();
    for i in 0..x.len() {
        if constraint_weights[i] > T::zero() {
            let d = grad[i] - multiplier;
            if !(x[i] <= floor && d < T::zero()) {
                residual = residual.max(d.abs() / scale);
            }
        }
    }
    (multiplier, residual)
}

/// Discretized energy-constrained problem with the density eliminated:
/// maximize `Σ w p f(I_conv g³ p² / (η R²))` subject to `Σ w p g^α = E`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedProblem<T> {
    pub spec: PopulationSpec<T>,
    /// Starting gain; a constant gain meeting the budget when `None`.
    pub start: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericSolution<T> {
    pub gain: Vec<T>,
    /// Energy-constraint multiplier `λ`.
    pub multiplier: T,
    pub residual: T,
    pub iterations: usize,
}

/// Projected-gradient solution of [`DiscretizedProblem`].
///
/// The ascent runs in `u = g^α`, where the energy constraint is linear.
pub fn solve_numeric<T: Real>(problem: &DiscretizedProblem<T>, opts: &OracleOptions<T>) -> Result<NumericSolution<T>> {
    let spec = &problem.spec;
    spec.validate()?;
    let alpha = spec.energy.alpha();
    let budget = spec.energy.budget();
    let floor = T::lit(PRIOR_FLOOR);
    let p = spec.prior.values();
    let r = spec.rate.values();
    let weights: Vec<T> = spec
        .grid
        .weights()
        .iter()
        .zip(p)
        .map(|(&w, &p)| if p >= floor { w * p } else { T::zero() })
        .collect();
    let coef: Vec<T> = p
        .iter()
        .zip(r)
        .map(|(&p, &r)| spec.i_conv * p * p / (spec.eta * r * r))
        .collect();
    let three_over_alpha = T::lit(3.0) / alpha;
    let u0 = match &problem.start {
        Some(g) => g.iter().map(|&g| g.max(T::zero()).powf(alpha)).collect(),
        None => vec![T::one(); p.len()],
    };
    let u_floor = OracleOptions { floor: opts.floor.powf(alpha), ..*opts };
    let objective = spec.objective;
    let result = separable_ascent(
        &weights,
        &weights,
        budget,
        u0,
        |i, u| {
            let x = coef[i] * u.powf(three_over_alpha);
            objective.derivative(x) * x * three_over_alpha / u
        },
        &u_floor,
        "solve_numeric",
    )?;
    let gain = result
        .x
        .iter()
        .zip(&weights)
        .map(|(&u, &w)| if w > T::zero() { u.powf(alpha.recip()) } else { T::zero() })
        .collect();
    Ok(NumericSolution {
        gain,
        multiplier: result.multiplier,
        residual: result.residual,
        iterations: result.iterations,
    })
}

/// Numerical optimum of `max ∫ p f(g d²)` subject to `∫ p g = R` and `∫ d = N`,
/// by alternating projected ascent over the gain and density blocks.
pub fn gs_numeric<T: Real>(
    grid: &StimulusGrid<T>,
    prior: &Prior<T>,
    mean_rate: T,
    n_neurons: T,
    objective: Objective<T>,
    opts: &OracleOptions<T>,
    start: Option<(Vec<T>, Vec<T>)>,
) -> Result<(Vec<T>, Vec<T>)> {
    objective.validate(T::one())?;
    let floor = T::lit(PRIOR_FLOOR);
    let p = prior.values();
    let w = grid.weights();
    let wp: Vec<T> = w
        .iter()
        .zip(p)
        .map(|(&w, &p)| if p >= floor { w * p } else { T::zero() })
        .collect();
    let (mut g, mut d) = start.unwrap_or_else(|| (vec![mean_rate; p.len()], vec![n_neurons; p.len()]));
    let inner = OracleOptions { tol: opts.tol * T::lit(0.1), ..*opts };
    let max_outer = 10_000;
    let mut residual = T::infinity();
    for _ in 0..max_outer {
        let gr = {
            let d = &d;
            separable_ascent(&wp, &wp, mean_rate, g.clone(), |i, gi| objective.derivative(gi * d[i] * d[i]) * d[i] * d[i], &inner, "gs_numeric")?
        };
        g = gr.x;
        let dr = {
            let g = &g;
            separable_ascent(
                &wp,
                w,
                n_neurons,
                d.clone(),
                |i, di| objective.derivative(g[i] * di * di) * T::lit(2.0) * g[i] * di,
                &inner,
                "gs_numeric",
            )?
        };
        d = dr.x;
        // joint KKT check: the gain block must still be stationary after the density update
        let (_, res) = separable_residual(&wp, &wp, &g, &|i, gi| objective.derivative(gi * d[i] * d[i]) * d[i] * d[i], opts.floor);
        residual = res;
        if residual < opts.tol {
            return Ok((g, d));
        }
    }
    Err(Error::NoConvergence {
        solver: "gs_numeric",
        iterations: max_outer,
        residual: residual.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{lagrangian_stationarity, EnergyConstraint};
    use crate::grid::RateTarget;
    use approx::assert_relative_eq;

    fn problem(obj: Objective<f64>, alpha: f64, cardinal: bool) -> DiscretizedProblem<f64> {
        let grid = StimulusGrid::orientation(256).unwrap();
        let prior = if cardinal { Prior::cardinal(&grid, 0.5).unwrap() } else { Prior::uniform(&grid) };
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        let spec = PopulationSpec::new(grid, prior, rate, obj, EnergyConstraint::new(6.0, alpha).unwrap()).unwrap();
        DiscretizedProblem { spec, start: None }
    }

    #[test]
    fn infomax_uniform_gives_constant_gain() {
        let sol = solve_numeric(&problem(Objective::Infomax, 1.0, false), &OracleOptions::default()).unwrap();
        assert!(sol.gain.iter().all(|&g| (g - 6.0).abs() < 1e-9));
        // E = 3/(λα)
        assert_relative_eq!(sol.multiplier, 0.5, max_relative = 1e-8);
    }

    #[test]
    fn discrimax_shape_from_a_perturbed_start() {
        let mut pr = problem(Objective::Discrimax, 1.0, true);
        let n = pr.spec.grid.len();
        pr.start = Some((0..n).map(|i| 1.0 + 0.5 * (i as f64 * 0.37).sin()).collect());
        let sol = solve_numeric(&pr, &OracleOptions::default()).unwrap();
        let p = pr.spec.prior.values();
        // g ∝ p^{-1/2} for α = 1 and constant R
        for i in [0, 40, 97, 200] {
            assert_relative_eq!(sol.gain[i] / sol.gain[64], (p[i] / p[64]).powf(-0.5), max_relative = 1e-7);
        }
        let (_, stationarity) = lagrangian_stationarity(&pr.spec, &sol.gain);
        assert!(stationarity < 1e-7);
    }

    #[test]
    fn two_point_problem_matches_hand_solution() {
        // maximize a1 log x1 + a2 log x2 s.t. a1 x1 + a2 x2 = B  =>  x1 = x2 = B/(a1+a2)
        // maximize -(1/x1) - (4/x2) with equal weights, x1 + x2 = 3  =>  x2 = 2 x1  =>  (1, 2)
        let r = separable_ascent(
            &[1.0, 1.0],
            &[1.0, 1.0],
            3.0,
            vec![2.5, 0.5],
            |i, x| if i == 0 { 1.0 / (x * x) } else { 4.0 / (x * x) },
            &OracleOptions::default(),
            "test",
        )
        .unwrap();
        assert_relative_eq!(r.x[0], 1.0, max_relative = 1e-8);
        assert_relative_eq!(r.x[1], 2.0, max_relative = 1e-8);
        assert_relative_eq!(r.multiplier, 1.0, max_relative = 1e-7);
    }

    #[test]
    fn gs_infomax_uniform() {
        let grid = StimulusGrid::<f64>::orientation(256).unwrap();
        let prior = Prior::uniform(&grid);
        let (g, d) = gs_numeric(&grid, &prior, 5.0, 20.0, Objective::Infomax, &OracleOptions::default(), None).unwrap();
        assert!(g.iter().all(|&g| (g - 5.0).abs() < 1e-7));
        assert!(d.iter().all(|&d| (d - 20.0 / 180.0).abs() < 1e-9));
    }

    #[test]
    fn gs_optimum_is_start_independent() {
        let grid = StimulusGrid::<f64>::orientation(256).unwrap();
        let prior = Prior::cardinal(&grid, 0.5).unwrap();
        let opts = OracleOptions::default();
        let (g1, d1) = gs_numeric(&grid, &prior, 4.0, 16.0, Objective::Discrimax, &opts, None).unwrap();
        let n = grid.len();
        let start = (
            (0..n).map(|i| 3.0 + (i as f64 * 0.11).cos()).collect(),
            (0..n).map(|i| 0.05 + 0.02 * (i as f64 * 0.23).sin()).collect(),
        );
        let (g2, d2) = gs_numeric(&grid, &prior, 4.0, 16.0, Objective::Discrimax, &opts, Some(start)).unwrap();
        for i in 0..n {
            assert_relative_eq!(g1[i], g2[i], max_relative = 1e-6);
            assert_relative_eq!(d1[i], d2[i], max_relative = 1e-6);
        }
        let ratio: Vec<f64> = (0..n).map(|i| prior.values()[i] * g1[i] / d1[i]).collect();
        for r in &ratio {
            assert_relative_eq!(*r, 0.25, max_relative = 1e-6);
        }
    }

    #[test]
    fn single_precision_solve() {
        let grid = StimulusGrid::<f32>::orientation(128).unwrap();
        let prior = Prior::cardinal(&grid, 0.5).unwrap();
        let rate = RateTarget::constant(&grid, 1.0).unwrap();
        let spec = PopulationSpec::new(grid, prior, rate, Objective::Discrimax, EnergyConstraint::new(2.0, 1.5).unwrap()).unwrap();
        let sol = solve_numeric(&DiscretizedProblem { spec, start: None }, &OracleOptions::default()).unwrap();
        assert!(sol.residual < 1e-3);
    }
}
