use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Total-degree polynomial in two variables, fitted on coordinates rescaled
/// to `[-1, 1]` per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFit {
    pub degree: usize,
    /// `(i, j)` exponents of `x̂^i ŷ^j`, matching `coefficients`.
    pub exponents: Vec<(usize, usize)>,
    /// Coefficients in the rescaled coordinates.
    pub coefficients: Vec<f64>,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Largest `|fit - value| / |value|` over the data.
    pub max_rel_error: f64,
    pub rms: f64,
}

pub fn monomials(degree: usize) -> Vec<(usize, usize)> {
    (0..=degree).flat_map(|k| (0..=k).map(move |j| (k - j, j))).collect()
}

fn scale(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (2.0 * v - lo - hi) / (hi - lo)
    } else {
        0.0
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Least-squares fit of `z ≈ P(x, y)` with total degree `degree`.
///
/// Fails with [`Error::RankDeficient`] when the samples cannot determine
/// every coefficient, e.g. too few distinct values along an axis.
pub fn fit_surface(x: &[f64], y: &[f64], z: &[f64], degree: usize) -> Result<SurfaceFit> {
    let n = x.len();
    if y.len() != n || z.len() != n {
        return Err(Error::InvalidArgument("x, y and z must have equal length".into()));
    }
    if n < (degree + 1) * (degree + 1) {
        return Err(Error::InsufficientData(format!(
            "degree {degree} needs at least {} samples, got {n}",
            (degree + 1) * (degree + 1)
        )));
    }
    if x.iter().chain(y).chain(z).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("surface data must be finite".into()));
    }
    let exponents = monomials(degree);
    let (xr, yr) = (range(x), range(y));
    let design = DMatrix::from_fn(n, exponents.len(), |r, c| {
        let (i, j) = exponents[c];
        scale(x[r], xr).powi(i as i32) * scale(y[r], yr).powi(j as i32)
    });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-10 * (n.max(exponents.len()) as f64);
    let rank = svd.rank(tol);
    if rank < exponents.len() {
        return Err(Error::RankDeficient { rank, columns: exponents.len() });
    }
    let rhs = DVector::from_column_slice(z);
    let coef = svd.solve(&rhs, tol).map_err(|e| Error::Degenerate(e.to_string()))?;
    let fitted = &design * &coef;
    let mut max_rel_error = 0.0f64;
    let mut ss = 0.0;
    for (f, &v) in fitted.iter().zip(z) {
        let err = (f - v).abs();
        ss += err * err;
        max_rel_error = max_rel_error.max(if v != 0.0 { err / v.abs() } else { err });
    }
    Ok(SurfaceFit {
        degree,
        exponents,
        coefficients: coef.iter().copied().collect(),
        x_range: xr,
        y_range: yr,
        max_rel_error,
        rms: (ss / n as f64).sqrt(),
    })
}

impl SurfaceFit {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (u, v) = (scale(x, self.x_range), scale(y, self.y_range));
        self.exponents
            .iter()
            .zip(&self.coefficients)
            .map(|(&(i, j), c)| c * u.powi(i as i32) * v.powi(j as i32))
            .sum()
    }

    /// Partial derivatives `(∂/∂x, ∂/∂y)` in raw coordinates.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = (scale(x, self.x_range), scale(y, self.y_range));
        let (su, sv) = (half_width(self.x_range), half_width(self.y_range));
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (&(i, j), c) in self.exponents.iter().zip(&self.coefficients) {
            if i > 0 {
                gx += c * i as f64 * u.powi(i as i32 - 1) * v.powi(j as i32);
            }
            if j > 0 {
                gy += c * j as f64 * u.powi(i as i32) * v.powi(j as i32 - 1);
            }
        }
        (gx / su, gy / sv)
    }

    /// Coefficients of the same polynomial in raw `x^i y^j`, in the order of
    /// `self.exponents`.
    pub fn raw_coefficients(&self) -> Vec<f64> {
        let d = self.degree;
        // x̂ = a x + b
        let (ax, bx) = affine(self.x_range);
        let (ay, by) = affine(self.y_range);
        let mut raw = vec![vec![0.0; d + 1]; d + 1];
        for (&(i, j), &c) in self.exponents.iter().zip(&self.coefficients) {
            let px = binomial_powers(ax, bx, i);
            let py = binomial_powers(ay, by, j);
            for (p, &cx) in px.iter().enumerate() {
                for (q, &cy) in py.iter().enumerate() {
                    raw[p][q] += c * cx * cy;
                }
            }
        }
        self.exponents.iter().map(|&(i, j)| raw[i][j]).collect()
    }
}

fn half_width((lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        0.5 * (hi - lo)
    } else {
        1.0
    }
}

fn affine((lo, hi): (f64, f64)) -> (f64, f64) {
    if hi > lo {
        (2.0 / (hi - lo), -(lo + hi) / (hi - lo))
    } else {
        (0.0, 0.0)
    }
}

/// Coefficients of `(a t + b)^n` in powers of `t`.
fn binomial_powers(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..n {
        let mut next = vec![0.0; c.len() + 1];
        for (k, &v) in c.iter().enumerate() {
            next[k] += v * b;
            next[k + 1] += v * a;
        }
        c = next;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, ny: usize) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                x.push(-75.0 + 10.0 * i as f64 / (nx - 1) as f64);
                y.push(0.07 + 0.05 * j as f64 / (ny - 1) as f64);
            }
        }
        (x, y)
    }

    #[test]
    fn recovers_planted_quadratic() {
        let (x, y) = grid(5, 5);
        // 1 + 2x + 3y + 0.5x² - 4xy + 7y² in raw coordinates
        let planted = [1.0, 2.0, 3.0, 0.5, -4.0, 7.0];
        let z: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(&x, &y)| 1.0 + 2.0 * x + 3.0 * y + 0.5 * x * x - 4.0 * x * y + 7.0 * y * y)
            .collect();
        let fit = fit_surface(&x, &y, &z, 2).unwrap();
        assert_eq!(fit.exponents, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        for (r, p) in fit.raw_coefficients().iter().zip(planted) {
            assert!((r - p).abs() <= 1e-8 * p.abs().max(1.0), "{r} vs {p}");
        }
        assert!(fit.max_rel_error < 1e-10);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (x, y) = grid(6, 6);
        let z: Vec<f64> = x.iter().zip(&y).map(|(&x, &y)| (x / 10.0).sin() + 30.0 * y * y).collect();
        let fit = fit_surface(&x, &y, &z, 3).unwrap();
        let (gx, gy) = fit.gradient(-70.0, 0.1);
        let h = 1e-5;
        let fx = (fit.eval(-70.0 + h, 0.1) - fit.eval(-70.0 - h, 0.1)) / (2.0 * h);
        let fy = (fit.eval(-70.0, 0.1 + h * 1e-2) - fit.eval(-70.0, 0.1 - h * 1e-2)) / (2.0 * h * 1e-2);
        assert!((gx - fx).abs() < 1e-6);
        assert!((gy - fy).abs() < 1e-4 * fy.abs().max(1.0));
    }

    #[test]
    fn degree_eight_on_small_grid_fails() {
        let (x, y) = grid(5, 5);
        let z = vec![1.0; x.len()];
        assert!(matches!(fit_surface(&x, &y, &z, 8), Err(Error::InsufficientData(_))));
        // enough samples but only six distinct values along one axis
        let (x, y) = grid(14, 6);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
        assert!(matches!(fit_surface(&x, &y, &z, 8), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn degree_eight_on_nine_by_nine() {
        let (x, y) = grid(9, 9);
        let z: Vec<f64> = x.iter().zip(&y).map(|(&a, &b)| 1.0 + ((a + 70.0) * (b - 0.1) * 10.0).cos()).collect();
        let fit = fit_surface(&x, &y, &z, 8).unwrap();
        assert_eq!(fit.coefficients.len(), 45);
        assert!(fit.max_rel_error < 1e-3);
    }
}
