use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial in one variable with raw monomial coefficients, lowest power
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

/// Least-squares polynomial of the given degree. The fit runs on centred
/// and scaled abscissae; the result is converted back to raw monomials.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Polynomial> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("x and y must have equal length".into()));
    }
    if x.len() <= degree {
        return Err(Error::InsufficientData(format!("degree {degree} needs {} points, got {}", degree + 1, x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("polynomial data must be finite".into()));
    }
    let centre = x.iter().sum::<f64>() / x.len() as f64;
    let half = x.iter().map(|v| (v - centre).abs()).fold(0.0, f64::max);
    if half == 0.0 {
        return Err(Error::Degenerate("all abscissae equal".into()));
    }
    let design = DMatrix::from_fn(x.len(), degree + 1, |r, c| ((x[r] - centre) / half).powi(c as i32));
    let svd = design.svd(true, true);
    let tol = svd.singular_values.max() * 1e-12 * x.len() as f64;
    let rank = svd.rank(tol);
    if rank < degree + 1 {
        return Err(Error::RankDeficient { rank, columns: degree + 1 });
    }
    let t = svd.solve(&DVector::from_column_slice(y), tol).map_err(|e| Error::Degenerate(e.to_string()))?;
    // expand Σ t_k ((x - c)/h)^k
    let mut raw = vec![0.0; degree + 1];
    let mut power = vec![1.0];
    for (k, tk) in t.iter().enumerate() {
        for (j, p) in power.iter().enumerate() {
            raw[j] += tk * p;
        }
        if k < degree {
            let mut next = vec![0.0; power.len() + 1];
            for (j, p) in power.iter().enumerate() {
                next[j] -= p * centre / half;
                next[j + 1] += p / half;
            }
            power = next;
        }
    }
    Ok(Polynomial::new(raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_quartic_far_from_origin() {
        let p = Polynomial::new(vec![2.052e8, -7.225e6, 9.986e4, -5.948e2, 1.3]);
        let x: Vec<f64> = (0..6).map(|i| 100.0 + 10.0 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&k| p.eval(k)).collect();
        let q = polyfit(&x, &y, 4).unwrap();
        for (a, b) in q.coefficients.iter().zip(&p.coefficients) {
            assert!((a - b).abs() < 1e-8 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(polyfit(&[1.0, 2.0], &[1.0, 2.0], 2), Err(Error::InsufficientData(_))));
        assert!(matches!(polyfit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 1), Err(Error::Degenerate(_))));
    }
}
