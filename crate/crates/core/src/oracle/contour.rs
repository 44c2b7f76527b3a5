use crate::error::{Error, Result};

/// Lowest-η point found on an energy contour by dense sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourMinimum {
    pub x: f64,
    pub y: f64,
    pub eta: f64,
    /// Number of contour samples examined.
    pub samples: usize,
    /// Set when the minimum lies on the edge of the domain.
    pub on_boundary: bool,
    /// Grid spacing along each axis, `(dx, dy)`.
    pub spacing: (f64, f64),
}

/// Scans a `resolution × resolution` lattice over `[x0, x1] × [y0, y1]`,
/// collects every point where `energy - epsilon` changes sign along a lattice
/// edge (linearly interpolated) and returns the one with the smallest `eta`.
///
/// The resolution is doubled until at least 2000 contour samples are found
/// or the lattice exceeds 4096 points per side.
pub fn contour_grid_search<E, F>(
    eta: E,
    energy: F,
    epsilon: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> Result<ContourMinimum>
where
    E: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> f64,
{
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    if !(x1 > x0 && y1 > y0) {
        return Err(Error::InvalidArgument("contour domain must have positive extent".into()));
    }
    let mut resolution = 512;
    loop {
        let found = scan(&eta, &energy, epsilon, x_range, y_range, resolution);
        match found {
            Some(m) if m.samples >= 2000 || resolution >= 4096 => return Ok(m),
            None if resolution >= 4096 => return Err(Error::EmptyContour(epsilon)),
            _ => resolution *= 2,
        }
    }
}

fn scan<E, F>(eta: &E, energy: &F, epsilon: f64, (x0, x1): (f64, f64), (y0, y1): (f64, f64), n: usize) -> Option<ContourMinimum>
where
    E: Fn(f64, f64) -> f64,
    F: Fn(f64, f64) -> f64,
{
    let dx = (x1 - x0) / (n - 1) as f64;
    let dy = (y1 - y0) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| x0 + dx * i as f64).collect();
    let ys: Vec<f64> = (0..n).map(|j| y0 + dy * j as f64).collect();
    let mut prev: Vec<f64> = xs.iter().map(|&x| energy(x, ys[0]) - epsilon).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    let mut samples = 0;
    let mut visit = |x: f64, y: f64| {
        samples += 1;
        let e = eta(x, y);
        if best.is_none_or(|(_, _, b)| e < b) {
            best = Some((x, y, e));
        }
    };
    let row_edges = |row: &[f64], y: f64, visit: &mut dyn FnMut(f64, f64)| {
        for i in 0..n {
            if row[i] == 0.0 {
                visit(xs[i], y);
            } else if i + 1 < n && row[i] * row[i + 1] < 0.0 {
                let t = row[i] / (row[i] - row[i + 1]);
                visit(xs[i] + t * dx, y);
            }
        }
    };
    row_edges(&prev, ys[0], &mut visit);
    for j in 1..n {
        let cur: Vec<f64> = xs.iter().map(|&x| energy(x, ys[j]) - epsilon).collect();
        row_edges(&cur, ys[j], &mut visit);
        for i in 0..n {
            if prev[i] * cur[i] < 0.0 {
                let t = prev[i] / (prev[i] - cur[i]);
                visit(xs[i], ys[j - 1] + t * dy);
            }
        }
        prev = cur;
    }
    best.map(|(x, y, e)| {
        let on_boundary = x - x0 <= dx * 0.5 || x1 - x <= dx * 0.5 || y - y0 <= dy * 0.5 || y1 - y <= dy * 0.5;
        ContourMinimum { x, y, eta: e, samples, on_boundary, spacing: (dx, dy) }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_eta_on_a_line() {
        // minimize (x-1)^2 + 2(y-0.5)^2 on x + y = 1 => x = 2/3, y = 1/3
        let m = contour_grid_search(|x, y| (x - 1.0).powi(2) + 2.0 * (y - 0.5).powi(2), |x, y| x + y, 1.0, (-1.0, 2.0), (-1.0, 2.0)).unwrap();
        assert!(m.samples >= 2000);
        assert!((m.x - 2.0 / 3.0).abs() < 2.0 * m.spacing.0);
        assert!((m.y - 1.0 / 3.0).abs() < 2.0 * m.spacing.1);
        assert!(!m.on_boundary);
    }

    #[test]
    fn corner_contour_is_flagged() {
        let m = contour_grid_search(|x, y| x + y, |x, y| x + y, 0.001, (0.0, 1.0), (0.0, 1.0)).unwrap();
        assert!(m.on_boundary);
    }

    #[test]
    fn missing_contour_is_an_error() {
        let r = contour_grid_search(|x, _| x, |x, y| x + y, 5.0, (0.0, 1.0), (0.0, 1.0));
        assert_eq!(r, Err(Error::EmptyContour(5.0)));
    }
}
