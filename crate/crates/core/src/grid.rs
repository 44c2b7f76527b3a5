//! Stimulus grids, trapezoidal quadrature, and the fields defined on them.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Minimum number of grid points accepted by [`StimulusGrid::new`].
pub const MIN_GRID_POINTS: usize = 64;

/// Ordered stimulus sample points with trapezoidal quadrature weights.
///
/// On a periodic grid the segment from the last point back to the first
/// (shifted by one period) is part of the domain, so a uniform periodic grid
/// of `n` points has spacing `period / n` and every point carries weight
/// `period / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusGrid<T> {
    points: Vec<T>,
    weights: Vec<T>,
    periodic: bool,
    period: T,
}

impl<T: Real> StimulusGrid<T> {
    pub fn new(points: Vec<T>, periodic: bool, period: T) -> Result<Self> {
        let n = points.len();
        if n < MIN_GRID_POINTS {
            return Err(Error::Grid(format!(
                "{n} points, at least {MIN_GRID_POINTS} required"
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Grid("non-finite point".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("points must be strictly increasing".into()));
        }
        let span = points[n - 1] - points[0];
        if periodic && !(period > span) {
            return Err(Error::Grid(format!(
                "period {period} does not exceed the point span {span}"
            )));
        }
        let half = T::lit(0.5);
        let mut weights = vec![T::zero(); n];
        for i in 0..n - 1 {
            let h = points[i + 1] - points[i];
            weights[i] = weights[i] + half * h;
            weights[i + 1] = weights[i + 1] + half * h;
        }
        if periodic {
            let wrap = period - span;
            weights[0] = weights[0] + half * wrap;
            weights[n - 1] = weights[n - 1] + half * wrap;
        }
        Ok(Self {
            points,
            weights,
            periodic,
            period: if periodic { period } else { span },
        })
    }

    /// `n` evenly spaced points covering `[lo, lo + period)` with periodic wrap.
    pub fn periodic(lo: T, period: T, n: usize) -> Result<Self> {
        let h = period / T::from_count(n);
        let points = (0..n).map(|i| lo + h * T::from_count(i)).collect();
        Self::new(points, true, period)
    }

    /// The orientation domain `[-90, 90)` degrees.
    pub fn orientation(n: usize) -> Result<Self> {
        Self::periodic(T::lit(-90.0), T::lit(180.0), n)
    }

    /// `n` evenly spaced points covering the closed interval `[lo, hi]`.
    pub fn closed(lo: T, hi: T, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Grid("closed grid needs at least two points".into()));
        }
        let h = (hi - lo) / T::from_count(n - 1);
        let points = (0..n).map(|i| lo + h * T::from_count(i)).collect();
        Self::new(points, false, hi - lo)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Domain length: the period for periodic grids, the point span otherwise.
    pub fn period(&self) -> T {
        self.period
    }

    pub fn lower(&self) -> T {
        self.points[0]
    }

    pub fn integrate(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.len());
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, &v)| w * v)
            .sum()
    }

    /// Integral of the pointwise product `a * b`.
    pub fn integrate_product(&self, a: &[T], b: &[T]) -> T {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&w, (&x, &y))| w * x * y)
            .sum()
    }

    /// Running trapezoidal integral, zero at the first point.
    ///
    /// The second element of the pair is the integral over the whole domain,
    /// which for periodic grids includes the wrap segment.
    pub fn cumulative(&self, values: &[T]) -> (Vec<T>, T) {
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(values.len());
        let mut acc = T::zero();
        out.push(acc);
        for i in 1..values.len() {
            acc = acc + half * (values[i] + values[i - 1]) * (self.points[i] - self.points[i - 1]);
            out.push(acc);
        }
        let total = if self.periodic {
            let n = values.len();
            let wrap = self.points[0] + self.period - self.points[n - 1];
            acc + half * (values[0] + values[n - 1]) * wrap
        } else {
            acc
        };
        (out, total)
    }

    /// Derivative by central differences (periodic wrap or one-sided at the ends).
    pub fn derivative(&self, values: &[T]) -> Vec<T> {
        let n = values.len();
        let x = &self.points;
        (0..n)
            .map(|i| {
                let (xl, yl, xr, yr) = match (i, self.periodic) {
                    (0, true) => (x[n - 1] - self.period, values[n - 1], x[1], values[1]),
                    (0, false) => (x[0], values[0], x[1], values[1]),
                    (i, true) if i == n - 1 => (x[i - 1], values[i - 1], x[0] + self.period, values[0]),
                    (i, false) if i == n - 1 => (x[i - 1], values[i - 1], x[i], values[i]),
                    (i, _) => (x[i - 1], values[i - 1], x[i + 1], values[i + 1]),
                };
                (yr - yl) / (xr - xl)
            })
            .collect()
    }

    /// Signed displacement `a - b`, wrapped into `[-period/2, period/2)` on periodic grids.
    pub fn displacement(&self, a: T, b: T) -> T {
        let d = a - b;
        if !self.periodic {
            return d;
        }
        let p = self.period;
        let half = p * T::lit(0.5);
        d - p * ((d + half) / p).floor()
    }

    /// Linear interpolation of grid values at `s` (wrapping on periodic grids,
    /// clamping to the end values otherwise).
    pub fn interpolate(&self, values: &[T], s: T) -> T {
        let n = self.len();
        let x = &self.points;
        let s = if self.periodic {
            let shifted = (s - x[0]) % self.period;
            x[0] + if shifted < T::zero() { shifted + self.period } else { shifted }
        } else {
            s
        };
        if s <= x[0] {
            return values[0];
        }
        if s >= x[n - 1] {
            if !self.periodic {
                return values[n - 1];
            }
            let t = (s - x[n - 1]) / (x[0] + self.period - x[n - 1]);
            return values[n - 1] + t * (values[0] - values[n - 1]);
        }
        let i = x.partition_point(|&p| p <= s) - 1;
        let t = (s - x[i]) / (x[i + 1] - x[i]);
        values[i] + t * (values[i + 1] - values[i])
    }

    /// Index range covering the central `keep` fraction of the points.
    pub fn central_indices(&self, keep: T) -> std::ops::Range<usize> {
        let n = self.len();
        let drop = ((T::one() - keep) * T::lit(0.5) * T::from_count(n))
            .round()
            .to_usize()
            .unwrap_or(0);
        drop..n - drop
    }
}

fn quadrature_tolerance<T: Real>() -> T {
    T::epsilon().sqrt().max(T::lit(1e-6))
}

/// Stimulus probability density sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior<T> {
    values: Vec<T>,
}

impl<T: Real> Prior<T> {
    /// Accepts values that are nonnegative and already integrate to one.
    pub fn new(grid: &StimulusGrid<T>, values: Vec<T>) -> Result<Self> {
        check_len(grid, &values).map_err(Error::Prior)?;
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Prior("density must be finite and nonnegative".into()));
        }
        let mass = grid.integrate(&values);
        if !(mass > T::zero()) {
            return Err(Error::Prior("nonpositive total mass".into()));
        }
        if (mass - T::one()).abs() > quadrature_tolerance::<T>() {
            return Err(Error::Prior(format!("integrates to {mass}, expected 1")));
        }
        Ok(Self { values })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: &StimulusGrid<T>, mut values: Vec<T>) -> Result<Self> {
        check_len(grid, &values).map_err(Error::Prior)?;
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Prior("density must be finite and nonnegative".into()));
        }
        let mass = grid.integrate(&values);
        if !(mass > T::zero()) {
            return Err(Error::Prior("nonpositive total mass".into()));
        }
        values.iter_mut().for_each(|v| *v = *v / mass);
        Self::new(grid, values)
    }

    pub fn uniform(grid: &StimulusGrid<T>) -> Self {
        Self::normalized(grid, vec![T::one(); grid.len()]).expect("uniform prior is valid")
    }

    /// `p(s) ∝ 1 + amplitude * cos(2π s / cycle)`.
    pub fn cosine(grid: &StimulusGrid<T>, amplitude: T, cycle: T) -> Result<Self> {
        if amplitude.abs() >= T::one() {
            return Err(Error::Prior(format!(
                "amplitude {amplitude} would make the density nonpositive"
            )));
        }
        let two_pi = T::lit(std::f64::consts::TAU);
        let values = grid
            .points()
            .iter()
            .map(|&s| T::one() + amplitude * (two_pi * s / cycle).cos())
            .collect();
        Self::normalized(grid, values)
    }

    /// Orientation prior peaked at the cardinal angles 0° and ±90°.
    pub fn cardinal(grid: &StimulusGrid<T>, amplitude: T) -> Result<Self> {
        Self::cosine(grid, amplitude, T::lit(90.0))
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Per-stimulus homeostatic firing-rate target `R(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTarget<T> {
    values: Vec<T>,
}

impl<T: Real> RateTarget<T> {
    pub fn new(grid: &StimulusGrid<T>, values: Vec<T>) -> Result<Self> {
        check_len(grid, &values).map_err(Error::RateTarget)?;
        if values.iter().any(|v| !v.is_finite() || *v <= T::zero()) {
            return Err(Error::RateTarget("rates must be finite and strictly positive".into()));
        }
        Ok(Self { values })
    }

    pub fn constant(grid: &StimulusGrid<T>, rate: T) -> Result<Self> {
        Self::new(grid, vec![rate; grid.len()])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

fn check_len<T: Real>(grid: &StimulusGrid<T>, values: &[T]) -> std::result::Result<(), String> {
    if values.len() != grid.len() {
        return Err(format!(
            "{} values for a grid of {} points",
            values.len(),
            grid.len()
        ));
    }
    Ok(())
}
