//! Minimum-dispersion points along the energy contours of a linear energy
//! surface.

use serde::{Deserialize, Serialize};

use super::surface::SurfaceFit;
use crate::error::{Error, Result};

/// Axis-aligned `(v_rest, g_leak)` rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub v: (f64, f64),
    pub g: (f64, f64),
}

impl Domain {
    fn to_raw(&self, u: f64, w: f64) -> (f64, f64) {
        (
            self.v.0 + 0.5 * (u + 1.0) * (self.v.1 - self.v.0),
            self.g.0 + 0.5 * (w + 1.0) * (self.g.1 - self.g.0),
        )
    }

    fn corners(&self) -> [(f64, f64); 4] {
        [(self.v.0, self.g.0), (self.v.1, self.g.0), (self.v.0, self.g.1), (self.v.1, self.g.1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub epsilon: f64,
    pub v_rest: f64,
    pub g_leak: f64,
    pub eta: f64,
    /// Tuning width from the width surface, NaN without one.
    pub width: f64,
    pub on_boundary: bool,
    /// Derivative of the fitted dispersion along the contour, in coordinates
    /// rescaled to `[-1, 1]`.
    pub tangent_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPath {
    pub kappa: f64,
    pub points: Vec<PathPoint>,
}

/// A plane `ε(v, g) = c + ev v + eg g`.
#[derive(Debug, Clone, Copy)]
struct Plane {
    c: f64,
    ev: f64,
    eg: f64,
}

impl Plane {
    fn from_surface(s: &SurfaceFit) -> Result<Self> {
        if s.degree != 1 {
            return Err(Error::InvalidArgument(format!("energy surface must be degree 1, got {}", s.degree)));
        }
        let raw = s.raw_coefficients();
        Ok(Self { c: raw[0], ev: raw[1], eg: raw[2] })
    }
}

/// Segment of the contour `energy = epsilon` inside the domain, in
/// rescaled coordinates, or `None` when it misses the rectangle.
fn contour_segment(plane: Plane, domain: &Domain, epsilon: f64) -> Option<((f64, f64), (f64, f64))> {
    // in rescaled (u, w): ε = k0 + ku u + kw w
    let hv = 0.5 * (domain.v.1 - domain.v.0);
    let hg = 0.5 * (domain.g.1 - domain.g.0);
    let (cv, cg) = (domain.v.0 + hv, domain.g.0 + hg);
    let k0 = plane.c + plane.ev * cv + plane.eg * cg - epsilon;
    let (ku, kw) = (plane.ev * hv, plane.eg * hg);
    let mut hits: Vec<(f64, f64)> = Vec::with_capacity(4);
    let tol = 1e-12;
    for side in [-1.0, 1.0] {
        if kw != 0.0 {
            let w = -(k0 + ku * side) / kw;
            if w.abs() <= 1.0 + tol {
                hits.push((side, w.clamp(-1.0, 1.0)));
            }
        }
        if ku != 0.0 {
            let u = -(k0 + kw * side) / ku;
            if u.abs() <= 1.0 + tol {
                hits.push((u.clamp(-1.0, 1.0), side));
            }
        }
    }
    let mut best: Option<((f64, f64), (f64, f64), f64)> = None;
    for (i, a) in hits.iter().enumerate() {
        for b in &hits[i..] {
            let d = (a.0 - b.0).hypot(a.1 - b.1);
            if best.is_none_or(|(_, _, bd)| d > bd) {
                best = Some((*a, *b, d));
            }
        }
    }
    best.map(|(a, b, _)| if (a.0, a.1) <= (b.0, b.1) { (a, b) } else { (b, a) })
}

/// Lowest fitted dispersion on one energy contour.
///
/// The contour segment is parameterized by arc length, sampled at 200
/// points, and the best sample's bracket is refined by golden section.
pub fn minimize_on_contour(eta: &SurfaceFit, energy: &SurfaceFit, domain: &Domain, epsilon: f64) -> Result<PathPoint> {
    let plane = Plane::from_surface(energy)?;
    let (a, b) = contour_segment(plane, domain, epsilon).ok_or(Error::EmptyContour(epsilon))?;
    let at = |t: f64| domain.to_raw(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1));
    let f = |t: f64| {
        let (v, g) = at(t);
        eta.eval(v, g)
    };
    const SAMPLES: usize = 200;
    let ts: Vec<f64> = (0..SAMPLES).map(|i| i as f64 / (SAMPLES - 1) as f64).collect();
    let best = (0..SAMPLES).min_by(|&i, &j| f(ts[i]).total_cmp(&f(ts[j]))).unwrap_or(0);
    let (mut lo, mut hi) = (ts[best.saturating_sub(1)], ts[(best + 1).min(SAMPLES - 1)]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - r * (hi - lo), lo + r * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > 1e-12 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    // the interior refinement never reaches the endpoints; compare them too
    let mut t = 0.5 * (lo + hi);
    for end in [0.0, 1.0] {
        if f(end) < f(t) {
            t = end;
        }
    }
    let (v, g) = at(t);
    let length = (b.0 - a.0).hypot(b.1 - a.1);
    let on_boundary = length < 1e-12 || t <= 1e-9 || t >= 1.0 - 1e-9;
    let tangent_slope = if length > 0.0 {
        let (gv, gg) = eta.gradient(v, g);
        let hv = 0.5 * (domain.v.1 - domain.v.0);
        let hg = 0.5 * (domain.g.1 - domain.g.0);
        (gv * hv * (b.0 - a.0) + gg * hg * (b.1 - a.1)) / length
    } else {
        0.0
    };
    Ok(PathPoint { epsilon, v_rest: v, g_leak: g, eta: eta.eval(v, g), width: f64::NAN, on_boundary, tangent_slope })
}

/// Range of the energy surface over the domain.
pub fn energy_range(energy: &SurfaceFit, domain: &Domain) -> Result<(f64, f64)> {
    Plane::from_surface(energy)?;
    Ok(domain
        .corners()
        .iter()
        .map(|&(v, g)| energy.eval(v, g))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| (lo.min(e), hi.max(e))))
}

/// `n` evenly spaced energy levels strictly inside the attainable range,
/// leaving `margin` of the range free at both ends.
pub fn epsilon_levels(energy: &SurfaceFit, domain: &Domain, n: usize, margin: f64) -> Result<Vec<f64>> {
    let (lo, hi) = energy_range(energy, domain)?;
    let (lo, hi) = (lo + margin * (hi - lo), hi - margin * (hi - lo));
    if n < 2 || !(hi > lo) {
        return Err(Error::InvalidArgument("need n ≥ 2 levels and margin < 0.5".into()));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

/// Minimum-dispersion adaptation path: one point per energy level, in
/// increasing energy.
pub fn optimal_path(
    eta: &SurfaceFit,
    energy: &SurfaceFit,
    width: Option<&SurfaceFit>,
    domain: &Domain,
    kappa: f64,
    levels: &[f64],
) -> Result<OptimalPath> {
    let mut levels = levels.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let points = levels
        .iter()
        .map(|&e| {
            let mut p = minimize_on_contour(eta, energy, domain, e)?;
            if let Some(w) = width {
                p.width = w.eval(p.v_rest, p.g_leak);
            }
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OptimalPath { kappa, points })
}
