use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{calibrate_gsyn, estimate_stats, gsyn_bounds, spike_thresholds};
use super::{CellState, NeuronConfig, Simulator, TrialMode};
use crate::error::{Error, Result};

/// Evenly spaced values `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidArgument(format!("axis needs n ≥ 2 and hi > lo, got [{lo}, {hi}] × {n}")));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (self.n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRanges {
    pub v_rest: GridAxis,
    pub g_leak: GridAxis,
    /// Synaptic conductances per (v_rest, g_leak) cell.
    pub n_gsyn: usize,
    /// Mean counts that bound the synaptic conductance range.
    pub mu_lo: f64,
    pub mu_hi: f64,
    /// Mean count at which each cell is calibrated.
    pub target_mu: f64,
    pub target_tol: f64,
    /// Response map sampled on `[span_lo, span_hi] × ĝ_syn`.
    pub response_lo: f64,
    pub response_hi: f64,
    pub response_points: usize,
}

impl Default for SweepRanges {
    fn default() -> Self {
        Self {
            v_rest: GridAxis { lo: -75.0, hi: -65.0, n: 9 },
            g_leak: GridAxis { lo: 0.07, hi: 0.12, n: 9 },
            n_gsyn: 15,
            mu_lo: 0.2,
            mu_hi: 0.8,
            target_mu: 0.1,
            target_tol: 0.01,
            response_lo: 0.84,
            response_hi: 1.04,
            response_points: 11,
        }
    }
}

impl SweepRanges {
    pub fn validate(&self) -> Result<()> {
        GridAxis::new(self.v_rest.lo, self.v_rest.hi, self.v_rest.n)?;
        GridAxis::new(self.g_leak.lo, self.g_leak.hi, self.g_leak.n)?;
        if self.v_rest.n < 5 || self.g_leak.n < 5 || self.n_gsyn < 5 {
            return Err(Error::InvalidArgument("sweep grids need at least 5 points per axis".into()));
        }
        for (v, g) in [(self.v_rest.lo, self.g_leak.lo), (self.v_rest.hi, self.g_leak.hi)] {
            CellState::new(v, g, 0.0)?;
        }
        if !(0.0 < self.mu_lo && self.mu_lo < self.mu_hi) {
            return Err(Error::InvalidArgument("need 0 < mu_lo < mu_hi".into()));
        }
        if !(self.response_lo > 0.0 && self.response_hi > self.response_lo && self.response_points >= 3) {
            return Err(Error::InvalidArgument("response map needs 0 < lo < hi and ≥ 3 points".into()));
        }
        Ok(())
    }
}

/// One simulated (v_rest, g_leak, g_syn) state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v_rest: f64,
    pub g_leak: f64,
    pub g_syn: f64,
    #[serde(rename = "mu_F")]
    pub mu_f: f64,
    #[serde(rename = "sigma2_F")]
    pub sigma2_f: f64,
    #[serde(rename = "eps_sig_atp")]
    pub eps_sig: f64,
    #[serde(rename = "eps_bg_atp")]
    pub eps_bg: f64,
    pub n_trials: usize,
    #[serde(with = "bool_as_int")]
    pub valid: bool,
}

/// Per-(v_rest, g_leak) results: conductance bounds, calibration and the
/// response map around the calibrated conductance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub v_rest: f64,
    pub g_leak: f64,
    pub g_syn_lo: f64,
    pub g_syn_hi: f64,
    /// Conductance giving the target mean count.
    pub g_syn_hat: f64,
    #[serde(rename = "mu_F")]
    pub mu_f: f64,
    #[serde(rename = "sigma2_F")]
    pub sigma2_f: f64,
    #[serde(rename = "eps_sig_atp")]
    pub eps_sig: f64,
    #[serde(rename = "eps_bg_atp")]
    pub eps_bg: f64,
    #[serde(with = "bool_as_int")]
    pub valid: bool,
    pub note: String,
    #[serde(skip)]
    pub thresholds: Vec<f64>,
    #[serde(skip)]
    pub response: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub ranges: SweepRanges,
    pub config: NeuronConfig,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellSummary>,
}

/// Simulates the full (v_rest, g_leak, g_syn) grid.
///
/// For every (v_rest, g_leak) cell: the g_syn range where the mean count
/// runs from `mu_lo` to `mu_hi` is found by bisection; `n_gsyn` states in
/// that range are simulated; the cell is calibrated to `target_mu`, and energies
/// and a response map are measured at the calibrated conductance. Every
/// state of every cell replays the same trial seeds (common random numbers),
/// so differences between cells are not swamped by sampling noise. Failures
/// mark the cell invalid.
pub fn sweep_grid(ranges: &SweepRanges, cfg: &NeuronConfig, seed: u64) -> Result<SweepResult> {
    ranges.validate()?;
    let sim = Simulator::new(*cfg)?;
    let vs = ranges.v_rest.values();
    let gs = ranges.g_leak.values();
    let pairs: Vec<(f64, f64)> = vs.iter().flat_map(|&v| gs.iter().map(move |&g| (v, g))).collect();
    let per_cell: Vec<(Vec<SweepRow>, CellSummary)> = pairs
        .par_iter()
        .map(|&(v, g)| sweep_cell(&sim, ranges, v, g, seed))
        .collect();
    let mut rows = Vec::with_capacity(per_cell.len() * ranges.n_gsyn);
    let mut cells = Vec::with_capacity(per_cell.len());
    for (r, c) in per_cell {
        rows.extend(r);
        cells.push(c);
    }
    Ok(SweepResult { ranges: *ranges, config: *cfg, seed, rows, cells })
}

fn sweep_cell(sim: &Simulator, ranges: &SweepRanges, v_rest: f64, g_leak: f64, seed: u64) -> (Vec<SweepRow>, CellSummary) {
    let n_trials = sim.config().sim.n_trials;
    let mut summary = CellSummary {
        v_rest,
        g_leak,
        g_syn_lo: f64::NAN,
        g_syn_hi: f64::NAN,
        g_syn_hat: f64::NAN,
        mu_f: f64::NAN,
        sigma2_f: f64::NAN,
        eps_sig: f64::NAN,
        eps_bg: f64::NAN,
        valid: false,
        note: String::new(),
        thresholds: Vec::new(),
        response: Vec::new(),
    };
    let blank = |g_syn: f64| SweepRow {
        v_rest,
        g_leak,
        g_syn,
        mu_f: f64::NAN,
        sigma2_f: f64::NAN,
        eps_sig: f64::NAN,
        eps_bg: f64::NAN,
        n_trials: 0,
        valid: false,
    };
    // Bounds are calibrated on the noisy cell itself; the noise-free
    // thresholds with amplitude noise alone are only a fallback, as they
    // ignore channel noise and give too narrow a range.
    let measured = calibrate_gsyn(sim, v_rest, g_leak, ranges.mu_lo, ranges.target_tol, n_trials, seed)
        .and_then(|lo| Ok((lo, calibrate_gsyn(sim, v_rest, g_leak, ranges.mu_hi, ranges.target_tol, n_trials, seed)?)));
    let bounds = measured.or_else(|_| {
        spike_thresholds(sim, v_rest, g_leak, 4).and_then(|t| {
            let b = gsyn_bounds(&t, sim.config().synapse.amplitude_cv, ranges.mu_lo, ranges.mu_hi);
            summary.thresholds = t;
            summary.note = "deterministic bounds".into();
            b
        })
    });
    let (lo, hi) = match bounds {
        Ok(b) => b,
        Err(e) => {
            summary.note = e.to_string();
            return ((0..ranges.n_gsyn).map(|_| blank(f64::NAN)).collect(), summary);
        }
    };
    summary.g_syn_lo = lo;
    summary.g_syn_hi = hi;
    let rows: Vec<SweepRow> = (0..ranges.n_gsyn)
        .map(|k| {
            let g = lo + (hi - lo) * k as f64 / (ranges.n_gsyn - 1) as f64;
            let cell = CellState { v_rest, g_leak, g_syn: g };
            match estimate_stats(sim, &cell, n_trials, seed, TrialMode::Full) {
                Ok(s) => SweepRow {
                    v_rest,
                    g_leak,
                    g_syn: g,
                    mu_f: s.mu_f,
                    sigma2_f: s.sigma2_f,
                    eps_sig: s.eps_sig,
                    eps_bg: s.eps_bg,
                    n_trials,
                    valid: true,
                },
                Err(_) => blank(g),
            }
        })
        .collect();

    let calibrated = calibrate_gsyn(sim, v_rest, g_leak, ranges.target_mu, ranges.target_tol, n_trials, seed).and_then(|g_hat| {
        let cell = CellState { v_rest, g_leak, g_syn: g_hat };
        let stats = estimate_stats(sim, &cell, n_trials, seed, TrialMode::Full)?;
        let response = (0..ranges.response_points)
            .map(|k| {
                let f = ranges.response_lo + (ranges.response_hi - ranges.response_lo) * k as f64 / (ranges.response_points - 1) as f64;
                let g = (g_hat * f).min(CellState::G_SYN_RANGE.1);
                estimate_stats(sim, &cell.with_g_syn(g), n_trials, seed, TrialMode::CountOnly).map(|s| (g, s.mu_f))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((g_hat, stats, response))
    });
    match calibrated {
        Ok((g_hat, stats, response)) => {
            summary.g_syn_hat = g_hat;
            summary.mu_f = stats.mu_f;
            summary.sigma2_f = stats.sigma2_f;
            summary.eps_sig = stats.eps_sig;
            summary.eps_bg = stats.eps_bg;
            summary.response = response;
            summary.valid = true;
        }
        Err(e) => summary.note = e.to_string(),
    }
    (rows, summary)
}

/// One point of a cell's response map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub v_rest: f64,
    pub g_leak: f64,
    pub g_syn: f64,
    #[serde(rename = "mu_F")]
    pub mu_f: f64,
}

impl SweepResult {
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.rows)
    }

    pub fn write_cells<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.cells)
    }

    pub fn write_response<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.response_points())
    }

    pub fn response_points(&self) -> Vec<ResponsePoint> {
        self.cells
            .iter()
            .flat_map(|c| {
                c.response
                    .iter()
                    .map(move |&(g_syn, mu_f)| ResponsePoint { v_rest: c.v_rest, g_leak: c.g_leak, g_syn, mu_f })
            })
            .collect()
    }

    /// Rows of the valid states at one (v_rest, g_leak) cell.
    pub fn cell_rows(&self, v_rest: f64, g_leak: f64) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.valid && r.v_rest == v_rest && r.g_leak == g_leak)
            .collect()
    }
}

pub fn write_csv<W: Write, T: Serialize>(out: W, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(())
}

pub fn read_csv<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))
}

mod bool_as_int {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        Ok(u8::deserialize(d)? != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_hit_the_ends() {
        let a = GridAxis::new(-75.0, -65.0, 9).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], -75.0);
        assert_eq!(v[8], -65.0);
        assert!(GridAxis::new(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn small_grids_are_rejected() {
        let mut r = SweepRanges::default();
        r.n_gsyn = 3;
        assert!(r.validate().is_err());
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let rows = vec![
            SweepRow { v_rest: -75.0, g_leak: 0.07, g_syn: 61.25, mu_f: 0.3, sigma2_f: 0.21, eps_sig: 1e5, eps_bg: 8e6, n_trials: 1000, valid: true },
            SweepRow { v_rest: -65.0, g_leak: 0.12, g_syn: f64::NAN, mu_f: f64::NAN, sigma2_f: f64::NAN, eps_sig: f64::NAN, eps_bg: f64::NAN, n_trials: 0, valid: false },
        ];
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("v_rest,g_leak,g_syn,mu_F,sigma2_F,eps_sig_atp,eps_bg_atp,n_trials,valid\n"));
        let back: Vec<SweepRow> = read_csv(&buf[..]).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(!back[1].valid && back[1].g_syn.is_nan());
    }
}
