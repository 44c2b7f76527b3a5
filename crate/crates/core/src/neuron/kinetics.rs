//! Gating kinetics and precomputed per-step update tables.
//!
//! Na⁺ (m³h) and delayed-rectifier K⁺ (n⁴) use Traub-type rate functions
//! shifted by a threshold offset, with a temperature factor on the slow
//! recovery gates (h, n); the subthreshold K⁺ channel is a slow
//! M-type two-state gate.

use serde::{Deserialize, Serialize};

/// Rate-function parameters. Rates are in 1/ms, voltages in mV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Kinetics {
    /// Offset applied to the Na⁺ and K⁺-DR rate functions.
    pub v_shift: f64,
    /// Half-activation of the subthreshold K⁺ gate.
    pub ksub_half: f64,
    /// Slope factor of the subthreshold K⁺ gate.
    pub ksub_slope: f64,
    /// Peak time constant of the subthreshold K⁺ gate, ms.
    pub ksub_tau_max: f64,
    /// Temperature factor multiplying the Na⁺ inactivation and K⁺-DR rates.
    pub phi: f64,
}

impl Default for Kinetics {
    fn default() -> Self {
        Self { v_shift: -58.0, ksub_half: -35.0, ksub_slope: 10.0, ksub_tau_max: 400.0, phi: 2.0 }
    }
}

/// `x / (exp(x / k) - 1)` with its limit `k` at zero.
fn exprel(x: f64, k: f64) -> f64 {
    let u = x / k;
    if u.abs() < 1e-6 {
        k * (1.0 - 0.5 * u)
    } else {
        x / u.exp_m1()
    }
}

impl Kinetics {
    pub fn alpha_m(&self, v: f64) -> f64 {
        0.32 * exprel(-(v - self.v_shift - 13.0), 4.0)
    }

    pub fn beta_m(&self, v: f64) -> f64 {
        0.28 * exprel(v - self.v_shift - 40.0, 5.0)
    }

    pub fn alpha_h(&self, v: f64) -> f64 {
        self.phi * 0.128 * (-(v - self.v_shift - 17.0) / 18.0).exp()
    }

    pub fn beta_h(&self, v: f64) -> f64 {
        self.phi * 4.0 / (1.0 + (-(v - self.v_shift - 40.0) / 5.0).exp())
    }

    pub fn alpha_n(&self, v: f64) -> f64 {
        self.phi * 0.032 * exprel(-(v - self.v_shift - 15.0), 5.0)
    }

    pub fn beta_n(&self, v: f64) -> f64 {
        self.phi * 0.5 * (-(v - self.v_shift - 10.0) / 40.0).exp()
    }

    pub fn ksub_inf(&self, v: f64) -> f64 {
        1.0 / (1.0 + (-(v - self.ksub_half) / self.ksub_slope).exp())
    }

    pub fn ksub_tau(&self, v: f64) -> f64 {
        let x = (v - self.ksub_half) / 20.0;
        self.ksub_tau_max / (3.3 * x.exp() + (-x).exp())
    }

    /// Steady-state `(m, h, n, p)` at `v`.
    pub fn steady_state(&self, v: f64) -> [f64; 4] {
        let m = self.alpha_m(v) / (self.alpha_m(v) + self.beta_m(v));
        let h = self.alpha_h(v) / (self.alpha_h(v) + self.beta_h(v));
        let n = self.alpha_n(v) / (self.alpha_n(v) + self.beta_n(v));
        [m, h, n, self.ksub_inf(v)]
    }
}

const TABLE_LO: f64 = -150.0;
const TABLE_HI: f64 = 100.0;
const TABLE_STEP: f64 = 0.01;

/// Exponential-Euler coefficients tabulated on a voltage lattice.
///
/// For each gate the table stores the steady state and the one-step decay
/// factor `exp(-dt/τ)`; the subthreshold gate also stores per-step opening
/// and closing probabilities for single channels.
#[derive(Debug, Clone)]
pub struct GateTable {
    rows: Vec<[f64; 10]>,
}

/// Interpolated table row.
#[derive(Debug, Clone, Copy)]
pub struct GateStep {
    pub m_inf: f64,
    pub m_decay: f64,
    pub h_inf: f64,
    pub h_decay: f64,
    pub n_inf: f64,
    pub n_decay: f64,
    pub p_inf: f64,
    pub p_decay: f64,
    pub p_open: f64,
    pub p_close: f64,
}

impl GateTable {
    pub fn new(kin: &Kinetics, dt: f64) -> Self {
        let count = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
        let rows = (0..count)
            .map(|i| {
                let v = TABLE_LO + i as f64 * TABLE_STEP;
                let (am, bm) = (kin.alpha_m(v), kin.beta_m(v));
                let (ah, bh) = (kin.alpha_h(v), kin.beta_h(v));
                let (an, bn) = (kin.alpha_n(v), kin.beta_n(v));
                let p_inf = kin.ksub_inf(v);
                let tau = kin.ksub_tau(v);
                let open_rate = p_inf / tau;
                let close_rate = (1.0 - p_inf) / tau;
                [
                    am / (am + bm),
                    (-dt * (am + bm)).exp(),
                    ah / (ah + bh),
                    (-dt * (ah + bh)).exp(),
                    an / (an + bn),
                    (-dt * (an + bn)).exp(),
                    p_inf,
                    (-dt / tau).exp(),
                    -(-dt * open_rate).exp_m1(),
                    -(-dt * close_rate).exp_m1(),
                ]
            })
            .collect();
        Self { rows }
    }

    pub fn at(&self, v: f64) -> GateStep {
        let x = ((v.clamp(TABLE_LO, TABLE_HI) - TABLE_LO) / TABLE_STEP).max(0.0);
        let i = (x as usize).min(self.rows.len() - 2);
        let t = x - i as f64;
        let (a, b) = (&self.rows[i], &self.rows[i + 1]);
        let r: [f64; 10] = std::array::from_fn(|k| a[k] + t * (b[k] - a[k]));
        GateStep {
            m_inf: r[0],
            m_decay: r[1],
            h_inf: r[2],
            h_decay: r[3],
            n_inf: r[4],
            n_decay: r[5],
            p_inf: r[6],
            p_decay: r[7],
            p_open: r[8],
            p_close: r[9],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removable_singularities_are_continuous() {
        let k = Kinetics::default();
        let v0 = k.v_shift + 13.0;
        assert!((k.alpha_m(v0) - k.alpha_m(v0 + 1e-4)).abs() < 1e-4);
        let v1 = k.v_shift + 15.0;
        assert!((k.alpha_n(v1) - k.alpha_n(v1 - 1e-4)).abs() < 1e-5);
    }

    #[test]
    fn gates_are_closed_at_rest() {
        let [m, h, n, p] = Kinetics::default().steady_state(-75.0);
        assert!(m < 0.01 && n < 0.05 && p < 0.05);
        assert!(h > 0.9);
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let k = Kinetics::default();
        let t = GateTable::new(&k, 0.1);
        let [m, h, n, p] = k.steady_state(-61.234);
        let s = t.at(-61.234);
        assert!((s.m_inf - m).abs() < 1e-6);
        assert!((s.h_inf - h).abs() < 1e-6);
        assert!((s.n_inf - n).abs() < 1e-6);
        assert!((s.p_inf - p).abs() < 1e-6);
    }
}
