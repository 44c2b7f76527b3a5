//! Single-compartment conductance-based neuron driven by one synaptic event,
//! with spike counting and ATP accounting.

mod kinetics;
mod stats;
mod sweep;

pub use kinetics::{GateStep, GateTable, Kinetics};
pub use stats::{
    calibrate_gsyn, deterministic_mean_count, estimate_stats, gsyn_bounds, spike_thresholds, spike_train_moments,
    trial_seed, SpikeTrainMoments, TrialStats,
};
pub use sweep::{read_csv, sweep_grid, write_csv, CellSummary, GridAxis, ResponsePoint, SweepRanges, SweepResult, SweepRow};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Na⁺ ions extruded per ATP hydrolysed by the Na⁺/K⁺ pump.
pub const NA_PER_ATP: f64 = 3.0;
/// Membrane potential beyond which a trial is considered numerically divergent.
pub const DIVERGENCE_MV: f64 = 200.0;

/// The three cell parameters varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    /// Resting potential, mV.
    pub v_rest: f64,
    /// Leak conductance, mS/cm².
    pub g_leak: f64,
    /// Peak synaptic conductance, µS/cm².
    pub g_syn: f64,
}

impl CellState {
    pub const V_REST_RANGE: (f64, f64) = (-75.0, -65.0);
    pub const G_LEAK_RANGE: (f64, f64) = (0.07, 0.12);
    pub const G_SYN_RANGE: (f64, f64) = (0.0, 250.0);

    pub fn new(v_rest: f64, g_leak: f64, g_syn: f64) -> Result<Self> {
        let s = Self { v_rest, g_leak, g_syn };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo - 1e-9 && x <= hi + 1e-9;
        if !inside(self.v_rest, Self::V_REST_RANGE) {
            return Err(Error::InvalidArgument(format!("v_rest {} mV outside [-75, -65]", self.v_rest)));
        }
        if !inside(self.g_leak, Self::G_LEAK_RANGE) {
            return Err(Error::InvalidArgument(format!("g_leak {} mS/cm² outside [0.07, 0.12]", self.g_leak)));
        }
        if !inside(self.g_syn, Self::G_SYN_RANGE) {
            return Err(Error::InvalidArgument(format!("g_syn {} µS/cm² outside [0, 250]", self.g_syn)));
        }
        Ok(())
    }

    pub fn with_g_syn(self, g_syn: f64) -> Self {
        Self { g_syn, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MembraneConfig {
    /// µF/cm²
    pub capacitance: f64,
    pub e_na: f64,
    pub e_k: f64,
    pub spike_threshold: f64,
    /// mS/cm²
    pub gbar_na: f64,
    pub gbar_kdr: f64,
    pub gbar_ksub: f64,
    /// Single subthreshold K⁺ channel conductance, pS.
    pub channel_conductance: f64,
    /// µm
    pub diameter: f64,
    pub length: f64,
    pub kinetics: Kinetics,
}

impl Default for MembraneConfig {
    fn default() -> Self {
        Self {
            capacitance: 1.0,
            e_na: 55.0,
            e_k: -90.0,
            spike_threshold: -50.0,
            gbar_na: 35.0,
            gbar_kdr: 4.0,
            gbar_ksub: 0.18,
            channel_conductance: 20.0,
            diameter: 8.0,
            length: 8.0,
            kinetics: Kinetics::default(),
        }
    }
}

impl MembraneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.capacitance,
            self.gbar_na,
            self.gbar_kdr,
            self.gbar_ksub,
            self.channel_conductance,
            self.diameter,
            self.length,
        ];
        if positive.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidArgument("membrane capacitance, conductances and geometry must be positive".into()));
        }
        if !(self.e_k < self.spike_threshold && self.spike_threshold < self.e_na) {
            return Err(Error::InvalidArgument("need E_K < spike threshold < E_Na".into()));
        }
        Ok(())
    }

    /// Lateral membrane area of the cylindrical soma, cm².
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.length * 1e-8
    }

    /// Number of subthreshold K⁺ channels, `gbar·area/γ` rounded.
    pub fn n_channels(&self) -> u32 {
        let total_siemens = self.gbar_ksub * 1e-3 * self.area();
        (total_siemens / (self.channel_conductance * 1e-12)).round().max(1.0) as u32
    }

    /// Conductance density of one open channel, mS/cm².
    pub fn unitary_density(&self) -> f64 {
        self.channel_conductance * 1e-12 / self.area() * 1e3
    }

    /// ATP needed to pump out the Na⁺ carried by `charge` nC/cm² of current.
    pub fn charge_to_atp(&self, charge: f64) -> f64 {
        charge.abs() * 1e-9 * self.area() / (NA_PER_ATP * ELEMENTARY_CHARGE)
    }

    /// Na⁺ share of the leak conductance, from the reversal-potential split
    /// with the leak reversal taken at `v_rest`.
    pub fn leak_na_conductance(&self, g_leak: f64, v_rest: f64) -> f64 {
        let r = (self.e_na - v_rest) / (v_rest - self.e_k);
        g_leak / (1.0 + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynapseConfig {
    pub tau_rise: f64,
    pub tau_decay: f64,
    pub e_syn: f64,
    /// Standard deviation of the event amplitude relative to its mean.
    pub amplitude_cv: f64,
}

impl Default for SynapseConfig {
    fn default() -> Self {
        Self { tau_rise: 1.0, tau_decay: 10.0, e_syn: 0.0, amplitude_cv: 0.1 }
    }
}

impl SynapseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_decay > self.tau_rise && self.tau_rise > 0.0) {
            return Err(Error::InvalidArgument("need tau_decay > tau_rise > 0".into()));
        }
        if !(self.amplitude_cv >= 0.0) {
            return Err(Error::InvalidArgument("amplitude_cv must be nonnegative".into()));
        }
        Ok(())
    }

    /// Factor making the double exponential peak at 1.
    pub fn peak_normalization(&self) -> f64 {
        let (r, d) = (self.tau_rise, self.tau_decay);
        let t_peak = r * d / (d - r) * (d / r).ln();
        1.0 / ((-t_peak / d).exp() - (-t_peak / r).exp())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub v_init: f64,
    /// ms
    pub duration: f64,
    pub dt: f64,
    pub n_trials: usize,
    /// Time of the synaptic event, ms.
    pub input_time: f64,
    /// Minimum separation of counted spikes, ms.
    pub dead_time: f64,
    pub stochastic_channels: bool,
    pub synaptic_noise: bool,
    /// Once the cell is quiescent, finish the trial with deterministic
    /// channels at `tail_dt` instead of the full stochastic integration.
    pub fast_tail: bool,
    pub tail_dt: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            v_init: -75.0,
            duration: 2000.0,
            dt: 0.1,
            n_trials: 1000,
            input_time: 0.0,
            dead_time: 2.0,
            stochastic_channels: true,
            synaptic_noise: true,
            fast_tail: true,
            tail_dt: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.duration > 0.0 && self.tail_dt >= self.dt) {
            return Err(Error::InvalidArgument("need dt > 0, duration > 0 and tail_dt ≥ dt".into()));
        }
        let steps = self.duration / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::InvalidArgument("duration must be an integral number of steps".into()));
        }
        if !(self.input_time >= 0.0 && self.input_time < self.duration) {
            return Err(Error::InvalidArgument("input_time must fall inside the trial".into()));
        }
        Ok(())
    }

    /// Channels and synapse without noise.
    pub fn noise_free(mut self) -> Self {
        self.stochastic_channels = false;
        self.synaptic_noise = false;
        self
    }
}

/// Everything a trial needs besides the cell state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuronConfig {
    pub membrane: MembraneConfig,
    pub synapse: SynapseConfig,
    pub sim: SimConfig,
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        self.membrane.validate()?;
        self.synapse.validate()?;
        self.sim.validate()
    }
}

/// What one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub spikes: u32,
    /// Time integrals of each current, nC/cm².
    pub charge_syn: f64,
    pub charge_na: f64,
    pub charge_leak_na: f64,
    /// ATP for the synaptic current.
    pub eps_sig: f64,
    /// ATP for the Na⁺ channel plus Na⁺ leak currents.
    pub eps_bg: f64,
    /// Membrane potential at every step when requested.
    pub trace: Option<Vec<f64>>,
}

/// How much of a trial to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialMode {
    /// Whole trial with energy accounting.
    Full,
    /// Stop as soon as no further spike is possible; energies are partial.
    CountOnly,
}

/// Integrates trials for a fixed configuration; tables are built once.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: NeuronConfig,
    table: GateTable,
    tail_table: GateTable,
    n_channels: u32,
    unitary: f64,
    syn_norm: f64,
}

impl Simulator {
    pub fn new(cfg: NeuronConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            table: GateTable::new(&cfg.membrane.kinetics, cfg.sim.dt),
            tail_table: GateTable::new(&cfg.membrane.kinetics, cfg.sim.tail_dt),
            n_channels: cfg.membrane.n_channels(),
            unitary: cfg.membrane.unitary_density(),
            syn_norm: cfg.synapse.peak_normalization(),
            cfg,
        })
    }

    pub fn config(&self) -> &NeuronConfig {
        &self.cfg
    }

    /// Leak reversal that makes `v_rest` the resting potential with every
    /// gate at its steady state.
    pub fn leak_reversal(&self, cell: &CellState) -> f64 {
        let m = &self.cfg.membrane;
        let v = cell.v_rest;
        let [a, h, n, p] = m.kinetics.steady_state(v);
        let other = m.gbar_na * a.powi(3) * h * (v - m.e_na) + (m.gbar_kdr * n.powi(4) + m.gbar_ksub * p) * (v - m.e_k);
        v + other / cell.g_leak
    }

    pub fn with_sim(&self, sim: SimConfig) -> Result<Self> {
        Self::new(NeuronConfig { sim, ..self.cfg })
    }

    /// Runs one trial from the given seed.
    pub fn trial(&self, cell: &CellState, seed: u64, mode: TrialMode, record: bool) -> Result<TrialOutcome> {
        cell.validate()?;
        let m = &self.cfg.membrane;
        let syn = &self.cfg.synapse;
        let sim = &self.cfg.sim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let e_leak = self.leak_reversal(cell);
        let g_leak_na = m.leak_na_conductance(cell.g_leak, cell.v_rest);
        let amplitude = if sim.synaptic_noise && cell.g_syn > 0.0 {
            loop {
                let z: f64 = rng.sample(StandardNormal);
                let a = cell.g_syn * (1.0 + syn.amplitude_cv * z);
                if a >= 0.0 {
                    break a;
                }
            }
        } else {
            cell.g_syn
        };
        // µS/cm² → mS/cm²
        let syn_peak = amplitude * 1e-3 * self.syn_norm;

        let mut v = sim.v_init;
        let [mut gm, mut gh, mut gn, mut gp] = m.kinetics.steady_state(v);
        let n_ch = self.n_channels;
        let mut open = if sim.stochastic_channels { binomial(n_ch, gp, &mut rng) } else { 0 };

        let n_steps = (sim.duration / sim.dt).round() as usize;
        let input_step = (sim.input_time / sim.dt).round() as usize;
        let decay_fast = (-sim.dt / syn.tau_rise).exp();
        let decay_slow = (-sim.dt / syn.tau_decay).exp();
        let (mut syn_fast, mut syn_slow) = (0.0f64, 0.0f64);

        let mut trace = record.then(|| Vec::with_capacity(n_steps + 1));
        if let Some(tr) = trace.as_mut() {
            tr.push(v);
        }
        let (mut q_syn, mut q_na, mut q_leak_na) = (0.0, 0.0, 0.0);
        let mut spikes = 0u32;
        let mut last_spike = f64::NEG_INFINITY;
        let quiet_after = sim.input_time + 8.0 * syn.tau_decay;
        let mut step = 0;
        while step < n_steps {
            if step == input_step {
                syn_fast += syn_peak;
                syn_slow += syn_peak;
            }
            let t = step as f64 * sim.dt;
            let gs = self.table.at(v);
            gm = gs.m_inf + (gm - gs.m_inf) * gs.m_decay;
            gh = gs.h_inf + (gh - gs.h_inf) * gs.h_decay;
            gn = gs.n_inf + (gn - gs.n_inf) * gs.n_decay;
            let g_ksub = if sim.stochastic_channels {
                let opened = binomial(n_ch - open, gs.p_open, &mut rng);
                let closed = binomial(open, gs.p_close, &mut rng);
                open = open + opened - closed;
                self.unitary * open as f64
            } else {
                gp = gs.p_inf + (gp - gs.p_inf) * gs.p_decay;
                m.gbar_ksub * gp
            };
            let g_syn_t = syn_slow - syn_fast;
            let g_na = m.gbar_na * gm * gm * gm * gh;
            let g_k = m.gbar_kdr * gn * gn * gn * gn + g_ksub;
            let total = cell.g_leak + g_na + g_k + g_syn_t;
            let v_inf = (cell.g_leak * e_leak + g_na * m.e_na + g_k * m.e_k + g_syn_t * syn.e_syn) / total;
            let tau = m.capacitance / total;
            let decay = (-sim.dt / tau).exp();
            let v_next = v_inf + (v - v_inf) * decay;
            // exact mean of the exponential relaxation over the step
            let v_mean = v_inf + (v - v_inf) * tau * (1.0 - decay) / sim.dt;
            q_syn += g_syn_t * (v_mean - syn.e_syn) * sim.dt;
            q_na += g_na * (v_mean - m.e_na) * sim.dt;
            q_leak_na += g_leak_na * (v_mean - m.e_na) * sim.dt;
            syn_fast *= decay_fast;
            syn_slow *= decay_slow;

            if !v_next.is_finite() || v_next.abs() > DIVERGENCE_MV {
                return Err(Error::Divergence { t_ms: t + sim.dt, v_mv: v_next });
            }
            let t_next = t + sim.dt;
            if v < m.spike_threshold && v_next >= m.spike_threshold && t_next - last_spike >= sim.dead_time {
                spikes += 1;
                last_spike = t_next;
            }
            v = v_next;
            step += 1;
            if let Some(tr) = trace.as_mut() {
                tr.push(v);
            }

            let quiescent = !record
                && step % 10 == 0
                && t_next >= quiet_after
                && t_next - last_spike >= 50.0
                && v < m.spike_threshold - 10.0
                && gm < 0.05;
            if quiescent {
                match mode {
                    TrialMode::CountOnly => break,
                    TrialMode::Full if sim.fast_tail => {
                        if sim.stochastic_channels {
                            gp = self.unitary * open as f64 / m.gbar_ksub;
                        }
                        let tail = self.tail(cell, e_leak, g_leak_na, [v, gm, gh, gn, gp], syn_slow - syn_fast, t_next)?;
                        q_syn += tail[0];
                        q_na += tail[1];
                        q_leak_na += tail[2];
                        break;
                    }
                    TrialMode::Full => {}
                }
            }
        }
        Ok(TrialOutcome {
            spikes,
            charge_syn: q_syn,
            charge_na: q_na,
            charge_leak_na: q_leak_na,
            eps_sig: m.charge_to_atp(q_syn),
            eps_bg: m.charge_to_atp(q_na + q_leak_na),
            trace,
        })
    }

    /// Deterministic coarse-step integration of the rest of a quiescent
    /// trial; returns the synaptic, Na⁺ and Na⁺ leak charges.
    fn tail(&self, cell: &CellState, e_leak: f64, g_leak_na: f64, state: [f64; 5], g_syn0: f64, t0: f64) -> Result<[f64; 3]> {
        let m = &self.cfg.membrane;
        let syn = &self.cfg.synapse;
        let sim = &self.cfg.sim;
        let [mut v, mut gm, mut gh, mut gn, mut gp] = state;
        let dt = sim.tail_dt;
        let remaining = sim.duration - t0;
        let n = (remaining / dt).floor() as usize;
        let last = remaining - n as f64 * dt;
        // by now the rise term is negligible; the synapse decays with tau_decay
        let mut g_syn_t = g_syn0.max(0.0);
        let mut q = [0.0; 3];
        let table = &self.tail_table;
        for k in 0..=n {
            let h = if k < n { dt } else { last };
            if h <= 0.0 {
                break;
            }
            let gs = if k < n { table.at(v) } else { self.table.at(v) };
            let (md, hd, nd, pd) = if k < n {
                (gs.m_decay, gs.h_decay, gs.n_decay, gs.p_decay)
            } else {
                let s = h / sim.dt;
                (gs.m_decay.powf(s), gs.h_decay.powf(s), gs.n_decay.powf(s), gs.p_decay.powf(s))
            };
            gm = gs.m_inf + (gm - gs.m_inf) * md;
            gh = gs.h_inf + (gh - gs.h_inf) * hd;
            gn = gs.n_inf + (gn - gs.n_inf) * nd;
            gp = gs.p_inf + (gp - gs.p_inf) * pd;
            let g_na = m.gbar_na * gm.powi(3) * gh;
            let g_k = m.gbar_kdr * gn.powi(4) + m.gbar_ksub * gp;
            let total = cell.g_leak + g_na + g_k + g_syn_t;
            let v_inf = (cell.g_leak * e_leak + g_na * m.e_na + g_k * m.e_k + g_syn_t * syn.e_syn) / total;
            let tau = m.capacitance / total;
            let decay = (-h / tau).exp();
            let v_mean = v_inf + (v - v_inf) * tau * (1.0 - decay) / h;
            q[0] += g_syn_t * (v_mean - syn.e_syn) * h;
            q[1] += g_na * (v_mean - m.e_na) * h;
            q[2] += g_leak_na * (v_mean - m.e_na) * h;
            v = v_inf + (v - v_inf) * decay;
            g_syn_t *= (-h / syn.tau_decay).exp();
            if !v.is_finite() || v.abs() > DIVERGENCE_MV {
                return Err(Error::Divergence { t_ms: sim.duration, v_mv: v });
            }
        }
        Ok(q)
    }
}

/// Binomial draw by inversion; fast for the small counts used here.
fn binomial<R: Rng>(n: u32, p: f64, rng: &mut R) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let u: f64 = rng.random();
    let ratio = p / (1.0 - p);
    let mut term = (1.0 - p).powi(n as i32);
    let mut cdf = term;
    let mut k = 0;
    while u > cdf && k < n {
        term *= (n - k) as f64 / (k + 1) as f64 * ratio;
        k += 1;
        cdf += term;
    }
    k
}

/// Convenience wrapper building a [`Simulator`] for a single trial.
pub fn simulate_trial(cell: &CellState, cfg: &NeuronConfig, seed: u64, record: bool) -> Result<TrialOutcome> {
    Simulator::new(*cfg)?.trial(cell, seed, TrialMode::Full, record)
}
