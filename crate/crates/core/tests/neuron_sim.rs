use popcode::neuron::{
    calibrate_gsyn, simulate_trial, spike_thresholds, CellState, MembraneConfig, NeuronConfig, SimConfig, Simulator,
};
use proptest::prelude::*;

fn quiet() -> NeuronConfig {
    NeuronConfig { sim: SimConfig::default().noise_free(), ..Default::default() }
}

fn spikes(g_syn: f64) -> u32 {
    let cell = CellState::new(-75.0, 0.12, g_syn).unwrap();
    simulate_trial(&cell, &quiet(), 0, false).unwrap().spikes
}

#[test]
fn deterministic_threshold_separates_silence_from_firing() {
    let sim = Simulator::new(quiet()).unwrap();
    let a = spike_thresholds(&sim, -75.0, 0.12, 1).unwrap();
    let b = spike_thresholds(&sim, -75.0, 0.12, 1).unwrap();
    assert_eq!(a, b);
    let t = a[0];
    assert!(t > 0.0 && t < 250.0);
    // independent scan: the count switches exactly once around the threshold
    assert_eq!(spikes(0.99 * t), 0);
    assert!(spikes(1.01 * t) >= 1);
    let below: Vec<u32> = (1..20).map(|i| spikes(t * i as f64 / 20.0)).collect();
    assert!(below.iter().all(|&s| s == 0));
}

#[test]
fn calibrated_conductance_grows_with_target() {
    let sim = Simulator::new(NeuronConfig::default()).unwrap();
    let g1 = calibrate_gsyn(&sim, -75.0, 0.12, 0.1, 0.01, 300, 3).unwrap();
    let g2 = calibrate_gsyn(&sim, -75.0, 0.12, 0.2, 0.01, 300, 3).unwrap();
    assert!(g1 > 0.0 && g1 < 250.0);
    assert!(g2 > g1, "{g2} vs {g1}");
    assert_eq!(calibrate_gsyn(&sim, -75.0, 0.12, 0.0, 0.01, 300, 3).unwrap(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn trials_are_bounded_and_energies_add_up(
        v_rest in -75.0f64..-65.0,
        g_leak in 0.07f64..0.12,
        g_syn in 0.0f64..250.0,
        seed in any::<u64>(),
    ) {
        let cell = CellState::new(v_rest, g_leak, g_syn).unwrap();
        let cfg = NeuronConfig { sim: SimConfig { fast_tail: false, ..Default::default() }, ..Default::default() };
        let out = simulate_trial(&cell, &cfg, seed, true).unwrap();
        let m = MembraneConfig::default();
        prop_assert!(out.eps_sig >= 0.0 && out.eps_bg >= 0.0);
        prop_assert!(out.trace.unwrap().iter().all(|&v| v >= m.e_k - 5.0 && v <= m.e_na + 5.0));
        let bg = m.charge_to_atp(out.charge_na + out.charge_leak_na);
        prop_assert!((bg - out.eps_bg).abs() <= 1e-9 * out.eps_bg.max(1.0));
    }
}
