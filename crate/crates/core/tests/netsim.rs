use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ric_core::config::PowerModelConfig;
use ric_core::netsim::{
    bs_power, energy_efficiency, read_kpi_csv, steering_vector, write_kpi_csv, Band, BsId, BsSpec, Codebook, ControlVector,
    KpiLogRow, Layout, Rat, Simulator, TrafficKind, UeId, UeSpec, KPI_CSV_HEADER,
};
use ric_core::{Error, ScenarioConfig};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// `p0 + delta * P_out` awake, `p_sleep` asleep, from the raw config constants.
fn oracle_input_power(pm: &PowerModelConfig, awake: bool, tx_dbm: f64) -> f64 {
    if awake {
        pm.p0_w + pm.delta_p * 10f64.powf((tx_dbm - 30.0) / 10.0)
    } else {
        pm.p_sleep_w
    }
}

fn model_for(cfg: &ScenarioConfig, rat: Rat) -> &PowerModelConfig {
    match rat {
        Rat::Lte => &cfg.power.macro_cell,
        Rat::Nr => &cfg.power.small_cell,
    }
}

/// A random but valid control vector: sleep flags, bands, powers and beams
/// for the NR cells, no steering.
fn random_controls(sim: &Simulator, rng: &mut ChaCha8Rng) -> ControlVector {
    let mut c = ControlVector::default();
    for b in &sim.state().base_stations {
        if b.rat != Rat::Nr {
            continue;
        }
        c.awake.push((b.id, rng.random_bool(0.7)));
        c.band.push((b.id, if rng.random_bool(0.5) { Band::NrMid } else { Band::NrMmWave }));
        c.tx_power_dbm.push((b.id, rng.random_range(20.0..=43.0)));
        let beams = b.codebook.as_ref().unwrap().len();
        for u in 0..sim.state().ues.len() {
            if rng.random_bool(0.2) {
                c.beams.push((b.id, UeId(u), rng.random_range(0..beams)));
            }
        }
    }
    c
}

fn single_link(distance_m: f64, offered_mbps: f64) -> (ScenarioConfig, Simulator) {
    let mut cfg = ScenarioConfig::default();
    cfg.channel.shadowing_sigma_db = 0.0;
    cfg.traffic.offered_load_mbps = offered_mbps;
    let layout = Layout {
        base_stations: vec![BsSpec { rat: Rat::Nr, position: [0.0, 0.0] }],
        ues: vec![UeSpec { position: [distance_m, 0.0], kind: TrafficKind::Embb }],
    };
    let sim = Simulator::from_layout(&cfg, &layout, 3, 0).unwrap();
    (cfg, sim)
}

#[test]
fn single_link_backlogged_throughput_matches_hand_recomputation() {
    let (cfg, mut sim) = single_link(100.0, 2_000.0);
    // 43 dBm, PL = 43.3 + 29 log10(100) = 101.3 dB, noise = -174 + 10 log10(20e6) + 7.
    let band = &cfg.channel.nr_mid;
    let pl = band.pl0_db + 10.0 * band.exponent * 100f64.log10();
    let noise = -174.0 + 10.0 * (band.bandwidth_mhz * 1e6).log10() + 7.0;
    let snr_db = 43.0 + cfg.channel.sector_gain_db - pl - noise;
    let rate_mbps = band.bandwidth_mhz * (1.0 + 10f64.powf(snr_db / 10.0)).log2();

    for slot in 1..=6 {
        let st = sim.step(&ControlVector::default()).unwrap();
        let ue = &st.ues[0];
        assert!(rel_close(ue.link_rate_mbps, rate_mbps, 1e-9), "{} vs {rate_mbps}", ue.link_rate_mbps);
        assert!(rel_close(ue.sinr_db, snr_db, 1e-9));
        if slot >= 2 {
            // Queue never empties, so the cell transmits for the whole slot.
            assert!(rel_close(st.kpis.total_throughput_mbps, rate_mbps, 1e-9));
        }
    }
}

#[test]
fn all_asleep_serves_nothing_and_draws_sleep_power() {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.ue_count = 12;
    let layout = {
        let mut l = Layout::generate(&cfg, 5);
        l.base_stations.retain(|b| b.rat == Rat::Nr);
        l
    };
    let mut sim = Simulator::from_layout(&cfg, &layout, 5, 0).unwrap();
    let c = ControlVector {
        awake: sim.state().base_stations.iter().map(|b| (b.id, false)).collect(),
        ..Default::default()
    };
    for _ in 0..5 {
        let st = sim.step(&c).unwrap();
        assert_eq!(st.kpis.total_throughput_mbps, 0.0);
        let sleep: f64 = st.base_stations.iter().map(|_| cfg.power.small_cell.p_sleep_w).sum();
        assert!(rel_close(st.kpis.total_power_w, sleep, 1e-12));
    }
}

#[test]
fn no_traffic_means_no_throughput_and_no_violations() {
    let mut cfg = ScenarioConfig::default();
    cfg.traffic.offered_load_mbps = 0.0;
    let mut sim = Simulator::new(&cfg, 9, 0).unwrap();
    for _ in 0..5 {
        let st = sim.step(&ControlVector::default()).unwrap();
        assert_eq!(st.kpis.total_throughput_mbps, 0.0);
        assert_eq!(st.kpis.qos_violations, 0);
    }
}

#[test]
fn bs_power_examples() {
    let mut cfg = ScenarioConfig::default();
    let sim = Simulator::new(&cfg, 1, 0).unwrap();
    let macro_bs = sim.state().bs(BsId(0)).clone();
    let small = sim.state().bs(BsId(1)).clone();
    assert_eq!(bs_power(&macro_bs, 0.0).unwrap(), 75.0);
    assert_eq!(bs_power(&small, 0.0).unwrap(), 4.3);

    let pmax = small.power_model.p_max_w;
    assert!(rel_close(bs_power(&small, pmax).unwrap(), 6.8 + 4.0 * pmax, 1e-12));
    assert!(matches!(bs_power(&small, -1e-3), Err(Error::Domain(_))));
    assert!(matches!(bs_power(&small, pmax * 1.01), Err(Error::Domain(_))));

    // 130 + 4.7 * 20 = 224 needs a macro allowed to emit 20 W.
    cfg.power.macro_cell.p_max_dbm = 46.0;
    let sim = Simulator::new(&cfg, 1, 0).unwrap();
    assert!((bs_power(sim.state().bs(BsId(0)), 20.0).unwrap() - 224.0).abs() < 1e-12);
}

#[test]
fn bs_power_matches_oracle_on_random_inputs() {
    let cfg = ScenarioConfig::default();
    let sim = Simulator::new(&cfg, 2, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let b = &sim.state().base_stations[rng.random_range(0..sim.state().base_stations.len())];
        let pm = model_for(&cfg, b.rat);
        let p_out = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..=1.0) * b.power_model.p_max_w };
        let expect = if p_out > 0.0 { pm.p0_w + pm.delta_p * p_out } else { pm.p_sleep_w };
        assert!(rel_close(bs_power(b, p_out).unwrap(), expect, 1e-9));
    }
}

#[test]
fn energy_efficiency_examples() {
    let sim = Simulator::new(&ScenarioConfig::default(), 1, 0).unwrap();
    let mut st = sim.state().clone();
    st.kpis.total_throughput_mbps = 100.0;
    st.kpis.total_power_w = 200.0;
    assert_eq!(energy_efficiency(&st), 0.5);
    st.kpis.total_throughput_mbps = 0.0;
    assert_eq!(energy_efficiency(&st), 0.0);
    st.kpis.total_throughput_mbps = 70.0;
    let once = energy_efficiency(&st);
    st.kpis.total_throughput_mbps = 140.0;
    assert!(rel_close(energy_efficiency(&st), 2.0 * once, 1e-15));
}

#[test]
fn kpi_accounting_matches_independent_resummation() {
    let cfg = ScenarioConfig::default();
    let mut sim = Simulator::new(&cfg, 4, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..150 {
        let c = random_controls(&sim, &mut rng);
        let st = sim.step(&c).unwrap();
        let power: f64 =
            st.base_stations.iter().map(|b| oracle_input_power(model_for(&cfg, b.rat), b.awake, b.tx_power_dbm)).sum();
        let thr: f64 = st.ues.iter().map(|u| u.slot_throughput_mbps).sum();
        assert!(rel_close(st.kpis.total_power_w, power, 1e-9));
        assert!(rel_close(st.kpis.total_throughput_mbps, thr, 1e-9));
        assert!(rel_close(st.kpis.energy_efficiency, thr / power, 1e-9));
        assert!(rel_close(energy_efficiency(st), thr / power, 1e-9));
        for b in &st.base_stations {
            let pm = model_for(&cfg, b.rat);
            let drawn = b.input_power_w();
            // Sleep draw if and only if nothing is transmitted.
            assert_eq!(b.p_out_w() == 0.0, drawn == pm.p_sleep_w, "{}", b.id);
        }
        let overloaded = st.load_ratio.iter().filter(|l| **l > cfg.xapps.overload_threshold).count() as u32;
        assert_eq!(st.kpis.overloaded_bs, overloaded);
        let slack = cfg.traffic.throughput_slack;
        let violated = st
            .ues
            .iter()
            .filter(|u| {
                u.achieved_throughput_mbps < slack * u.traffic.throughput_req_mbps.min(u.traffic.offered_mbps)
                    || u.achieved_delay_ms > u.traffic.delay_req_ms
            })
            .count() as u32;
        assert_eq!(st.kpis.qos_violations, violated);
        assert!(st.kpis.qos_violations as usize <= st.ues.len());
        assert!(st.kpis.overloaded_bs as usize <= st.base_stations.len());
        assert!(st.kpis.total_power_w > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bits_are_conserved(seed in 0u64..1000, ctl_seed in 0u64..1000, slots in 5usize..40) {
        let mut cfg = ScenarioConfig::default();
        cfg.topology.ue_count = 24;
        let mut sim = Simulator::new(&cfg, seed, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(ctl_seed);
        let mut served = 0.0;
        for _ in 0..slots {
            let c = random_controls(&sim, &mut rng);
            let before: f64 = sim.state().base_stations.iter().map(|b| b.queued_bits()).sum();
            let arrived_before = sim.arrived_bits();
            let st = sim.step(&c).unwrap();
            let slot_bits = st.kpis.total_throughput_mbps * cfg.traffic.slot_ms * 1e3;
            served += slot_bits;
            let arrivals = sim.arrived_bits() - arrived_before;
            prop_assert!(slot_bits <= before + arrivals + 1e-6);
            for b in &sim.state().base_stations {
                for p in &b.queue {
                    prop_assert!(p.remaining_bits >= 0.0 && p.remaining_bits <= p.size_bits);
                }
            }
        }
        let queued: f64 = sim.state().base_stations.iter().map(|b| b.queued_bits()).sum();
        let balance = served + queued + sim.dropped_bits();
        prop_assert!(rel_close(balance, sim.arrived_bits(), 1e-9), "{} vs {}", balance, sim.arrived_bits());
    }

    #[test]
    fn raising_achieved_throughput_never_adds_violations(seed in 0u64..500, slots in 1usize..30, boost in 0.0f64..50.0) {
        let cfg = ScenarioConfig::default();
        let mut sim = Simulator::new(&cfg, seed, 0).unwrap();
        for _ in 0..slots {
            sim.step(&ControlVector::default()).unwrap();
        }
        let slack = cfg.traffic.throughput_slack;
        let count = |ues: &[ric_core::netsim::Ue]| ues.iter().filter(|u| !(u.throughput_ok(slack) && u.delay_ok())).count();
        let st = sim.state();
        prop_assert_eq!(count(&st.ues) as u32, st.kpis.qos_violations);
        let mut raised = st.ues.clone();
        for u in &mut raised {
            u.achieved_throughput_mbps += boost;
        }
        prop_assert!(count(&raised) <= count(&st.ues));
    }
}

fn control_script(sim: &Simulator, seed: u64, slots: usize) -> Vec<ControlVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..slots).map(|_| random_controls(sim, &mut rng)).collect()
}

fn kpi_csv(seed: u64, script: &[ControlVector]) -> Vec<u8> {
    let mut sim = Simulator::new(&ScenarioConfig::default(), seed, 0).unwrap();
    let rows: Vec<KpiLogRow> = script.iter().map(|c| KpiLogRow::new(&sim.step(c).unwrap().kpis, "-")).collect();
    let mut out = Vec::new();
    write_kpi_csv(&mut out, &rows).unwrap();
    out
}

#[test]
fn same_seed_and_controls_give_identical_csv_bytes() {
    let probe = Simulator::new(&ScenarioConfig::default(), 21, 0).unwrap();
    let script = control_script(&probe, 8, 80);
    let a = kpi_csv(21, &script);
    let b = kpi_csv(21, &script);
    assert_eq!(a, b);
    assert_ne!(a, kpi_csv(22, &script));
    let rows = read_kpi_csv(&a[..]).unwrap();
    assert_eq!(rows.len(), 80);
}

#[test]
fn kpi_csv_has_exact_columns() {
    assert_eq!(
        KPI_CSV_HEADER,
        ["slot", "throughput_mbps", "energy_eff_mbps_per_w", "mean_delay_ms", "total_power_w", "qos_violations", "overloaded_bs", "active_xapps"]
    );
    let mut out = Vec::new();
    write_kpi_csv(&mut out, &[]).unwrap();
    assert_eq!(String::from_utf8(out).unwrap().trim_end(), KPI_CSV_HEADER.join(","));
}

#[test]
fn steering_to_sleeping_cell_lists_offenders() {
    let mut sim = Simulator::new(&ScenarioConfig::default(), 1, 0).unwrap();
    let c = ControlVector {
        awake: vec![(BsId(2), false)],
        steer: vec![(UeId(3), BsId(2)), (UeId(4), BsId(1))],
        ..Default::default()
    };
    let before = sim.state().clone();
    match sim.step(&c) {
        Err(Error::RejectedControl(ids)) => assert_eq!(ids, vec![(UeId(3), BsId(2))]),
        other => panic!("expected rejection, got {other:?}"),
    }
    assert_eq!(sim.state(), &before);
}

#[test]
fn steering_vector_examples() {
    assert!(steering_vector(0.0, 6).unwrap().iter().all(|z| (z.re - 1.0).abs() < 1e-15 && z.im.abs() < 1e-15));
    let v = steering_vector(FRAC_PI_6, 4).unwrap();
    for (i, z) in v.iter().enumerate() {
        let want = PI * i as f64 / 2.0;
        let d = (z.arg() - want).rem_euclid(2.0 * PI);
        assert!(d.min(2.0 * PI - d) < 1e-12, "entry {i}");
    }
    assert!(matches!(steering_vector(0.3, 0), Err(Error::Domain(_))));
    assert!(steering_vector(FRAC_PI_2 + 0.1, 4).is_err());
}

proptest! {
    #[test]
    fn steering_entries_have_unit_modulus(chi in -FRAC_PI_2..=FRAC_PI_2, m in 1usize..64) {
        for z in steering_vector(chi, m).unwrap() {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }
}

/// Brute-force array gain `|sum_i exp(j pi i (s_u - s_b))|^2 / M`.
fn oracle_gain(m: usize, beam_sin: f64, ue_sin: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..m {
        let ph = PI * i as f64 * (ue_sin - beam_sin);
        re += ph.cos();
        im += ph.sin();
    }
    (re * re + im * im) / m as f64
}

#[test]
fn beam_gain_examples() {
    let cb = Codebook::dft(8, 16).unwrap();
    for n in 0..cb.len() {
        let g = cb.gain_linear(n, cb.angles[n]).unwrap();
        assert!((10.0 * g.log10() - 10.0 * 8f64.log10()).abs() < 1e-9);
    }
    let single = Codebook::dft(1, 16).unwrap();
    for n in 0..16 {
        assert!((single.gain_linear(n, 0.4).unwrap() - 1.0).abs() < 1e-12);
    }
    let b = cb.broadside();
    let brute = (0..16).max_by(|x, y| oracle_gain(8, cb.angles[*x].sin(), 0.0).total_cmp(&oracle_gain(8, cb.angles[*y].sin(), 0.0))).unwrap();
    assert_eq!(b, brute);
    let g_db = 10.0 * cb.gain_linear(b, 0.0).unwrap().log10();
    assert!((g_db - 10.0 * 8f64.log10()).abs() <= 0.5);
    assert!(matches!(cb.gain_linear(16, 0.0), Err(Error::Domain(_))));
}

#[test]
fn simulator_beam_gain_rejects_out_of_codebook_and_lte() {
    let sim = Simulator::new(&ScenarioConfig::default(), 1, 0).unwrap();
    assert!(matches!(sim.beam_gain(BsId(1), UeId(0), 10_000), Err(Error::Domain(_))));
    assert!(matches!(sim.beam_gain(BsId(0), UeId(0), 0), Err(Error::Domain(_))));
}

proptest! {
    #[test]
    fn sweep_picks_the_nearest_beam(
        chi in -FRAC_PI_2..=FRAC_PI_2,
        m in prop::sample::select(vec![4usize, 8, 16]),
        f in prop::sample::select(vec![8usize, 16, 32]),
    ) {
        let cb = Codebook::dft(m, f).unwrap();
        let s = chi.sin();
        let gains: Vec<f64> = cb.angles.iter().map(|a| oracle_gain(m, a.sin(), s)).collect();
        let best = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let swept = cb.sweep(chi).unwrap();
        prop_assert!(gains[swept] >= best - 1e-9);
        prop_assert!(gains[cb.nearest(chi)] >= best - 1e-9);
    }
}
