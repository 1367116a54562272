use std::collections::BTreeMap;

use ric_core::campaign::{
    aggregate, read_manifest, read_summary, recompute_from_dir, relative_delta, response_round, run_campaign,
    run_seed, run_seeds_sequential, Estimate, LiveSession, Mode, SeedSummary, EVAL_EPISODE, NON_ML,
};
use ric_core::netsim::{read_kpi_csv, KpiSummary, Simulator};
use ric_core::orchestrator::{hrl_episode, parse_intent, HrlMode, ScheduledIntent, Selection};
use ric_core::xapps::{Kpi, XAppId, XAppSet};
use ric_core::ScenarioConfig;

fn tiny() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.topology.ue_count = 20;
    cfg.training.xapp_episodes = 1;
    cfg.training.xapp_episode_slots = 40;
    cfg.training.joint_episodes = 1;
    cfg.training.hrl_episodes = 1;
    cfg.training.hrl_episode_slots = 120;
    cfg.evaluation.slots = 300;
    cfg.evaluation.measure_from = 20;
    cfg
}

fn summary(thr: f64, ee: f64) -> KpiSummary {
    KpiSummary { slots: 10, throughput_mbps: thr, energy_efficiency: ee, ..Default::default() }
}

#[test]
fn identical_seeds_give_a_zero_width_interval() {
    let e = Estimate::of(&[3.5; 6]);
    assert_eq!(e.mean, 3.5);
    assert_eq!(e.half_width(), Some(0.0));
}

#[test]
fn a_single_seed_has_no_interval() {
    let e = Estimate::of(&[3.5]);
    assert_eq!((e.n, e.mean), (1, 3.5));
    assert!(e.ci95.is_none());
    assert!(!e.disjoint(&Estimate::of(&[1.0, 2.0])));
}

#[test]
fn interval_uses_the_student_t_quantile() {
    let xs: Vec<f64> = (1..=10).map(|i| i as f64 * 1.5).collect();
    let e = Estimate::of(&xs);
    let mean = xs.iter().sum::<f64>() / 10.0;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 9.0).sqrt();
    // t(0.975, 9 degrees of freedom).
    let half = 2.262_157_162_798_205 * sd / 10f64.sqrt();
    assert!((e.half_width().unwrap() - half).abs() <= 1e-9 * half);
    assert!(Estimate::of(&[10.0, 10.1, 9.9]).disjoint(&Estimate::of(&[1.0, 1.1, 0.9])));
    assert!(!Estimate::of(&[1.0, 5.0]).disjoint(&Estimate::of(&[2.0, 3.0])));
}

#[test]
fn deltas_follow_the_per_seed_means() {
    assert!((relative_delta(121.4, 100.0) - 0.214).abs() < 1e-12);
    let per_seed: Vec<SeedSummary> = (0..4)
        .map(|s| SeedSummary {
            seed: s,
            runs: BTreeMap::from([
                ("orchestrated_a".to_string(), summary(110.0 + s as f64, 0.5)),
                (NON_ML.to_string(), summary(90.0 + s as f64, 0.4)),
            ]),
        })
        .collect();
    let r = aggregate(Mode::Orchestrated, 0, per_seed);
    let d = r.delta("orchestrated_a", NON_ML, Kpi::Throughput).unwrap();
    assert!((d.relative - (111.5 - 91.5) / 91.5).abs() < 1e-12);
    assert!(d.ci_disjoint);
    let d = r.delta("orchestrated_a", NON_ML, Kpi::EnergyEfficiency).unwrap();
    assert!((d.relative - 0.25).abs() < 1e-12);
    assert!(r.delta(NON_ML, "orchestrated_a", Kpi::Throughput).is_none());
}

#[test]
fn response_round_counts_only_early_responsive_selections() {
    let sel = |round, subset| Selection { slot: round as u64 * 10, intent_id: 1, kpi: Kpi::EnergyEfficiency, subset, round };
    let bf = XAppSet::single(XAppId::Beamforming);
    let cs_bf = XAppSet::of(&[XAppId::CellSleeping, XAppId::Beamforming]);
    let log = [sel(1, bf), sel(2, bf), sel(3, cs_bf), sel(4, cs_bf)];
    assert_eq!(response_round(&log, 1, Kpi::EnergyEfficiency, 3), Some(3));
    assert_eq!(response_round(&log, 1, Kpi::EnergyEfficiency, 2), None);
    assert_eq!(response_round(&log, 2, Kpi::EnergyEfficiency, 3), None);
}

#[test]
fn campaign_directory_is_self_describing() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let result = run_campaign(&cfg, Mode::Orchestrated, &[1, 2], Some(dir.path())).unwrap();
    assert_eq!(result.seeds, vec![1, 2]);
    assert_eq!(result.selection_violations, 0);
    assert!(result.selections > 0);
    assert_eq!(result.intent_response["throughput#0"].total, 2);

    let m = read_manifest(dir.path()).unwrap();
    assert!(m.complete && m.error.is_none());
    assert_eq!(m.completed_seeds, vec![1, 2]);
    for f in &m.files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(m.files.iter().any(|f| f == "seed-2/checkpoints/controller.qnet"));

    let stored = read_summary(dir.path()).unwrap();
    assert_eq!(stored, result);
    let recomputed = recompute_from_dir(dir.path()).unwrap();
    assert_eq!(recomputed.runs.keys().collect::<Vec<_>>(), stored.runs.keys().collect::<Vec<_>>());
    for (name, s) in &stored.runs {
        let r = &recomputed.runs[name];
        for kpi in [Kpi::Throughput, Kpi::EnergyEfficiency, Kpi::Delay] {
            assert!((s.kpi(kpi).mean - r.kpi(kpi).mean).abs() <= 1e-9 * s.kpi(kpi).mean.abs().max(1.0), "{name}");
        }
    }
    for (a, b) in stored.deltas.iter().zip(&recomputed.deltas) {
        assert_eq!((&a.run, &a.baseline, a.kpi, a.ci_disjoint), (&b.run, &b.baseline, b.kpi, b.ci_disjoint));
        assert!((a.relative - b.relative).abs() <= 1e-9);
    }

    // Per-seed CSVs hold exactly the evaluation slots.
    let rows = read_kpi_csv(std::fs::File::open(dir.path().join("seed-1/orchestrated_energy.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), cfg.evaluation.slots);
}

#[test]
fn single_seed_summary_reads_back() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let result = run_campaign(&cfg, Mode::NonMl, &[5], Some(dir.path())).unwrap();
    let stored = read_summary(dir.path()).unwrap();
    assert!(stored.runs[NON_ML].throughput_mbps.ci95.is_none());
    assert_eq!(stored.runs[NON_ML].throughput_mbps.mean, result.runs[NON_ML].throughput_mbps.mean);
}

#[test]
fn failed_write_leaves_a_partial_manifest() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    // A plain file where the second seed's directory should go.
    std::fs::write(dir.path().join("seed-8"), b"").unwrap();
    let err = run_campaign(&cfg, Mode::NonMl, &[7, 8], Some(dir.path()));
    assert!(err.is_err());
    let m = read_manifest(dir.path()).unwrap();
    assert!(!m.complete);
    assert_eq!(m.completed_seeds, vec![7]);
    assert!(m.error.is_some());
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn same_seed_gives_identical_logs() {
    let cfg = tiny();
    let a = run_seed(&cfg, 3, Mode::Orchestrated).unwrap();
    let b = run_seeds_sequential(&cfg, &[3], Mode::Orchestrated).remove(0).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.audits, b.audits);
    assert_eq!(a.selections, b.selections);
}

#[cfg(feature = "parallel")]
#[test]
fn parallel_and_sequential_seeds_agree() {
    let cfg = tiny();
    let seeds = [1, 2, 3];
    let seq = run_seeds_sequential(&cfg, &seeds, Mode::Single(XAppId::TrafficSteering));
    let par = ric_core::campaign::run_seeds_parallel(&cfg, &seeds, Mode::Single(XAppId::TrafficSteering));
    for (s, p) in seq.into_iter().zip(par) {
        let (s, p) = (s.unwrap(), p.unwrap());
        assert_eq!(s.seed, p.seed);
        assert_eq!(s.runs, p.runs);
    }
}

#[test]
fn live_session_replays_the_batch_episode() {
    let cfg = tiny();
    let trained = run_seed(&cfg, 4, Mode::Orchestrated).unwrap().trained.unwrap();
    let mut live = LiveSession::new(&cfg, 4, trained.clone()).unwrap();
    let mut rows = Vec::new();
    for _ in 0..180 {
        if live.slot() == 60 {
            assert_eq!(live.submit("increase energy efficiency by 10%").unwrap(), 1);
        }
        rows.push(live.step().unwrap().log_row());
    }

    let mut sim = Simulator::new(&cfg, 4, 0).unwrap();
    sim.reset(EVAL_EPISODE);
    let (mut suite, mut orch) = (trained.suite.clone(), trained.orchestrator.clone());
    let intents = [ScheduledIntent { slot: 60, intent: parse_intent("increase energy efficiency by 10%", 60).unwrap() }];
    let batch = hrl_episode(&mut sim, &mut suite, &mut orch, &intents, 180, HrlMode::evaluate()).unwrap();
    assert_eq!(rows, batch.kpis);

    live.reset();
    assert_eq!((live.epoch(), live.slot()), (1, 0));
    assert!(live.status().goal.is_none());
    assert_eq!(live.step().unwrap().log_row(), batch.kpis[0]);
}
