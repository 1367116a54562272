//! Comparison systems: rule-based threshold steering with every cell on,
//! and single-xApp runs.

use crate::config::{BaselineConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::netsim::{BsId, ControlVector, KpiLogRow, Simulator, UeId};
use crate::xapps::{SlotPolicy, XAppId, XAppSet, XAppSuite, SUBSETS};

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("baseline weights {:?} must be non-negative and sum to 1", self.weights)));
        }
        if self.sinr_range_db[1] <= self.sinr_range_db[0] {
            return Err(Error::Config("baseline sinr_range_db must be increasing".into()));
        }
        Ok(())
    }
}

/// Normalised (load, channel, service) metrics of `ue` on `bs` given per-cell
/// loads, each in [0, 1] with larger meaning worse for the UE.
pub fn threshold_metrics(sim: &Simulator, ue: UeId, bs: BsId, load: &[f64], p: &BaselineConfig) -> [f64; 3] {
    let st = sim.state();
    let [lo, hi] = p.sinr_range_db;
    let channel = match sim.candidate_sinr_db(ue, bs) {
        Some(s) => 1.0 - ((s - lo) / (hi - lo)).clamp(0.0, 1.0),
        None => 1.0,
    };
    let service = p.service_priority[st.ue(ue).traffic.kind.index()];
    [load[bs.0].clamp(0.0, 1.0), channel, service]
}

/// Weighted score `w` and threshold `T` (plain mean of the metrics).
pub fn score_and_threshold(m: [f64; 3], weights: [f64; 3]) -> (f64, f64) {
    let w = m.iter().zip(weights).map(|(a, b)| a * b).sum();
    let t = m.iter().sum::<f64>() / 3.0;
    (w, t)
}

/// Load a UE adds to `bs`: its offered rate over the full-band rate it would get there.
fn load_share(sim: &Simulator, ue: UeId, bs: BsId) -> f64 {
    let Some(sinr_db) = sim.candidate_sinr_db(ue, bs) else {
        return f64::INFINITY;
    };
    let band = sim.state().bs(bs).band;
    let rate = sim.channel().band(band).bandwidth_mhz * crate::netsim::channel::shannon_se(10f64.powf(sinr_db / 10.0));
    sim.state().ue(ue).traffic.offered_mbps / rate
}

/// Rule-based steering: a UE whose score at its serving cell exceeds the
/// threshold moves to the awake cell with the lowest score, if that is lower.
/// UEs are visited in id order and each move updates the projected loads seen
/// by later UEs in the same slot.
pub fn threshold_steer(sim: &Simulator, p: &BaselineConfig) -> ControlVector {
    let st = sim.state();
    let mut load = st.load_ratio.clone();
    let mut c = ControlVector::default();
    for u in &st.ues {
        let Some(current) = u.primary() else { continue };
        let (w, t) = score_and_threshold(threshold_metrics(sim, u.id, current, &load, p), p.weights);
        if w <= t {
            continue;
        }
        let mut best: Option<(BsId, f64)> = None;
        for b in st.base_stations.iter().filter(|b| b.awake && b.id != current) {
            let (wb, _) = score_and_threshold(threshold_metrics(sim, u.id, b.id, &load, p), p.weights);
            if best.is_none_or(|(_, x)| wb < x) {
                best = Some((b.id, wb));
            }
        }
        if let Some((b, wb)) = best {
            if wb < w {
                c.steer.push((u.id, b));
                load[current.0] = (load[current.0] - load_share(sim, u.id, current)).max(0.0);
                load[b.0] = (load[b.0] + load_share(sim, u.id, b)).min(1.0);
            }
        }
    }
    c
}

/// Non-ML baseline for `slots` slots from the simulator's current state.
pub fn run_non_ml(sim: &mut Simulator, p: &BaselineConfig, slots: usize) -> Result<Vec<KpiLogRow>> {
    let mut rows = Vec::with_capacity(slots);
    for _ in 0..slots {
        let c = threshold_steer(sim, p);
        let st = sim.step(&c)?;
        debug_assert!(st.base_stations.iter().all(|b| b.awake));
        rows.push(KpiLogRow::new(&st.kpis, "non_ml"));
    }
    Ok(rows)
}

/// Trains one xApp alone for the configured episodes, then evaluates it
/// greedily on traffic stream `eval_episode`. Returns the evaluation log.
pub fn run_single_xapp(cfg: &ScenarioConfig, id: &str, seed: u64, eval_episode: u64) -> Result<Vec<KpiLogRow>> {
    let id: XAppId = id.parse()?;
    let mut sim = Simulator::new(cfg, seed, 0)?;
    let mut suite = XAppSuite::new(cfg, &sim, seed)?;
    train_single(cfg, &mut sim, &mut suite, id, 1)?;
    evaluate_single(cfg, &mut sim, &mut suite, id, eval_episode)
}

/// Trains `id` alone over `cfg.training.xapp_episodes` episodes whose traffic
/// streams start at `first_episode`.
pub fn train_single(
    cfg: &ScenarioConfig,
    sim: &mut Simulator,
    suite: &mut XAppSuite,
    id: XAppId,
    first_episode: u64,
) -> Result<()> {
    let active = XAppSet::single(id);
    let mut learn = [false; 3];
    learn[id.index()] = true;
    for ep in 0..cfg.training.xapp_episodes {
        sim.reset(first_episode + ep as u64);
        let mut policy = SlotPolicy { epsilon: [0.0; 3], learn };
        policy.epsilon[id.index()] = suite.epsilons()[id.index()];
        for _ in 0..cfg.training.xapp_episode_slots {
            suite.step(sim, active, &policy)?;
        }
        suite.end_episode(sim, learn)?;
    }
    Ok(())
}

/// Pretrain with two or more xApps active at once, cycling through the combinations.
pub fn train_joint(cfg: &ScenarioConfig, sim: &mut Simulator, suite: &mut XAppSuite, first_episode: u64) -> Result<()> {
    let combos: Vec<XAppSet> = SUBSETS.iter().copied().filter(|s| s.len() > 1).collect();
    for ep in 0..cfg.training.joint_episodes {
        let active = combos[ep % combos.len()];
        sim.reset(first_episode + ep as u64);
        let mut policy = SlotPolicy { epsilon: [0.0; 3], learn: [false; 3] };
        for id in XAppId::ALL {
            if active.contains(id) {
                policy.learn[id.index()] = true;
                policy.epsilon[id.index()] = suite.epsilons()[id.index()];
            }
        }
        for _ in 0..cfg.training.xapp_episode_slots {
            suite.step(sim, active, &policy)?;
        }
        suite.end_episode(sim, policy.learn)?;
    }
    Ok(())
}

pub fn evaluate_single(
    cfg: &ScenarioConfig,
    sim: &mut Simulator,
    suite: &mut XAppSuite,
    id: XAppId,
    eval_episode: u64,
) -> Result<Vec<KpiLogRow>> {
    let active = XAppSet::single(id);
    sim.reset(eval_episode);
    let mut rows = Vec::with_capacity(cfg.evaluation.slots);
    let policy = SlotPolicy::greedy();
    for _ in 0..cfg.evaluation.slots {
        suite.step(sim, active, &policy)?;
        rows.push(KpiLogRow::new(&sim.state().kpis, active.label()));
    }
    suite.end_episode(sim, [false; 3])?;
    Ok(rows)
}
