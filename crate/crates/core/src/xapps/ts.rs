//! Traffic steering: one decision per UE under consideration, choosing the
//! serving cell from per-cell load, candidate link quality and traffic class.

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::netsim::{BsId, ControlVector, Simulator, TrafficKind, UeId};
use crate::rl::{DqnAgent, Experience, TrainSchedule};

/// SINR quantisation: 5 dB buckets from -5 dB, 8 levels.
const SINR_FLOOR_DB: f64 = -5.0;
const SINR_STEP_DB: f64 = 5.0;
const SINR_LEVELS: f64 = 7.0;

#[derive(Debug, Clone)]
struct Pending {
    ue: UeId,
    state: Vec<f64>,
    action: usize,
    penalty: bool,
}

#[derive(Debug, Clone)]
pub struct TrafficSteering {
    pub agent: DqnAgent,
    n_bs: usize,
    per_slot: usize,
    w_throughput: f64,
    w_delay: f64,
    cursor: usize,
    pending: Vec<Pending>,
}

pub fn sinr_bucket(sinr_db: Option<f64>) -> f64 {
    match sinr_db {
        None => 0.0,
        Some(s) => (((s - SINR_FLOOR_DB) / SINR_STEP_DB).floor().clamp(0.0, SINR_LEVELS)) / SINR_LEVELS,
    }
}

impl TrafficSteering {
    pub fn new(cfg: &ScenarioConfig, sim: &Simulator, schedule: TrainSchedule, seed: u64) -> Result<Self> {
        let n_bs = sim.state().base_stations.len();
        let agent = DqnAgent::new(&[Self::state_dim_for(n_bs), cfg.rl.xapp_hidden, n_bs], schedule, seed)?;
        Ok(Self {
            agent,
            n_bs,
            per_slot: cfg.xapps.ts_decisions_per_slot.max(1),
            w_throughput: cfg.xapps.ts_throughput_weight,
            w_delay: cfg.xapps.ts_delay_weight,
            cursor: 0,
            pending: Vec::new(),
        })
    }

    pub fn state_dim_for(n_bs: usize) -> usize {
        2 * n_bs + TrafficKind::ALL.len()
    }

    pub fn state_dim(&self) -> usize {
        Self::state_dim_for(self.n_bs)
    }

    /// Per-cell load ratios, SINR buckets toward every cell, class one-hot.
    pub fn encode_state(sim: &Simulator, ue: UeId) -> Vec<f64> {
        let st = sim.state();
        let mut v = Vec::with_capacity(Self::state_dim_for(st.base_stations.len()));
        v.extend_from_slice(&st.load_ratio);
        for b in &st.base_stations {
            v.push(sinr_bucket(sim.candidate_sinr_db(ue, b.id)));
        }
        let mut onehot = [0.0; 5];
        onehot[st.ue(ue).traffic.kind.index()] = 1.0;
        v.extend_from_slice(&onehot);
        v
    }

    pub fn decode_action(action: usize) -> BsId {
        BsId(action)
    }

    pub fn encode_action(bs: BsId) -> usize {
        bs.0
    }

    /// Weighted throughput and delay satisfaction of `ue` in the last slot.
    pub fn reward(&self, sim: &Simulator, ue: UeId) -> f64 {
        let u = sim.state().ue(ue);
        let req = u.traffic.effective_req_mbps();
        let thr = if req > 0.0 { (u.link_rate_mbps / req).min(1.0) } else { 1.0 };
        let delay = if u.slot_delay_ms <= u.traffic.delay_req_ms { 1.0 } else { 0.0 };
        self.w_throughput * thr + self.w_delay * delay
    }

    /// Awake cells whose candidate SINR toward `ue` reaches the lowest bucket;
    /// the current serving cell is always allowed.
    pub fn action_mask(sim: &Simulator, ue: UeId) -> Vec<bool> {
        let st = sim.state();
        let serving = st.ue(ue).primary();
        st.base_stations
            .iter()
            .map(|b| {
                b.awake
                    && (Some(b.id) == serving || sim.candidate_sinr_db(ue, b.id).is_some_and(|s| s >= SINR_FLOOR_DB))
            })
            .collect()
    }

    pub fn decide(&mut self, sim: &Simulator, epsilon: f64) -> Result<ControlVector> {
        let st = sim.state();
        let n_ue = st.ues.len();
        let mut c = ControlVector::default();
        self.pending.clear();
        for _ in 0..self.per_slot.min(n_ue) {
            let ue = UeId(self.cursor % n_ue);
            self.cursor = (self.cursor + 1) % n_ue;
            let state = Self::encode_state(sim, ue);
            let mut mask = Self::action_mask(sim, ue);
            if !mask.iter().any(|m| *m) {
                mask = st.base_stations.iter().map(|b| b.awake).collect();
            }
            let action = self.agent.act(&state, epsilon, Some(&mask))?;
            c.steer.push((ue, Self::decode_action(action)));
            self.pending.push(Pending { ue, state, action, penalty: false });
        }
        Ok(c)
    }

    /// Marks decisions aimed at cells that will be asleep; returns their count.
    pub fn drop_conflicts(&mut self, awake: &[bool]) -> usize {
        let mut n = 0;
        for p in &mut self.pending {
            if !awake[p.action] {
                p.penalty = true;
                n += 1;
            }
        }
        n
    }

    pub fn clear(&mut self) {
        self.pending.clear();
    }

    /// Rewards for this slot's decisions; returns their mean.
    pub fn settle(&mut self, sim: &Simulator, learn: bool) -> Result<Option<f64>> {
        if self.pending.is_empty() {
            return Ok(None);
        }
        let pending = std::mem::take(&mut self.pending);
        let mut total = 0.0;
        let n = pending.len();
        for p in pending {
            let reward = if p.penalty { -1.0 } else { self.reward(sim, p.ue) };
            total += reward;
            if learn {
                let next_state = Self::encode_state(sim, p.ue);
                let next_mask = Some(Self::action_mask(sim, p.ue)).filter(|m: &Vec<bool>| m.iter().any(|x| *x));
                self.agent.remember(Experience {
                    state: p.state,
                    action: p.action,
                    reward,
                    next_state,
                    terminal: false,
                    next_mask,
                });
            }
        }
        if learn {
            self.agent.learn()?;
        }
        Ok(Some(total / n as f64))
    }
}
