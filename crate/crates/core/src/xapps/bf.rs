//! Beamforming: NR cells move to the 30 GHz carrier and pick, per UE, a
//! codebook beam and a transmit power step.

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::netsim::{Band, BsId, ControlVector, NetworkState, Rat, Simulator, UeId};
use crate::rl::{DqnAgent, Experience, TrainSchedule};

/// Power steps available to the agent, in candidate-set positions.
pub const POWER_STEPS: [i32; 3] = [-1, 0, 1];

/// `c1 * clip(T / T_qos) + c2 * clip(eps / eps_max)` with ratios clipped to `[0, clip]`.
pub fn bf_term(t_mbps: f64, t_qos_mbps: f64, eps: f64, eps_max: f64, c1: f64, c2: f64, clip: f64) -> f64 {
    c1 * (t_mbps / t_qos_mbps).clamp(0.0, clip) + c2 * (eps / eps_max).clamp(0.0, clip)
}

/// Weights and normalisers of the beamforming reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfParams {
    pub c1: f64,
    pub c2: f64,
    pub clip: f64,
    pub eps_max: f64,
}

/// Efficiency of one cell: summed link rate of its UEs over its input power (Mbps/W).
pub fn cell_efficiency(state: &NetworkState, bs: BsId) -> f64 {
    let rate: f64 = state.attached(bs).map(|u| u.link_rate_mbps).sum();
    rate / state.bs(bs).input_power_w()
}

/// System reward: sum over awake NR cells of the per-cell term, with the
/// throughput ratio averaged over the cell's UEs.
pub fn bf_reward(state: &NetworkState, p: &BfParams) -> f64 {
    let mut total = 0.0;
    for b in state.base_stations.iter().filter(|b| b.rat == Rat::Nr && b.awake) {
        let ues: Vec<_> = state.attached(b.id).collect();
        if ues.is_empty() {
            continue;
        }
        let ratio = ues
            .iter()
            .map(|u| (u.link_rate_mbps / u.traffic.throughput_req_mbps).clamp(0.0, p.clip))
            .sum::<f64>()
            / ues.len() as f64;
        let eps = (cell_efficiency(state, b.id) / p.eps_max).clamp(0.0, p.clip);
        total += p.c1 * ratio + p.c2 * eps;
    }
    total
}

#[derive(Debug, Clone)]
struct Pending {
    bs: BsId,
    ue: UeId,
    state: Vec<f64>,
    action: usize,
}

#[derive(Debug, Clone)]
pub struct Beamforming {
    pub agent: DqnAgent,
    cells: Vec<BsId>,
    candidates: Vec<f64>,
    beams: usize,
    params: BfParams,
    distance_ref_m: f64,
    train_steps_per_slot: usize,
    cursor: Vec<usize>,
    pending: Vec<Pending>,
}

impl Beamforming {
    pub fn new(cfg: &ScenarioConfig, sim: &Simulator, schedule: TrainSchedule, seed: u64) -> Result<Self> {
        let st = sim.state();
        let cells: Vec<BsId> = st.base_stations.iter().filter(|b| b.rat == Rat::Nr).map(|b| b.id).collect();
        let mut candidates = cfg.power.nr_candidates_dbm.clone();
        candidates.sort_by(f64::total_cmp);
        let beams = cfg.topology.codebook_size;
        let eps_max = Self::eps_max(cfg, &candidates)?;
        let agent = DqnAgent::new(
            &[Self::state_dim_for(candidates.len()), cfg.rl.xapp_hidden, beams * POWER_STEPS.len()],
            schedule,
            seed,
        )?;
        Ok(Self {
            agent,
            cursor: vec![0; st.base_stations.len()],
            cells,
            candidates,
            beams,
            params: BfParams {
                c1: cfg.xapps.bf_c1,
                c2: cfg.xapps.bf_c2,
                clip: cfg.xapps.bf_ratio_clip,
                eps_max,
            },
            distance_ref_m: cfg.xapps.bf_distance_ref_m,
            train_steps_per_slot: cfg.xapps.bf_train_steps_per_slot.max(1),
            pending: Vec::new(),
        })
    }

    /// Best-case cell efficiency: the full 30 GHz band at the reference SINR,
    /// drawn at the lowest candidate power.
    pub fn eps_max(cfg: &ScenarioConfig, candidates: &[f64]) -> Result<f64> {
        let w = cfg.channel.nr_mmwave.bandwidth_mhz;
        let se = (1.0 + 10f64.powf(cfg.xapps.bf_eps_max_sinr_db / 10.0)).log2();
        let p_min = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        let model = crate::netsim::PowerModel::from_config(&cfg.power.small_cell);
        Ok(w * se / model.input_power(crate::netsim::dbm_to_w(p_min))?)
    }

    pub fn params(&self) -> &BfParams {
        &self.params
    }

    pub fn state_dim_for(n_candidates: usize) -> usize {
        3 + n_candidates + 1
    }

    pub fn action_count(&self) -> usize {
        self.beams * POWER_STEPS.len()
    }

    pub fn decode_action(action: usize) -> (usize, i32) {
        (action / POWER_STEPS.len(), POWER_STEPS[action % POWER_STEPS.len()])
    }

    pub fn encode_action(beam: usize, step: i32) -> usize {
        beam * POWER_STEPS.len() + (step + 1) as usize
    }

    /// Candidate-set position closest to `dbm`.
    pub fn power_index(&self, dbm: f64) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.candidates.iter().enumerate() {
            let d = (p - dbm).abs();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    /// Steps `idx` by `step` inside the candidate set; the flag is set when clamped.
    pub fn step_power(&self, idx: usize, step: i32) -> (usize, bool) {
        let target = idx as i64 + step as i64;
        let clamped = target.clamp(0, self.candidates.len() as i64 - 1);
        (clamped as usize, clamped != target)
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    /// UE direction cosines, normalised distance, power one-hot, cell load in UEs.
    pub fn encode_state(&self, sim: &Simulator, bs: BsId, ue: UeId, power_idx: usize, n_attached: usize) -> Vec<f64> {
        let b = sim.state().bs(bs).position;
        let u = sim.state().ue(ue).position;
        let (dx, dy) = (u[0] - b[0], u[1] - b[1]);
        let d = dx.hypot(dy).max(1e-9);
        let mut v = Vec::with_capacity(Self::state_dim_for(self.candidates.len()));
        v.extend_from_slice(&[dx / d, dy / d, d / self.distance_ref_m]);
        for i in 0..self.candidates.len() {
            v.push(if i == power_idx { 1.0 } else { 0.0 });
        }
        v.push(n_attached as f64 / 20.0);
        v
    }

    /// Beam, band and power directives for every awake NR cell. UEs steered in
    /// this slot are counted at their new cell.
    pub fn decide(
        &mut self,
        sim: &Simulator,
        awake: &[bool],
        steering: &ControlVector,
        epsilon: f64,
    ) -> Result<(ControlVector, usize)> {
        let st = sim.state();
        let mut c = ControlVector::default();
        let mut clamped = 0;
        self.pending.clear();
        let predicted: Vec<Option<BsId>> = st
            .ues
            .iter()
            .map(|u| steering.steer.iter().rev().find(|(id, _)| *id == u.id).map(|(_, b)| *b).or(u.primary()))
            .collect();
        for &cell in &self.cells.clone() {
            if !awake[cell.0] {
                continue;
            }
            let bs = st.bs(cell);
            if bs.band != Band::NrMmWave {
                c.band.push((cell, Band::NrMmWave));
            }
            let attached: Vec<UeId> =
                st.ues.iter().filter(|u| predicted[u.id.0] == Some(cell)).map(|u| u.id).collect();
            if attached.is_empty() {
                continue;
            }
            let p_idx = self.power_index(bs.tx_power_dbm);
            let k = self.cursor[cell.0] % attached.len();
            self.cursor[cell.0] = self.cursor[cell.0].wrapping_add(1);
            // The designated UE also sets the cell's power step; every UE gets
            // an epsilon-greedy beam.
            let mut step = 0;
            let mut chosen = Vec::with_capacity(attached.len());
            for (i, ue) in attached.iter().enumerate() {
                let state = self.encode_state(sim, cell, *ue, p_idx, attached.len());
                let action = self.agent.act(&state, epsilon, None)?;
                let (beam, s) = Self::decode_action(action);
                if i == k {
                    step = s;
                }
                c.beams.push((cell, *ue, beam));
                chosen.push((*ue, state, beam));
            }
            let (new_idx, was_clamped) = self.step_power(p_idx, step);
            clamped += was_clamped as usize;
            let new_dbm = self.candidates[new_idx];
            if new_dbm != bs.tx_power_dbm {
                c.tx_power_dbm.push((cell, new_dbm));
            }
            for (ue, state, beam) in chosen {
                self.pending.push(Pending { bs: cell, ue, state, action: Self::encode_action(beam, step) });
            }
        }
        Ok((c, clamped))
    }

    /// Reward of one decision: the UE's rate against its class requirement and
    /// the serving cell's efficiency.
    pub fn decision_reward(&self, state: &NetworkState, bs: BsId, ue: UeId) -> f64 {
        let u = state.ue(ue);
        let p = &self.params;
        bf_term(
            u.link_rate_mbps,
            u.traffic.throughput_req_mbps,
            cell_efficiency(state, bs),
            p.eps_max,
            p.c1,
            p.c2,
            p.clip,
        )
    }

    pub fn clear(&mut self) {
        self.pending.clear();
    }

    pub fn settle(&mut self, sim: &Simulator, learn: bool) -> Result<Option<f64>> {
        if self.pending.is_empty() {
            return Ok(None);
        }
        let pending = std::mem::take(&mut self.pending);
        let n = pending.len();
        let mut total = 0.0;
        let st = sim.state();
        for p in pending {
            let reward = self.decision_reward(st, p.bs, p.ue);
            total += reward;
            if learn {
                let n_att = st.attached(p.bs).count();
                let next_state = self.encode_state(sim, p.bs, p.ue, self.power_index(st.bs(p.bs).tx_power_dbm), n_att);
                self.agent.remember(Experience {
                    state: p.state,
                    action: p.action,
                    reward,
                    next_state,
                    terminal: false,
                    next_mask: None,
                });
            }
        }
        if learn {
            for _ in 0..self.train_steps_per_slot {
                self.agent.learn()?;
            }
        }
        Ok(Some(total / n as f64))
    }
}
