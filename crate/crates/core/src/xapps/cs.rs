//! Cell sleeping: a joint ON/OFF decision for the small cells every period,
//! rewarded with energy efficiency minus an overload penalty.

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::netsim::{BsId, ControlVector, KpiSample, Rat, Simulator};
use crate::rl::{DqnAgent, Experience, TrainSchedule};

/// `EE - theta * b_u` for one slot.
pub fn cs_reward(k: &KpiSample, theta: f64) -> f64 {
    k.energy_efficiency - theta * k.overloaded_bs as f64
}

/// Queue lengths are squashed as `ln(1 + q) / ln(1 + QUEUE_SCALE)`, capped at 1.
const QUEUE_SCALE: f64 = 1000.0;

#[derive(Debug, Clone)]
struct Pending {
    state: Vec<f64>,
    action: usize,
    reward_sum: f64,
    slots: usize,
}

#[derive(Debug, Clone)]
pub struct CellSleeping {
    pub agent: DqnAgent,
    cells: Vec<BsId>,
    period: usize,
    theta: f64,
    pending: Option<Pending>,
}

impl CellSleeping {
    pub fn new(cfg: &ScenarioConfig, sim: &Simulator, schedule: TrainSchedule, seed: u64) -> Result<Self> {
        let cells: Vec<BsId> = sim.state().base_stations.iter().filter(|b| b.rat == Rat::Nr).map(|b| b.id).collect();
        let agent = DqnAgent::new(&[2 * cells.len(), cfg.rl.xapp_hidden, 1 << cells.len()], schedule, seed)?;
        Ok(Self { agent, cells, period: cfg.xapps.cs_period_slots.max(1), theta: cfg.xapps.cs_theta, pending: None })
    }

    /// Cells this agent may switch off.
    pub fn cells(&self) -> &[BsId] {
        &self.cells
    }

    pub fn action_count(&self) -> usize {
        1 << self.cells.len()
    }

    /// `{q_L, L_R}` for every sleep candidate.
    pub fn encode_state(&self, sim: &Simulator) -> Vec<f64> {
        let st = sim.state();
        let mut v = Vec::with_capacity(2 * self.cells.len());
        for b in &self.cells {
            let q = st.queue_len[b.0] as f64;
            v.push(((1.0 + q).ln() / (1.0 + QUEUE_SCALE).ln()).min(1.0));
            v.push(st.load_ratio[b.0]);
        }
        v
    }

    /// Bit i of the action set means cell i stays ON.
    pub fn decode_action(&self, action: usize) -> Vec<(BsId, bool)> {
        self.cells.iter().enumerate().map(|(i, b)| (*b, action >> i & 1 == 1)).collect()
    }

    pub fn encode_action(&self, flags: &[(BsId, bool)]) -> usize {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let on = flags.iter().find(|(id, _)| id == b).map(|(_, on)| *on).unwrap_or(true);
                (on as usize) << i
            })
            .sum()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// New decision at period boundaries; otherwise the previous one holds.
    pub fn decide(&mut self, sim: &Simulator, epsilon: f64, learn: bool) -> Result<ControlVector> {
        if self.pending.as_ref().is_some_and(|p| p.slots < self.period) {
            return Ok(ControlVector::default());
        }
        self.flush(sim, learn)?;
        let state = self.encode_state(sim);
        let action = self.agent.act(&state, epsilon, None)?;
        self.pending = Some(Pending { state, action, reward_sum: 0.0, slots: 0 });
        Ok(ControlVector { awake: self.decode_action(action), ..Default::default() })
    }

    /// Adds this slot's reward to the open decision and returns it.
    pub fn accumulate(&mut self, sim: &Simulator) -> f64 {
        let r = cs_reward(&sim.state().kpis, self.theta);
        if let Some(p) = &mut self.pending {
            p.reward_sum += r;
            p.slots += 1;
        }
        r
    }

    /// Closes the open decision with the mean reward of the slots it covered.
    pub fn flush(&mut self, sim: &Simulator, learn: bool) -> Result<()> {
        let Some(p) = self.pending.take() else {
            return Ok(());
        };
        if learn && p.slots > 0 {
            self.agent.remember(Experience {
                state: p.state,
                action: p.action,
                reward: p.reward_sum / p.slots as f64,
                next_state: self.encode_state(sim),
                terminal: false,
                next_mask: None,
            });
            self.agent.learn()?;
        }
        Ok(())
    }
}
