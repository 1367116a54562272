//! Hierarchical DQN orchestration: a meta-controller turns operator intents
//! into KPI goals and a controller picks the active xApp subset every few
//! slots, masked to subsets able to move the goal KPI.

pub mod goal;
pub mod intent;

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::{OrchestratorConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::netsim::{KpiLogRow, KpiSample, NetworkState, Simulator};
use crate::rl::{DqnAgent, Experience, TrainSchedule};
use crate::seed::stream_seed;
use crate::xapps::{capability_mask, Kpi, SlotPolicy, XAppSet, XAppSuite};

pub use goal::{controller_state, extrinsic_reward, intrinsic_reward, kpi_value, meta_emit_goal, state_dim, Goal};
pub use intent::{parse_intent, Direction, Intent, IntentKpi, GRAMMAR_HINT};

/// One row of the goal/decision audit log, written for every slot a goal is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub slot: u64,
    pub intent_id: u64,
    pub kpi: String,
    pub target: f64,
    pub subset_chosen: String,
    pub r_in: f64,
    pub r_ex_on_close: Option<f64>,
}

pub fn write_audit_csv<W: Write>(out: W, rows: &[AuditRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["slot", "intent_id", "kpi", "target", "subset_chosen", "r_in", "r_ex_on_close"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_audit_csv<R: std::io::Read>(input: R) -> Result<Vec<AuditRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// A controller decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Slot the subset takes effect in.
    pub slot: u64,
    pub intent_id: u64,
    pub kpi: Kpi,
    pub subset: XAppSet,
    /// Rounds since the intent arrived, starting at 1.
    pub round: usize,
}

impl Selection {
    /// V(O) = 1 for the goal KPI.
    pub fn valid(&self) -> bool {
        !self.subset.is_empty() && self.subset.capable(self.kpi)
    }
}

/// Snapshot for status endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrchestratorStatus {
    pub slot: u64,
    pub goal: Option<Goal>,
    pub intent: Option<String>,
    /// Recent KPI mean over the goal target.
    pub progress: Option<f64>,
    pub goal_level: Option<f64>,
    pub active_xapps: String,
    pub slots_into_goal: usize,
}

#[derive(Debug, Clone)]
struct Round {
    state: Vec<f64>,
    action: usize,
    reward_sum: f64,
    slots: usize,
}

#[derive(Debug, Clone)]
struct ActiveGoal {
    goal: Goal,
    intent: Intent,
    meta_state: Vec<f64>,
    meta_action: usize,
    /// Target the controller's gap feature is computed against.
    sub_target: f64,
    r_in: Vec<f64>,
    round: Option<Round>,
    rounds: usize,
}

#[derive(Debug, Clone)]
pub struct Orchestrator {
    pub controller: DqnAgent,
    pub meta: DqnAgent,
    cfg: OrchestratorConfig,
    history: VecDeque<KpiSample>,
    active: Option<ActiveGoal>,
    subset: XAppSet,
    next_intent_id: u64,
    /// Rounds-since-intent counter kept across goal re-emission.
    intent_rounds: usize,
    pub audit: Vec<AuditRow>,
    pub selections: Vec<Selection>,
}

impl Orchestrator {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Result<Self> {
        let mut schedule = TrainSchedule::from_config(&cfg.rl);
        let o = &cfg.orchestrator;
        schedule.decay_period = o.epsilon_decay_period.max(1);
        let dim = state_dim();
        let meta_actions = o.goal_levels.len() * o.horizon_scales.len();
        Ok(Self {
            controller: DqnAgent::new(
                &[dim, cfg.rl.controller_hidden, crate::xapps::SUBSETS.len()],
                schedule.clone(),
                stream_seed(seed, "controller"),
            )?,
            meta: DqnAgent::new(&[dim, cfg.rl.xapp_hidden, meta_actions], schedule, stream_seed(seed, "meta"))?,
            cfg: o.clone(),
            history: VecDeque::with_capacity(o.baseline_window + 1),
            active: None,
            subset: XAppSet::EMPTY,
            next_intent_id: 1,
            intent_rounds: 0,
            audit: Vec::new(),
            selections: Vec::new(),
        })
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.cfg
    }

    pub fn active_subset(&self) -> XAppSet {
        self.subset
    }

    pub fn goal(&self) -> Option<&Goal> {
        self.active.as_ref().map(|a| &a.goal)
    }

    pub fn history(&self) -> impl Iterator<Item = &KpiSample> {
        self.history.iter()
    }

    /// Clears goals, history and logs; learned weights are kept.
    pub fn reset(&mut self) {
        self.history.clear();
        self.active = None;
        self.subset = XAppSet::EMPTY;
        self.next_intent_id = 1;
        self.intent_rounds = 0;
        self.audit.clear();
        self.selections.clear();
    }

    pub fn end_episode(&mut self) {
        self.controller.end_episode();
        self.meta.end_episode();
    }

    /// (goal level, horizon scale) of meta action `a`.
    pub fn meta_action(&self, a: usize) -> (f64, f64) {
        let h = self.cfg.horizon_scales.len();
        (self.cfg.goal_levels[a / h], self.cfg.horizon_scales[a % h])
    }

    fn recent_kpi(&self, kpi: Kpi) -> Option<f64> {
        let n = self.cfg.reselect_slots.min(self.history.len());
        if n == 0 {
            return None;
        }
        Some(self.history.iter().rev().take(n).map(|k| kpi_value(k, kpi)).sum::<f64>() / n as f64)
    }

    fn state_for(&self, state: &NetworkState, kpi: Kpi, target: f64) -> Vec<f64> {
        let current = self.recent_kpi(kpi).unwrap_or(target);
        controller_state(state, kpi, target, current)
    }

    /// Accepts an intent at the current slot boundary, preempting any active
    /// goal. Returns the intent id.
    pub fn submit_intent(&mut self, intent: Intent, state: &NetworkState, explore: bool, learn: bool) -> Result<u64> {
        let window = self.cfg.baseline_window;
        let history: Vec<KpiSample> = self.history.iter().copied().collect();
        let id = self.next_intent_id;
        let goal = meta_emit_goal(&intent, id, &history, window, self.cfg.tau_slots)?;
        self.next_intent_id += 1;
        self.close_goal(state, learn)?;
        self.intent_rounds = 0;
        self.open_goal(goal, intent, state, explore)?;
        Ok(id)
    }

    fn open_goal(&mut self, mut goal: Goal, intent: Intent, state: &NetworkState, explore: bool) -> Result<()> {
        let meta_state = self.state_for(state, goal.kpi, goal.target_value);
        let eps = if explore { self.meta.epsilon() } else { 0.0 };
        let meta_action = self.meta.act(&meta_state, eps, None)?;
        let (level, scale) = self.meta_action(meta_action);
        goal.horizon = ((self.cfg.tau_slots as f64 * scale).round() as usize).max(1);
        let sub_target = goal.baseline_value * (1.0 + level * intent.magnitude / 100.0);
        self.active =
            Some(ActiveGoal { goal, intent, meta_state, meta_action, sub_target, r_in: Vec::new(), round: None, rounds: 0 });
        Ok(())
    }

    /// Ends the active goal, crediting the meta-controller with the mean
    /// intrinsic reward collected so far.
    fn close_goal(&mut self, state: &NetworkState, learn: bool) -> Result<Option<f64>> {
        self.close_round(state, learn, true)?;
        let Some(a) = self.active.take() else {
            return Ok(None);
        };
        let r_ex = match extrinsic_reward(&a.r_in) {
            Ok(r) => r,
            Err(Error::EmptyHistory) => return Ok(None),
            Err(e) => return Err(e),
        };
        if learn {
            let next_state = self.state_for(state, a.goal.kpi, a.goal.target_value);
            self.meta.remember(Experience {
                state: a.meta_state,
                action: a.meta_action,
                reward: r_ex,
                next_state,
                terminal: true,
                next_mask: None,
            });
            self.meta.learn()?;
        }
        if let Some(row) = self.audit.last_mut().filter(|r| r.intent_id == a.goal.intent_id) {
            row.r_ex_on_close = Some(r_ex);
        }
        Ok(Some(r_ex))
    }

    fn close_round(&mut self, state: &NetworkState, learn: bool, terminal: bool) -> Result<()> {
        let Some(a) = self.active.as_mut() else {
            return Ok(());
        };
        let Some(round) = a.round.take() else {
            return Ok(());
        };
        if learn && round.slots > 0 {
            let (kpi, sub_target) = (a.goal.kpi, a.sub_target);
            let next_state = self.state_for(state, kpi, sub_target);
            self.controller.remember(Experience {
                state: round.state,
                action: round.action,
                reward: round.reward_sum / round.slots as f64,
                next_state,
                terminal,
                next_mask: Some(capability_mask(kpi).to_vec()),
            });
            self.controller.learn()?;
        }
        Ok(())
    }

    /// Picks the subset for the coming slot: a new controller decision at
    /// round boundaries, nothing active while no goal is set.
    pub fn begin_slot(&mut self, state: &NetworkState, explore: bool) -> Result<XAppSet> {
        let Some(a) = self.active.as_ref() else {
            self.subset = XAppSet::EMPTY;
            return Ok(self.subset);
        };
        if a.round.is_some() {
            return Ok(self.subset);
        }
        let (kpi, sub_target, intent_id) = (a.goal.kpi, a.sub_target, a.goal.intent_id);
        let s = self.state_for(state, kpi, sub_target);
        let mask = capability_mask(kpi);
        let eps = if explore { self.controller.epsilon() } else { 0.0 };
        let action = self.controller.act(&s, eps, Some(&mask))?;
        let subset = XAppSet::from_action(action)?;
        self.intent_rounds += 1;
        let sel = Selection { slot: state.slot + 1, intent_id, kpi, subset, round: self.intent_rounds };
        if !sel.valid() {
            return Err(Error::domain(format!("controller selected {subset} for a {} goal", kpi.name())));
        }
        self.selections.push(sel);
        let a = self.active.as_mut().expect("checked above");
        a.round = Some(Round { state: s, action, reward_sum: 0.0, slots: 0 });
        a.rounds += 1;
        self.subset = subset;
        Ok(subset)
    }

    /// Records the slot outcome: KPI history, intrinsic reward, round and
    /// horizon bookkeeping. A goal whose horizon ends is re-emitted for the
    /// same intent.
    pub fn end_slot(&mut self, state: &NetworkState, explore: bool, learn: bool) -> Result<()> {
        let k = state.kpis;
        self.history.push_back(k);
        while self.history.len() > self.cfg.baseline_window.max(self.cfg.reselect_slots) {
            self.history.pop_front();
        }
        let (rho, clip, delta) = (self.cfg.rho, self.cfg.p_clip, self.cfg.reselect_slots);
        let Some(a) = self.active.as_mut() else {
            return Ok(());
        };
        let r_in = intrinsic_reward(&k, &a.goal, rho, clip);
        a.r_in.push(r_in);
        let mut round_full = false;
        if let Some(round) = a.round.as_mut() {
            round.reward_sum += r_in;
            round.slots += 1;
            round_full = round.slots >= delta;
        }
        let horizon_done = a.r_in.len() >= a.goal.horizon;
        self.audit.push(AuditRow {
            slot: k.slot,
            intent_id: a.goal.intent_id,
            kpi: a.goal.kpi.name().to_string(),
            target: a.goal.target_value,
            subset_chosen: self.subset.label(),
            r_in,
            r_ex_on_close: None,
        });
        if horizon_done {
            let (goal, intent) = (a.goal, a.intent);
            self.close_goal(state, learn)?;
            self.open_goal(goal, intent, state, explore)?;
        } else if round_full {
            self.close_round(state, learn, false)?;
        }
        Ok(())
    }

    pub fn status(&self, slot: u64) -> OrchestratorStatus {
        let a = self.active.as_ref();
        OrchestratorStatus {
            slot,
            goal: a.map(|a| a.goal),
            intent: a.map(|a| a.intent.to_string()),
            progress: a.and_then(|a| self.recent_kpi(a.goal.kpi).map(|v| v / a.goal.target_value)),
            goal_level: a.map(|a| self.meta_action(a.meta_action).0),
            active_xapps: self.subset.label(),
            slots_into_goal: a.map(|a| a.r_in.len()).unwrap_or(0),
        }
    }
}

/// An intent scheduled at a slot boundary (after `slot` slots have run).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledIntent {
    pub slot: u64,
    pub intent: Intent,
}

pub fn schedule_intents(items: &[crate::config::TimedIntent]) -> Result<Vec<ScheduledIntent>> {
    let mut out: Vec<ScheduledIntent> = items
        .iter()
        .map(|t| Ok(ScheduledIntent { slot: t.slot, intent: parse_intent(&t.text, t.slot)? }))
        .collect::<Result<_>>()?;
    out.sort_by_key(|s| s.slot);
    Ok(out)
}

/// Exploration and learning settings of one HRL run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrlMode {
    pub train: bool,
    /// Exploration of the active xApps while training.
    pub xapp_epsilon: f64,
}

impl HrlMode {
    pub fn evaluate() -> Self {
        Self { train: false, xapp_epsilon: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub kpis: Vec<KpiLogRow>,
    pub audit: Vec<AuditRow>,
    pub selections: Vec<Selection>,
}

/// Runs one slot of the two-level loop: controller decision, xApp slot,
/// reward bookkeeping.
pub fn hrl_step(sim: &mut Simulator, suite: &mut XAppSuite, orch: &mut Orchestrator, mode: HrlMode) -> Result<KpiLogRow> {
    let subset = orch.begin_slot(sim.state(), mode.train)?;
    let policy = if mode.train {
        SlotPolicy { epsilon: [mode.xapp_epsilon; 3], learn: [true; 3] }
    } else {
        SlotPolicy::greedy()
    };
    let mut policy = policy;
    for id in crate::xapps::XAppId::ALL {
        policy.learn[id.index()] &= subset.contains(id);
    }
    suite.step(sim, subset, &policy)?;
    orch.end_slot(sim.state(), mode.train, mode.train)?;
    Ok(KpiLogRow::new(&sim.state().kpis, subset.label()))
}

/// One HRL episode of `slots` slots from the simulator's current state, with
/// intents injected at their slot boundaries.
pub fn hrl_episode(
    sim: &mut Simulator,
    suite: &mut XAppSuite,
    orch: &mut Orchestrator,
    intents: &[ScheduledIntent],
    slots: usize,
    mode: HrlMode,
) -> Result<EpisodeLog> {
    orch.reset();
    let mut kpis = Vec::with_capacity(slots);
    let mut next = 0;
    for _ in 0..slots {
        while next < intents.len() && intents[next].slot <= sim.state().slot {
            let mut intent = intents[next].intent;
            intent.issued_slot = sim.state().slot;
            orch.submit_intent(intent, sim.state(), mode.train, mode.train)?;
            next += 1;
        }
        kpis.push(hrl_step(sim, suite, orch, mode)?);
    }
    orch.close_goal(sim.state(), mode.train)?;
    suite.end_episode(sim, [false; 3])?;
    Ok(EpisodeLog { kpis, audit: std::mem::take(&mut orch.audit), selections: std::mem::take(&mut orch.selections) })
}
