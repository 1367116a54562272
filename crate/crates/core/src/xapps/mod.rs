//! The three xApps (traffic steering, cell sleeping, beamforming) as MDP
//! adapters over the simulator, and the suite that runs an active subset
//! of them in a fixed order every slot.

pub mod bf;
pub mod cs;
pub mod ts;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::netsim::{Band, BsId, ControlVector, Rat, Simulator};
use crate::rl::TrainSchedule;
use crate::seed::stream_seed;

pub use bf::{bf_reward, bf_term, cell_efficiency, Beamforming, BfParams};
pub use cs::{cs_reward, CellSleeping};
pub use ts::TrafficSteering;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum XAppId {
    TrafficSteering,
    CellSleeping,
    Beamforming,
}

impl XAppId {
    pub const ALL: [XAppId; 3] = [XAppId::TrafficSteering, XAppId::CellSleeping, XAppId::Beamforming];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn short(self) -> &'static str {
        match self {
            XAppId::TrafficSteering => "TS",
            XAppId::CellSleeping => "CS",
            XAppId::Beamforming => "BF",
        }
    }

    pub fn capabilities(self) -> &'static [Kpi] {
        match self {
            XAppId::TrafficSteering => &[Kpi::Throughput, Kpi::Delay],
            XAppId::CellSleeping => &[Kpi::EnergyEfficiency],
            XAppId::Beamforming => &[Kpi::Throughput, Kpi::EnergyEfficiency],
        }
    }

    pub fn can_improve(self, kpi: Kpi) -> bool {
        self.capabilities().contains(&kpi)
    }
}

impl FromStr for XAppId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ts" | "traffic_steering" | "trafficsteering" => Ok(XAppId::TrafficSteering),
            "cs" | "cell_sleeping" | "cellsleeping" => Ok(XAppId::CellSleeping),
            "bf" | "beamforming" => Ok(XAppId::Beamforming),
            _ => Err(Error::UnknownXApp(s.to_string())),
        }
    }
}

impl fmt::Display for XAppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kpi {
    Throughput,
    EnergyEfficiency,
    Delay,
}

impl Kpi {
    pub const ALL: [Kpi; 3] = [Kpi::Throughput, Kpi::EnergyEfficiency, Kpi::Delay];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Kpi::Throughput => "throughput",
            Kpi::EnergyEfficiency => "energy_efficiency",
            Kpi::Delay => "delay",
        }
    }
}

/// A set of xApps as a bit mask (bit i = `XAppId::ALL[i]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct XAppSet(u8);

/// The seven non-empty subsets in controller action order.
pub const SUBSETS: [XAppSet; 7] =
    [XAppSet(0b001), XAppSet(0b010), XAppSet(0b100), XAppSet(0b011), XAppSet(0b101), XAppSet(0b110), XAppSet(0b111)];

impl XAppSet {
    pub const EMPTY: XAppSet = XAppSet(0);

    pub fn of(ids: &[XAppId]) -> Self {
        XAppSet(ids.iter().fold(0, |m, id| m | (1 << id.index())))
    }

    pub fn single(id: XAppId) -> Self {
        Self::of(&[id])
    }

    pub fn contains(self, id: XAppId) -> bool {
        self.0 & (1 << id.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn members(self) -> impl Iterator<Item = XAppId> {
        XAppId::ALL.into_iter().filter(move |id| self.contains(*id))
    }

    /// Controller action index of this subset.
    pub fn action_index(self) -> Option<usize> {
        SUBSETS.iter().position(|s| *s == self)
    }

    pub fn from_action(a: usize) -> Result<Self> {
        SUBSETS.get(a).copied().ok_or_else(|| Error::domain(format!("subset action {a} outside 0..7")))
    }

    /// V(O): some member can improve `kpi`.
    pub fn capable(self, kpi: Kpi) -> bool {
        self.members().any(|id| id.can_improve(kpi))
    }

    pub fn label(self) -> String {
        if self.is_empty() {
            return "-".to_string();
        }
        self.members().map(|m| m.short()).collect::<Vec<_>>().join("+")
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        if s.trim() == "-" {
            return Ok(Self::EMPTY);
        }
        let ids = s.split('+').map(XAppId::from_str).collect::<Result<Vec<_>>>()?;
        Ok(Self::of(&ids))
    }
}

impl fmt::Display for XAppSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Capability mask over the seven subsets for a goal KPI.
pub fn capability_mask(kpi: Kpi) -> [bool; 7] {
    let mut m = [false; 7];
    for (i, s) in SUBSETS.iter().enumerate() {
        m[i] = s.capable(kpi);
    }
    m
}

#[derive(Debug, Clone)]
pub struct XAppDescriptor {
    pub id: XAppId,
    pub capabilities: &'static [Kpi],
    pub active: bool,
}

/// Exploration and learning switches for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotPolicy {
    pub epsilon: [f64; 3],
    pub learn: [bool; 3],
}

impl SlotPolicy {
    pub fn greedy() -> Self {
        Self { epsilon: [0.0; 3], learn: [false; 3] }
    }

    pub fn uniform(epsilon: f64, learn: bool) -> Self {
        Self { epsilon: [epsilon; 3], learn: [learn; 3] }
    }
}

/// One row of an xApp training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub episode: usize,
    pub slot: u64,
    pub reward: f64,
    pub epsilon: f64,
    pub loss: Option<f64>,
}

pub fn write_train_log<W: Write>(out: W, rows: &[TrainLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["episode", "slot", "reward", "epsilon", "loss"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Controls applied when an xApp is not running: no steering override, every
/// cell awake, NR on the 3.5 GHz carrier at the largest candidate power.
pub fn default_controls(sim: &Simulator, active: XAppSet) -> ControlVector {
    let st = sim.state();
    let mut c = ControlVector::default();
    if !active.contains(XAppId::TrafficSteering) && st.ues.iter().any(|u| u.steering.is_some()) {
        c.clear_steering = true;
    }
    if !active.contains(XAppId::CellSleeping) {
        c.awake = st.base_stations.iter().filter(|b| !b.awake).map(|b| (b.id, true)).collect();
    }
    if !active.contains(XAppId::Beamforming) {
        let top = sim.nr_candidates_dbm().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for b in st.base_stations.iter().filter(|b| b.rat == Rat::Nr) {
            if b.band != Band::NrMid {
                c.band.push((b.id, Band::NrMid));
            }
            let p = top.min(crate::netsim::w_to_dbm(b.power_model.p_max_w));
            if b.tx_power_dbm != p {
                c.tx_power_dbm.push((b.id, p));
            }
        }
    }
    c
}

/// Per-slot outcome of the suite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuiteSlot {
    pub ts_reward: Option<f64>,
    pub cs_reward: Option<f64>,
    pub bf_reward: Option<f64>,
    /// Steering directives dropped because the target was put to sleep.
    pub ts_conflicts: usize,
    /// Power steps clamped at the edge of the candidate set.
    pub bf_clamped: usize,
}

/// All three xApps of one simulation instance.
#[derive(Debug, Clone)]
pub struct XAppSuite {
    pub ts: TrafficSteering,
    pub cs: CellSleeping,
    pub bf: Beamforming,
    episode: usize,
    pub logs: [Vec<TrainLogRow>; 3],
    pub record_logs: bool,
}

impl XAppSuite {
    pub fn new(cfg: &ScenarioConfig, sim: &Simulator, seed: u64) -> Result<Self> {
        let schedule = TrainSchedule::from_config(&cfg.rl);
        Ok(Self {
            ts: TrafficSteering::new(cfg, sim, schedule.clone(), stream_seed(seed, "agent-ts"))?,
            cs: CellSleeping::new(cfg, sim, schedule.clone(), stream_seed(seed, "agent-cs"))?,
            bf: Beamforming::new(cfg, sim, schedule, stream_seed(seed, "agent-bf"))?,
            episode: 0,
            logs: Default::default(),
            record_logs: false,
        })
    }

    pub fn episode(&self) -> usize {
        self.episode
    }

    /// Scheduled exploration rate of each agent.
    pub fn epsilons(&self) -> [f64; 3] {
        [self.ts.agent.epsilon(), self.cs.agent.epsilon(), self.bf.agent.epsilon()]
    }

    /// Runs one slot with `active` xApps deciding in the order TS, CS, BF,
    /// plus defaults for the inactive ones, then settles rewards.
    pub fn step(&mut self, sim: &mut Simulator, active: XAppSet, policy: &SlotPolicy) -> Result<SuiteSlot> {
        let mut out = SuiteSlot::default();
        if !active.contains(XAppId::CellSleeping) {
            self.cs.flush(sim, policy.learn[1])?;
        }
        let mut controls = default_controls(sim, active);

        let mut ts_ctrl = if active.contains(XAppId::TrafficSteering) {
            self.ts.decide(sim, policy.epsilon[0])?
        } else {
            ControlVector::default()
        };

        let mut awake: Vec<bool> = sim.state().base_stations.iter().map(|b| b.awake).collect();
        for (b, on) in &controls.awake {
            awake[b.0] = *on;
        }
        if active.contains(XAppId::CellSleeping) {
            let cs_ctrl = self.cs.decide(sim, policy.epsilon[1], policy.learn[1])?;
            for (b, on) in &cs_ctrl.awake {
                awake[b.0] = *on;
            }
            controls.merge(cs_ctrl);
        }
        // Steering toward a cell that is being put to sleep is dropped.
        let dropped: Vec<BsId> = ts_ctrl.steer.iter().filter(|(_, b)| !awake[b.0]).map(|(_, b)| *b).collect();
        if !dropped.is_empty() {
            out.ts_conflicts = self.ts.drop_conflicts(&awake);
            ts_ctrl.steer.retain(|(_, b)| awake[b.0]);
        }
        if active.contains(XAppId::Beamforming) {
            let (bf_ctrl, clamped) = self.bf.decide(sim, &awake, &ts_ctrl, policy.epsilon[2])?;
            out.bf_clamped = clamped;
            controls.merge(bf_ctrl);
        }
        controls.merge(ts_ctrl);

        sim.step(&controls)?;
        let slot = sim.state().slot;

        if active.contains(XAppId::TrafficSteering) {
            out.ts_reward = self.ts.settle(sim, policy.learn[0])?;
        }
        if active.contains(XAppId::CellSleeping) {
            out.cs_reward = Some(self.cs.accumulate(sim));
        }
        if active.contains(XAppId::Beamforming) {
            out.bf_reward = self.bf.settle(sim, policy.learn[2])?;
        }
        if self.record_logs {
            let eps = policy.epsilon;
            let losses = [self.ts.agent.last_loss, self.cs.agent.last_loss, self.bf.agent.last_loss];
            for (i, r) in [out.ts_reward, out.cs_reward, out.bf_reward].into_iter().enumerate() {
                if let Some(reward) = r {
                    self.logs[i].push(TrainLogRow { episode: self.episode, slot, reward, epsilon: eps[i], loss: losses[i] });
                }
            }
        }
        Ok(out)
    }

    /// Closes pending decisions and advances every agent's exploration schedule.
    pub fn end_episode(&mut self, sim: &Simulator, learn: [bool; 3]) -> Result<()> {
        self.cs.flush(sim, learn[1])?;
        self.ts.clear();
        self.bf.clear();
        for (i, l) in learn.iter().enumerate() {
            if *l {
                match i {
                    0 => self.ts.agent.end_episode(),
                    1 => self.cs.agent.end_episode(),
                    _ => self.bf.agent.end_episode(),
                }
            }
        }
        self.episode += 1;
        Ok(())
    }

    /// Writes one checkpoint file per agent into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.ts.agent.save(dir.join("ts.qnet"))?;
        self.cs.agent.save(dir.join("cs.qnet"))?;
        self.bf.agent.save(dir.join("bf.qnet"))?;
        Ok(())
    }

    pub fn load(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let read = |f: &str| -> Result<crate::rl::QNetwork> {
            crate::rl::QNetwork::from_text(&std::fs::read_to_string(dir.join(f))?)
        };
        self.ts.agent.set_network(read("ts.qnet")?)?;
        self.cs.agent.set_network(read("cs.qnet")?)?;
        self.bf.agent.set_network(read("bf.qnet")?)?;
        Ok(())
    }
}
