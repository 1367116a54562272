use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::netsim::{KpiLogRow, KpiSample, Simulator};
use crate::orchestrator::{hrl_step, parse_intent, HrlMode, Orchestrator, OrchestratorStatus};
use crate::xapps::XAppSuite;

use super::{Trained, EVAL_EPISODE};

/// One line of the live KPI feed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedLine {
    /// Incremented by every reset; slots are monotone within an epoch.
    pub epoch: u64,
    pub slot: u64,
    pub kpis: KpiSample,
    pub active_xapps: String,
}

impl FeedLine {
    pub fn log_row(&self) -> KpiLogRow {
        KpiLogRow::new(&self.kpis, self.active_xapps.clone())
    }
}

/// A single evaluation run driven one slot at a time, with intents arriving
/// between slots. Equivalent to `hrl_episode` in evaluation mode on the
/// evaluation traffic stream.
pub struct LiveSession {
    trained: Trained,
    sim: Simulator,
    suite: XAppSuite,
    orch: Orchestrator,
    epoch: u64,
}

impl LiveSession {
    pub fn new(cfg: &ScenarioConfig, seed: u64, trained: Trained) -> Result<Self> {
        let mut sim = Simulator::new(cfg, seed, EVAL_EPISODE)?;
        sim.reset(EVAL_EPISODE);
        let mut orch = trained.orchestrator.clone();
        orch.reset();
        Ok(Self { suite: trained.suite.clone(), orch, trained, sim, epoch: 0 })
    }

    pub fn slot(&self) -> u64 {
        self.sim.state().slot
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Parses and submits an intent at the current slot boundary.
    pub fn submit(&mut self, text: &str) -> Result<u64> {
        let slot = self.slot();
        let intent = parse_intent(text, slot)?;
        self.orch.submit_intent(intent, self.sim.state(), false, false)
    }

    pub fn step(&mut self) -> Result<FeedLine> {
        let row = hrl_step(&mut self.sim, &mut self.suite, &mut self.orch, HrlMode::evaluate())?;
        Ok(self.line(&row))
    }

    fn line(&self, row: &KpiLogRow) -> FeedLine {
        FeedLine { epoch: self.epoch, slot: row.slot, kpis: row.sample(), active_xapps: row.active_xapps.clone() }
    }

    /// Back to slot 0 with the checkpointed agents.
    pub fn reset(&mut self) {
        self.sim.reset(EVAL_EPISODE);
        self.suite = self.trained.suite.clone();
        self.orch = self.trained.orchestrator.clone();
        self.orch.reset();
        self.epoch += 1;
    }

    pub fn status(&self) -> OrchestratorStatus {
        self.orch.status(self.slot())
    }

    pub fn orchestrator(&self) -> &Orchestrator {
        &self.orch
    }
}
