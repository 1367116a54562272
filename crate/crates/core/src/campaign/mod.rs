//! Multi-seed campaigns: per seed, train the xApps and the orchestrator,
//! evaluate every arm and baseline on a common traffic stream, then
//! aggregate with 95% confidence intervals and persist CSV/JSON artifacts.

pub mod session;
pub mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{evaluate_single, run_non_ml, train_joint, train_single};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::netsim::{read_kpi_csv, write_kpi_csv, KpiLogRow, KpiSummary, Simulator};
use crate::orchestrator::{
    hrl_episode, parse_intent, schedule_intents, write_audit_csv, AuditRow, HrlMode, Orchestrator, ScheduledIntent,
    Selection,
};
use crate::rl::QNetwork;
use crate::seed::stream_seed;
use crate::xapps::{Kpi, XAppId, XAppSuite};

pub use session::{FeedLine, LiveSession};
pub use stats::{relative_delta, Estimate};

/// Traffic stream shared by every evaluation run of a seed.
pub const EVAL_EPISODE: u64 = 1_000_000;
/// First traffic stream of orchestrator training.
pub const HRL_EPISODE_BASE: u64 = 10_000;
/// First traffic stream of joint xApp pretraining.
pub const JOINT_EPISODE_BASE: u64 = 5_000;
/// Intents drawn for orchestrator training episodes.
pub const TRAINING_INTENTS: [&str; 4] = [
    "increase throughput by 5%",
    "increase throughput by 10%",
    "increase energy efficiency by 10%",
    "decrease power consumption by 5%",
];
/// Controller rounds within which an intent must activate a responsive subset.
pub const RESPONSE_ROUNDS: usize = 3;

pub const NON_ML: &str = "non_ml";

pub fn single_run_name(id: XAppId) -> String {
    format!("single_{}", id.short().to_ascii_lowercase())
}

pub fn arm_run_name(arm: &str) -> String {
    format!("orchestrated_{arm}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Orchestrated arms together with the non-ML and single-xApp baselines.
    Orchestrated,
    Single(XAppId),
    NonMl,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "orchestrated" => Ok(Mode::Orchestrated),
            "non_ml" | "non-ml" | "nonml" => Ok(Mode::NonMl),
            _ => match s.strip_prefix("single:") {
                Some(id) => Ok(Mode::Single(id.parse()?)),
                None => Err(Error::Config(format!("unknown mode '{s}': expected orchestrated, non_ml or single:<ts|cs|bf>"))),
            },
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Orchestrated => f.write_str("orchestrated"),
            Mode::NonMl => f.write_str(NON_ML),
            Mode::Single(id) => write!(f, "single:{}", id.short().to_ascii_lowercase()),
        }
    }
}

/// Whether one intent of an evaluation arm got a responsive subset in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResponse {
    pub arm: String,
    /// Position of the intent in the arm's timeline.
    pub index: usize,
    pub intent: String,
    pub kpi: Kpi,
    /// Round (1-based) of the first responsive selection, if within the limit.
    pub first_round: Option<usize>,
}

impl IntentResponse {
    pub fn responded(&self) -> bool {
        self.first_round.is_some()
    }
}

/// xApp a goal on `kpi` is expected to bring in.
pub fn responsive_xapp(kpi: Kpi) -> XAppId {
    match kpi {
        Kpi::Throughput | Kpi::Delay => XAppId::TrafficSteering,
        Kpi::EnergyEfficiency => XAppId::CellSleeping,
    }
}

/// First round within `limit` whose subset contains the responsive xApp.
pub fn response_round(selections: &[Selection], intent_id: u64, kpi: Kpi, limit: usize) -> Option<usize> {
    let want = responsive_xapp(kpi);
    selections
        .iter()
        .filter(|s| s.intent_id == intent_id && s.round <= limit)
        .find(|s| s.subset.contains(want))
        .map(|s| s.round)
}

/// Trained agents of one seed.
#[derive(Debug, Clone)]
pub struct Trained {
    pub suite: XAppSuite,
    pub orchestrator: Orchestrator,
}

impl Trained {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.suite.save(dir)?;
        self.orchestrator.controller.save(dir.join("controller.qnet"))?;
        self.orchestrator.meta.save(dir.join("meta.qnet"))?;
        Ok(())
    }

    /// Fresh agents for `cfg`/`seed` with networks read from `dir`.
    pub fn load(cfg: &ScenarioConfig, sim: &Simulator, seed: u64, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut suite = XAppSuite::new(cfg, sim, seed)?;
        suite.load(dir)?;
        let mut orchestrator = Orchestrator::new(cfg, seed)?;
        let read = |f: &str| -> Result<QNetwork> { QNetwork::from_text(&fs::read_to_string(dir.join(f))?) };
        orchestrator.controller.set_network(read("controller.qnet")?)?;
        orchestrator.meta.set_network(read("meta.qnet")?)?;
        Ok(Self { suite, orchestrator })
    }
}

/// Intents of orchestrator training episode `episode`: one after the
/// baseline window and a second, preempting one halfway through the rest.
pub fn training_intents(cfg: &ScenarioConfig, seed: u64, episode: u64) -> Result<Vec<ScheduledIntent>> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "hrl-intents") ^ episode);
    let warm = cfg.orchestrator.baseline_window as u64;
    let second = warm + (cfg.training.hrl_episode_slots as u64).saturating_sub(warm) / 2;
    [warm, second]
        .into_iter()
        .map(|slot| {
            let text = TRAINING_INTENTS[rng.random_range(0..TRAINING_INTENTS.len())];
            Ok(ScheduledIntent { slot, intent: parse_intent(text, slot)? })
        })
        .collect()
}

/// Pretrains each xApp alone, then trains the orchestrator over the
/// configured HRL episodes.
pub fn train_agents(cfg: &ScenarioConfig, sim: &mut Simulator, seed: u64) -> Result<Trained> {
    let mut suite = XAppSuite::new(cfg, sim, seed)?;
    for id in XAppId::ALL {
        train_single(cfg, sim, &mut suite, id, 1)?;
    }
    train_joint(cfg, sim, &mut suite, JOINT_EPISODE_BASE)?;
    let orchestrator = train_orchestrator(cfg, sim, &mut suite, seed)?;
    Ok(Trained { suite, orchestrator })
}

pub fn train_orchestrator(cfg: &ScenarioConfig, sim: &mut Simulator, suite: &mut XAppSuite, seed: u64) -> Result<Orchestrator> {
    let mut orch = Orchestrator::new(cfg, seed)?;
    let mode = HrlMode { train: true, xapp_epsilon: cfg.training.hrl_xapp_epsilon };
    for ep in 0..cfg.training.hrl_episodes as u64 {
        sim.reset(HRL_EPISODE_BASE + ep);
        let intents = training_intents(cfg, seed, ep)?;
        hrl_episode(sim, suite, &mut orch, &intents, cfg.training.hrl_episode_slots, mode)?;
        orch.end_episode();
    }
    Ok(orch)
}

/// Everything produced for one seed.
#[derive(Debug, Clone, Default)]
pub struct SeedRun {
    pub seed: u64,
    /// KPI logs by run name.
    pub runs: BTreeMap<String, Vec<KpiLogRow>>,
    /// Audit logs by arm name.
    pub audits: BTreeMap<String, Vec<AuditRow>>,
    pub selections: BTreeMap<String, Vec<Selection>>,
    pub responses: Vec<IntentResponse>,
    pub trained: Option<Trained>,
}

impl SeedRun {
    pub fn summaries(&self, measure_from: usize) -> BTreeMap<String, KpiSummary> {
        self.runs.iter().map(|(k, rows)| (k.clone(), summarize_rows(rows, measure_from))).collect()
    }
}

/// KPI means over rows from `measure_from` on.
pub fn summarize_rows(rows: &[KpiLogRow], measure_from: usize) -> KpiSummary {
    let from = measure_from.min(rows.len());
    let samples: Vec<_> = rows[from..].iter().map(|r| r.sample()).collect();
    KpiSummary::of(&samples)
}

/// Evaluates the trained orchestrator on every configured arm.
pub fn evaluate_arms(cfg: &ScenarioConfig, sim: &mut Simulator, trained: &Trained, out: &mut SeedRun) -> Result<()> {
    for arm in &cfg.evaluation.arms {
        let intents = schedule_intents(&arm.intents)?;
        let mut suite = trained.suite.clone();
        let mut orch = trained.orchestrator.clone();
        sim.reset(EVAL_EPISODE);
        let log = hrl_episode(sim, &mut suite, &mut orch, &intents, cfg.evaluation.slots, HrlMode::evaluate())?;
        // Intent ids are handed out in submission order.
        for (index, si) in intents.iter().enumerate() {
            let id = index as u64 + 1;
            let kpi = si.intent.goal_kpi();
            out.responses.push(IntentResponse {
                arm: arm.name.clone(),
                index,
                intent: si.intent.to_string(),
                kpi,
                first_round: response_round(&log.selections, id, kpi, RESPONSE_ROUNDS),
            });
        }
        out.runs.insert(arm_run_name(&arm.name), log.kpis);
        out.audits.insert(arm.name.clone(), log.audit);
        out.selections.insert(arm.name.clone(), log.selections);
    }
    Ok(())
}

pub fn run_seed(cfg: &ScenarioConfig, seed: u64, mode: Mode) -> Result<SeedRun> {
    let mut sim = Simulator::new(cfg, seed, 0)?;
    let mut out = SeedRun { seed, ..Default::default() };
    if matches!(mode, Mode::Orchestrated | Mode::NonMl) {
        sim.reset(EVAL_EPISODE);
        out.runs.insert(NON_ML.to_string(), run_non_ml(&mut sim, &cfg.baseline, cfg.evaluation.slots)?);
    }
    match mode {
        Mode::NonMl => {}
        Mode::Single(id) => {
            let mut suite = XAppSuite::new(cfg, &sim, seed)?;
            train_single(cfg, &mut sim, &mut suite, id, 1)?;
            out.runs.insert(single_run_name(id), evaluate_single(cfg, &mut sim, &mut suite, id, EVAL_EPISODE)?);
        }
        Mode::Orchestrated => {
            let mut suite = XAppSuite::new(cfg, &sim, seed)?;
            for id in XAppId::ALL {
                train_single(cfg, &mut sim, &mut suite, id, 1)?;
            }
            for id in XAppId::ALL {
                let mut probe = suite.clone();
                out.runs.insert(single_run_name(id), evaluate_single(cfg, &mut sim, &mut probe, id, EVAL_EPISODE)?);
            }
            train_joint(cfg, &mut sim, &mut suite, JOINT_EPISODE_BASE)?;
            let orchestrator = train_orchestrator(cfg, &mut sim, &mut suite, seed)?;
            let trained = Trained { suite, orchestrator };
            evaluate_arms(cfg, &mut sim, &trained, &mut out)?;
            out.trained = Some(trained);
        }
    }
    Ok(out)
}

pub fn run_seeds_sequential(cfg: &ScenarioConfig, seeds: &[u64], mode: Mode) -> Vec<Result<SeedRun>> {
    seeds.iter().map(|s| run_seed(cfg, *s, mode)).collect()
}

#[cfg(feature = "parallel")]
pub fn run_seeds_parallel(cfg: &ScenarioConfig, seeds: &[u64], mode: Mode) -> Vec<Result<SeedRun>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|s| run_seed(cfg, *s, mode)).collect()
}

/// Runs seeds on the rayon pool when the `parallel` feature is on.
pub fn run_seeds(cfg: &ScenarioConfig, seeds: &[u64], mode: Mode) -> Vec<Result<SeedRun>> {
    #[cfg(feature = "parallel")]
    {
        run_seeds_parallel(cfg, seeds, mode)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_seeds_sequential(cfg, seeds, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub throughput_mbps: Estimate,
    pub energy_efficiency: Estimate,
    pub total_power_w: Estimate,
    pub mean_delay_ms: Estimate,
    pub qos_violations: Estimate,
}

impl RunStats {
    pub fn of(summaries: &[KpiSummary]) -> Self {
        let col = |f: fn(&KpiSummary) -> f64| Estimate::of(&summaries.iter().map(f).collect::<Vec<_>>());
        Self {
            throughput_mbps: col(|s| s.throughput_mbps),
            energy_efficiency: col(|s| s.energy_efficiency),
            total_power_w: col(|s| s.total_power_w),
            mean_delay_ms: col(|s| s.mean_delay_ms),
            qos_violations: col(|s| s.qos_violations),
        }
    }

    pub fn kpi(&self, kpi: Kpi) -> &Estimate {
        match kpi {
            Kpi::Throughput => &self.throughput_mbps,
            Kpi::EnergyEfficiency => &self.energy_efficiency,
            Kpi::Delay => &self.mean_delay_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub run: String,
    pub baseline: String,
    pub kpi: Kpi,
    pub relative: f64,
    /// 95% intervals of the two runs do not overlap.
    pub ci_disjoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub runs: BTreeMap<String, KpiSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRate {
    pub responded: usize,
    pub total: usize,
}

impl ResponseRate {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.responded as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub mode: String,
    pub seeds: Vec<u64>,
    pub measure_from: usize,
    pub per_seed: Vec<SeedSummary>,
    pub runs: BTreeMap<String, RunStats>,
    pub deltas: Vec<Delta>,
    /// Keyed `<arm>#<intent index>`.
    pub intent_response: BTreeMap<String, ResponseRate>,
    pub selections: usize,
    pub selection_violations: usize,
}

impl CampaignResult {
    pub fn delta(&self, run: &str, baseline: &str, kpi: Kpi) -> Option<&Delta> {
        self.deltas.iter().find(|d| d.run == run && d.baseline == baseline && d.kpi == kpi)
    }
}

/// Aggregates per-seed summaries; deltas compare every orchestrated arm with
/// every baseline run on throughput and energy efficiency.
pub fn aggregate(mode: Mode, measure_from: usize, per_seed: Vec<SeedSummary>) -> CampaignResult {
    let mut names: Vec<String> = per_seed.iter().flat_map(|s| s.runs.keys().cloned()).collect();
    names.sort();
    names.dedup();
    let mut runs = BTreeMap::new();
    for name in &names {
        let xs: Vec<KpiSummary> = per_seed.iter().filter_map(|s| s.runs.get(name).copied()).collect();
        runs.insert(name.clone(), RunStats::of(&xs));
    }
    let mut deltas = Vec::new();
    for run in names.iter().filter(|n| n.starts_with("orchestrated_")) {
        for base in names.iter().filter(|n| !n.starts_with("orchestrated_")) {
            for kpi in [Kpi::Throughput, Kpi::EnergyEfficiency] {
                let (a, b) = (runs[run].kpi(kpi), runs[base].kpi(kpi));
                deltas.push(Delta {
                    run: run.clone(),
                    baseline: base.clone(),
                    kpi,
                    relative: relative_delta(a.mean, b.mean),
                    ci_disjoint: a.disjoint(b),
                });
            }
        }
    }
    CampaignResult {
        mode: mode.to_string(),
        seeds: per_seed.iter().map(|s| s.seed).collect(),
        measure_from,
        per_seed,
        runs,
        deltas,
        intent_response: BTreeMap::new(),
        selections: 0,
        selection_violations: 0,
    }
}

pub fn summarize(mode: Mode, measure_from: usize, runs: &[SeedRun]) -> CampaignResult {
    let per_seed = runs.iter().map(|r| SeedSummary { seed: r.seed, runs: r.summaries(measure_from) }).collect();
    let mut result = aggregate(mode, measure_from, per_seed);
    for r in runs {
        for resp in &r.responses {
            let e = result
                .intent_response
                .entry(format!("{}#{}", resp.arm, resp.index))
                .or_insert(ResponseRate { responded: 0, total: 0 });
            e.total += 1;
            e.responded += resp.responded() as usize;
        }
        for sel in r.selections.values().flatten() {
            result.selections += 1;
            result.selection_violations += !sel.valid() as usize;
        }
    }
    result
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: String,
    pub seeds: Vec<u64>,
    pub completed_seeds: Vec<u64>,
    pub measure_from: usize,
    pub files: Vec<String>,
    pub complete: bool,
    pub error: Option<String>,
}

fn rel(dir: &Path, p: &Path) -> String {
    p.strip_prefix(dir).unwrap_or(p).to_string_lossy().into_owned()
}

/// Writes the KPI, audit and selection logs of one seed, returning the files written.
pub fn write_seed(dir: &Path, run: &SeedRun) -> Result<Vec<PathBuf>> {
    let sdir = dir.join(format!("seed-{}", run.seed));
    fs::create_dir_all(&sdir)?;
    let mut files = Vec::new();
    for (name, rows) in &run.runs {
        let p = sdir.join(format!("{name}.csv"));
        write_kpi_csv(fs::File::create(&p)?, rows)?;
        files.push(p);
    }
    for (arm, rows) in &run.audits {
        let p = sdir.join(format!("audit_{arm}.csv"));
        write_audit_csv(fs::File::create(&p)?, rows)?;
        files.push(p);
    }
    for (arm, sels) in &run.selections {
        let p = sdir.join(format!("selections_{arm}.csv"));
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["slot", "intent_id", "kpi", "subset", "round", "valid"])?;
        for s in sels {
            w.write_record([
                s.slot.to_string(),
                s.intent_id.to_string(),
                s.kpi.name().to_string(),
                s.subset.label(),
                s.round.to_string(),
                s.valid().to_string(),
            ])?;
        }
        w.flush()?;
        files.push(p);
    }
    if !run.responses.is_empty() {
        let p = sdir.join("intent_response.json");
        fs::write(&p, serde_json::to_string_pretty(&run.responses)?)?;
        files.push(p);
    }
    if let Some(t) = &run.trained {
        let cdir = sdir.join("checkpoints");
        fs::create_dir_all(&cdir)?;
        t.save(&cdir)?;
        for f in ["ts.qnet", "cs.qnet", "bf.qnet", "controller.qnet", "meta.qnet"] {
            files.push(cdir.join(f));
        }
    }
    Ok(files)
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(m)?)?;
    Ok(())
}

/// Runs `mode` over `seeds`. With `out`, per-seed logs, `summary.json`,
/// `config.toml` and `manifest.json` are written there; on failure the
/// manifest lists what was completed.
pub fn run_campaign(cfg: &ScenarioConfig, mode: Mode, seeds: &[u64], out: Option<&Path>) -> Result<CampaignResult> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("campaign needs at least one seed".into()));
    }
    let results = run_seeds(cfg, seeds, mode);
    let measure_from = cfg.evaluation.measure_from;
    let mut manifest = Manifest {
        mode: mode.to_string(),
        seeds: seeds.to_vec(),
        completed_seeds: Vec::new(),
        measure_from,
        files: Vec::new(),
        complete: false,
        error: None,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), cfg.to_toml_string())?;
        manifest.files.push("config.toml".into());
    }
    let mut runs = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(run) => {
                if let Some(dir) = out {
                    match write_seed(dir, &run) {
                        Ok(files) => manifest.files.extend(files.iter().map(|p| rel(dir, p))),
                        Err(e) => {
                            failure = Some(e);
                            break;
                        }
                    }
                }
                manifest.completed_seeds.push(run.seed);
                runs.push(run);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if let Some(e) = failure {
        if let Some(dir) = out {
            manifest.error = Some(e.to_string());
            write_manifest(dir, &manifest)?;
        }
        return Err(e);
    }
    let result = summarize(mode, measure_from, &runs);
    if let Some(dir) = out {
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&result)?)?;
        manifest.files.push("summary.json".into());
        manifest.complete = true;
        write_manifest(dir, &manifest)?;
    }
    Ok(result)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.as_ref().join("manifest.json"))?)?)
}

pub fn read_summary(dir: impl AsRef<Path>) -> Result<CampaignResult> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.as_ref().join("summary.json"))?)?)
}

/// Rebuilds the KPI statistics of a campaign directory from its CSV logs
/// and manifest alone.
pub fn recompute_from_dir(dir: impl AsRef<Path>) -> Result<CampaignResult> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    let mode: Mode = m.mode.parse()?;
    let mut per_seed = Vec::new();
    for seed in &m.completed_seeds {
        let prefix = format!("seed-{seed}/");
        let mut runs = BTreeMap::new();
        for f in &m.files {
            let Some(name) = f.strip_prefix(&prefix).and_then(|n| n.strip_suffix(".csv")) else { continue };
            if name.starts_with("audit_") || name.starts_with("selections_") {
                continue;
            }
            let rows = read_kpi_csv(fs::File::open(dir.join(f))?)?;
            runs.insert(name.to_string(), summarize_rows(&rows, m.measure_from));
        }
        per_seed.push(SeedSummary { seed: *seed, runs });
    }
    Ok(aggregate(mode, m.measure_from, per_seed))
}

/// Side-by-side table of throughput and efficiency for campaign directories.
pub fn compare_dirs(dirs: &[PathBuf]) -> Result<String> {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<40} {:<28} {:>10} {:>22} {:>10} {:>22}\n",
        "campaign", "run", "thr Mbps", "thr 95% CI", "EE", "EE 95% CI"
    ));
    let ci = |e: &Estimate| match e.ci95 {
        Some([lo, hi]) => format!("[{lo:.3}, {hi:.3}]"),
        None => "undefined (n<2)".to_string(),
    };
    for d in dirs {
        let s = read_summary(d)?;
        for (name, r) in &s.runs {
            out.push_str(&format!(
                "{:<40} {:<28} {:>10.3} {:>22} {:>10.4} {:>22}\n",
                d.display(),
                name,
                r.throughput_mbps.mean,
                ci(&r.throughput_mbps),
                r.energy_efficiency.mean,
                ci(&r.energy_efficiency)
            ));
        }
        for dl in &s.deltas {
            out.push_str(&format!(
                "{:<40} {} vs {} ({}): {:+.2}%{}\n",
                d.display(),
                dl.run,
                dl.baseline,
                dl.kpi.name(),
                100.0 * dl.relative,
                if dl.ci_disjoint { ", CIs disjoint" } else { "" }
            ));
        }
    }
    Ok(out)
}
