//! Scenario configuration.
//!
//! Every tunable constant of the simulator, the agents and the campaign
//! harness lives here, with defaults for the 1 macro + 4 small cell,
//! 60 UE scenario. Configs are TOML; unknown keys are rejected at every level.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::TrafficKind;
use crate::rl::OptimizerKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Seed used by single-instance runs (live mode, `Simulator::from_config`).
    pub seed: u64,
    /// Seeds of a multi-seed campaign.
    pub seeds: Vec<u64>,
    pub topology: TopologyConfig,
    pub traffic: TrafficConfig,
    pub power: PowerConfig,
    pub channel: ChannelConfig,
    pub rl: RlConfig,
    pub xapps: XAppConfig,
    pub orchestrator: OrchestratorConfig,
    pub baseline: BaselineConfig,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
    pub live: LiveConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            seeds: (1..=10).collect(),
            topology: TopologyConfig::default(),
            traffic: TrafficConfig::default(),
            power: PowerConfig::default(),
            channel: ChannelConfig::default(),
            rl: RlConfig::default(),
            xapps: XAppConfig::default(),
            orchestrator: OrchestratorConfig::default(),
            baseline: BaselineConfig::default(),
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
            live: LiveConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.topology.ue_count == 0 {
            return bad("topology.ue_count must be positive");
        }
        if self.topology.antennas == 0 || self.topology.codebook_size == 0 {
            return bad("topology.antennas and topology.codebook_size must be positive");
        }
        if self.topology.hotspot_weights.len() != self.topology.small_cells.len() {
            return bad("topology.hotspot_weights must have one entry per small cell");
        }
        if self.traffic.mix.iter().any(|w| *w < 0.0) || self.traffic.mix.iter().sum::<f64>() <= 0.0 {
            return bad("traffic.mix weights must be non-negative with a positive sum");
        }
        for class in &self.traffic.classes {
            if class.packet_bytes <= 0.0 || class.throughput_req_mbps <= 0.0 || class.delay_req_ms <= 0.0 {
                return bad("traffic class requirements must be strictly positive");
            }
        }
        if self.traffic.slot_ms <= 0.0 {
            return bad("traffic.slot_ms must be positive");
        }
        for m in [&self.power.macro_cell, &self.power.small_cell] {
            if m.p_sleep_w >= m.p0_w {
                return bad("power: p_sleep_w must be below p0_w");
            }
            if m.p_sleep_w <= 0.0 {
                return bad("power: p_sleep_w must be positive");
            }
        }
        if self.power.nr_candidates_dbm.is_empty() {
            return bad("power.nr_candidates_dbm must not be empty");
        }
        if !(0.0..1.0).contains(&self.rl.gamma) {
            return bad("rl.gamma must lie in [0, 1)");
        }
        if !(self.rl.epsilon_start > 0.0 && self.rl.epsilon_start <= 1.0) {
            return bad("rl.epsilon_start must lie in (0, 1]");
        }
        if !(self.rl.epsilon_decay > 0.0 && self.rl.epsilon_decay <= 1.0) {
            return bad("rl.epsilon_decay must lie in (0, 1]");
        }
        let w = &self.baseline.weights;
        if w.iter().any(|x| *x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("baseline.weights must be non-negative and sum to 1");
        }
        if self.orchestrator.tau_slots == 0 || self.orchestrator.reselect_slots == 0 {
            return bad("orchestrator.tau_slots and reselect_slots must be positive");
        }
        if self.orchestrator.goal_levels.is_empty() || self.orchestrator.horizon_scales.is_empty() {
            return bad("orchestrator goal grid must not be empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub macro_position: [f64; 2],
    pub small_cells: Vec<[f64; 2]>,
    pub ue_count: usize,
    /// Radius of the disc holding the uniformly dropped UEs.
    pub area_radius_m: f64,
    /// Fraction of UEs dropped in hotspots around small cells.
    pub hotspot_fraction: f64,
    pub hotspot_radius_m: f64,
    /// Relative UE share of each small-cell hotspot.
    pub hotspot_weights: Vec<f64>,
    pub min_distance_m: f64,
    /// ULA size M of every NR base station.
    pub antennas: usize,
    /// Beam steering codebook size |F|.
    pub codebook_size: usize,
    /// Attach an LTE anchor leg to UEs served by an NR cell.
    pub dual_connectivity: bool,
    /// Traffic share carried on the LTE anchor leg when dual connectivity is on.
    pub dc_anchor_share: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            macro_position: [0.0, 0.0],
            small_cells: vec![[220.0, 220.0], [-220.0, 220.0], [-220.0, -220.0], [220.0, -220.0]],
            ue_count: 60,
            area_radius_m: 450.0,
            hotspot_fraction: 0.7,
            hotspot_radius_m: 90.0,
            hotspot_weights: vec![0.4, 0.4, 0.1, 0.1],
            min_distance_m: 10.0,
            antennas: 16,
            codebook_size: 16,
            dual_connectivity: false,
            dc_anchor_share: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficClassConfig {
    pub kind: TrafficKind,
    pub packet_bytes: f64,
    pub throughput_req_mbps: f64,
    pub delay_req_ms: f64,
    /// Offered rate of a UE of this class relative to the mean per-UE load.
    pub rate_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Mean offered load per UE (Mbps).
    pub offered_load_mbps: f64,
    /// Share of UEs per class, in `TrafficKind::ALL` order.
    pub mix: [f64; 5],
    pub classes: Vec<TrafficClassConfig>,
    pub slot_ms: f64,
    /// Packets older than this are dropped from the queue.
    pub max_queue_delay_ms: f64,
    /// EWMA smoothing for per-UE achieved throughput and delay.
    pub ewma_alpha: f64,
    /// A UE meets its throughput requirement when its achieved rate is at least
    /// this fraction of min(T_QoS, offered rate).
    pub throughput_slack: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        use TrafficKind::*;
        let c = |kind, packet_bytes, throughput_req_mbps, delay_req_ms, rate_weight| TrafficClassConfig {
            kind,
            packet_bytes,
            throughput_req_mbps,
            delay_req_ms,
            rate_weight,
        };
        Self {
            offered_load_mbps: 6.0,
            mix: [0.2; 5],
            classes: vec![
                c(Voice, 160.0, 0.1, 100.0, 0.5 / 6.0),
                c(Gaming, 500.0, 2.0, 50.0, 4.0 / 6.0),
                c(Video, 1200.0, 5.0, 150.0, 10.0 / 6.0),
                c(Urllc, 32.0, 0.2, 2.5, 0.3 / 6.0),
                c(Embb, 1500.0, 100.0, 15.0, 15.2 / 6.0),
            ],
            slot_ms: 10.0,
            max_queue_delay_ms: 200.0,
            ewma_alpha: 0.2,
            throughput_slack: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerModelConfig {
    pub p0_w: f64,
    pub delta_p: f64,
    pub p_sleep_w: f64,
    pub p_max_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub macro_cell: PowerModelConfig,
    pub small_cell: PowerModelConfig,
    /// Candidate NR transmit powers P (dBm), ascending.
    pub nr_candidates_dbm: Vec<f64>,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            macro_cell: PowerModelConfig { p0_w: 130.0, delta_p: 4.7, p_sleep_w: 75.0, p_max_dbm: 38.0 },
            small_cell: PowerModelConfig { p0_w: 6.8, delta_p: 4.0, p_sleep_w: 4.3, p_max_dbm: 43.0 },
            nr_candidates_dbm: vec![30.0, 34.0, 38.0, 43.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    /// Pathloss at the 1 m reference distance (dB).
    pub pl0_db: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub lte: BandConfig,
    pub nr_mid: BandConfig,
    pub nr_mmwave: BandConfig,
    pub shadowing_sigma_db: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Fixed antenna gain used on the LTE and 3.5 GHz carriers.
    pub sector_gain_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            lte: BandConfig { carrier_ghz: 0.8, bandwidth_mhz: 20.0, pl0_db: 30.5, exponent: 3.5 },
            nr_mid: BandConfig { carrier_ghz: 3.5, bandwidth_mhz: 20.0, pl0_db: 43.3, exponent: 2.9 },
            // 30 GHz: 20 dB above the 3.5 GHz reference loss, blockage-free LOS exponent.
            nr_mmwave: BandConfig { carrier_ghz: 30.0, bandwidth_mhz: 100.0, pl0_db: 63.3, exponent: 3.2 },
            shadowing_sigma_db: 4.0,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 7.0,
            sector_gain_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlConfig {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    /// Episodes between two exploration decays.
    pub epsilon_decay_period: usize,
    pub epsilon_min: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: usize,
    pub xapp_hidden: usize,
    pub controller_hidden: usize,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            gamma: 0.3,
            epsilon_start: 0.95,
            epsilon_decay: 0.7,
            epsilon_decay_period: 1,
            epsilon_min: 0.02,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 100,
            xapp_hidden: 64,
            controller_hidden: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XAppConfig {
    pub ts_decisions_per_slot: usize,
    pub ts_throughput_weight: f64,
    pub ts_delay_weight: f64,
    pub cs_theta: f64,
    pub cs_period_slots: usize,
    pub overload_threshold: f64,
    pub bf_c1: f64,
    pub bf_c2: f64,
    pub bf_ratio_clip: f64,
    /// Reference SINR for the theoretical maximum energy efficiency.
    pub bf_eps_max_sinr_db: f64,
    /// Distance normalization of the beamforming state.
    pub bf_distance_ref_m: f64,
    /// Gradient steps per slot for the beamforming agent.
    pub bf_train_steps_per_slot: usize,
}

impl Default for XAppConfig {
    fn default() -> Self {
        Self {
            ts_decisions_per_slot: 4,
            ts_throughput_weight: 0.5,
            ts_delay_weight: 0.5,
            cs_theta: 0.05,
            cs_period_slots: 10,
            overload_threshold: 0.8,
            bf_c1: 0.5,
            bf_c2: 0.5,
            bf_ratio_clip: 1.5,
            bf_eps_max_sinr_db: 30.0,
            bf_distance_ref_m: 200.0,
            bf_train_steps_per_slot: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrchestratorConfig {
    pub rho: f64,
    pub p_clip: f64,
    pub tau_slots: usize,
    pub reselect_slots: usize,
    pub baseline_window: usize,
    /// Goal discretization levels, as multiples of the intent magnitude.
    pub goal_levels: Vec<f64>,
    /// Horizon buckets, as multiples of `tau_slots`.
    pub horizon_scales: Vec<f64>,
    /// HRL episodes between exploration decays of the controller and meta-controller.
    pub epsilon_decay_period: usize,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            p_clip: 2.0,
            tau_slots: 100,
            reselect_slots: 10,
            baseline_window: 50,
            goal_levels: vec![0.5, 1.0, 1.5, 2.0],
            horizon_scales: vec![1.0],
            epsilon_decay_period: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Weights of (load, channel condition, service type).
    pub weights: [f64; 3],
    /// SINR range (dB) mapped onto the [0, 1] channel-badness scale.
    pub sinr_range_db: [f64; 2],
    /// Service-type priority, in `TrafficKind::ALL` order.
    pub service_priority: [f64; 5],
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            weights: [0.5, 0.3, 0.2],
            sinr_range_db: [-5.0, 30.0],
            // voice < video < gaming < eMBB < URLLC
            service_priority: [0.2, 0.6, 0.4, 1.0, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub xapp_episodes: usize,
    pub xapp_episode_slots: usize,
    /// Pretraining episodes run with several xApps active, cycling through the combinations.
    pub joint_episodes: usize,
    pub hrl_episodes: usize,
    pub hrl_episode_slots: usize,
    /// Exploration floor for xApps while the controller is being trained.
    pub hrl_xapp_epsilon: f64,
    /// Train every this many slots.
    pub train_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            xapp_episodes: 16,
            xapp_episode_slots: 300,
            joint_episodes: 16,
            hrl_episodes: 48,
            hrl_episode_slots: 450,
            hrl_xapp_epsilon: 0.05,
            train_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedIntent {
    pub slot: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationArm {
    pub name: String,
    pub intents: Vec<TimedIntent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub slots: usize,
    /// KPI means are taken over [measure_from, slots).
    pub measure_from: usize,
    pub arms: Vec<EvaluationArm>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let arm = |name: &str, intents: &[(u64, &str)]| EvaluationArm {
            name: name.to_string(),
            intents: intents
                .iter()
                .map(|(slot, text)| TimedIntent { slot: *slot, text: text.to_string() })
                .collect(),
        };
        Self {
            slots: 400,
            measure_from: 50,
            arms: vec![
                arm("throughput", &[(50, "increase throughput by 5%")]),
                arm("energy", &[(50, "increase energy efficiency by 10%")]),
                arm(
                    "throughput_then_power",
                    &[(50, "increase throughput by 5%"), (250, "decrease power consumption by 5%")],
                ),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiveConfig {
    /// Wall-clock pacing of live mode; 0 runs unthrottled.
    pub slots_per_second: f64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self { slots_per_second: 20.0 }
    }
}
