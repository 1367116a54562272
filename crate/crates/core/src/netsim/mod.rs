//! Discrete-time macro/small-cell network simulator.
//!
//! One [`Simulator`] owns a fixed drop of base stations and UEs and advances
//! it in slots: controls are applied, UEs are (re)associated, Poisson packet
//! arrivals are enqueued, every link is served FIFO at its Shannon rate over
//! an equal bandwidth share, and the slot's KPIs are recomputed.
//!
//! The traffic generator draws from its own RNG stream whose consumption does
//! not depend on controls, so runs with different controllers on the same
//! seed see identical arrivals.

pub mod beam;
pub mod channel;
pub mod kpi;
pub mod power;
pub mod traffic;

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::seed::stream_seed;

pub use beam::{steering_vector, Codebook};
pub use channel::{Band, LinkTable};
pub use kpi::{read_kpi_csv, write_kpi_csv, KpiLogRow, KpiSample, KpiSummary, KPI_CSV_HEADER};
pub use power::{bs_power, dbm_to_w, energy_efficiency, w_to_dbm, PowerModel};
pub use traffic::{Packet, TrafficKind, TrafficType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BsId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UeId(pub usize);

impl fmt::Display for BsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bs{}", self.0)
    }
}

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ue{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rat {
    Lte,
    Nr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseStation {
    pub id: BsId,
    pub rat: Rat,
    pub position: [f64; 2],
    /// Carrier currently in use; NR cells switch between 3.5 and 30 GHz.
    pub band: Band,
    pub power_model: PowerModel,
    pub tx_power_dbm: f64,
    pub awake: bool,
    pub queue: VecDeque<Packet>,
    pub antennas: usize,
    /// Beam codebook; `None` for LTE.
    pub codebook: Option<Codebook>,
    /// Beam serving each UE on the 30 GHz carrier, indexed by UE.
    pub beams: Vec<Option<usize>>,
}

impl BaseStation {
    /// Transmit power P_out in W: zero while asleep.
    pub fn p_out_w(&self) -> f64 {
        if self.awake {
            dbm_to_w(self.tx_power_dbm)
        } else {
            0.0
        }
    }

    pub fn input_power_w(&self) -> f64 {
        self.power_model
            .input_power(self.p_out_w())
            .expect("transmit power is kept inside the power-model domain")
    }

    pub fn carrier_ghz(&self, cfg: &crate::config::ChannelConfig) -> f64 {
        cfg.band(self.band).carrier_ghz
    }

    pub fn queued_bits(&self) -> f64 {
        self.queue.iter().map(|p| p.remaining_bits).sum()
    }
}

/// One leg of a UE's serving set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub bs: BsId,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ue {
    pub id: UeId,
    pub position: [f64; 2],
    pub traffic: TrafficType,
    /// One or two legs (dual connectivity); empty only in outage.
    pub serving: Vec<Link>,
    /// Steering override set by a traffic-steering controller.
    pub steering: Option<BsId>,
    /// Smoothed achieved throughput (Mbps).
    pub achieved_throughput_mbps: f64,
    /// Smoothed achieved packet delay (ms).
    pub achieved_delay_ms: f64,
    /// Throughput served in the last slot (Mbps).
    pub slot_throughput_mbps: f64,
    /// Mean delay of packets completed in the last slot, or head-of-line age (ms).
    pub slot_delay_ms: f64,
    /// Allocated rate summed over the serving legs in the last slot (Mbps).
    pub link_rate_mbps: f64,
    /// SINR of the primary leg in the last slot (dB).
    pub sinr_db: f64,
    dc_credit: f64,
}

impl Ue {
    pub fn primary(&self) -> Option<BsId> {
        self.serving.first().map(|l| l.bs)
    }

    pub fn throughput_ok(&self, slack: f64) -> bool {
        self.achieved_throughput_mbps >= slack * self.traffic.effective_req_mbps()
    }

    pub fn delay_ok(&self) -> bool {
        self.achieved_delay_ms <= self.traffic.delay_req_ms
    }
}

/// Full snapshot of the network after a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub slot: u64,
    pub base_stations: Vec<BaseStation>,
    pub ues: Vec<Ue>,
    /// L_R per base station, in [0, 1].
    pub load_ratio: Vec<f64>,
    /// q_L per base station (packets).
    pub queue_len: Vec<usize>,
    pub kpis: KpiSample,
}

impl NetworkState {
    pub fn bs(&self, id: BsId) -> &BaseStation {
        &self.base_stations[id.0]
    }

    pub fn ue(&self, id: UeId) -> &Ue {
        &self.ues[id.0]
    }

    pub fn awake_ids(&self) -> impl Iterator<Item = BsId> + '_ {
        self.base_stations.iter().filter(|b| b.awake).map(|b| b.id)
    }

    /// UEs with a leg on `bs`.
    pub fn attached(&self, bs: BsId) -> impl Iterator<Item = &Ue> + '_ {
        self.ues.iter().filter(move |u| u.serving.iter().any(|l| l.bs == bs))
    }
}

/// Decisions handed to the simulator for one slot. Entries are applied in
/// the order sleep → band → power → beams → steering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlVector {
    pub awake: Vec<(BsId, bool)>,
    pub band: Vec<(BsId, Band)>,
    pub tx_power_dbm: Vec<(BsId, f64)>,
    pub beams: Vec<(BsId, UeId, usize)>,
    pub clear_steering: bool,
    pub steer: Vec<(UeId, BsId)>,
}

impl ControlVector {
    pub fn is_empty(&self) -> bool {
        *self == ControlVector::default()
    }

    pub fn merge(&mut self, other: ControlVector) {
        self.awake.extend(other.awake);
        self.band.extend(other.band);
        self.tx_power_dbm.extend(other.tx_power_dbm);
        self.beams.extend(other.beams);
        self.clear_steering |= other.clear_steering;
        self.steer.extend(other.steer);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsSpec {
    pub rat: Rat,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    pub position: [f64; 2],
    pub kind: TrafficKind,
}

/// Base-station and UE placement for one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub base_stations: Vec<BsSpec>,
    pub ues: Vec<UeSpec>,
}

impl Layout {
    /// Macro cell plus small cells from config, UEs dropped partly in
    /// hotspots around the small cells and partly uniformly over the area.
    pub fn generate(cfg: &ScenarioConfig, seed: u64) -> Self {
        let topo = &cfg.topology;
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "topology"));
        let mut base_stations = vec![BsSpec { rat: Rat::Lte, position: topo.macro_position }];
        base_stations.extend(topo.small_cells.iter().map(|p| BsSpec { rat: Rat::Nr, position: *p }));

        let n = topo.ue_count;
        let n_hot = ((n as f64) * topo.hotspot_fraction.clamp(0.0, 1.0)).round() as usize;
        let per_cell = apportion(n_hot, &topo.hotspot_weights);
        let kinds = {
            let counts = apportion(n, &cfg.traffic.mix);
            let mut kinds: Vec<TrafficKind> = counts
                .iter()
                .enumerate()
                .flat_map(|(i, c)| std::iter::repeat_n(TrafficKind::ALL[i], *c))
                .collect();
            shuffle(&mut kinds, &mut rng);
            kinds
        };

        let too_close = |p: [f64; 2], bss: &[BsSpec]| {
            bss.iter()
                .any(|b| (p[0] - b.position[0]).hypot(p[1] - b.position[1]) < topo.min_distance_m)
        };
        let disc = |rng: &mut ChaCha8Rng, c: [f64; 2], r: f64| loop {
            let x = rng.random_range(-1.0..1.0);
            let y = rng.random_range(-1.0..1.0);
            if x * x + y * y <= 1.0 {
                break [c[0] + r * x, c[1] + r * y];
            }
        };

        let mut positions = Vec::with_capacity(n);
        for (cell, count) in per_cell.iter().enumerate() {
            let centre = topo.small_cells[cell];
            for _ in 0..*count {
                let p = loop {
                    let p = disc(&mut rng, centre, topo.hotspot_radius_m);
                    if !too_close(p, &base_stations) {
                        break p;
                    }
                };
                positions.push(p);
            }
        }
        while positions.len() < n {
            let p = disc(&mut rng, topo.macro_position, topo.area_radius_m);
            if !too_close(p, &base_stations) {
                positions.push(p);
            }
        }
        let ues = positions
            .into_iter()
            .zip(kinds)
            .map(|(position, kind)| UeSpec { position, kind })
            .collect();
        Layout { base_stations, ues }
    }
}

/// Largest-remainder split of `total` items by `weights`.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || sum <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|a, b| {
        let ra = exact[*a] - exact[*a].floor();
        let rb = exact[*b] - exact[*b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(b))
    });
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

fn shuffle<T, R: Rng>(v: &mut [T], rng: &mut R) {
    for i in (1..v.len()).rev() {
        let j = rng.random_range(0..=i);
        v.swap(i, j);
    }
}

/// Per-slot scalars the simulator needs from config.
#[derive(Debug, Clone)]
struct SimParams {
    channel: crate::config::ChannelConfig,
    slot_ms: f64,
    max_queue_delay_ms: f64,
    ewma_alpha: f64,
    throughput_slack: f64,
    overload_threshold: f64,
    dual_connectivity: bool,
    dc_anchor_share: f64,
    min_distance_m: f64,
}

pub struct Simulator {
    params: SimParams,
    traffic_table: [TrafficType; 5],
    nr_candidates_dbm: Vec<f64>,
    links: LinkTable,
    /// `[bs][ue]` angle from the array broadside.
    ue_angle: Vec<Vec<f64>>,
    /// `[bs][ue][beam]` linear array gain (NR only).
    beam_gain: Vec<Vec<Vec<f64>>>,
    initial: NetworkState,
    state: NetworkState,
    rng: ChaCha8Rng,
    topology_seed: u64,
    dropped_bits: f64,
    arrived_bits: f64,
}

impl Simulator {
    /// Builds the configured drop for `seed` and starts the traffic stream of `episode`.
    pub fn new(cfg: &ScenarioConfig, seed: u64, episode: u64) -> Result<Self> {
        let layout = Layout::generate(cfg, seed);
        Self::from_layout(cfg, &layout, seed, episode)
    }

    pub fn from_layout(cfg: &ScenarioConfig, layout: &Layout, seed: u64, episode: u64) -> Result<Self> {
        let table = traffic::traffic_table(&cfg.traffic)?;
        let n_ue = layout.ues.len();
        let mut base_stations = Vec::with_capacity(layout.base_stations.len());
        for (i, spec) in layout.base_stations.iter().enumerate() {
            let (pm_cfg, band, codebook, antennas) = match spec.rat {
                Rat::Lte => (&cfg.power.macro_cell, Band::Lte, None, 1),
                Rat::Nr => (
                    &cfg.power.small_cell,
                    Band::NrMid,
                    Some(Codebook::dft(cfg.topology.antennas, cfg.topology.codebook_size)?),
                    cfg.topology.antennas,
                ),
            };
            let power_model = PowerModel::from_config(pm_cfg);
            base_stations.push(BaseStation {
                id: BsId(i),
                rat: spec.rat,
                position: spec.position,
                band,
                power_model,
                tx_power_dbm: pm_cfg.p_max_dbm,
                awake: true,
                queue: VecDeque::new(),
                antennas,
                codebook,
                beams: vec![None; n_ue],
            });
        }
        let ues = layout
            .ues
            .iter()
            .enumerate()
            .map(|(i, spec)| Ue {
                id: UeId(i),
                position: spec.position,
                traffic: table[spec.kind.index()],
                serving: Vec::new(),
                steering: None,
                achieved_throughput_mbps: 0.0,
                achieved_delay_ms: 0.0,
                slot_throughput_mbps: 0.0,
                slot_delay_ms: 0.0,
                link_rate_mbps: 0.0,
                sinr_db: f64::NEG_INFINITY,
                dc_credit: 0.0,
            })
            .collect::<Vec<_>>();

        let bs_pos: Vec<[f64; 2]> = base_stations.iter().map(|b| b.position).collect();
        let ue_pos: Vec<[f64; 2]> = ues.iter().map(|u| u.position).collect();
        let mut shadow_rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, "shadowing"));
        let links = LinkTable::build(&cfg.channel, &bs_pos, &ue_pos, cfg.topology.min_distance_m, &mut shadow_rng);

        let ue_angle: Vec<Vec<f64>> = bs_pos
            .iter()
            .map(|b| ue_pos.iter().map(|u| beam::ue_angle(*b, *u)).collect())
            .collect();
        let mut beam_gain = Vec::with_capacity(base_stations.len());
        for (b, bs) in base_stations.iter().enumerate() {
            match &bs.codebook {
                None => beam_gain.push(Vec::new()),
                Some(cb) => {
                    let steer: Vec<_> = (0..cb.len()).map(|n| cb.steering(n)).collect::<Result<_>>()?;
                    let mut per_ue = Vec::with_capacity(n_ue);
                    for chi in &ue_angle[b] {
                        let dir = steering_vector(*chi, cb.antennas)?;
                        per_ue.push(steer.iter().map(|s| beam::array_gain(s, &dir)).collect());
                    }
                    beam_gain.push(per_ue);
                }
            }
        }

        let n_bs = base_stations.len();
        let state = NetworkState {
            slot: 0,
            base_stations,
            ues,
            load_ratio: vec![0.0; n_bs],
            queue_len: vec![0; n_bs],
            kpis: KpiSample::default(),
        };
        let params = SimParams {
            channel: cfg.channel.clone(),
            slot_ms: cfg.traffic.slot_ms,
            max_queue_delay_ms: cfg.traffic.max_queue_delay_ms,
            ewma_alpha: cfg.traffic.ewma_alpha,
            throughput_slack: cfg.traffic.throughput_slack,
            overload_threshold: cfg.xapps.overload_threshold,
            dual_connectivity: cfg.topology.dual_connectivity,
            dc_anchor_share: cfg.topology.dc_anchor_share.clamp(0.0, 1.0),
            min_distance_m: cfg.topology.min_distance_m,
        };
        let mut sim = Simulator {
            params,
            traffic_table: table,
            nr_candidates_dbm: cfg.power.nr_candidates_dbm.clone(),
            links,
            ue_angle,
            beam_gain,
            initial: state.clone(),
            state,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(seed, "traffic") ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            topology_seed: seed,
            dropped_bits: 0.0,
            arrived_bits: 0.0,
        };
        sim.associate();
        sim.refresh_idle_kpis();
        sim.initial = sim.state.clone();
        Ok(sim)
    }

    /// Restores the initial network and restarts traffic with stream `episode`.
    pub fn reset(&mut self, episode: u64) {
        self.state = self.initial.clone();
        self.rng = ChaCha8Rng::seed_from_u64(
            stream_seed(self.topology_seed, "traffic") ^ episode.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        );
        self.dropped_bits = 0.0;
        self.arrived_bits = 0.0;
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn traffic_table(&self) -> &[TrafficType; 5] {
        &self.traffic_table
    }

    pub fn nr_candidates_dbm(&self) -> &[f64] {
        &self.nr_candidates_dbm
    }

    pub fn slot_ms(&self) -> f64 {
        self.params.slot_ms
    }

    pub fn throughput_slack(&self) -> f64 {
        self.params.throughput_slack
    }

    pub fn channel(&self) -> &crate::config::ChannelConfig {
        &self.params.channel
    }

    pub fn dropped_bits(&self) -> f64 {
        self.dropped_bits
    }

    /// Bits offered by all UEs since the last reset.
    pub fn arrived_bits(&self) -> f64 {
        self.arrived_bits
    }

    pub fn ue_angle(&self, bs: BsId, ue: UeId) -> f64 {
        self.ue_angle[bs.0][ue.0]
    }

    pub fn distance_m(&self, bs: BsId, ue: UeId) -> f64 {
        let b = self.state.bs(bs).position;
        let u = self.state.ue(ue).position;
        (b[0] - u[0]).hypot(b[1] - u[1]).max(self.params.min_distance_m)
    }

    /// Linear array gain of `beam` at `bs` toward `ue`.
    pub fn beam_gain(&self, bs: BsId, ue: UeId, beam: usize) -> Result<f64> {
        let table = self
            .beam_gain
            .get(bs.0)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::domain(format!("{bs} has no beam codebook")))?;
        table[ue.0]
            .get(beam)
            .copied()
            .ok_or_else(|| Error::domain(format!("beam index {beam} outside codebook of {}", table[ue.0].len())))
    }

    /// Antenna gain (linear) on the link `bs → ue` under the current configuration.
    fn antenna_gain(&self, bs: &BaseStation, ue: usize) -> f64 {
        match bs.band {
            Band::Lte | Band::NrMid => channel::db_to_linear(self.params.channel.sector_gain_db),
            Band::NrMmWave => {
                let cb = bs.codebook.as_ref().expect("mmWave cells carry a codebook");
                let beam = bs.beams[ue].unwrap_or_else(|| cb.broadside());
                self.beam_gain[bs.id.0][ue][beam]
            }
        }
    }

    fn rx_mw(&self, bs: &BaseStation, ue: usize, gain: f64) -> f64 {
        let loss = self.links.loss_db(ue, bs.id.0, bs.band);
        10f64.powf((bs.tx_power_dbm - loss) / 10.0) * gain
    }

    /// Interference (mW) at `ue` from awake cells other than `serving` on the same carrier.
    /// Interfering 30 GHz beams point elsewhere; their mean array gain is 1.
    fn interference_mw(&self, serving: &BaseStation, ue: usize) -> f64 {
        self.state
            .base_stations
            .iter()
            .filter(|b| b.awake && b.id != serving.id && b.band == serving.band)
            .map(|b| {
                let g = match b.band {
                    Band::NrMmWave => 1.0,
                    _ => channel::db_to_linear(self.params.channel.sector_gain_db),
                };
                self.rx_mw(b, ue, g)
            })
            .sum()
    }

    fn sinr_with_gain(&self, bs: &BaseStation, ue: usize, gain: f64) -> f64 {
        let noise = 10f64.powf(self.params.channel.noise_dbm(bs.band) / 10.0);
        self.rx_mw(bs, ue, gain) / (noise + self.interference_mw(bs, ue))
    }

    /// Linear SINR of `ue` on `bs` with the current beam.
    pub fn link_sinr(&self, bs: BsId, ue: UeId) -> f64 {
        let b = self.state.bs(bs);
        self.sinr_with_gain(b, ue.0, self.antenna_gain(b, ue.0))
    }

    /// SINR (dB) `ue` would see on `bs` in its current band, assuming the best
    /// codebook beam on 30 GHz. `None` for a sleeping cell.
    pub fn candidate_sinr_db(&self, ue: UeId, bs: BsId) -> Option<f64> {
        let b = self.state.bs(bs);
        if !b.awake {
            return None;
        }
        let gain = match b.band {
            Band::NrMmWave => self.beam_gain[bs.0][ue.0].iter().cloned().fold(0.0, f64::max),
            _ => channel::db_to_linear(self.params.channel.sector_gain_db),
        };
        Some(10.0 * self.sinr_with_gain(b, ue.0, gain).log10())
    }

    /// Reference signal power (dBm) used for default association: full power
    /// on the cell's primary carrier (LTE for the macro, 3.5 GHz for NR).
    pub fn rsrp_dbm(&self, ue: UeId, bs: BsId) -> f64 {
        let b = self.state.bs(bs);
        let band = match b.rat {
            Rat::Lte => Band::Lte,
            Rat::Nr => Band::NrMid,
        };
        let p_max = w_to_dbm(b.power_model.p_max_w);
        p_max + self.params.channel.sector_gain_db - self.links.loss_db(ue.0, bs.0, band)
    }

    fn best_awake(&self, ue: usize) -> Option<BsId> {
        self.state
            .base_stations
            .iter()
            .filter(|b| b.awake)
            .map(|b| (b.id, self.rsrp_dbm(UeId(ue), b.id)))
            .fold(None, |best: Option<(BsId, f64)>, (id, r)| match best {
                Some((_, br)) if br >= r => best,
                _ => Some((id, r)),
            })
            .map(|(id, _)| id)
    }

    /// Serving sets from steering overrides, falling back to strongest awake cell.
    fn associate(&mut self) {
        let macro_id = self.state.base_stations.iter().find(|b| b.rat == Rat::Lte && b.awake).map(|b| b.id);
        for u in 0..self.state.ues.len() {
            let override_ok = self.state.ues[u].steering.filter(|b| self.state.bs(*b).awake);
            if override_ok.is_none() {
                self.state.ues[u].steering = None;
            }
            let primary = override_ok.or_else(|| self.best_awake(u));
            let mut serving = Vec::with_capacity(2);
            if let Some(p) = primary {
                let nr_primary = self.state.bs(p).rat == Rat::Nr;
                match macro_id {
                    Some(m) if self.params.dual_connectivity && nr_primary && self.params.dc_anchor_share > 0.0 => {
                        serving.push(Link { bs: p, share: 1.0 - self.params.dc_anchor_share });
                        serving.push(Link { bs: m, share: self.params.dc_anchor_share });
                    }
                    _ => serving.push(Link { bs: p, share: 1.0 }),
                }
            }
            if serving != self.state.ues[u].serving {
                let old: Vec<BsId> = self.state.ues[u].serving.iter().map(|l| l.bs).collect();
                self.state.ues[u].serving = serving;
                self.migrate_packets(u, &old);
            }
        }
    }

    /// Moves queued packets of `ue` off legs it no longer has.
    fn migrate_packets(&mut self, ue: usize, old: &[BsId]) {
        let new_primary = self.state.ues[ue].primary();
        let keep: Vec<BsId> = self.state.ues[ue].serving.iter().map(|l| l.bs).collect();
        let mut moved = Vec::new();
        for b in old.iter().filter(|b| !keep.contains(b)) {
            let q = &mut self.state.base_stations[b.0].queue;
            let mut rest = VecDeque::with_capacity(q.len());
            for p in q.drain(..) {
                if p.ue == ue {
                    moved.push(p);
                } else {
                    rest.push_back(p);
                }
            }
            *q = rest;
        }
        if moved.is_empty() {
            return;
        }
        match new_primary {
            Some(target) => {
                let q = &mut self.state.base_stations[target.0].queue;
                q.extend(moved);
                q.make_contiguous().sort_by(|a, b| a.arrival_ms.total_cmp(&b.arrival_ms));
            }
            None => self.dropped_bits += moved.iter().map(|p| p.remaining_bits).sum::<f64>(),
        }
    }

    fn validate(&self, c: &ControlVector) -> Result<()> {
        let n_bs = self.state.base_stations.len();
        let n_ue = self.state.ues.len();
        let bs_ok = |b: BsId| -> Result<()> {
            if b.0 < n_bs {
                Ok(())
            } else {
                Err(Error::UnknownId(b.to_string()))
            }
        };
        let ue_ok = |u: UeId| -> Result<()> {
            if u.0 < n_ue {
                Ok(())
            } else {
                Err(Error::UnknownId(u.to_string()))
            }
        };
        for (b, _) in &c.awake {
            bs_ok(*b)?;
        }
        for (b, band) in &c.band {
            bs_ok(*b)?;
            let rat = self.state.bs(*b).rat;
            let fits = matches!((rat, band), (Rat::Lte, Band::Lte) | (Rat::Nr, Band::NrMid | Band::NrMmWave));
            if !fits {
                return Err(Error::domain(format!("{b} cannot use band {band:?}")));
            }
        }
        for (b, dbm) in &c.tx_power_dbm {
            bs_ok(*b)?;
            let pm = &self.state.bs(*b).power_model;
            let w = dbm_to_w(*dbm);
            if !(w > 0.0) || w > pm.p_max_w * (1.0 + 1e-12) {
                return Err(Error::domain(format!("{b} transmit power {dbm} dBm outside (0, P_max]")));
            }
        }
        for (b, u, beam) in &c.beams {
            bs_ok(*b)?;
            ue_ok(*u)?;
            match &self.state.bs(*b).codebook {
                Some(cb) if *beam < cb.len() => {}
                _ => return Err(Error::domain(format!("beam {beam} invalid for {b}"))),
            }
        }
        let mut awake: Vec<bool> = self.state.base_stations.iter().map(|b| b.awake).collect();
        for (b, on) in &c.awake {
            awake[b.0] = *on;
        }
        let mut rejected = Vec::new();
        for (u, b) in &c.steer {
            ue_ok(*u)?;
            bs_ok(*b)?;
            if !awake[b.0] {
                rejected.push((*u, *b));
            }
        }
        if !rejected.is_empty() {
            return Err(Error::RejectedControl(rejected));
        }
        Ok(())
    }

    /// Advances one slot under `controls`. On error nothing is applied.
    pub fn step(&mut self, controls: &ControlVector) -> Result<&NetworkState> {
        self.validate(controls)?;

        for (b, on) in &controls.awake {
            self.state.base_stations[b.0].awake = *on;
        }
        for (b, band) in &controls.band {
            self.state.base_stations[b.0].band = *band;
        }
        for (b, dbm) in &controls.tx_power_dbm {
            self.state.base_stations[b.0].tx_power_dbm = *dbm;
        }
        for (b, u, beam) in &controls.beams {
            self.state.base_stations[b.0].beams[u.0] = Some(*beam);
        }
        if controls.clear_steering {
            for u in &mut self.state.ues {
                u.steering = None;
            }
        }
        for (u, b) in &controls.steer {
            self.state.ues[u.0].steering = Some(*b);
        }
        self.associate();
        self.drain_sleeping_queues();

        self.state.slot += 1;
        let t0 = (self.state.slot - 1) as f64 * self.params.slot_ms;
        let t_end = t0 + self.params.slot_ms;
        self.enqueue_arrivals(t0);

        let n_bs = self.state.base_stations.len();
        let n_ue = self.state.ues.len();

        // Link rates: equal bandwidth split among the legs on each cell.
        let mut legs_per_bs = vec![0usize; n_bs];
        for u in &self.state.ues {
            for l in &u.serving {
                legs_per_bs[l.bs.0] += 1;
            }
        }
        // rate[u][leg] in bits/ms, plus full-band rate for load accounting
        let mut leg_rate = vec![[0.0f64; 2]; n_ue];
        let mut full_rate = vec![[0.0f64; 2]; n_ue];
        for u in 0..n_ue {
            let mut total = 0.0;
            let legs = self.state.ues[u].serving.clone();
            for (k, l) in legs.iter().enumerate() {
                let b = self.state.bs(l.bs);
                let sinr = self.sinr_with_gain(b, u, self.antenna_gain(b, u));
                let w_mhz = self.params.channel.band(b.band).bandwidth_mhz;
                let se = channel::shannon_se(sinr);
                full_rate[u][k] = w_mhz * se * 1e3;
                leg_rate[u][k] = full_rate[u][k] / legs_per_bs[l.bs.0] as f64;
                total += leg_rate[u][k];
                if k == 0 {
                    self.state.ues[u].sinr_db = 10.0 * sinr.log10();
                }
            }
            if legs.is_empty() {
                self.state.ues[u].sinr_db = f64::NEG_INFINITY;
            }
            self.state.ues[u].link_rate_mbps = total / 1e3;
        }
        let leg_index = |ues: &[Ue], u: usize, b: BsId| ues[u].serving.iter().position(|l| l.bs == b);

        // Load ratio from demand against full-band capacity.
        let mut load = vec![0.0f64; n_bs];
        for b in 0..n_bs {
            if !self.state.base_stations[b].awake {
                continue;
            }
            let mut demand = vec![0.0f64; n_ue];
            for p in &self.state.base_stations[b].queue {
                demand[p.ue] += p.remaining_bits;
            }
            let mut util = 0.0;
            for (u, d) in demand.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                let cap = leg_index(&self.state.ues, u, BsId(b))
                    .map(|k| full_rate[u][k] * self.params.slot_ms)
                    .unwrap_or(0.0);
                util += if cap > 0.0 { d / cap } else { f64::INFINITY };
            }
            load[b] = util.min(1.0);
        }

        // FIFO service per leg inside the slot.
        let mut served_bits = vec![0.0f64; n_ue];
        let mut delay_sum = vec![0.0f64; n_ue];
        let mut departures = vec![0usize; n_ue];
        for b in 0..n_bs {
            if !self.state.base_stations[b].awake {
                continue;
            }
            let mut cursor = vec![t0; n_ue];
            let rates: Vec<f64> = (0..n_ue)
                .map(|u| leg_index(&self.state.ues, u, BsId(b)).map(|k| leg_rate[u][k]).unwrap_or(0.0))
                .collect();
            let max_age = self.params.max_queue_delay_ms;
            let mut dropped = 0.0;
            self.state.base_stations[b].queue.retain_mut(|p| {
                let r = rates[p.ue];
                if r > 0.0 {
                    let start = cursor[p.ue].max(p.arrival_ms);
                    if start < t_end {
                        let finish = start + p.remaining_bits / r;
                        if finish <= t_end {
                            served_bits[p.ue] += p.remaining_bits;
                            delay_sum[p.ue] += finish - p.arrival_ms;
                            departures[p.ue] += 1;
                            cursor[p.ue] = finish;
                            return false;
                        }
                        let part = (t_end - start) * r;
                        served_bits[p.ue] += part;
                        p.remaining_bits -= part;
                        cursor[p.ue] = t_end;
                    }
                }
                if t_end - p.arrival_ms > max_age {
                    dropped += p.remaining_bits;
                    return false;
                }
                true
            });
            self.dropped_bits += dropped;
        }

        // Per-UE statistics.
        let alpha = self.params.ewma_alpha;
        let slot_ms = self.params.slot_ms;
        let mut hol_age = vec![None::<f64>; n_ue];
        for bs in &self.state.base_stations {
            for p in &bs.queue {
                let age = t_end - p.arrival_ms;
                let e = hol_age[p.ue].get_or_insert(age);
                *e = e.max(age);
            }
        }
        let mut delay_acc = 0.0;
        let mut delay_n = 0usize;
        for (u, ue) in self.state.ues.iter_mut().enumerate() {
            let thr = served_bits[u] / (slot_ms * 1e3);
            let delay = if departures[u] > 0 {
                delay_sum[u] / departures[u] as f64
            } else {
                hol_age[u].unwrap_or(0.0)
            };
            if departures[u] > 0 {
                delay_acc += delay;
                delay_n += 1;
            }
            ue.slot_throughput_mbps = thr;
            ue.slot_delay_ms = delay;
            ue.achieved_throughput_mbps = alpha * thr + (1.0 - alpha) * ue.achieved_throughput_mbps;
            ue.achieved_delay_ms = alpha * delay + (1.0 - alpha) * ue.achieved_delay_ms;
        }

        let total_bits: f64 = served_bits.iter().sum();
        let total_power: f64 = self.state.base_stations.iter().map(|b| b.input_power_w()).sum();
        let throughput = total_bits / (slot_ms * 1e3);
        let slack = self.params.throughput_slack;
        let violations = self.state.ues.iter().filter(|u| !(u.throughput_ok(slack) && u.delay_ok())).count();
        let overloaded = load.iter().filter(|l| **l > self.params.overload_threshold).count();
        self.state.queue_len = self.state.base_stations.iter().map(|b| b.queue.len()).collect();
        self.state.load_ratio = load;
        self.state.kpis = KpiSample {
            slot: self.state.slot,
            total_throughput_mbps: throughput,
            energy_efficiency: throughput / total_power,
            mean_delay_ms: if delay_n > 0 { delay_acc / delay_n as f64 } else { 0.0 },
            total_power_w: total_power,
            qos_violations: violations as u32,
            overloaded_bs: overloaded as u32,
        };
        Ok(&self.state)
    }

    fn drain_sleeping_queues(&mut self) {
        for b in 0..self.state.base_stations.len() {
            if self.state.base_stations[b].awake || self.state.base_stations[b].queue.is_empty() {
                continue;
            }
            let pkts: Vec<Packet> = self.state.base_stations[b].queue.drain(..).collect();
            for p in pkts {
                match self.state.ues[p.ue].primary() {
                    Some(t) => self.state.base_stations[t.0].queue.push_back(p),
                    None => self.dropped_bits += p.remaining_bits,
                }
            }
        }
        for b in &mut self.state.base_stations {
            b.queue.make_contiguous().sort_by(|x, y| x.arrival_ms.total_cmp(&y.arrival_ms));
        }
    }

    fn enqueue_arrivals(&mut self, t0: f64) {
        let slot_ms = self.params.slot_ms;
        for u in 0..self.state.ues.len() {
            let tt = self.state.ues[u].traffic;
            let lambda = tt.offered_mbps * 1e3 * slot_ms / tt.packet_bits();
            let n = if lambda > 0.0 {
                Poisson::new(lambda).expect("positive rate").sample(&mut self.rng) as usize
            } else {
                0
            };
            self.arrived_bits += n as f64 * tt.packet_bits();
            let mut times: Vec<f64> = (0..n).map(|_| t0 + self.rng.random::<f64>() * slot_ms).collect();
            times.sort_by(f64::total_cmp);
            let legs = self.state.ues[u].serving.clone();
            if legs.is_empty() {
                self.dropped_bits += n as f64 * tt.packet_bits();
                continue;
            }
            for t in times {
                let leg = if legs.len() == 2 {
                    let ue = &mut self.state.ues[u];
                    ue.dc_credit += legs[1].share;
                    if ue.dc_credit >= 1.0 {
                        ue.dc_credit -= 1.0;
                        legs[1].bs
                    } else {
                        legs[0].bs
                    }
                } else {
                    legs[0].bs
                };
                self.state.base_stations[leg.0].queue.push_back(Packet {
                    ue: u,
                    arrival_ms: t,
                    size_bits: tt.packet_bits(),
                    remaining_bits: tt.packet_bits(),
                });
            }
        }
    }

    fn refresh_idle_kpis(&mut self) {
        let total_power: f64 = self.state.base_stations.iter().map(|b| b.input_power_w()).sum();
        self.state.kpis = KpiSample { slot: self.state.slot, total_power_w: total_power, ..Default::default() };
    }
}
