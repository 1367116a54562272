use serde::{Deserialize, Serialize};

use crate::config::TrafficConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Voice,
    Gaming,
    Video,
    Urllc,
    Embb,
}

impl TrafficKind {
    pub const ALL: [TrafficKind; 5] = [
        TrafficKind::Voice,
        TrafficKind::Gaming,
        TrafficKind::Video,
        TrafficKind::Urllc,
        TrafficKind::Embb,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            TrafficKind::Voice => "voice",
            TrafficKind::Gaming => "gaming",
            TrafficKind::Video => "video",
            TrafficKind::Urllc => "urllc",
            TrafficKind::Embb => "embb",
        }
    }
}

/// Per-class QoS contract and offered rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficType {
    pub kind: TrafficKind,
    pub packet_bytes: f64,
    /// T_QoS (Mbps).
    pub throughput_req_mbps: f64,
    /// D_QoS (ms).
    pub delay_req_ms: f64,
    /// Offered rate of one UE of this class (Mbps).
    pub offered_mbps: f64,
}

impl TrafficType {
    pub fn packet_bits(&self) -> f64 {
        self.packet_bytes * 8.0
    }

    /// Throughput a UE of this class can be held to: it never asks for more
    /// than it offers.
    pub fn effective_req_mbps(&self) -> f64 {
        self.throughput_req_mbps.min(self.offered_mbps)
    }
}

/// Builds the five-class table from config, indexed by `TrafficKind::index`.
pub fn traffic_table(cfg: &TrafficConfig) -> Result<[TrafficType; 5]> {
    let mut out = [None; 5];
    for c in &cfg.classes {
        if !(c.packet_bytes > 0.0 && c.throughput_req_mbps > 0.0 && c.delay_req_ms > 0.0) {
            return Err(Error::Config(format!("class {} has a non-positive requirement", c.kind.name())));
        }
        out[c.kind.index()] = Some(TrafficType {
            kind: c.kind,
            packet_bytes: c.packet_bytes,
            throughput_req_mbps: c.throughput_req_mbps,
            delay_req_ms: c.delay_req_ms,
            offered_mbps: cfg.offered_load_mbps * c.rate_weight,
        });
    }
    let mut table = Vec::with_capacity(5);
    for (i, t) in out.into_iter().enumerate() {
        match t {
            Some(t) => table.push(t),
            None => return Err(Error::Config(format!("missing traffic class {}", TrafficKind::ALL[i].name()))),
        }
    }
    Ok(table.try_into().expect("five classes"))
}

/// A packet waiting in a base-station queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub ue: usize,
    /// Absolute arrival time (ms).
    pub arrival_ms: f64,
    pub size_bits: f64,
    pub remaining_bits: f64,
}
