use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// KPIs logged for one slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub slot: u64,
    pub total_throughput_mbps: f64,
    pub energy_efficiency: f64,
    pub mean_delay_ms: f64,
    pub total_power_w: f64,
    /// Number of UEs whose QoS requirement is violated.
    pub qos_violations: u32,
    /// Number of overloaded base stations.
    pub overloaded_bs: u32,
}

/// Column-wise means over a run of slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub slots: usize,
    pub throughput_mbps: f64,
    pub energy_efficiency: f64,
    pub mean_delay_ms: f64,
    pub total_power_w: f64,
    pub qos_violations: f64,
    pub overloaded_bs: f64,
}

impl KpiSummary {
    pub fn of<'a>(samples: impl IntoIterator<Item = &'a KpiSample>) -> Self {
        let mut s = KpiSummary::default();
        for k in samples {
            s.slots += 1;
            s.throughput_mbps += k.total_throughput_mbps;
            s.energy_efficiency += k.energy_efficiency;
            s.mean_delay_ms += k.mean_delay_ms;
            s.total_power_w += k.total_power_w;
            s.qos_violations += k.qos_violations as f64;
            s.overloaded_bs += k.overloaded_bs as f64;
        }
        if s.slots > 0 {
            let n = s.slots as f64;
            s.throughput_mbps /= n;
            s.energy_efficiency /= n;
            s.mean_delay_ms /= n;
            s.total_power_w /= n;
            s.qos_violations /= n;
            s.overloaded_bs /= n;
        }
        s
    }
}

/// One row of the KPI log: the slot sample plus the active xApp set label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiLogRow {
    pub slot: u64,
    pub throughput_mbps: f64,
    pub energy_eff_mbps_per_w: f64,
    pub mean_delay_ms: f64,
    pub total_power_w: f64,
    pub qos_violations: u32,
    pub overloaded_bs: u32,
    pub active_xapps: String,
}

impl KpiLogRow {
    pub fn new(k: &KpiSample, active_xapps: impl Into<String>) -> Self {
        Self {
            slot: k.slot,
            throughput_mbps: k.total_throughput_mbps,
            energy_eff_mbps_per_w: k.energy_efficiency,
            mean_delay_ms: k.mean_delay_ms,
            total_power_w: k.total_power_w,
            qos_violations: k.qos_violations,
            overloaded_bs: k.overloaded_bs,
            active_xapps: active_xapps.into(),
        }
    }

    pub fn sample(&self) -> KpiSample {
        KpiSample {
            slot: self.slot,
            total_throughput_mbps: self.throughput_mbps,
            energy_efficiency: self.energy_eff_mbps_per_w,
            mean_delay_ms: self.mean_delay_ms,
            total_power_w: self.total_power_w,
            qos_violations: self.qos_violations,
            overloaded_bs: self.overloaded_bs,
        }
    }
}

pub const KPI_CSV_HEADER: [&str; 8] = [
    "slot",
    "throughput_mbps",
    "energy_eff_mbps_per_w",
    "mean_delay_ms",
    "total_power_w",
    "qos_violations",
    "overloaded_bs",
    "active_xapps",
];

pub fn write_kpi_csv<W: Write>(out: W, rows: &[KpiLogRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(KPI_CSV_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kpi_csv<R: std::io::Read>(input: R) -> Result<Vec<KpiLogRow>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
