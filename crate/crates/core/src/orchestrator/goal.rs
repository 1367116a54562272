use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::{KpiSample, NetworkState, TrafficKind};
use crate::xapps::Kpi;

use super::intent::Intent;

/// KPI target handed from the meta-controller to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub intent_id: u64,
    pub kpi: Kpi,
    /// Absolute target (Mbps or Mbps/W).
    pub target_value: f64,
    /// KPI mean over the window before the intent.
    pub baseline_value: f64,
    pub horizon: usize,
    pub issued_slot: u64,
}

/// Measured value of `kpi` in one slot.
pub fn kpi_value(k: &KpiSample, kpi: Kpi) -> f64 {
    match kpi {
        Kpi::Throughput => k.total_throughput_mbps,
        Kpi::EnergyEfficiency => k.energy_efficiency,
        Kpi::Delay => k.mean_delay_ms,
    }
}

/// Goal for `intent` from the last `window` KPI samples of `history`.
pub fn meta_emit_goal(intent: &Intent, intent_id: u64, history: &[KpiSample], window: usize, horizon: usize) -> Result<Goal> {
    if window == 0 || history.len() < window {
        return Err(Error::NoKpiHistory { needed: window.max(1), have: history.len() });
    }
    if horizon == 0 {
        return Err(Error::domain("goal horizon must be positive"));
    }
    let kpi = intent.goal_kpi();
    let recent = &history[history.len() - window..];
    let baseline = recent.iter().map(|k| kpi_value(k, kpi)).sum::<f64>() / window as f64;
    Ok(Goal {
        intent_id,
        kpi,
        target_value: baseline * (1.0 + intent.magnitude / 100.0),
        baseline_value: baseline,
        horizon,
        issued_slot: intent.issued_slot,
    })
}

/// `P_i - rho * xi` with `P_i` the measured KPI over the goal target, clipped to `[0, p_clip]`.
pub fn intrinsic_reward(k: &KpiSample, goal: &Goal, rho: f64, p_clip: f64) -> f64 {
    let p = if goal.target_value > 0.0 { kpi_value(k, goal.kpi) / goal.target_value } else { p_clip };
    p.clamp(0.0, p_clip) - rho * k.qos_violations as f64
}

/// Mean intrinsic reward over a goal's lifetime.
pub fn extrinsic_reward(history: &[f64]) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    Ok(history.iter().sum::<f64>() / history.len() as f64)
}

/// Per-class (UE share, mean throughput / requirement, mean delay / budget),
/// then the goal KPI one-hot and the normalised gap `(target - current) / target`
/// clamped to [-1, 1].
pub fn controller_state(state: &NetworkState, kpi: Kpi, target: f64, current: f64) -> Vec<f64> {
    let n = state.ues.len().max(1) as f64;
    let mut v = Vec::with_capacity(state_dim());
    for kind in TrafficKind::ALL {
        let ues: Vec<_> = state.ues.iter().filter(|u| u.traffic.kind == kind).collect();
        if ues.is_empty() {
            v.extend_from_slice(&[0.0, 0.0, 0.0]);
            continue;
        }
        let m = ues.len() as f64;
        let thr = ues.iter().map(|u| u.achieved_throughput_mbps / u.traffic.effective_req_mbps()).sum::<f64>() / m;
        let delay = ues.iter().map(|u| u.achieved_delay_ms / u.traffic.delay_req_ms).sum::<f64>() / m;
        v.extend_from_slice(&[m / n, thr.clamp(0.0, 2.0), delay.clamp(0.0, 2.0)]);
    }
    let mut onehot = [0.0; 3];
    onehot[kpi.index()] = 1.0;
    v.extend_from_slice(&onehot);
    let gap = if target > 0.0 { (target - current) / target } else { 0.0 };
    v.push(gap.clamp(-1.0, 1.0));
    v
}

pub fn state_dim() -> usize {
    TrafficKind::ALL.len() * 3 + Kpi::ALL.len() + 1
}
