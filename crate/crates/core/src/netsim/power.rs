//! Base-station input power model.
//!
//! A load-dependent affine model while transmitting and a constant draw
//! while asleep: `P_in = p0 + delta_p * P_out` for `0 < P_out <= P_max`,
//! `P_in = p_sleep` for `P_out = 0`.

use serde::{Deserialize, Serialize};

use crate::config::PowerModelConfig;
use crate::error::{Error, Result};

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p0_w: f64,
    pub delta_p: f64,
    pub p_sleep_w: f64,
    pub p_max_w: f64,
}

impl PowerModel {
    pub fn from_config(cfg: &PowerModelConfig) -> Self {
        Self {
            p0_w: cfg.p0_w,
            delta_p: cfg.delta_p,
            p_sleep_w: cfg.p_sleep_w,
            p_max_w: dbm_to_w(cfg.p_max_dbm),
        }
    }

    /// Input power for a given transmit power (both in W).
    pub fn input_power(&self, p_out_w: f64) -> Result<f64> {
        // Small relative slack so dBm round trips of P_max stay in-domain.
        if !(p_out_w >= 0.0) || p_out_w > self.p_max_w * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "transmit power {p_out_w} W outside [0, {}] W",
                self.p_max_w
            )));
        }
        Ok(if p_out_w > 0.0 { self.p0_w + self.delta_p * p_out_w } else { self.p_sleep_w })
    }
}

/// Input power drawn by a base station transmitting `p_out_w`.
pub fn bs_power(bs: &super::BaseStation, p_out_w: f64) -> Result<f64> {
    bs.power_model.input_power(p_out_w)
}

/// Total delivered throughput divided by total input power (Mbps/W).
pub fn energy_efficiency(state: &super::NetworkState) -> f64 {
    let power = state.kpis.total_power_w;
    debug_assert!(power > 0.0);
    state.kpis.total_throughput_mbps / power
}
