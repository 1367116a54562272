//! Log-distance pathloss with per-link lognormal shadowing, and the Shannon
//! rate used for every link.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{BandConfig, ChannelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Band {
    /// LTE, 800 MHz.
    Lte,
    /// NR, 3.5 GHz.
    NrMid,
    /// NR, 30 GHz, codebook beamforming.
    NrMmWave,
}

impl Band {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl ChannelConfig {
    pub fn band(&self, band: Band) -> &BandConfig {
        match band {
            Band::Lte => &self.lte,
            Band::NrMid => &self.nr_mid,
            Band::NrMmWave => &self.nr_mmwave,
        }
    }

    /// Thermal noise plus receiver noise figure over a band (dBm).
    pub fn noise_dbm(&self, band: Band) -> f64 {
        self.noise_density_dbm_hz + 10.0 * (self.band(band).bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }
}

/// `PL(d) = PL0 + 10 n log10(d / d0)` with `d0 = 1 m`.
pub fn pathloss_db(band: &BandConfig, distance_m: f64) -> f64 {
    band.pl0_db + 10.0 * band.exponent * distance_m.max(1.0).log10()
}

/// Spectral efficiency in bit/s/Hz.
pub fn shannon_se(sinr_linear: f64) -> f64 {
    (1.0 + sinr_linear.max(0.0)).log2()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Static link losses for a fixed drop: pathloss plus shadowing for every
/// (UE, BS, band), with the shadowing term shared across bands of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    n_bs: usize,
    /// `[ue][bs][band]` total loss in dB.
    loss_db: Vec<[f64; 3]>,
}

impl LinkTable {
    pub fn build<R: Rng>(
        cfg: &ChannelConfig,
        bs_positions: &[[f64; 2]],
        ue_positions: &[[f64; 2]],
        min_distance_m: f64,
        rng: &mut R,
    ) -> Self {
        let shadow = Normal::new(0.0, cfg.shadowing_sigma_db.max(0.0)).expect("finite sigma");
        let mut loss_db = Vec::with_capacity(ue_positions.len() * bs_positions.len());
        for ue in ue_positions {
            for bs in bs_positions {
                let d = (ue[0] - bs[0]).hypot(ue[1] - bs[1]).max(min_distance_m);
                let s = if cfg.shadowing_sigma_db > 0.0 { shadow.sample(rng) } else { 0.0 };
                loss_db.push([
                    pathloss_db(&cfg.lte, d) + s,
                    pathloss_db(&cfg.nr_mid, d) + s,
                    pathloss_db(&cfg.nr_mmwave, d) + s,
                ]);
            }
        }
        Self { n_bs: bs_positions.len(), loss_db }
    }

    pub fn loss_db(&self, ue: usize, bs: usize, band: Band) -> f64 {
        self.loss_db[ue * self.n_bs + bs][band.index()]
    }
}
