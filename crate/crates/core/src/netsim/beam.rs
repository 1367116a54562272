//! Analog beamforming on a half-wavelength uniform linear array.
//!
//! Elements lie along the x axis, so a UE at offset `(dx, dy)` from the array
//! sits at angle `chi = asin(dx / d)` from broadside. The codebook is the DFT
//! beam set: steering directions with `sin(chi_n) = -1 + 2n/|F|`, which tile
//! the array's electrical angle `pi * sin(chi)` uniformly.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Array steering vector for direction `chi`: element `i` is `exp(j*pi*i*sin(chi))`.
pub fn steering_vector(chi: f64, m: usize) -> Result<Vec<Complex64>> {
    if m == 0 {
        return Err(Error::domain("antenna count must be at least 1"));
    }
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&chi) {
        return Err(Error::domain(format!("steering angle {chi} outside [-pi/2, pi/2]")));
    }
    let s = chi.sin();
    Ok((0..m).map(|i| Complex64::from_polar(1.0, PI * i as f64 * s)).collect())
}

/// Linear array gain `|a(beam)^H a(ue)|^2 / M`; equals `M` when aligned.
pub fn array_gain(beam: &[Complex64], ue_dir: &[Complex64]) -> f64 {
    debug_assert_eq!(beam.len(), ue_dir.len());
    let inner: Complex64 = beam.iter().zip(ue_dir).map(|(b, u)| b.conj() * u).sum();
    inner.norm_sqr() / beam.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub antennas: usize,
    /// Steering angle of every beam (radians).
    pub angles: Vec<f64>,
}

impl Codebook {
    pub fn dft(antennas: usize, size: usize) -> Result<Self> {
        if antennas == 0 || size == 0 {
            return Err(Error::domain("codebook needs at least one antenna and one beam"));
        }
        let angles = (0..size)
            .map(|n| (-1.0 + 2.0 * n as f64 / size as f64).clamp(-1.0, 1.0).asin())
            .collect();
        Ok(Self { antennas, angles })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Beam index closest to broadside.
    pub fn broadside(&self) -> usize {
        self.nearest(0.0)
    }

    pub fn steering(&self, beam: usize) -> Result<Vec<Complex64>> {
        let chi = *self
            .angles
            .get(beam)
            .ok_or_else(|| Error::domain(format!("beam index {beam} outside codebook of {}", self.len())))?;
        steering_vector(chi, self.antennas)
    }

    /// Linear gain of `beam` toward a UE at angle `ue_chi`.
    pub fn gain_linear(&self, beam: usize, ue_chi: f64) -> Result<f64> {
        let b = self.steering(beam)?;
        let u = steering_vector(ue_chi, self.antennas)?;
        Ok(array_gain(&b, &u))
    }

    /// Exhaustive sweep: the beam with the largest gain toward `ue_chi`.
    /// Ties resolve to the lowest index.
    pub fn sweep(&self, ue_chi: f64) -> Result<usize> {
        let u = steering_vector(ue_chi, self.antennas)?;
        let mut best = (0, f64::NEG_INFINITY);
        for n in 0..self.len() {
            let g = array_gain(&self.steering(n)?, &u);
            if g > best.1 + 1e-12 {
                best = (n, g);
            }
        }
        Ok(best.0)
    }

    /// Beam whose steering direction is nearest `ue_chi` in electrical angle
    /// (`pi * sin(chi)`, taken modulo `2*pi` since endfire directions alias).
    pub fn nearest(&self, ue_chi: f64) -> usize {
        let s = ue_chi.sin();
        let mut best = (0, f64::INFINITY);
        for (n, a) in self.angles.iter().enumerate() {
            let mut d = (a.sin() - s).abs();
            d = d.min(2.0 - d);
            if d < best.1 - 1e-12 {
                best = (n, d);
            }
        }
        best.0
    }
}

/// Angle of a UE from the broadside of an array at `bs_pos`.
pub fn ue_angle(bs_pos: [f64; 2], ue_pos: [f64; 2]) -> f64 {
    let dx = ue_pos[0] - bs_pos[0];
    let dy = ue_pos[1] - bs_pos[1];
    let d = dx.hypot(dy);
    if d == 0.0 {
        0.0
    } else {
        (dx / d).clamp(-1.0, 1.0).asin()
    }
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
