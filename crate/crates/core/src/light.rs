//! Two-level steady-state response to the flash beam.

use serde::{Deserialize, Serialize};

use crate::units::{saturation_intensity, SpeciesParams, CONSTANTS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlashParams {
    /// Intensity in W/m².
    pub intensity: f64,
    /// Laser minus atom, rad/s.
    pub detuning: f64,
    /// Polarization angle from x towards z, degrees.
    pub polarization_angle_deg: f64,
    /// Propagation direction (unit vector).
    pub propagation: [f64; 3],
    /// Wavelength used for the wave vector; the bare transition wavelength.
    pub wavelength: f64,
    /// Flash duration in s.
    pub flash_time: f64,
}

impl FlashParams {
    /// 1120 I_sat, 100 MHz detuning, x polarization, along +y, 300 ns.
    pub fn paper_defaults(species: &SpeciesParams) -> Self {
        Self {
            intensity: 1120.0 * saturation_intensity(species),
            detuning: crate::units::hz_to_angular(100e6),
            polarization_angle_deg: 0.0,
            propagation: [0.0, 1.0, 0.0],
            wavelength: species.lambda0,
            flash_time: 300e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(Error::InvalidParameter("intensity must be ≥ 0".into()));
        }
        if !(0.0..=90.0).contains(&self.polarization_angle_deg) {
            return Err(Error::InvalidParameter(format!(
                "polarization angle {} outside [0, 90] degrees",
                self.polarization_angle_deg
            )));
        }
        if !(self.flash_time.is_finite() && self.flash_time > 0.0) {
            return Err(Error::InvalidParameter("flash time must be positive".into()));
        }
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter("detuning must be finite".into()));
        }
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        let p = self.propagation;
        if ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("propagation must be a unit vector".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn k_vec(&self) -> [f64; 3] {
        self.propagation.map(|c| c * self.k())
    }
}

/// s = (I₀/I_sat) / (1 + 4(δ/Γ)²)
pub fn saturation_parameter(flash: &FlashParams, species: &SpeciesParams) -> f64 {
    let ratio = flash.detuning / species.gamma;
    flash.intensity / saturation_intensity(species) / (1.0 + 4.0 * ratio * ratio)
}

/// Ω = Γ √(I₀ / 2 I_sat)
pub fn rabi_frequency(flash: &FlashParams, species: &SpeciesParams) -> f64 {
    species.gamma * (flash.intensity / (2.0 * saturation_intensity(species))).sqrt()
}

/// d = 2 (d_ge/Ω) · s/(s+1) · √(δ² + Γ²/4)
pub fn steady_state_dipole(flash: &FlashParams, species: &SpeciesParams) -> Result<f64> {
    if !(flash.intensity > 0.0) {
        return Err(Error::InvalidParameter("steady-state dipole needs a positive intensity".into()));
    }
    let s = saturation_parameter(flash, species);
    let omega = rabi_frequency(flash, species);
    let d = flash.detuning;
    let g = species.gamma;
    Ok(2.0 * species.d_ge / omega * s / (s + 1.0) * (d * d + g * g / 4.0).sqrt())
}

/// d_max = √(3Γ ε₀ h c³ / 4ω₀³)
pub fn max_dipole(species: &SpeciesParams) -> f64 {
    let k = CONSTANTS;
    (3.0 * species.gamma * k.epsilon0 * k.h * k.c.powi(3) / (4.0 * species.omega0().powi(3))).sqrt()
}

/// Intensity at which the dipole is maximal for the flash's detuning.
pub fn optimal_intensity(detuning: f64, species: &SpeciesParams) -> f64 {
    let r = detuning / species.gamma;
    saturation_intensity(species) * (1.0 + 4.0 * r * r)
}

/// Photon scattering rate R = (Γ/2) s/(1+s), photons per second.
pub fn scattering_rate(flash: &FlashParams, species: &SpeciesParams) -> f64 {
    let s = saturation_parameter(flash, species);
    species.gamma / 2.0 * s / (1.0 + s)
}
