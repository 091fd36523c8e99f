//! Physical constants, unit conversions and the Rb-87 parameter set.
//!
//! Frequencies enter and leave the crate as plain frequencies (Hz) and are
//! stored internally as angular frequencies (rad/s). Energies are reported
//! as E/h in Hz and momenta in units of the flash-beam recoil ħk.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub h: f64,
    pub c: f64,
    pub epsilon0: f64,
    pub bohr_radius: f64,
    pub debye: f64,
}

impl PhysicalConstants {
    pub const fn codata() -> Self {
        const HBAR: f64 = 1.054_571_817e-34;
        const C: f64 = 299_792_458.0;
        Self {
            hbar: HBAR,
            h: 2.0 * PI * HBAR,
            c: C,
            epsilon0: 8.854_187_812_8e-12,
            bohr_radius: 5.291_772_109_03e-11,
            debye: 1e-21 / C,
        }
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::codata()
    }
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants::codata();

/// Two-level reduction of an alkali species driven near one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeciesParams {
    /// Atomic mass in kg.
    pub mass: f64,
    /// Natural linewidth Γ in rad/s.
    pub gamma: f64,
    /// Transition wavelength in m.
    pub lambda0: f64,
    /// Dipole matrix element in C·m.
    pub d_ge: f64,
    /// s-wave scattering length in m.
    pub a_s: f64,
}

impl SpeciesParams {
    /// Transition angular frequency 2πc/λ₀.
    pub fn omega0(&self) -> f64 {
        2.0 * PI * CONSTANTS.c / self.lambda0
    }

    /// Wavenumber of light at the transition wavelength.
    pub fn k0(&self) -> f64 {
        2.0 * PI / self.lambda0
    }

    /// Contact coupling g = 4πħ²a/m.
    pub fn contact_coupling(&self) -> f64 {
        4.0 * PI * CONSTANTS.hbar.powi(2) * self.a_s / self.mass
    }

    /// Recoil momentum ħk at the transition wavelength.
    pub fn recoil_momentum(&self) -> f64 {
        CONSTANTS.hbar * self.k0()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let checks = [
            ("mass", self.mass),
            ("gamma", self.gamma),
            ("lambda0", self.lambda0),
            ("d_ge", self.d_ge),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(crate::Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.a_s.is_finite() && self.a_s >= 0.0) {
            return Err(crate::Error::InvalidParameter(format!(
                "scattering length must be non-negative, got {}",
                self.a_s
            )));
        }
        Ok(())
    }

    /// Replace `d_ge` with the value implied by the linewidth of a closed
    /// two-level transition.
    pub fn with_two_level_dipole(mut self) -> Self {
        self.d_ge = two_level_dipole(self.gamma, self.lambda0);
        self
    }
}

/// d_ge² = 3π ε₀ ħ c³ Γ / ω₀³.
pub fn two_level_dipole(gamma: f64, lambda0: f64) -> f64 {
    let k = CONSTANTS;
    let omega0 = 2.0 * PI * k.c / lambda0;
    (3.0 * PI * k.epsilon0 * k.hbar * k.c.powi(3) * gamma / omega0.powi(3)).sqrt()
}

/// Rb-87 on the D2 line. The mass is the rounded value used for the
/// acceleration estimates; the scattering length is the standard 100 a₀.
pub fn rb87_defaults() -> SpeciesParams {
    let gamma = hz_to_angular(6.07e6);
    let lambda0 = 780.249e-9;
    SpeciesParams {
        mass: 1.44e-25,
        gamma,
        lambda0,
        d_ge: two_level_dipole(gamma, lambda0),
        a_s: 100.0 * CONSTANTS.bohr_radius,
    }
}

impl Default for SpeciesParams {
    fn default() -> Self {
        rb87_defaults()
    }
}

/// I_sat = π h c Γ / (3 λ³), with Γ in rad/s.
pub fn saturation_intensity(species: &SpeciesParams) -> f64 {
    PI * CONSTANTS.h * CONSTANTS.c * species.gamma / (3.0 * species.lambda0.powi(3))
}

pub fn hz_to_angular(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn angular_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Energy in J expressed as E/h in Hz.
pub fn energy_to_hz(e: f64) -> f64 {
    e / CONSTANTS.h
}

pub fn hz_to_energy(f: f64) -> f64 {
    f * CONSTANTS.h
}

pub fn debye_to_si(d: f64) -> f64 {
    d * CONSTANTS.debye
}

pub fn si_to_debye(d: f64) -> f64 {
    d / CONSTANTS.debye
}
