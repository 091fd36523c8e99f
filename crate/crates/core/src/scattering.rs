//! Monte-Carlo momentum spread from spontaneously scattered flash photons.
//!
//! Each atom scatters N ~ Poisson(R·t) photons. Every photon gives one
//! recoil along the beam on absorption and one recoil along a random
//! emission direction. Statistics are in recoil units ħk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kernel::polarization_vector;
use crate::light::{scattering_rate, FlashParams};
use crate::units::SpeciesParams;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmissionPattern {
    Isotropic,
    /// Emission ∝ sin²θ from the dipole axis.
    DipolePi { axis: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    pub emission_pattern: EmissionPattern,
    pub rng_seed: u64,
    /// Number of simulated atoms.
    pub samples: usize,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self { emission_pattern: EmissionPattern::Isotropic, rng_seed: 0x5eed, samples: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisStats {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoilStats {
    /// x, y, z statistics in recoils.
    pub axes: [AxisStats; 3],
    pub mean_photons: f64,
    pub samples: usize,
    pub seed: u64,
    /// Per-atom momentum kicks when requested.
    #[serde(skip)]
    pub raw: Option<Vec<[f64; 3]>>,
}

/// Atoms per independent RNG stream; fixed so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 4096;

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return v.map(|c| c / n);
        }
    }
}

/// Draw one emission direction.
pub fn sample_direction(pattern: &EmissionPattern, rng: &mut ChaCha8Rng) -> [f64; 3] {
    match pattern {
        EmissionPattern::Isotropic => unit_vector(rng),
        EmissionPattern::DipolePi { axis } => loop {
            let u = unit_vector(rng);
            let c = u[0] * axis[0] + u[1] * axis[1] + u[2] * axis[2];
            if rng.random::<f64>() < 1.0 - c * c {
                return u;
            }
        },
    }
}

/// Angular probability density per steradian.
pub fn pattern_density(pattern: &EmissionPattern, u: [f64; 3]) -> f64 {
    match pattern {
        EmissionPattern::Isotropic => 1.0 / (4.0 * std::f64::consts::PI),
        EmissionPattern::DipolePi { axis } => {
            let c = u[0] * axis[0] + u[1] * axis[1] + u[2] * axis[2];
            3.0 / (8.0 * std::f64::consts::PI) * (1.0 - c * c)
        }
    }
}

fn validate(cfg: &ScatterConfig) -> Result<()> {
    if cfg.samples == 0 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if let EmissionPattern::DipolePi { axis } = cfg.emission_pattern {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("dipole axis must be a unit vector".into()));
        }
    }
    Ok(())
}

/// Simulate recoil kicks for a given mean photon number per atom.
pub fn simulate_photons(
    mean_photons: f64,
    propagation: [f64; 3],
    cfg: &ScatterConfig,
    keep_raw: bool,
) -> Result<RecoilStats> {
    validate(cfg)?;
    if !(mean_photons.is_finite() && mean_photons >= 0.0) {
        return Err(Error::InvalidParameter("mean photon number must be ≥ 0".into()));
    }
    let poisson = if mean_photons > 0.0 {
        Some(Poisson::new(mean_photons).map_err(|e| Error::InvalidParameter(e.to_string()))?)
    } else {
        None
    };
    let chunks = cfg.samples.div_ceil(CHUNK);
    let kicks: Vec<[f64; 3]> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(cfg.samples - c * CHUNK);
            (0..count)
                .map(|_| {
                    let photons = poisson.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
                    let mut p = [0.0; 3];
                    for _ in 0..photons {
                        let u = sample_direction(&cfg.emission_pattern, &mut rng);
                        for a in 0..3 {
                            p[a] += propagation[a] + u[a];
                        }
                    }
                    p
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let n = kicks.len() as f64;
    let axes = [0, 1, 2].map(|a| {
        let mean = kicks.iter().map(|k| k[a]).sum::<f64>() / n;
        let var = if kicks.len() > 1 {
            kicks.iter().map(|k| (k[a] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        AxisStats { mean, sigma: var.sqrt() }
    });
    Ok(RecoilStats {
        axes,
        mean_photons,
        samples: cfg.samples,
        seed: cfg.rng_seed,
        raw: keep_raw.then_some(kicks),
    })
}

/// Recoil statistics for the flash: photon number R·t with R the two-level
/// scattering rate.
pub fn simulate_recoils(flash: &FlashParams, species: &SpeciesParams, cfg: &ScatterConfig) -> Result<RecoilStats> {
    flash.validate()?;
    let mean = scattering_rate(flash, species) * flash.flash_time;
    simulate_photons(mean, flash.propagation, cfg, false)
}

/// Per-axis σ (recoils) with a dipole emission pattern along the
/// polarization at `angle_deg`.
pub fn background_width(
    flash: &FlashParams,
    species: &SpeciesParams,
    cfg: &ScatterConfig,
    angle_deg: f64,
) -> Result<RecoilStats> {
    let cfg = ScatterConfig {
        emission_pattern: EmissionPattern::DipolePi { axis: polarization_vector(angle_deg) },
        ..*cfg
    };
    simulate_recoils(flash, species, &cfg)
}

/// Closed-form compound-Poisson moments: per-axis (mean, variance) in
/// recoils for mean photon number λ.
pub fn compound_poisson_moments(mean_photons: f64, propagation: [f64; 3], pattern: &EmissionPattern) -> [(f64, f64); 3] {
    let second = |a: usize| match pattern {
        EmissionPattern::Isotropic => 1.0 / 3.0,
        EmissionPattern::DipolePi { axis } => 0.4 - 0.2 * axis[a] * axis[a],
    };
    [0, 1, 2].map(|a| {
        (
            mean_photons * propagation[a],
            mean_photons * (propagation[a] * propagation[a] + second(a)),
        )
    })
}

/// √(σ_c² + σ_i²)
pub fn combine_quadrature(sigma_coherent: f64, sigma_incoherent: f64) -> f64 {
    sigma_coherent.hypot(sigma_incoherent)
}
