//! Experiment configuration. Every physical quantity carries its unit in
//! the key name; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};

use lightdd_core::gpe::{SolverOpts, TrapParams};
use lightdd_core::grid::LATTICE_WAVELENGTH;
use lightdd_core::light::FlashParams;
use lightdd_core::potential::{SolverOptions, StackMode, StackSpec};
use lightdd_core::scattering::{EmissionPattern, ScatterConfig};
use lightdd_core::units::{
    debye_to_si, hz_to_angular, rb87_defaults, saturation_intensity, two_level_dipole, SpeciesParams, CONSTANTS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub mass_kg: f64,
    /// Γ/2π
    pub linewidth_mhz: f64,
    pub wavelength_nm: f64,
    pub scattering_length_bohr: f64,
    /// Derived from the linewidth when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_dipole_debye: Option<f64>,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        let s = rb87_defaults();
        Self {
            mass_kg: s.mass,
            linewidth_mhz: s.gamma / (2.0 * std::f64::consts::PI) / 1e6,
            wavelength_nm: s.lambda0 * 1e9,
            scattering_length_bohr: 100.0,
            transition_dipole_debye: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub radial_frequency_khz: f64,
    pub axial_frequency_khz: f64,
    pub lattice_depth_recoils: f64,
    pub lattice_wavelength_nm: f64,
    pub atom_number: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            radial_frequency_khz: 1.0,
            axial_frequency_khz: 105.0,
            lattice_depth_recoils: 100.0,
            lattice_wavelength_nm: LATTICE_WAVELENGTH * 1e9,
            atom_number: 250.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlashSection {
    /// Multiples of the saturation intensity.
    pub intensity_isat: f64,
    /// Laser minus atom, δ/2π.
    pub detuning_mhz: f64,
    pub polarization_deg: f64,
    pub duration_ns: f64,
    pub propagation_unit: [f64; 3],
}

impl Default for FlashSection {
    fn default() -> Self {
        Self {
            intensity_isat: 1120.0,
            detuning_mhz: 100.0,
            polarization_deg: 0.0,
            duration_ns: 300.0,
            propagation_unit: [0.0, 1.0, 0.0],
        }
    }
}

/// Lattice on which the induced potential and the imprint are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub spacing_nm: f64,
    /// Transverse box width in units of the Thomas-Fermi radius.
    pub extent_over_radius: f64,
    pub min_transverse_cells: usize,
    pub padding_factor: usize,
    /// Zero-padding factor of the projected momentum transforms.
    pub momentum_padding_factor: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            spacing_nm: LATTICE_WAVELENGTH * 1e9 / 32.0,
            extent_over_radius: 2.5,
            min_transverse_cells: 64,
            padding_factor: 2,
            momentum_padding_factor: 4,
        }
    }
}

/// Imaginary-time solver and its (anisotropic) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateSection {
    pub radial_cells: usize,
    pub axial_cells: usize,
    pub radial_spacing_nm: f64,
    pub axial_spacing_nm: f64,
    pub dtau_ns: f64,
    pub dtau_start_ns: f64,
    pub tolerance_rel: f64,
    pub max_iterations: usize,
    pub check_interval_steps: usize,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        let o = SolverOpts::default();
        Self {
            radial_cells: 96,
            axial_cells: 24,
            radial_spacing_nm: 40.0,
            axial_spacing_nm: 12.0,
            dtau_ns: o.dtau * 1e9,
            dtau_start_ns: o.dtau_start * 1e9,
            tolerance_rel: o.tolerance,
            max_iterations: o.max_iter,
            check_interval_steps: o.check_interval,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StackKind {
    Truncated,
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StackSection {
    pub mode: StackKind,
    pub period_nm: f64,
    /// Image cap per side in truncated mode.
    pub images: usize,
    /// Relative change between M and 2M images; absent means exactly `images`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_tol_rel: Option<f64>,
    /// Stack periods held in the box in periodic mode.
    pub periodic_periods: usize,
}

impl Default for StackSection {
    fn default() -> Self {
        Self {
            mode: StackKind::Truncated,
            period_nm: LATTICE_WAVELENGTH * 1e9 / 2.0,
            images: 512,
            convergence_tol_rel: Some(1e-3),
            periodic_periods: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionKind {
    /// sin²θ about the flash polarization.
    Dipole,
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatterSection {
    pub emission: EmissionKind,
    pub seed: u64,
    pub samples: usize,
}

impl Default for ScatterSection {
    fn default() -> Self {
        Self { emission: EmissionKind::Dipole, seed: 7919, samples: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Polarization angles of the width scan.
    pub polarization_deg: Vec<f64>,
    /// Cloud radii of the potential scan, at fixed peak density.
    pub tf_radius_um: Vec<f64>,
    /// Cloud radius used for the polarization scan.
    pub reference_tf_radius_um: f64,
    pub peak_density_per_m3: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            polarization_deg: (0..=18).map(|i| 5.0 * i as f64).collect(),
            tf_radius_um: (1..=10).map(|i| 0.2 * i as f64).map(|r| (r * 10.0).round() / 10.0).collect(),
            reference_tf_radius_um: 1.15,
            peak_density_per_m3: 9.7e20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CachePolicy {
    /// Load when present, store otherwise.
    Use,
    /// Always solve and overwrite.
    Refresh,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub cache: CachePolicy,
    /// Defaults to `<directory>/cache`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_directory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: PathBuf::from("lightdd-out"), cache: CachePolicy::Use, cache_directory: None, workers: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub species: SpeciesSection,
    pub trap: TrapSection,
    pub flash: FlashSection,
    pub grid: GridSection,
    pub ground_state: GroundStateSection,
    pub stack: StackSection,
    pub scatter: ScatterSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    /// Written into manifests; ignored on input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provenance: Option<toml::Table>,
}

/// Worker-count override.
pub const WORKERS_ENV: &str = "LIGHTDD_WORKERS";

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for &phi in &self.sweep.polarization_deg {
            ensure!((0.0..=90.0).contains(&phi), "polarization angle {phi} deg outside [0, 90]");
        }
        for &rho in self.sweep.tf_radius_um.iter().chain([&self.sweep.reference_tf_radius_um]) {
            ensure!(rho.is_finite() && rho > 0.0, "cloud radius {rho} um must be positive");
        }
        ensure!(self.sweep.peak_density_per_m3 > 0.0, "peak density must be positive");
        ensure!(self.flash.intensity_isat >= 0.0, "flash intensity must be non-negative");
        ensure!(self.flash.duration_ns > 0.0, "flash duration must be positive");
        ensure!(self.trap.atom_number > 0.0, "atom number must be positive");
        ensure!(self.grid.spacing_nm > 0.0, "grid spacing must be positive");
        ensure!(self.grid.extent_over_radius >= 2.0, "box must cover the cloud diameter");
        ensure!(self.grid.padding_factor >= 1 && self.grid.momentum_padding_factor >= 1, "padding factors must be ≥ 1");
        ensure!(self.stack.periodic_periods >= 1, "periodic box needs at least one period");
        ensure!(self.scatter.samples > 0, "scatter samples must be positive");
        self.period_cells()?;
        self.species().validate()?;
        self.trap_params().validate()?;
        self.flash_params().validate()?;
        self.stack_spec().validate()?;
        Ok(())
    }

    pub fn species(&self) -> SpeciesParams {
        let s = &self.species;
        let mut p = SpeciesParams {
            mass: s.mass_kg,
            gamma: hz_to_angular(s.linewidth_mhz * 1e6),
            lambda0: s.wavelength_nm * 1e-9,
            d_ge: 0.0,
            a_s: s.scattering_length_bohr * CONSTANTS.bohr_radius,
        };
        p.d_ge = match s.transition_dipole_debye {
            Some(d) => debye_to_si(d),
            None => two_level_dipole(p.gamma, p.lambda0),
        };
        p
    }

    pub fn trap_params(&self) -> TrapParams {
        TrapParams {
            omega_radial: hz_to_angular(self.trap.radial_frequency_khz * 1e3),
            omega_axial: hz_to_angular(self.trap.axial_frequency_khz * 1e3),
            lattice_depth: self.trap.lattice_depth_recoils,
            lattice_wavelength: self.trap.lattice_wavelength_nm * 1e-9,
        }
    }

    pub fn flash_params(&self) -> FlashParams {
        let species = self.species();
        let f = &self.flash;
        FlashParams {
            intensity: f.intensity_isat * saturation_intensity(&species),
            detuning: hz_to_angular(f.detuning_mhz * 1e6),
            polarization_angle_deg: f.polarization_deg,
            propagation: f.propagation_unit,
            wavelength: species.lambda0,
            flash_time: f.duration_ns * 1e-9,
        }
    }

    pub fn with_polarization(&self, phi: f64) -> FlashParams {
        FlashParams { polarization_angle_deg: phi, ..self.flash_params() }
    }

    pub fn stack_spec(&self) -> StackSpec {
        let s = &self.stack;
        let mode = match s.mode {
            StackKind::Truncated => StackMode::Truncated { images: s.images },
            StackKind::Periodic => StackMode::PeriodicZ,
        };
        StackSpec { period: s.period_nm * 1e-9, mode, convergence_tol: s.convergence_tol_rel }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { padding: self.grid.padding_factor, ..SolverOptions::default() }
    }

    pub fn gpe_opts(&self) -> SolverOpts {
        let g = &self.ground_state;
        SolverOpts {
            dtau: g.dtau_ns * 1e-9,
            dtau_start: g.dtau_start_ns * 1e-9,
            tolerance: g.tolerance_rel,
            max_iter: g.max_iterations,
            check_interval: g.check_interval_steps,
        }
    }

    pub fn scatter_config(&self) -> ScatterConfig {
        // the dipole axis is set per angle
        let pattern = match self.scatter.emission {
            EmissionKind::Dipole => EmissionPattern::DipolePi { axis: [1.0, 0.0, 0.0] },
            EmissionKind::Isotropic => EmissionPattern::Isotropic,
        };
        ScatterConfig { emission_pattern: pattern, rng_seed: self.scatter.seed, samples: self.scatter.samples }
    }

    /// Interaction-grid cells per stack period; one period must be a whole
    /// (even) number of cells.
    pub fn period_cells(&self) -> anyhow::Result<usize> {
        let q = self.stack.period_nm / self.grid.spacing_nm;
        let r = q.round();
        if (q - r).abs() > 1e-6 * q || r < 4.0 || r as usize % 2 != 0 {
            bail!(
                "stack period {} nm is {q:.4} cells of {} nm; an even whole number is required",
                self.stack.period_nm,
                self.grid.spacing_nm
            );
        }
        Ok(r as usize)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output.cache_directory.clone().unwrap_or_else(|| self.output.directory.join("cache"))
    }

    /// Environment override first, then the config, then the machine.
    pub fn workers(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
            .or(self.output.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        assert!(text.contains("detuning_mhz = 100.0"));
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_means_defaults() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let cfg = ExperimentConfig::from_toml("[grid]\nspacing_nm = 49.0625\n").unwrap();
        assert_eq!(cfg.grid.spacing_nm, 49.0625);
        assert_eq!(cfg.grid.padding_factor, GridSection::default().padding_factor);
        assert_eq!(cfg.period_cells().unwrap(), 8);
    }

    #[test]
    fn unknown_and_unitless_keys_rejected() {
        assert!(ExperimentConfig::from_toml("[flash]\ndetuning = 100.0\n").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn sweep_ranges_validated() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.polarization_deg = vec![0.0, 95.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.tf_radius_um = vec![0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn incommensurate_period_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.grid.spacing_nm = 30.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resolved_physics_matches_defaults() {
        let cfg = ExperimentConfig::default();
        let s = cfg.species();
        let d = rb87_defaults();
        assert!((s.gamma - d.gamma).abs() / d.gamma < 1e-12);
        assert!((s.d_ge - d.d_ge).abs() / d.d_ge < 1e-12);
        assert!((s.a_s - d.a_s).abs() / d.a_s < 1e-12);
        let f = cfg.flash_params();
        let p = FlashParams::paper_defaults(&d);
        assert!((f.intensity - p.intensity).abs() / p.intensity < 1e-12);
        assert!((f.detuning - p.detuning).abs() / p.detuning < 1e-12);
        assert_eq!(cfg.period_cells().unwrap(), 16);
    }

    #[test]
    fn worker_env_override() {
        let mut cfg = ExperimentConfig::default();
        cfg.output.workers = Some(3);
        std::env::remove_var(WORKERS_ENV);
        assert_eq!(cfg.workers(), 3);
    }
}
