//! Convergence studies: rerun the reference point while one numerical
//! knob varies and report how the key observables move.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::bail;
use serde::{Deserialize, Serialize};

use lightdd_core::grid::Axis;
use lightdd_core::potential::max_acceleration;

use crate::config::{ExperimentConfig, StackKind};
use crate::output::{write_atomic, write_csv};
use crate::pipeline::{coherent_widths, Prepared, Stage, StageError, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    /// Interaction-lattice spacing in nm.
    GridSpacing,
    /// Transverse zero-padding factor.
    Padding,
    /// Fixed number of stack images per side.
    StackM,
    /// Final imaginary-time step in ns.
    Dtau,
}

impl Knob {
    pub fn name(self) -> &'static str {
        match self {
            Knob::GridSpacing => "grid_spacing",
            Knob::Padding => "padding",
            Knob::StackM => "stack_m",
            Knob::Dtau => "dtau",
        }
    }

    /// Relative change at which the primary observable counts as converged.
    pub fn default_tolerance(self, cfg: &ExperimentConfig) -> f64 {
        match self {
            Knob::Dtau => 1e-3,
            Knob::StackM => cfg.stack.convergence_tol_rel.unwrap_or(1e-3),
            Knob::GridSpacing | Knob::Padding => 1e-2,
        }
    }

    fn apply(self, cfg: &mut ExperimentConfig, value: f64) -> anyhow::Result<()> {
        let whole = || -> anyhow::Result<usize> {
            if value < 0.0 || value.fract() != 0.0 {
                bail!("{} needs whole-number values, got {value}", self.name());
            }
            Ok(value as usize)
        };
        match self {
            Knob::GridSpacing => cfg.grid.spacing_nm = value,
            Knob::Padding => cfg.grid.padding_factor = whole()?,
            Knob::StackM => {
                cfg.stack.mode = StackKind::Truncated;
                cfg.stack.images = whole()?;
                cfg.stack.convergence_tol_rel = None;
            }
            Knob::Dtau => {
                cfg.ground_state.dtau_ns = value;
                cfg.ground_state.dtau_start_ns = cfg.ground_state.dtau_start_ns.max(value);
            }
        }
        Ok(())
    }
}

impl FromStr for Knob {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "grid_spacing" => Knob::GridSpacing,
            "padding" => Knob::Padding,
            "stack_m" => Knob::StackM,
            "dtau" => Knob::Dtau,
            other => bail!("unknown convergence knob `{other}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub value: f64,
    pub peak_potential_mhz: f64,
    pub max_acceleration_m_s2: f64,
    pub sigma_x_recoil: f64,
    pub chemical_potential_hz: f64,
    /// Relative changes against the previous row; empty on the first.
    pub change_peak_potential: Option<f64>,
    pub change_max_acceleration: Option<f64>,
    pub change_sigma_x: Option<f64>,
    pub change_chemical_potential: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub knob: Knob,
    pub tolerance: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Successive changes of the primary observable shrink and the last one
    /// is within tolerance.
    pub converged: bool,
    pub notes: Vec<String>,
}

impl ConvergenceReport {
    /// Successive relative changes of the observable that decides convergence.
    pub fn primary_changes(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter_map(|r| match self.knob {
                Knob::Dtau => r.change_chemical_potential,
                _ => r.change_peak_potential,
            })
            .collect()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        ((a - b) / b).abs()
    }
}

/// Observables at the reference radius with the polarization from `[flash]`.
pub fn observe(cfg: &ExperimentConfig, value: f64) -> Result<ConvergenceRow, StageError> {
    let prep = Prepared::new(cfg)?;
    let rho = cfg.sweep.reference_tf_radius_um * 1e-6;
    let cloud = prep.cloud(rho).stage(Stage::Cloud)?;
    let solver = prep.solver(&cloud).stage(Stage::Potential)?;
    let kernel = prep.kernel(cfg.flash.polarization_deg).stage(Stage::Potential)?;
    let (v, _) = solver.potential(&kernel).stage(Stage::Potential)?;
    let t = cfg.flash.duration_ns * 1e-9;
    let after = lightdd_core::raman_nath::phase_imprint(&cloud, &v, t).stage(Stage::Imprint)?;
    let widths = coherent_widths(&prep, &after).stage(Stage::Momentum)?;
    let sigma_x = widths.iter().find(|w| w.axis == Axis::X).map_or(f64::NAN, |w| w.sigma);
    Ok(ConvergenceRow {
        value,
        peak_potential_mhz: v.max_abs() / lightdd_core::units::CONSTANTS.h / 1e6,
        max_acceleration_m_s2: max_acceleration(&v, prep.species.mass).value,
        sigma_x_recoil: sigma_x,
        chemical_potential_hz: prep.ground_report.chemical_potential,
        change_peak_potential: None,
        change_max_acceleration: None,
        change_sigma_x: None,
        change_chemical_potential: None,
    })
}

pub fn convergence_study(
    cfg: &ExperimentConfig,
    knob: Knob,
    values: &[f64],
    tolerance: Option<f64>,
) -> Result<ConvergenceReport, StageError> {
    if values.len() < 2 {
        return Err(StageError { stage: Stage::Config, source: anyhow::anyhow!("need at least two knob values") });
    }
    let tolerance = tolerance.unwrap_or_else(|| knob.default_tolerance(cfg));
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(values.len());
    for &value in values {
        let mut c = cfg.clone();
        knob.apply(&mut c, value).stage(Stage::Config)?;
        let mut row = observe(&c, value)?;
        if let Some(prev) = rows.last() {
            row.change_peak_potential = Some(rel(row.peak_potential_mhz, prev.peak_potential_mhz));
            row.change_max_acceleration = Some(rel(row.max_acceleration_m_s2, prev.max_acceleration_m_s2));
            row.change_sigma_x = Some(rel(row.sigma_x_recoil, prev.sigma_x_recoil));
            row.change_chemical_potential = Some(rel(row.chemical_potential_hz, prev.chemical_potential_hz));
        }
        log::info!("{} = {value}: peak |V| {:.4} MHz", knob.name(), row.peak_potential_mhz);
        rows.push(row);
    }

    let mut report = ConvergenceReport { knob, tolerance, rows, converged: false, notes: Vec::new() };
    let changes = report.primary_changes();
    let shrinking = changes.windows(2).all(|w| w[1] <= w[0]);
    let last = *changes.last().expect("two or more rows");
    if !shrinking {
        report.notes.push(format!("successive changes do not decrease: {changes:?}"));
    }
    if last > tolerance {
        report.notes.push(format!("last relative change {last:.3e} exceeds {tolerance:.1e}"));
    }
    report.converged = shrinking && last <= tolerance;
    if !report.converged {
        log::warn!("{} study not converged: {}", knob.name(), report.notes.join("; "));
    }
    Ok(report)
}

pub fn write_report(cfg: &ExperimentConfig, report: &ConvergenceReport) -> anyhow::Result<(PathBuf, PathBuf)> {
    let dir = &cfg.output.directory;
    let csv = dir.join(format!("converge_{}.csv", report.knob.name()));
    let json = dir.join(format!("converge_{}.json", report.knob.name()));
    write_csv(&csv, &report.rows)?;
    write_atomic(&json, &serde_json::to_vec_pretty(report)?)?;
    Ok((csv, json))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knob_parsing() {
        assert_eq!("grid-spacing".parse::<Knob>().unwrap(), Knob::GridSpacing);
        assert_eq!("stack_m".parse::<Knob>().unwrap(), Knob::StackM);
        assert!("temperature".parse::<Knob>().is_err());
    }

    #[test]
    fn knob_application() {
        let mut cfg = ExperimentConfig::default();
        Knob::StackM.apply(&mut cfg, 8.0).unwrap();
        assert_eq!(cfg.stack.images, 8);
        assert_eq!(cfg.stack.convergence_tol_rel, None);
        assert!(Knob::Padding.apply(&mut cfg, 2.5).is_err());
        Knob::Dtau.apply(&mut cfg, 5.0).unwrap();
        assert_eq!(cfg.ground_state.dtau_ns, 5.0);
    }

    #[test]
    fn relative_change() {
        assert_eq!(rel(1.1, 1.0), 0.10000000000000009);
        assert_eq!(rel(0.0, 0.0), 0.0);
        assert!(rel(1.0, 0.0).is_infinite());
    }
}
