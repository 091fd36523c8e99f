//! Output bundle: CSV schemas and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_atomic(path, &bytes)
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<T>, _>>()?;
    Ok(rows)
}

pub const FIG2_LEFT: &str = "fig2_left.csv";
pub const FIG2_RIGHT: &str = "fig2_right.csv";
pub const FIG3: &str = "fig3.csv";
pub const BACKGROUND: &str = "background.csv";
pub const RAMAN_NATH: &str = "raman_nath.csv";
pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.json";
pub const POINTS_DIR: &str = "points";

/// Potential along a line through the cloud center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    pub tf_radius_um: f64,
    pub axis: String,
    pub coord_um: f64,
    pub potential_mhz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub tf_radius_um: f64,
    pub atoms: f64,
    /// max |∇V|/m over the whole slab.
    pub max_acceleration_m_s2: f64,
    /// max in-plane |∇V|/m where the density exceeds 1% of its peak.
    pub max_transverse_acceleration_m_s2: f64,
    /// V/h at the cloud center (signed).
    pub central_potential_mhz: f64,
    pub central_depth_mhz: f64,
    pub peak_abs_potential_y_mhz: f64,
    /// Radiation-pressure limit ħkΓ/4m.
    pub line_a_m_s2: f64,
    /// Diffusive limit ħk√(2R)/(2m√t) over the flash.
    pub line_b_m_s2: f64,
    pub stack_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRow {
    pub angle_deg: f64,
    pub axis: String,
    pub sigma_coherent_recoil: f64,
    pub sigma_incoherent_recoil: f64,
    pub sigma_total_recoil: f64,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundRow {
    pub angle_deg: f64,
    pub axis: String,
    pub sigma_recoil: f64,
    pub mean_recoil: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanNathRow {
    pub angle_deg: f64,
    /// Kinetic energy gained during the flash over max |V|.
    pub kinetic_gain_ratio: f64,
    pub valid: bool,
}

/// Column help printed by `lightdd run --help`.
pub const CSV_SCHEMAS: &str = "\
Output files:
  fig2_left.csv   tf_radius_um, axis (x|y), coord_um, potential_mhz
                  potential V/h along lines through the cloud center, one block per radius
  fig2_right.csv  tf_radius_um, atoms, max_acceleration_m_s2, max_transverse_acceleration_m_s2,
                  central_potential_mhz, central_depth_mhz, peak_abs_potential_y_mhz,
                  line_a_m_s2, line_b_m_s2, stack_images
  fig3.csv        angle_deg, axis (x|y), sigma_coherent_recoil, sigma_incoherent_recoil,
                  sigma_total_recoil, fit_residual
  background.csv  angle_deg, axis (x|y|z), sigma_recoil, mean_recoil, samples, seed
  raman_nath.csv  angle_deg, kinetic_gain_ratio, valid
  manifest.toml   every resolved input; loadable as a config
  summary.json    ground-state report, dipole moment, unflashed widths
Widths are Gaussian standard deviations of the projected momentum density in units of the flash photon momentum.";
