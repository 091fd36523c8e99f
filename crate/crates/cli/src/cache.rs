//! Ground-state cache keyed by a hash of everything the solve depends on.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lightdd_core::gpe::{ground_state, GroundStateReport, SolverOpts, TrapParams, Wavefunction};
use lightdd_core::grid::GridSpec;
use lightdd_core::io::{load_complex_field, save_complex_field};
use lightdd_core::units::SpeciesParams;

use crate::config::{CachePolicy, ExperimentConfig};
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub trap: TrapParams,
    pub species: SpeciesParams,
    pub atoms: f64,
    pub grid: GridSpec,
    pub opts: SolverOpts,
}

impl CacheKey {
    pub fn from_config(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        Ok(Self {
            trap: cfg.trap_params(),
            species: cfg.species(),
            atoms: cfg.trap.atom_number,
            grid: gpe_grid(cfg)?,
            opts: cfg.gpe_opts(),
        })
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("cache key serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub report: GroundStateReport,
}

pub fn gpe_grid(cfg: &ExperimentConfig) -> anyhow::Result<GridSpec> {
    let g = &cfg.ground_state;
    Ok(GridSpec::centered(
        [g.radial_cells, g.radial_cells, g.axial_cells],
        [g.radial_spacing_nm * 1e-9, g.radial_spacing_nm * 1e-9, g.axial_spacing_nm * 1e-9],
    )?)
}

fn paths(dir: &Path, digest: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{digest}.field")), dir.join(format!("{digest}.json")))
}

/// Solve or load the ground state according to the cache policy.
/// Returns the state, its report, and whether it came from the cache.
pub fn ground_state_cached(cfg: &ExperimentConfig) -> anyhow::Result<(Wavefunction, GroundStateReport, bool)> {
    let key = CacheKey::from_config(cfg)?;
    let digest = key.digest();
    let dir = cfg.cache_dir();
    let (field_path, meta_path) = paths(&dir, &digest);

    if cfg.output.cache == CachePolicy::Use && field_path.exists() && meta_path.exists() {
        let entry: CacheEntry = serde_json::from_slice(&fs::read(&meta_path)?)
            .with_context(|| format!("reading {}", meta_path.display()))?;
        if entry.key == key {
            let field = load_complex_field(&field_path)?;
            let mut psi = Wavefunction::from_field(field);
            psi.atom_number = key.atoms;
            log::info!("ground state loaded from cache {digest}");
            return Ok((psi, entry.report, true));
        }
        log::warn!("cache entry {digest} has a different key; solving again");
    }

    let started = std::time::Instant::now();
    let (psi, report) = ground_state(&key.trap, &key.species, key.atoms, &key.grid, &key.opts)?;
    log::info!(
        "ground state: {} steps in {:.1} s, mu = {:.1} Hz",
        report.iterations,
        started.elapsed().as_secs_f64(),
        report.chemical_potential
    );

    if cfg.output.cache != CachePolicy::Off {
        fs::create_dir_all(&dir)?;
        let tmp = tempfile::NamedTempFile::new_in(&dir)?;
        save_complex_field(tmp.path(), &psi.field)?;
        tmp.persist(&field_path)?;
        let entry = CacheEntry { key, report: report.clone() };
        write_atomic(&meta_path, &serde_json::to_vec_pretty(&entry)?)?;
    }
    Ok((psi, report, false))
}

#[derive(Debug, Clone, Serialize)]
pub struct CacheListing {
    pub digest: String,
    pub atoms: f64,
    pub chemical_potential_hz: f64,
    pub bytes: u64,
}

pub fn inspect(dir: &Path) -> anyhow::Result<Vec<CacheListing>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(digest) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else { continue };
        let Ok(meta) = serde_json::from_slice::<CacheEntry>(&fs::read(&path)?) else {
            log::warn!("skipping unreadable cache entry {}", path.display());
            continue;
        };
        let (field_path, _) = paths(dir, &digest);
        let bytes = fs::metadata(&field_path).map(|m| m.len()).unwrap_or(0);
        out.push(CacheListing {
            digest,
            atoms: meta.key.atoms,
            chemical_potential_hz: meta.report.chemical_potential,
            bytes,
        });
    }
    out.sort_by(|a, b| a.digest.cmp(&b.digest));
    Ok(out)
}

/// Remove every cache entry; returns the number of files deleted.
pub fn clear(dir: &Path) -> anyhow::Result<usize> {
    let mut removed = 0;
    if !dir.exists() {
        return Ok(0);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if matches!(ext, Some("json") | Some("field")) {
            fs::remove_file(&path)?;
            removed += 1;
        }
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_every_input() {
        let cfg = ExperimentConfig::default();
        let base = CacheKey::from_config(&cfg).unwrap().digest();
        assert_eq!(base, CacheKey::from_config(&cfg.clone()).unwrap().digest());
        let mut c = cfg.clone();
        c.trap.atom_number = 251.0;
        assert_ne!(base, CacheKey::from_config(&c).unwrap().digest());
        let mut c = cfg.clone();
        c.ground_state.dtau_ns = 5.0;
        assert_ne!(base, CacheKey::from_config(&c).unwrap().digest());
        let mut c = cfg.clone();
        c.species.scattering_length_bohr = 90.0;
        assert_ne!(base, CacheKey::from_config(&c).unwrap().digest());
        // flash settings do not enter the ground state
        let mut c = cfg;
        c.flash.detuning_mhz = 50.0;
        assert_eq!(base, CacheKey::from_config(&c).unwrap().digest());
    }

    #[test]
    fn empty_dir_listing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(inspect(dir.path()).unwrap().is_empty());
        assert_eq!(clear(&dir.path().join("missing")).unwrap(), 0);
    }
}
