//! End-to-end pipeline: ground state → dipole → induced potential →
//! phase imprint → momentum widths, plus the scattering background.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use ndarray::s;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use lightdd_core::gpe::{tf_radius, with_peak_density, GroundStateReport, Wavefunction};
use lightdd_core::grid::{
    axis_cut, fft_friendly_even, resample_complex, Axis, FieldUnit, GridSpec, ScalarField3D,
};
use lightdd_core::kernel::{polarization_vector, KernelParams};
use lightdd_core::light::{saturation_parameter, scattering_rate, steady_state_dipole, FlashParams};
use lightdd_core::potential::{
    max_acceleration, max_acceleration_where, tile_along_z, PotentialSolver, StackMode,
};
use lightdd_core::raman_nath::{fit_projection, phase_imprint, projected_momentum, raman_nath_check, CoherentWidth, WidthReport};
use lightdd_core::scattering::{simulate_recoils, EmissionPattern, RecoilStats};
use lightdd_core::units::{si_to_debye, SpeciesParams, CONSTANTS};

use crate::cache::ground_state_cached;
use crate::config::ExperimentConfig;
use crate::output::{self, *};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    GroundState,
    Dipole,
    Cloud,
    Potential,
    Imprint,
    Momentum,
    Background,
    Output,
    Plot,
    Cache,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::GroundState => "ground_state",
            Stage::Dipole => "dipole",
            Stage::Cloud => "cloud",
            Stage::Potential => "potential",
            Stage::Imprint => "imprint",
            Stage::Momentum => "momentum",
            Stage::Background => "background",
            Stage::Output => "output",
            Stage::Plot => "plot",
            Stage::Cache => "cache",
        }
    }

    /// Process exit code for a failure in this stage.
    pub fn exit_code(self) -> i32 {
        10 + self as i32
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source:#}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: anyhow::Error,
}

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, StageError> {
        self.map_err(|e| StageError { stage, source: e.into() })
    }
}

/// Inputs shared by every sweep point.
pub struct Prepared {
    pub cfg: ExperimentConfig,
    pub species: SpeciesParams,
    pub ground: Wavefunction,
    pub ground_report: GroundStateReport,
    pub ground_from_cache: bool,
    /// Wall time of the solve or cache load.
    pub ground_seconds: f64,
    pub ground_radius: f64,
    /// Steady-state dipole in C·m (0 without light).
    pub dipole: f64,
    pub period_cells: usize,
    pub spacing: f64,
}

impl Prepared {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, StageError> {
        cfg.validate().stage(Stage::Config)?;
        let period_cells = cfg.period_cells().stage(Stage::Config)?;
        let species = cfg.species();
        let started = std::time::Instant::now();
        let (ground, ground_report, ground_from_cache) = ground_state_cached(cfg).stage(Stage::GroundState)?;
        let ground_seconds = started.elapsed().as_secs_f64();
        let ground_radius = tf_radius(&ground).stage(Stage::GroundState)?;
        let flash = cfg.flash_params();
        let dipole = if flash.intensity == 0.0 { 0.0 } else { steady_state_dipole(&flash, &species).stage(Stage::Dipole)? };
        Ok(Self {
            cfg: cfg.clone(),
            species,
            ground,
            ground_report,
            ground_from_cache,
            ground_seconds,
            ground_radius,
            dipole,
            period_cells,
            spacing: cfg.grid.spacing_nm * 1e-9,
        })
    }

    pub fn transverse_cells(&self, tf_radius_m: f64) -> usize {
        let g = &self.cfg.grid;
        let n = (g.extent_over_radius * tf_radius_m / self.spacing).ceil() as usize;
        fft_friendly_even(n.max(g.min_transverse_cells))
    }

    /// The ground state stretched transversely to `tf_radius_m` and scaled
    /// to the configured peak density, on one stack period of the
    /// interaction lattice.
    pub fn cloud(&self, tf_radius_m: f64) -> anyhow::Result<Wavefunction> {
        let n = self.transverse_cells(tf_radius_m);
        let grid = GridSpec::cubic([n, n, self.period_cells], self.spacing)?;
        let stretch = tf_radius_m / self.ground_radius;
        let field = resample_complex(&self.ground.field, grid, |r| [r[0] / stretch, r[1] / stretch, r[2]]);
        Ok(with_peak_density(&Wavefunction::from_field(field), self.cfg.sweep.peak_density_per_m3)?)
    }

    pub fn kernel(&self, angle_deg: f64) -> anyhow::Result<KernelParams> {
        let flash = self.cfg.with_polarization(angle_deg);
        Ok(KernelParams::new(self.dipole, flash.k_vec(), polarization_vector(angle_deg))?)
    }

    pub fn solver(&self, cloud: &Wavefunction) -> anyhow::Result<StackedSolver> {
        let stack = self.cfg.stack_spec();
        let density = cloud.density();
        let slab = density.grid;
        let opts = self.cfg.solver_options();
        match stack.mode {
            StackMode::Truncated { .. } => {
                Ok(StackedSolver { solver: PotentialSolver::new(&density, stack, opts)?, offset: 0, slab })
            }
            StackMode::PeriodicZ => {
                let periods = self.cfg.stack.periodic_periods;
                let nz = periods * self.period_cells;
                let offset = (periods / 2) * self.period_cells;
                let grid = GridSpec::cubic([slab.n[0], slab.n[1], nz], self.spacing)?;
                let mut boxed = ScalarField3D::zeros(grid, FieldUnit::Density);
                boxed.values.slice_mut(s![.., .., offset..offset + self.period_cells]).assign(&density.values);
                let tiled = tile_along_z(&boxed, stack.period)?;
                Ok(StackedSolver { solver: PotentialSolver::new(&tiled, stack, opts)?, offset, slab })
            }
        }
    }
}

/// Potential solver whose result is cut back to the single-period slab.
pub struct StackedSolver {
    solver: PotentialSolver,
    offset: usize,
    slab: GridSpec,
}

impl StackedSolver {
    /// Potential on the slab and the number of stack images used.
    pub fn potential(&self, kernel: &KernelParams) -> anyhow::Result<(ScalarField3D, usize)> {
        let sol = self.solver.solve(kernel)?;
        let nz = self.slab.n[2];
        let values = sol.potential.values.slice(s![.., .., self.offset..self.offset + nz]).to_owned();
        Ok((ScalarField3D { grid: self.slab, values, unit: FieldUnit::Energy }, sol.images))
    }
}

fn mhz(energy: f64) -> f64 {
    energy / CONSTANTS.h / 1e6
}

/// Radiation-pressure limit ħkΓ/4m.
pub fn line_a(species: &SpeciesParams) -> f64 {
    CONSTANTS.hbar * species.k0() * species.gamma / (4.0 * species.mass)
}

/// Rate of growth of the rms momentum from scattering at rate R,
/// evaluated at the end of the flash: ħk√(2R)/(2m√t).
pub fn line_b(flash: &FlashParams, species: &SpeciesParams) -> f64 {
    let rate = scattering_rate(flash, species);
    CONSTANTS.hbar * species.k0() * (2.0 * rate).sqrt() / (2.0 * species.mass * flash.flash_time.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusPoint {
    pub summary: RadiusRow,
    pub cuts: Vec<CutRow>,
}

pub fn radius_point(prep: &Prepared, tf_radius_um: f64) -> Result<RadiusPoint, StageError> {
    let cfg = &prep.cfg;
    let rho = tf_radius_um * 1e-6;
    let cloud = prep.cloud(rho).stage(Stage::Cloud)?;
    let angle = cfg.flash.polarization_deg;
    let solver = prep.solver(&cloud).stage(Stage::Potential)?;
    let kernel = prep.kernel(angle).stage(Stage::Potential)?;
    let (v, images) = solver.potential(&kernel).stage(Stage::Potential)?;

    let c = v.grid.center_index();
    let density = cloud.density();
    let peak = density.max_abs();
    let transverse =
        max_acceleration_where(&v, prep.species.mass, &[Axis::X, Axis::Y], |idx| density.values[idx] >= 0.01 * peak);
    let ycut = axis_cut(&v, Axis::Y);
    let xcut = axis_cut(&v, Axis::X);
    let flash = cfg.with_polarization(angle);
    let summary = RadiusRow {
        tf_radius_um,
        atoms: cloud.norm(),
        max_acceleration_m_s2: max_acceleration(&v, prep.species.mass).value,
        max_transverse_acceleration_m_s2: transverse.value,
        central_potential_mhz: mhz(v.values[c]),
        central_depth_mhz: mhz(v.values[c].abs()),
        peak_abs_potential_y_mhz: ycut.values.iter().fold(0.0_f64, |m, x| m.max(mhz(x.abs()))),
        line_a_m_s2: line_a(&prep.species),
        line_b_m_s2: line_b(&flash, &prep.species),
        stack_images: images,
    };
    let mut cuts = Vec::with_capacity(ycut.coords.len() + xcut.coords.len());
    for (axis, cut) in [("x", &xcut), ("y", &ycut)] {
        for (x, val) in cut.coords.iter().zip(&cut.values) {
            cuts.push(CutRow { tf_radius_um, axis: axis.into(), coord_um: x * 1e6, potential_mhz: mhz(*val) });
        }
    }
    Ok(RadiusPoint { summary, cuts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnglePoint {
    pub angle_deg: f64,
    pub widths: Vec<WidthReport>,
    pub background: Vec<BackgroundRow>,
    pub raman_nath_ratio: f64,
    pub stack_images: usize,
    pub mean_photons: f64,
}

/// Gaussian widths of the x, y and z momentum projections in recoils.
pub fn coherent_widths(prep: &Prepared, psi: &Wavefunction) -> anyhow::Result<Vec<CoherentWidth>> {
    let pad = prep.cfg.grid.momentum_padding_factor;
    // The axial imprint aliases past the lattice Nyquist limit; z is not fitted.
    [Axis::X, Axis::Y]
        .iter()
        .map(|&axis| Ok(fit_projection(&projected_momentum(psi, axis, pad)?, prep.species.k0())?))
        .collect()
}

pub fn background(prep: &Prepared, angle_deg: f64) -> anyhow::Result<RecoilStats> {
    let flash = prep.cfg.with_polarization(angle_deg);
    let mut sc = prep.cfg.scatter_config();
    if let EmissionPattern::DipolePi { .. } = sc.emission_pattern {
        sc.emission_pattern = EmissionPattern::DipolePi { axis: polarization_vector(angle_deg) };
    }
    if flash.intensity == 0.0 {
        return Ok(lightdd_core::scattering::simulate_photons(0.0, flash.propagation, &sc, false)?);
    }
    Ok(simulate_recoils(&flash, &prep.species, &sc)?)
}

pub fn angle_point(
    prep: &Prepared,
    cloud: &Wavefunction,
    solver: &StackedSolver,
    angle_deg: f64,
) -> Result<AnglePoint, StageError> {
    let kernel = prep.kernel(angle_deg).stage(Stage::Potential)?;
    let (v, images) = solver.potential(&kernel).stage(Stage::Potential)?;
    let t = prep.cfg.flash.duration_ns * 1e-9;
    let after = phase_imprint(cloud, &v, t).stage(Stage::Imprint)?;
    let ratio = raman_nath_check(cloud, &v, t, &prep.species).stage(Stage::Imprint)?;
    if ratio > RAMAN_NATH_LIMIT {
        log::warn!("angle {angle_deg} deg: kinetic energy gain is {ratio:.3} of max |V|; the frozen-density imprint is questionable");
    }
    let coherent = coherent_widths(prep, &after).stage(Stage::Momentum)?;
    let stats = background(prep, angle_deg).stage(Stage::Background)?;
    let widths = coherent.into_iter().map(|c| WidthReport::new(c, stats.axes[c.axis.index()].sigma)).collect();
    let background = Axis::ALL
        .iter()
        .map(|a| BackgroundRow {
            angle_deg,
            axis: a.name().into(),
            sigma_recoil: stats.axes[a.index()].sigma,
            mean_recoil: stats.axes[a.index()].mean,
            samples: stats.samples,
            seed: stats.seed,
        })
        .collect();
    Ok(AnglePoint { angle_deg, widths, background, raman_nath_ratio: ratio, stack_images: images, mean_photons: stats.mean_photons })
}

/// Ratio of kinetic energy gain to max |V| above which the imprint is flagged.
pub const RAMAN_NATH_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub ground_state: GroundStateReport,
    pub ground_state_from_cache: bool,
    /// Wall time of the ground-state stage; a cache load when
    /// `ground_state_from_cache` is set.
    pub ground_state_seconds: f64,
    pub ground_state_tf_radius_m: f64,
    pub dipole_c_m: f64,
    pub dipole_debye: f64,
    pub saturation_parameter: f64,
    pub scattering_rate_per_s: f64,
    pub photons_per_atom: f64,
    pub reference_atoms: f64,
    /// Widths of the reference cloud without the flash potential.
    pub unflashed_widths: Vec<CoherentWidth>,
    pub output_directory: PathBuf,
}

fn point_path(out: &Path, kind: &str, i: usize) -> PathBuf {
    out.join(POINTS_DIR).join(format!("{kind}_{i:03}.json"))
}

fn store_point<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    output::write_atomic(path, &serde_json::to_vec_pretty(value).stage(Stage::Output)?).stage(Stage::Output)
}

fn load_point<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display())).stage(Stage::Output)?;
    serde_json::from_slice(&bytes).stage(Stage::Output)
}

/// First error in sweep order, after every point has had its chance to run.
fn first_error(results: Vec<Result<(), StageError>>) -> Result<(), StageError> {
    results.into_iter().collect()
}

pub fn build_pool(workers: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?)
}

/// Full pipeline; writes the output bundle and returns the run summary.
pub fn run(cfg: &ExperimentConfig) -> Result<RunSummary, StageError> {
    let out = cfg.output.directory.clone();
    fs::create_dir_all(out.join(POINTS_DIR)).stage(Stage::Output)?;
    let pool = build_pool(cfg.workers()).stage(Stage::Config)?;
    let prep = Prepared::new(cfg)?;
    log::info!("dipole moment {:.3} D", si_to_debye(prep.dipole));

    pool.install(|| -> Result<RunSummary, StageError> {
        // Radius sweep
        let radii = &cfg.sweep.tf_radius_um;
        let results: Vec<_> = radii
            .par_iter()
            .enumerate()
            .map(|(i, &rho)| {
                let point = radius_point(&prep, rho)?;
                log::info!("radius {rho} um: central potential {:.3} MHz", point.summary.central_potential_mhz);
                store_point(&point_path(&out, "radius", i), &point)
            })
            .collect();
        first_error(results)?;

        // Polarization sweep at the reference radius
        let rho = cfg.sweep.reference_tf_radius_um * 1e-6;
        let cloud = prep.cloud(rho).stage(Stage::Cloud)?;
        let solver = prep.solver(&cloud).stage(Stage::Potential)?;
        let angles = &cfg.sweep.polarization_deg;
        let results: Vec<_> = angles
            .par_iter()
            .enumerate()
            .map(|(i, &phi)| {
                let point = angle_point(&prep, &cloud, &solver, phi)?;
                log::info!(
                    "angle {phi} deg: coherent sigma x {:.3}, y {:.3} recoils",
                    point.widths[0].sigma_coherent,
                    point.widths[1].sigma_coherent
                );
                store_point(&point_path(&out, "angle", i), &point)
            })
            .collect();
        first_error(results)?;
        let unflashed = coherent_widths(&prep, &cloud).stage(Stage::Momentum)?;

        merge(cfg, &out)?;

        let flash = cfg.flash_params();
        let rate = if flash.intensity == 0.0 { 0.0 } else { scattering_rate(&flash, &prep.species) };
        let summary = RunSummary {
            version: env!("CARGO_PKG_VERSION").into(),
            ground_state: prep.ground_report.clone(),
            ground_state_from_cache: prep.ground_from_cache,
            ground_state_seconds: prep.ground_seconds,
            ground_state_tf_radius_m: prep.ground_radius,
            dipole_c_m: prep.dipole,
            dipole_debye: si_to_debye(prep.dipole),
            saturation_parameter: saturation_parameter(&flash, &prep.species),
            scattering_rate_per_s: rate,
            photons_per_atom: rate * flash.flash_time,
            reference_atoms: cloud.norm(),
            unflashed_widths: unflashed,
            output_directory: out.clone(),
        };
        let mut slim = summary.clone();
        slim.ground_state.energy_history.clear();
        output::write_atomic(&out.join(SUMMARY), &serde_json::to_vec_pretty(&slim).stage(Stage::Output)?)
            .stage(Stage::Output)?;
        write_manifest(cfg, &summary).stage(Stage::Output)?;
        Ok(summary)
    })
}

/// Collect the per-point files into the figure CSVs.
pub fn merge(cfg: &ExperimentConfig, out: &Path) -> Result<(), StageError> {
    let mut cuts = Vec::new();
    let mut radius_rows = Vec::new();
    for i in 0..cfg.sweep.tf_radius_um.len() {
        let p: RadiusPoint = load_point(&point_path(out, "radius", i))?;
        cuts.extend(p.cuts);
        radius_rows.push(p.summary);
    }
    let mut widths = Vec::new();
    let mut background = Vec::new();
    let mut rn = Vec::new();
    for i in 0..cfg.sweep.polarization_deg.len() {
        let p: AnglePoint = load_point(&point_path(out, "angle", i))?;
        for w in &p.widths {
            widths.push(WidthRow {
                angle_deg: p.angle_deg,
                axis: w.axis.name().into(),
                sigma_coherent_recoil: w.sigma_coherent,
                sigma_incoherent_recoil: w.sigma_incoherent,
                sigma_total_recoil: w.sigma_total,
                fit_residual: w.fit_residual,
            });
        }
        background.extend(p.background);
        rn.push(RamanNathRow {
            angle_deg: p.angle_deg,
            kinetic_gain_ratio: p.raman_nath_ratio,
            valid: p.raman_nath_ratio <= RAMAN_NATH_LIMIT,
        });
    }
    write_csv(&out.join(FIG2_LEFT), &cuts).stage(Stage::Output)?;
    write_csv(&out.join(FIG2_RIGHT), &radius_rows).stage(Stage::Output)?;
    write_csv(&out.join(FIG3), &widths).stage(Stage::Output)?;
    write_csv(&out.join(BACKGROUND), &background).stage(Stage::Output)?;
    write_csv(&out.join(RAMAN_NATH), &rn).stage(Stage::Output)?;
    Ok(())
}

/// The resolved config plus derived numbers; loading it as a config
/// reproduces the run.
pub fn write_manifest(cfg: &ExperimentConfig, summary: &RunSummary) -> anyhow::Result<()> {
    let mut resolved = cfg.clone();
    let species = cfg.species();
    resolved.output.workers = None;
    let mut prov = toml::Table::new();
    prov.insert("lightdd_version".into(), summary.version.clone().into());
    prov.insert("transition_dipole_c_m".into(), species.d_ge.into());
    prov.insert("saturation_intensity_w_m2".into(), lightdd_core::units::saturation_intensity(&species).into());
    prov.insert("dipole_debye".into(), summary.dipole_debye.into());
    prov.insert("saturation_parameter".into(), summary.saturation_parameter.into());
    prov.insert("photons_per_atom".into(), summary.photons_per_atom.into());
    prov.insert("ground_state_chemical_potential_hz".into(), summary.ground_state.chemical_potential.into());
    prov.insert("ground_state_tf_radius_m".into(), summary.ground_state_tf_radius_m.into());
    prov.insert("reference_atoms".into(), summary.reference_atoms.into());
    prov.insert(
        "ground_state_cache_key".into(),
        crate::cache::CacheKey::from_config(cfg)?.digest().into(),
    );
    prov.insert("scatter_seed".into(), toml::Value::Integer(cfg.scatter.seed as i64));
    resolved.provenance = Some(prov);
    let text = resolved.to_toml()?;
    output::write_atomic(&cfg.output.directory.join(MANIFEST), text.as_bytes())
}

/// Missing-output helper for callers that need a specific file.
pub fn require(out: &Path, name: &str) -> anyhow::Result<PathBuf> {
    let p = out.join(name);
    if !p.exists() {
        return Err(anyhow!("missing {}", p.display()));
    }
    Ok(p)
}
