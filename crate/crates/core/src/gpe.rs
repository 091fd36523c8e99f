//! Condensate ground state in one lattice site by imaginary-time split-step
//! propagation of the Gross-Pitaevskii equation, plus the Thomas-Fermi and
//! Gaussian diagnostics of the resulting pancake.

use std::f64::consts::PI;

use ndarray::{Array3, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fit::{fit_centered_gaussian, fit_inverted_parabola};
use crate::grid::{
    fft3_inplace, integrate, project, resample_complex, Axis, ComplexField3D, Direction, GridSpec,
};
use crate::units::{energy_to_hz, SpeciesParams, CONSTANTS};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// rad/s
    pub omega_radial: f64,
    /// rad/s
    pub omega_axial: f64,
    /// Lattice depth in lattice recoil energies. Informational only; the
    /// axial confinement is the harmonic `omega_axial`.
    pub lattice_depth: f64,
    pub lattice_wavelength: f64,
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            omega_radial: 2.0 * PI * 1e3,
            omega_axial: 2.0 * PI * 105e3,
            lattice_depth: 100.0,
            lattice_wavelength: crate::grid::LATTICE_WAVELENGTH,
        }
    }
}

impl TrapParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega_radial", self.omega_radial), ("omega_axial", self.omega_axial)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.omega_axial < 10.0 * self.omega_radial {
            log::warn!(
                "axial/radial trap ratio {:.1} is far from the pancake regime",
                self.omega_axial / self.omega_radial
            );
        }
        Ok(())
    }

    pub fn potential(&self, species: &SpeciesParams, r: [f64; 3]) -> f64 {
        0.5 * species.mass
            * (self.omega_radial.powi(2) * (r[0] * r[0] + r[1] * r[1]) + self.omega_axial.powi(2) * r[2] * r[2])
    }

    /// √(ħ/mω) along z.
    pub fn axial_length(&self, species: &SpeciesParams) -> f64 {
        (CONSTANTS.hbar / (species.mass * self.omega_axial)).sqrt()
    }

    pub fn radial_length(&self, species: &SpeciesParams) -> f64 {
        (CONSTANTS.hbar / (species.mass * self.omega_radial)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub field: ComplexField3D,
    pub atom_number: f64,
}

impl Wavefunction {
    /// Wrap a field, recording its norm as the atom number.
    pub fn from_field(field: ComplexField3D) -> Self {
        let atom_number = integrate(&field.norm_sqr());
        Self { field, atom_number }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.field.grid
    }

    pub fn norm(&self) -> f64 {
        integrate(&self.field.norm_sqr())
    }

    pub fn density(&self) -> crate::grid::ScalarField3D {
        self.field.norm_sqr()
    }

    pub fn normalize_to(&mut self, atoms: f64) {
        let n = self.norm();
        if n > 0.0 {
            let s = (atoms / n).sqrt();
            self.field.values.par_mapv_inplace(|c| c * s);
        }
        self.atom_number = atoms;
    }

    pub fn peak_density(&self) -> f64 {
        self.field.values.iter().fold(0.0_f64, |m, c| m.max(c.norm_sqr()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOpts {
    /// Final imaginary-time step in s.
    pub dtau: f64,
    /// First rung of the step ladder; the step is divided by ten per rung
    /// until it reaches `dtau`.
    pub dtau_start: f64,
    /// Relative energy change per step at which a rung is converged.
    pub tolerance: f64,
    pub max_iter: usize,
    /// Steps between energy evaluations.
    pub check_interval: usize,
}

impl Default for SolverOpts {
    fn default() -> Self {
        Self { dtau: 1e-8, dtau_start: 1e-6, tolerance: 1e-10, max_iter: 200_000, check_interval: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Per atom, E/h in Hz.
    pub kinetic: f64,
    pub trap: f64,
    pub interaction: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.kinetic + self.trap + self.interaction
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    /// μ/h in Hz, including zero-point energy.
    pub chemical_potential: f64,
    /// μ/h measured from the axial zero-point energy ħω_z/2, the chemical
    /// potential of the quasi-two-dimensional pancake.
    pub chemical_potential_2d: f64,
    /// m⁻³
    pub peak_density: f64,
    /// Zero of the inverted parabola fitted to the axially integrated density.
    pub tf_radius_radial: f64,
    /// 2σ of the Gaussian fitted to the radially integrated density.
    pub axial_1e2_radius: f64,
    /// σ of the same fit (the 1/√e half width of the axial density).
    pub axial_sigma: f64,
    pub energy_breakdown: EnergyBreakdown,
    pub iterations: usize,
    /// Relative energy change per step at termination.
    pub residual: f64,
    pub radial_fit_residual: f64,
    pub axial_fit_residual: f64,
    /// Total energy (J) at each convergence check.
    #[serde(default)]
    pub energy_history: Vec<f64>,
}

/// Quasi-2D Thomas-Fermi estimate: (μ above ħω_z/2 in J, radius in m).
pub fn thomas_fermi_estimate(trap: &TrapParams, species: &SpeciesParams, atoms: f64) -> (f64, f64) {
    let g = species.contact_coupling();
    if g == 0.0 || atoms == 0.0 {
        return (0.0, 0.0);
    }
    let g2d = g / ((2.0 * PI).sqrt() * trap.axial_length(species));
    let mw2 = species.mass * trap.omega_radial.powi(2);
    // N = π μ R² / (2 g2d),  μ = ½ m ω² R²
    let mu = (atoms * g2d * mw2 / PI).sqrt();
    (mu, (2.0 * mu / mw2).sqrt())
}

struct Operators {
    vtrap: Array3<f64>,
    k2: Array3<f64>,
    g: f64,
    cell: f64,
}

impl Operators {
    fn new(grid: &GridSpec, trap: &TrapParams, species: &SpeciesParams) -> Self {
        let vtrap = Array3::from_shape_fn(grid.shape(), |(i, j, k)| trap.potential(species, grid.position(i, j, k)));
        let kx = grid.wavenumbers(Axis::X);
        let ky = grid.wavenumbers(Axis::Y);
        let kz = grid.wavenumbers(Axis::Z);
        let k2 = Array3::from_shape_fn(grid.shape(), |(i, j, k)| kx[i] * kx[i] + ky[j] * ky[j] + kz[k] * kz[k]);
        Self { vtrap, k2, g: species.contact_coupling(), cell: grid.cell_volume() }
    }

    /// Total (kinetic, trap, interaction) energies in J.
    fn energies(&self, psi: &Array3<Complex64>, mass: f64) -> (f64, f64, f64) {
        let mut hat = psi.clone();
        fft3_inplace(&mut hat, Direction::Forward);
        let n = psi.len() as f64;
        let kin_sum = Zip::from(&hat).and(&self.k2).par_fold(|| 0.0, |acc, c, &k2| acc + k2 * c.norm_sqr(), |a, b| a + b);
        let kinetic = CONSTANTS.hbar.powi(2) / (2.0 * mass) * kin_sum * self.cell / n;
        let (trap, inter) = Zip::from(psi).and(&self.vtrap).par_fold(
            || (0.0, 0.0),
            |(t, i), c, &v| {
                let d = c.norm_sqr();
                (t + v * d, i + d * d)
            },
            |a, b| (a.0 + b.0, a.1 + b.1),
        );
        (kinetic, trap * self.cell, 0.5 * self.g * inter * self.cell)
    }
}

fn check_grid(grid: &GridSpec, trap: &TrapParams, species: &SpeciesParams, atoms: f64) -> Result<()> {
    grid.validate()?;
    let (_, r_tf) = thomas_fermi_estimate(trap, species, atoms);
    let ext = grid.extent();
    let transverse = ext[0].min(ext[1]);
    if transverse < 2.5 * r_tf {
        return Err(Error::GridTooSmall(format!(
            "transverse extent {transverse:.3e} m < 2.5 × Thomas-Fermi radius {r_tf:.3e} m"
        )));
    }
    let az = trap.axial_length(species);
    if ext[2] < 6.0 * az {
        return Err(Error::GridTooSmall(format!(
            "axial extent {:.3e} m < 6 axial oscillator lengths ({az:.3e} m)",
            ext[2]
        )));
    }
    Ok(())
}

/// Quasi-2D Thomas-Fermi times the axial harmonic-oscillator Gaussian, or
/// the full oscillator ground state without interactions.
fn initial_guess(grid: &GridSpec, trap: &TrapParams, species: &SpeciesParams, atoms: f64) -> Array3<Complex64> {
    let (mu, r_tf) = thomas_fermi_estimate(trap, species, atoms);
    let az = trap.axial_length(species);
    let ar = trap.radial_length(species);
    let mw2 = species.mass * trap.omega_radial.powi(2);
    Array3::from_shape_fn(grid.shape(), |(i, j, k)| {
        let r = grid.position(i, j, k);
        let rho2 = r[0] * r[0] + r[1] * r[1];
        let axial = (-r[2] * r[2] / (2.0 * az * az)).exp();
        let radial = if r_tf > 0.0 {
            let tf = (mu - 0.5 * mw2 * rho2).max(0.0) / mu;
            tf.sqrt() + 1e-3 * (-rho2 / (r_tf * r_tf)).exp()
        } else {
            (-rho2 / (2.0 * ar * ar)).exp()
        };
        Complex64::new(radial * axial, 0.0)
    })
}

fn normalize(psi: &mut Array3<Complex64>, atoms: f64, cell: f64) {
    let norm: f64 = psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * cell;
    let s = (atoms / norm).sqrt();
    psi.par_mapv_inplace(|c| c * s);
}

/// Imaginary-time ground state of
/// −ħ²∇²/2m + ½m(ω_r²ρ² + ω_z²z²) + g|ψ|², normalized to `atoms`.
pub fn ground_state(
    trap: &TrapParams,
    species: &SpeciesParams,
    atoms: f64,
    grid: &GridSpec,
    opts: &SolverOpts,
) -> Result<(Wavefunction, GroundStateReport)> {
    trap.validate()?;
    species.validate()?;
    if !(atoms.is_finite() && atoms > 0.0) {
        return Err(Error::InvalidParameter("atom number must be positive".into()));
    }
    if !(opts.dtau > 0.0 && opts.dtau_start > 0.0 && opts.tolerance > 0.0 && opts.check_interval > 0) {
        return Err(Error::InvalidParameter("solver steps and tolerance must be positive".into()));
    }
    check_grid(grid, trap, species, atoms)?;

    let ops = Operators::new(grid, trap, species);
    let mut psi = initial_guess(grid, trap, species, atoms);
    normalize(&mut psi, atoms, ops.cell);

    let hbar = CONSTANTS.hbar;
    let mass = species.mass;
    let total = |psi: &Array3<Complex64>| {
        let (k, t, i) = ops.energies(psi, mass);
        k + t + i
    };

    let mut rungs = vec![];
    let mut d = opts.dtau_start.max(opts.dtau);
    while d > opts.dtau * (1.0 + 1e-9) {
        rungs.push(d);
        d /= 10.0;
    }
    rungs.push(opts.dtau);
    rungs.reverse();

    // A block that raises the energy is rejected and the step shrinks: too
    // coarse a split step drifts towards its own biased fixed point.
    let mut history = vec![total(&psi)];
    let mut iterations = 0usize;
    let mut last_change = f64::INFINITY;
    while let Some(dtau) = rungs.pop() {
        let kin = ops.k2.mapv(|k2| (-hbar * k2 * dtau / (2.0 * mass)).exp());
        let half_potential = |psi: &mut Array3<Complex64>| {
            Zip::from(psi).and(&ops.vtrap).par_for_each(|c, &v| {
                let veff = v + ops.g * c.norm_sqr();
                *c *= (-veff * dtau / (2.0 * hbar)).exp();
            });
        };
        loop {
            let saved = psi.clone();
            for _ in 0..opts.check_interval {
                half_potential(&mut psi);
                fft3_inplace(&mut psi, Direction::Forward);
                Zip::from(&mut psi).and(&kin).par_for_each(|c, &f| *c *= f);
                fft3_inplace(&mut psi, Direction::Inverse);
                half_potential(&mut psi);
                normalize(&mut psi, atoms, ops.cell);
            }
            iterations += opts.check_interval;
            let e = total(&psi);
            let prev = *history.last().expect("history is non-empty");
            let change = ((e - prev) / e).abs() / opts.check_interval as f64;
            if e > prev * (1.0 + 1e-12) {
                psi = saved;
                if iterations >= opts.max_iter {
                    return Err(Error::NotConverged { iterations, last_change });
                }
                if rungs.is_empty() && change >= opts.tolerance {
                    rungs.push(dtau / 2.0);
                }
                log::debug!("energy rose at dtau={dtau:e}; rejecting {} steps", opts.check_interval);
                break;
            }
            last_change = change;
            history.push(e);
            if last_change < opts.tolerance {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::NotConverged { iterations, last_change });
            }
        }
        log::debug!("imaginary time rung dtau={dtau:e} done after {iterations} steps");
    }

    let wf = Wavefunction { field: ComplexField3D { grid: *grid, values: psi }, atom_number: atoms };
    let mut report = diagnostics(&wf, trap, species)?;
    report.iterations = iterations;
    report.residual = last_change;
    report.energy_history = history;
    Ok((wf, report))
}

/// Axially integrated density as (ρ, n₂D) samples.
pub fn radial_profile(psi: &Wavefunction) -> (Vec<f64>, Vec<f64>) {
    let grid = psi.grid();
    let hz = grid.spacing[2];
    let mut rho = Vec::with_capacity(grid.n[0] * grid.n[1]);
    let mut n2d = Vec::with_capacity(grid.n[0] * grid.n[1]);
    for i in 0..grid.n[0] {
        for j in 0..grid.n[1] {
            let p = grid.position(i, j, 0);
            let col: f64 = (0..grid.n[2]).map(|k| psi.field.values[[i, j, k]].norm_sqr()).sum();
            rho.push((p[0] * p[0] + p[1] * p[1]).sqrt());
            n2d.push(col * hz);
        }
    }
    (rho, n2d)
}

/// Energies, chemical potential and profile fits of a normalized state.
pub fn diagnostics(psi: &Wavefunction, trap: &TrapParams, species: &SpeciesParams) -> Result<GroundStateReport> {
    let grid = psi.grid();
    let ops = Operators::new(grid, trap, species);
    let (kin, tr, int) = ops.energies(&psi.field.values, species.mass);
    let n = psi.norm();
    if !(n > 0.0) {
        return Err(Error::DegenerateFit("wavefunction has zero norm".into()));
    }
    let mu = energy_to_hz((kin + tr + 2.0 * int) / n);
    let axial_zero_point = energy_to_hz(0.5 * CONSTANTS.hbar * trap.omega_axial);

    let axial = project(&psi.density(), Axis::Z);
    let afit = fit_centered_gaussian(&axial.coords, &axial.values)?;
    let (rho, n2d) = radial_profile(psi);
    let rfit = fit_inverted_parabola(&rho, &n2d)?;

    Ok(GroundStateReport {
        chemical_potential: mu,
        chemical_potential_2d: mu - axial_zero_point,
        peak_density: psi.peak_density(),
        tf_radius_radial: rfit.width,
        axial_1e2_radius: 2.0 * afit.width,
        axial_sigma: afit.width,
        energy_breakdown: EnergyBreakdown {
            kinetic: energy_to_hz(kin / n),
            trap: energy_to_hz(tr / n),
            interaction: energy_to_hz(int / n),
        },
        iterations: 0,
        residual: 0.0,
        radial_fit_residual: rfit.residual,
        axial_fit_residual: afit.residual,
        energy_history: vec![],
    })
}

/// Total GPE energy in J.
pub fn total_energy(psi: &Wavefunction, trap: &TrapParams, species: &SpeciesParams) -> f64 {
    let ops = Operators::new(psi.grid(), trap, species);
    let (k, t, i) = ops.energies(&psi.field.values, species.mass);
    k + t + i
}

/// Fitted radial Thomas-Fermi radius of the state.
pub fn tf_radius(psi: &Wavefunction) -> Result<f64> {
    let (rho, n2d) = radial_profile(psi);
    Ok(fit_inverted_parabola(&rho, &n2d)?.width)
}

/// Stretch the transverse coordinates so the fitted Thomas-Fermi radius
/// becomes `new_tf_radius`. With `keep_peak_density` the local density is
/// unchanged and the atom number grows with the area; otherwise the state
/// is renormalized to its original atom number.
pub fn scale_density(psi: &Wavefunction, new_tf_radius: f64, keep_peak_density: bool) -> Result<Wavefunction> {
    if !(new_tf_radius.is_finite() && new_tf_radius > 0.0) {
        return Err(Error::InvalidParameter("new radius must be positive".into()));
    }
    let grid = *psi.grid();
    let half = 0.5 * grid.extent()[0].min(grid.extent()[1]);
    if new_tf_radius > half {
        return Err(Error::GridTooSmall(format!(
            "rescaled radius {new_tf_radius:.3e} m exceeds the half-extent {half:.3e} m"
        )));
    }
    let old = tf_radius(psi)?;
    let s = new_tf_radius / old;
    let field = if (s - 1.0).abs() < 1e-14 {
        psi.field.clone()
    } else {
        resample_complex(&psi.field, grid, |r| [r[0] / s, r[1] / s, r[2]])
    };
    let mut out = Wavefunction::from_field(field);
    if !keep_peak_density {
        out.normalize_to(psi.atom_number);
    }
    Ok(out)
}

/// Multiply the amplitude so that the peak density equals `peak`.
pub fn with_peak_density(psi: &Wavefunction, peak: f64) -> Result<Wavefunction> {
    let current = psi.peak_density();
    if !(current > 0.0 && peak > 0.0) {
        return Err(Error::InvalidParameter("peak densities must be positive".into()));
    }
    let s = (peak / current).sqrt();
    let field = ComplexField3D { grid: psi.field.grid, values: psi.field.values.mapv(|c| c * s) };
    Ok(Wavefunction::from_field(field))
}

/// Trilinear resampling onto another grid; the atom number is recomputed.
pub fn resample(psi: &Wavefunction, target: GridSpec) -> Wavefunction {
    Wavefunction::from_field(resample_complex(&psi.field, target, |r| r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::rb87_defaults;

    fn gaussian_state(grid: GridSpec, sigma: [f64; 3], atoms: f64) -> Wavefunction {
        // density ∝ exp(-x²/2σ²) per axis
        let f = ComplexField3D::from_fn(grid, |r| {
            let e: f64 = (0..3).map(|a| r[a] * r[a] / (4.0 * sigma[a] * sigma[a])).sum();
            Complex64::new((-e).exp(), 0.0)
        });
        let mut w = Wavefunction::from_field(f);
        w.normalize_to(atoms);
        w
    }

    fn parabola_state(grid: GridSpec, r_tf: f64, sigma_z: f64) -> Wavefunction {
        let f = ComplexField3D::from_fn(grid, |r| {
            let rho2 = r[0] * r[0] + r[1] * r[1];
            let radial = (1.0 - rho2 / (r_tf * r_tf)).max(0.0);
            Complex64::new((radial * (-r[2] * r[2] / (2.0 * sigma_z * sigma_z)).exp()).sqrt(), 0.0)
        });
        Wavefunction::from_field(f)
    }

    #[test]
    fn axial_fit_of_exact_gaussian() {
        let grid = GridSpec::centered([32, 32, 64], [60e-9, 60e-9, 4e-9]).unwrap();
        let sigma_z = 20e-9;
        let w = gaussian_state(grid, [0.4e-6, 0.4e-6, sigma_z], 100.0);
        let axial = project(&w.density(), Axis::Z);
        let fit = fit_centered_gaussian(&axial.coords, &axial.values).unwrap();
        assert!((2.0 * fit.width - 2.0 * sigma_z).abs() / (2.0 * sigma_z) < 1e-6);
    }

    #[test]
    fn radial_fit_of_exact_parabola() {
        let grid = GridSpec::centered([96, 96, 16], [30e-9, 30e-9, 15e-9]).unwrap();
        let w = parabola_state(grid, 1.15e-6, 30e-9);
        let r = tf_radius(&w).unwrap();
        assert!((r - 1.15e-6).abs() / 1.15e-6 < 0.01, "{r}");
    }

    #[test]
    fn scale_density_identity_and_area_law() {
        let grid = GridSpec::centered([96, 96, 16], [30e-9, 30e-9, 15e-9]).unwrap();
        let w = parabola_state(grid, 0.6e-6, 30e-9);
        let r0 = tf_radius(&w).unwrap();
        let same = scale_density(&w, r0, true).unwrap();
        assert_eq!(same.field, w.field);

        let doubled = scale_density(&w, 2.0 * r0, true).unwrap();
        assert!((doubled.atom_number / w.atom_number - 4.0).abs() < 0.02, "{}", doubled.atom_number / w.atom_number);
        assert!((doubled.peak_density() - w.peak_density()).abs() / w.peak_density() < 1e-9);
        assert!((tf_radius(&doubled).unwrap() - 2.0 * r0).abs() / r0 < 0.02);

        let kept_n = scale_density(&w, 1.5 * r0, false).unwrap();
        assert!((kept_n.atom_number - w.atom_number).abs() / w.atom_number < 1e-12);

        assert!(scale_density(&w, 2.0e-6, true).is_err());
        assert!(scale_density(&w, -1.0, true).is_err());
    }

    #[test]
    fn grid_precondition() {
        let sp = rb87_defaults();
        let trap = TrapParams::default();
        let small = GridSpec::centered([16, 16, 16], [50e-9, 50e-9, 15e-9]).unwrap();
        assert!(matches!(
            ground_state(&trap, &sp, 250.0, &small, &SolverOpts::default()),
            Err(Error::GridTooSmall(_))
        ));
        let thin = GridSpec::centered([96, 96, 4], [40e-9, 40e-9, 15e-9]).unwrap();
        assert!(matches!(
            ground_state(&trap, &sp, 250.0, &thin, &SolverOpts::default()),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn non_convergence_reported() {
        let mut sp = rb87_defaults();
        sp.a_s = 0.0;
        let trap = TrapParams { omega_axial: 2.0 * PI * 4e3, ..TrapParams::default() };
        let grid = GridSpec::centered([16, 16, 16], [0.15e-6, 0.15e-6, 0.08e-6]).unwrap();
        let opts = SolverOpts { max_iter: 20, tolerance: 1e-30, ..SolverOpts::default() };
        assert!(matches!(ground_state(&trap, &sp, 10.0, &grid, &opts), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn peak_rescale() {
        let grid = GridSpec::centered([16, 16, 16], [0.1e-6; 3]).unwrap();
        let w = gaussian_state(grid, [0.3e-6; 3], 50.0);
        let p = with_peak_density(&w, 9.7e20).unwrap();
        assert!((p.peak_density() - 9.7e20).abs() / 9.7e20 < 1e-12);
    }

    #[test]
    fn tf_estimate_consistency() {
        let sp = rb87_defaults();
        let trap = TrapParams::default();
        let (mu, r) = thomas_fermi_estimate(&trap, &sp, 250.0);
        let mw2 = sp.mass * trap.omega_radial.powi(2);
        assert!((0.5 * mw2 * r * r - mu).abs() / mu < 1e-12);
        let g2d = sp.contact_coupling() / ((2.0 * PI).sqrt() * trap.axial_length(&sp));
        assert!((PI * mu * r * r / (2.0 * g2d) - 250.0).abs() < 1e-9);
    }
}
