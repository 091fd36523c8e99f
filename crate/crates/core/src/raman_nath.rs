//! Raman-Nath evolution: the induced potential acts as a pure phase during
//! the flash, after which the momentum distribution is analysed.
//!
//! Momentum densities use the continuum convention
//! ñ(k) = |(2π)^{-3/2} ∫ e^{-ik·r} ψ(r) d³r|², so that ∫ñ d³k = N.

use std::f64::consts::PI;

use ndarray::{s, Array3, Axis as NdAxis, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fit::fit_centered_gaussian;
use crate::gpe::Wavefunction;
use crate::grid::{
    fft3_inplace, fft_axis_inplace, fftshift, project, Axis, ComplexField3D, Direction, FieldUnit,
    GridSpec, Profile1D, ScalarField3D,
};
use crate::units::{SpeciesParams, CONSTANTS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSpectrum {
    /// Centered momentum grid, rad/m.
    pub grid: GridSpec,
    /// |ψ̃(k)|² in m³.
    pub density: Array3<f64>,
    /// ħk of the flash in rad/m (wavenumber of one recoil).
    pub recoil_unit: f64,
}

impl MomentumSpectrum {
    pub fn as_field(&self) -> ScalarField3D {
        ScalarField3D { grid: self.grid, values: self.density.clone(), unit: FieldUnit::MomentumDensity }
    }

    pub fn total(&self) -> f64 {
        self.density.sum() * self.grid.cell_volume()
    }

    pub fn projection(&self, axis: Axis) -> Profile1D {
        project(&self.as_field(), axis)
    }
}

/// Gaussian width of one projected spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentWidth {
    pub axis: Axis,
    /// σ in recoils.
    pub sigma: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthReport {
    pub axis: Axis,
    /// Recoils.
    pub sigma_total: f64,
    pub sigma_coherent: f64,
    pub sigma_incoherent: f64,
    pub fit_residual: f64,
}

impl WidthReport {
    pub fn new(coherent: CoherentWidth, sigma_incoherent: f64) -> Self {
        Self {
            axis: coherent.axis,
            sigma_total: crate::scattering::combine_quadrature(coherent.sigma, sigma_incoherent),
            sigma_coherent: coherent.sigma,
            sigma_incoherent,
            fit_residual: coherent.residual,
        }
    }
}

/// Fit residual above which a width is flagged as poorly described by a
/// Gaussian.
pub const RESIDUAL_WARNING: f64 = 0.2;

/// ψ'(r) = exp(−i V(r) t/ħ) ψ(r).
pub fn phase_imprint(psi: &Wavefunction, potential: &ScalarField3D, t: f64) -> Result<Wavefunction> {
    psi.grid().ensure_same(&potential.grid, "phase imprint")?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter("imprint time must be ≥ 0".into()));
    }
    let mut field = psi.field.clone();
    let scale = t / CONSTANTS.hbar;
    Zip::from(&mut field.values)
        .and(&potential.values)
        .par_for_each(|c, &v| *c *= Complex64::from_polar(1.0, -v * scale));
    Ok(Wavefunction { field, atom_number: psi.atom_number })
}

/// Full 3D momentum density on the centered spectral grid.
pub fn momentum_distribution(psi: &Wavefunction, recoil_unit: f64) -> MomentumSpectrum {
    let grid = *psi.grid();
    let mut hat = psi.field.values.clone();
    fft3_inplace(&mut hat, Direction::Forward);
    let scale = grid.cell_volume().powi(2) / (8.0 * PI.powi(3));
    let density = fftshift(&hat.mapv(|c| c.norm_sqr() * scale));
    MomentumSpectrum { grid: grid.spectral(), density, recoil_unit }
}

/// Momentum density integrated over the two axes orthogonal to `axis`,
/// using only 1D transforms along `axis`. The wavefunction is zero-padded
/// by `padding` along that axis to refine the momentum spacing.
pub fn projected_momentum(psi: &Wavefunction, axis: Axis, padding: usize) -> Result<Profile1D> {
    if padding == 0 {
        return Err(Error::InvalidParameter("padding must be ≥ 1".into()));
    }
    let grid = *psi.grid();
    let a = axis.index();
    let n = grid.n[a];
    let m = n * padding;
    let mut shape = grid.n;
    shape[a] = m;
    let mut buf = Array3::<Complex64>::zeros((shape[0], shape[1], shape[2]));
    match axis {
        Axis::X => buf.slice_mut(s![..n, .., ..]).assign(&psi.field.values),
        Axis::Y => buf.slice_mut(s![.., ..n, ..]).assign(&psi.field.values),
        Axis::Z => buf.slice_mut(s![.., .., ..n]).assign(&psi.field.values),
    }
    fft_axis_inplace(&mut buf, axis, Direction::Forward);
    let h = grid.spacing;
    let others: f64 = (0..3).filter(|&b| b != a).map(|b| h[b]).product();
    let scale = h[a] * h[a] * others / (2.0 * PI);
    let raw: Vec<f64> = buf
        .axis_iter(NdAxis(a))
        .map(|plane| plane.iter().map(|c| c.norm_sqr()).sum::<f64>() * scale)
        .collect();
    let dk = 2.0 * PI / (m as f64 * h[a]);
    let coords = (0..m).map(|i| (i as f64 - (m / 2) as f64) * dk).collect();
    let values = (0..m).map(|i| raw[(i + m - m / 2) % m]).collect();
    Ok(Profile1D { axis, coords, values })
}

/// Least-squares Gaussian (centered at k = 0) of a projected momentum
/// density, σ reported in recoils.
pub fn fit_projection(profile: &Profile1D, recoil_unit: f64) -> Result<CoherentWidth> {
    let fit = fit_centered_gaussian(&profile.coords, &profile.values)?;
    if fit.residual > RESIDUAL_WARNING {
        log::warn!(
            "{}-projection is poorly described by a Gaussian (residual {:.3})",
            profile.axis.name(),
            fit.residual
        );
    }
    Ok(CoherentWidth { axis: profile.axis, sigma: fit.width / recoil_unit, residual: fit.residual })
}

pub fn fit_width(spectrum: &MomentumSpectrum, axis: Axis) -> Result<CoherentWidth> {
    fit_projection(&spectrum.projection(axis), spectrum.recoil_unit)
}

/// Mean kinetic energy per atom in J, evaluated spectrally.
pub fn kinetic_energy_per_atom(psi: &Wavefunction, species: &SpeciesParams) -> f64 {
    let grid = *psi.grid();
    let mut hat = psi.field.values.clone();
    fft3_inplace(&mut hat, Direction::Forward);
    let kx = grid.wavenumbers(Axis::X);
    let ky = grid.wavenumbers(Axis::Y);
    let kz = grid.wavenumbers(Axis::Z);
    let sum: f64 = hat
        .indexed_iter()
        .map(|((i, j, k), c)| (kx[i] * kx[i] + ky[j] * ky[j] + kz[k] * kz[k]) * c.norm_sqr())
        .sum();
    let integral = sum * grid.cell_volume() / grid.len() as f64;
    let n = psi.norm();
    if n == 0.0 {
        return 0.0;
    }
    CONSTANTS.hbar.powi(2) / (2.0 * species.mass) * integral / n
}

/// Kinetic energy gained during the imprint divided by max |V|. Small
/// values mean the density stays frozen during the flash.
pub fn raman_nath_check(
    psi_before: &Wavefunction,
    potential: &ScalarField3D,
    t: f64,
    species: &SpeciesParams,
) -> Result<f64> {
    let vmax = potential.max_abs();
    if t == 0.0 || vmax == 0.0 {
        return Ok(0.0);
    }
    let after = phase_imprint(psi_before, potential, t)?;
    let gained = kinetic_energy_per_atom(&after, species) - kinetic_energy_per_atom(psi_before, species);
    Ok(gained / vmax)
}

/// Plane-wave modulation e^{i k·r}, used to shift spectra in tests and checks.
pub fn boost(psi: &Wavefunction, k: [f64; 3]) -> Wavefunction {
    let grid = *psi.grid();
    let mut values = psi.field.values.clone();
    Zip::indexed(&mut values).for_each(|(i, j, l), c| {
        let r = grid.position(i, j, l);
        *c *= Complex64::from_polar(1.0, k[0] * r[0] + k[1] * r[1] + k[2] * r[2]);
    });
    Wavefunction { field: ComplexField3D { grid, values }, atom_number: psi.atom_number }
}
