//! Retarded interaction energy of two parallel dipoles driven by the same
//! plane wave.
//!
//! For dipoles of magnitude d along ê separated by r, driven by a wave with
//! wave vector k:
//!
//! ```text
//! V(r) = d² cos(k·r) / (4π ε₀ r³)
//!        · [ (1 − 3 (ê·r̂)²)(cos kr + kr sin kr) − (1 − (ê·r̂)²) k²r² cos kr ]
//! ```
//!
//! The first bracket term is the familiar 1/r³ near field, the second the
//! radiative 1/r far field.

use std::f64::consts::PI;

use ndarray::Zip;
use serde::{Deserialize, Serialize};

use crate::grid::{FieldUnit, GridSpec, ScalarField3D};
use crate::units::CONSTANTS;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Dipole magnitude in C·m.
    pub d: f64,
    /// Flash-beam wave vector in rad/m.
    pub k_vec: [f64; 3],
    /// Common dipole orientation (unit vector).
    pub polarization: [f64; 3],
    pub epsilon0: f64,
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Polarization in the x–z plane at `angle_deg` from the x axis.
pub fn polarization_vector(angle_deg: f64) -> [f64; 3] {
    let phi = angle_deg.to_radians();
    [phi.cos(), 0.0, phi.sin()]
}

impl KernelParams {
    pub fn new(d: f64, k_vec: [f64; 3], polarization: [f64; 3]) -> Result<Self> {
        let p = Self { d, k_vec, polarization, epsilon0: CONSTANTS.epsilon0 };
        p.validate()?;
        Ok(p)
    }

    /// Beam along +y with wavelength `wavelength`, polarization at
    /// `angle_deg` from x towards z.
    pub fn flash(d: f64, wavelength: f64, angle_deg: f64) -> Result<Self> {
        Self::new(d, [0.0, 2.0 * PI / wavelength, 0.0], polarization_vector(angle_deg))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d.is_finite() && self.d >= 0.0) {
            return Err(Error::InvalidParameter(format!("dipole magnitude {} must be ≥ 0", self.d)));
        }
        if !(self.epsilon0.is_finite() && self.epsilon0 > 0.0) {
            return Err(Error::InvalidParameter("epsilon0 must be positive".into()));
        }
        let e = self.polarization;
        if (dot(e, e).sqrt() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("polarization must be a unit vector".into()));
        }
        let k = dot(self.k_vec, self.k_vec).sqrt();
        if !k.is_finite() {
            return Err(Error::InvalidParameter("wave vector is not finite".into()));
        }
        if k > 0.0 && (dot(e, self.k_vec) / k).abs() > 1e-12 {
            return Err(Error::InvalidParameter("polarization must be transverse to the wave vector".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        dot(self.k_vec, self.k_vec).sqrt()
    }

    /// d² / (4π ε₀)
    pub fn strength(&self) -> f64 {
        self.d * self.d / (4.0 * PI * self.epsilon0)
    }
}

/// Kernel at separation `r`, assuming |r| > 0.
#[inline]
pub(crate) fn kernel_at(r: [f64; 3], p: &KernelParams, strength: f64, k: f64) -> f64 {
    let r2 = dot(r, r);
    let rn = r2.sqrt();
    let c = dot(p.polarization, r) / rn;
    let c2 = c * c;
    let kr = k * rn;
    let (s, co) = kr.sin_cos();
    let bracket = (1.0 - 3.0 * c2) * (co + kr * s) - (1.0 - c2) * kr * kr * co;
    strength * dot(p.k_vec, r).cos() * bracket / (r2 * rn)
}

/// Interaction energy in J of two dipoles separated by `r`.
pub fn kernel_value(r: [f64; 3], params: &KernelParams) -> Result<f64> {
    if dot(r, r) == 0.0 {
        return Err(Error::ZeroSeparation);
    }
    Ok(kernel_at(r, params, params.strength(), params.k()))
}

/// Sample the kernel at every grid position (taken as a displacement from
/// the origin). The r = 0 cell is zero.
pub fn tabulate_kernel(grid: &GridSpec, params: &KernelParams) -> Result<ScalarField3D> {
    grid.validate()?;
    params.validate()?;
    let mut field = ScalarField3D::zeros(*grid, FieldUnit::Energy);
    if params.d == 0.0 {
        return Ok(field);
    }
    let (strength, k) = (params.strength(), params.k());
    Zip::indexed(&mut field.values).par_for_each(|(i, j, l), v| {
        let r = grid.position(i, j, l);
        if dot(r, r) > 0.0 {
            *v = kernel_at(r, params, strength, k);
        }
    });
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::units::{debye_to_si, rb87_defaults};

    const MAGIC: f64 = 54.735_610_317_245_35;

    fn paper_params(angle: f64) -> KernelParams {
        KernelParams::flash(debye_to_si(5.26), rb87_defaults().lambda0, angle).unwrap()
    }

    /// Σ_ij e_i e_j [(δ_ij − 3 r_i r_j/r²) A − (δ_ij − r_i r_j/r²) B], summed term by term.
    fn tensor_sum(r: [f64; 3], p: &KernelParams) -> f64 {
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let k = (p.k_vec.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let kr = k * rn;
        let a = kr.cos() + kr * kr.sin();
        let b = kr * kr * kr.cos();
        let mut sum = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let rr = r[i] * r[j] / (rn * rn);
                sum += p.polarization[i] * p.polarization[j] * ((delta - 3.0 * rr) * a - (delta - rr) * b);
            }
        }
        let phase = (p.k_vec[0] * r[0] + p.k_vec[1] * r[1] + p.k_vec[2] * r[2]).cos();
        p.d * p.d * phase / (4.0 * PI * p.epsilon0 * rn.powi(3)) * sum
    }

    #[test]
    fn static_side_by_side_limit() {
        let mut p = paper_params(0.0);
        p.k_vec = [0.0, 1e-3, 0.0];
        let r = [0.0, 0.0, 1e-7];
        let v = kernel_value(r, &p).unwrap();
        let expected = p.strength() / 1e-21;
        assert!(((v - expected) / expected).abs() < 1e-9);
        assert!(v > 0.0);
    }

    #[test]
    fn vanishes_at_magic_angle_in_near_field() {
        let mut p = paper_params(0.0);
        p.k_vec = [0.0, 1.0, 0.0];
        let a = MAGIC.to_radians();
        let r = [1e-8 * a.cos(), 0.0, 1e-8 * a.sin()];
        let v = kernel_value(r, &p).unwrap();
        let scale = p.strength() / 1e-24;
        assert!(v.abs() / scale < 1e-12, "relative {}", v.abs() / scale);
    }

    #[test]
    fn retardation_phase_node() {
        let p = paper_params(30.0);
        let y = PI / 2.0 / p.k();
        let v = kernel_value([0.0, y, 0.0], &p).unwrap();
        assert!(v.abs() < 1e-12 * p.strength() / y.powi(3));
    }

    #[test]
    fn generic_point_matches_tensor_sum() {
        for angle in [0.0, 20.0, MAGIC, 90.0] {
            let p = paper_params(angle);
            let r = [0.3e-6, 0.7e-6, -0.2e-6];
            let v = kernel_value(r, &p).unwrap();
            let oracle = tensor_sum(r, &p);
            assert!(((v - oracle) / oracle).abs() < 1e-12, "angle {angle}: {v} vs {oracle}");
        }
    }

    #[test]
    fn zero_separation_is_an_error() {
        assert!(matches!(kernel_value([0.0; 3], &paper_params(0.0)), Err(Error::ZeroSeparation)));
    }

    #[test]
    fn rejects_bad_polarization() {
        assert!(KernelParams::new(1.0, [0.0, 1.0, 0.0], [0.0, 1.0, 0.0]).is_err());
        assert!(KernelParams::new(1.0, [0.0, 1.0, 0.0], [1.0, 0.0, 0.1]).is_err());
        assert!(KernelParams::new(-1.0, [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn tabulation() {
        let grid = GridSpec::cubic([32, 64, 32], 24.5e-9).unwrap();
        let p = paper_params(0.0);
        let t = tabulate_kernel(&grid, &p).unwrap();
        assert_eq!(t.values[grid.center_index()], 0.0);

        // nearest grid point to (0.3, 0.7, -0.2) μm
        let target = [0.3e-6, 0.7e-6, -0.2e-6];
        let idx = [0, 1, 2].map(|a| ((target[a] - grid.origin[a]) / grid.spacing[a]).round() as usize);
        let r = grid.position(idx[0], idx[1], idx[2]);
        assert_eq!(t.values[idx], kernel_value(r, &p).unwrap());

        let zero = tabulate_kernel(&grid, &KernelParams { d: 0.0, ..p }).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tabulated_kernel_is_even() {
        let grid = GridSpec::cubic([16, 16, 16], 30e-9).unwrap();
        let t = tabulate_kernel(&grid, &paper_params(35.0)).unwrap();
        let n = 16;
        let scale = t.max_abs();
        // mirror about the center index n/2 (index 0 has no partner)
        for i in 1..n {
            for j in 1..n {
                for k in 1..n {
                    let a = t.values[[i, j, k]];
                    let b = t.values[[n - i, n - j, n - k]];
                    assert!((a - b).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
