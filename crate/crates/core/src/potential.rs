//! Induced potential V(r₀) = ∫ V_dd(r₀ − r) n(r) d³r by FFT convolution.
//!
//! Transverse axes are zero-padded (aperiodic) or wrapped according to the
//! grid's boundary flags. Along z the pancake stack is handled either by
//! summing ±M translated copies of the kernel (`Truncated`) or by a circular
//! convolution over a box holding an integer number of stack periods
//! (`PeriodicZ`). Wrapped axes use the minimum-image displacement, with the
//! Nyquist index mapped to −n/2.

use ndarray::{s, Array3, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{
    fft3_inplace, signed_alias, Axis, Boundary, Direction, FieldUnit, GridSpec, ScalarField3D,
};
use crate::kernel::{kernel_at, KernelParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StackMode {
    /// Sum the kernel over pancakes at z = j·period, |j| ≤ images. With a
    /// convergence tolerance set, `images` is the cap of an adaptive search.
    Truncated { images: usize },
    /// Circular convolution along z; the density must already hold every
    /// pancake in the box (see [`tile_along_z`]).
    PeriodicZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    /// Pancake separation in m.
    pub period: f64,
    pub mode: StackMode,
    /// Relative L∞ change between M and 2M images at which the truncated
    /// image sum is accepted. `None` uses exactly `images`.
    pub convergence_tol: Option<f64>,
}

impl StackSpec {
    /// A single pancake, no images.
    pub fn single() -> Self {
        Self { period: crate::grid::LATTICE_WAVELENGTH / 2.0, mode: StackMode::Truncated { images: 0 }, convergence_tol: None }
    }

    pub fn truncated(period: f64, images: usize) -> Self {
        Self { period, mode: StackMode::Truncated { images }, convergence_tol: None }
    }

    pub fn periodic(period: f64) -> Self {
        Self { period, mode: StackMode::PeriodicZ, convergence_tol: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::InvalidParameter(format!("stack period {} must be positive", self.period)));
        }
        if let Some(tol) = self.convergence_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Error::InvalidParameter("convergence tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Padding factor on zero-padded axes. Two or more makes the
    /// convolution exactly aperiodic.
    pub padding: usize,
    /// Cell-count cap for [`direct_sum_potential`].
    pub direct_sum_cap: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { padding: 2, direct_sum_cap: 16 * 16 * 16 }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialSolution {
    pub potential: ScalarField3D,
    /// Images per side actually summed (0 in periodic mode).
    pub images: usize,
    /// Relative change of the last convergence step, 0 when not adaptive.
    pub last_change: f64,
}

/// Number of cells in one stack period, if it is an integer.
fn cells_per_period(grid: &GridSpec, period: f64) -> Result<usize> {
    let q = period / grid.spacing[2];
    let r = q.round();
    if r < 1.0 || (q - r).abs() > 1e-6 * q {
        return Err(Error::IncommensurateStack(format!(
            "period {period:e} m is {q:.6} cells of {:e} m",
            grid.spacing[2]
        )));
    }
    Ok(r as usize)
}

fn check_periodic_box(grid: &GridSpec, period: f64) -> Result<usize> {
    let cells = cells_per_period(grid, period)?;
    if grid.n[2] % cells != 0 {
        return Err(Error::IncommensurateStack(format!(
            "box of {} cells is not a whole number of {cells}-cell periods",
            grid.n[2]
        )));
    }
    Ok(cells)
}

/// Sum circular z-shifts of a single-pancake density so that the box holds
/// the whole periodic stack.
pub fn tile_along_z(density: &ScalarField3D, period: f64) -> Result<ScalarField3D> {
    let cells = check_periodic_box(&density.grid, period)?;
    let nz = density.grid.n[2];
    let mut out = ScalarField3D::zeros(density.grid, density.unit);
    for shift in (0..nz).step_by(cells) {
        Zip::indexed(&mut out.values).for_each(|(i, j, k), v| {
            *v += density.values[[i, j, (k + nz - shift) % nz]];
        });
    }
    Ok(out)
}

/// Per-axis size of the circular convolution buffer.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n: [usize; 3],
    m: [usize; 3],
    h: [f64; 3],
}

fn layout(grid: &GridSpec, stack: &StackSpec, opts: &SolverOptions) -> Result<Layout> {
    grid.validate()?;
    stack.validate()?;
    if !grid.is_cubic() {
        return Err(Error::InvalidGrid("the convolution requires a simple cubic lattice".into()));
    }
    if opts.padding == 0 {
        return Err(Error::InvalidParameter("padding factor must be at least 1".into()));
    }
    let mut m = grid.n;
    for a in 0..2 {
        if grid.boundary[a] == Boundary::Padded {
            m[a] = grid.n[a] * opts.padding;
        }
    }
    m[2] = match stack.mode {
        StackMode::PeriodicZ => {
            check_periodic_box(grid, stack.period)?;
            grid.n[2]
        }
        StackMode::Truncated { .. } => grid.n[2] * opts.padding,
    };
    Ok(Layout { n: grid.n, m, h: grid.spacing })
}

fn validate_density(density: &ScalarField3D) -> Result<()> {
    if density.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter("density must be finite and non-negative".into()));
    }
    Ok(())
}

/// Kernel on the circular buffer summed over the listed images.
fn add_kernel_images(
    table: &mut Array3<f64>,
    lay: &Layout,
    params: &KernelParams,
    period: f64,
    images: &[i64],
) {
    if params.d == 0.0 || images.is_empty() {
        return;
    }
    let (strength, k) = (params.strength(), params.k());
    let m = lay.m;
    Zip::indexed(table).par_for_each(|(i, j, l), v| {
        let dx = signed_alias(i, m[0]) as f64 * lay.h[0];
        let dy = signed_alias(j, m[1]) as f64 * lay.h[1];
        let dz0 = signed_alias(l, m[2]) as f64 * lay.h[2];
        let mut acc = 0.0;
        for &img in images {
            let dz = dz0 - img as f64 * period;
            let r = [dx, dy, dz];
            if dx * dx + dy * dy + dz * dz > 0.0 {
                acc += kernel_at(r, params, strength, k);
            }
        }
        *v += acc;
    });
}

/// Potential solver with the density spectrum cached, so that several
/// kernels (e.g. a polarization sweep) reuse one forward transform.
pub struct PotentialSolver {
    grid: GridSpec,
    stack: StackSpec,
    lay: Layout,
    density_hat: Array3<Complex64>,
}

impl PotentialSolver {
    pub fn new(density: &ScalarField3D, stack: StackSpec, opts: SolverOptions) -> Result<Self> {
        validate_density(density)?;
        let lay = layout(&density.grid, &stack, &opts)?;
        let mut buf = Array3::<Complex64>::zeros((lay.m[0], lay.m[1], lay.m[2]));
        let dv = density.grid.cell_volume();
        buf.slice_mut(s![..lay.n[0], ..lay.n[1], ..lay.n[2]])
            .zip_mut_with(&density.values, |b, &d| *b = Complex64::new(d * dv, 0.0));
        fft3_inplace(&mut buf, Direction::Forward);
        Ok(Self { grid: density.grid, stack, lay, density_hat: buf })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn convolve(&self, table: &Array3<f64>) -> ScalarField3D {
        let mut buf = table.mapv(|v| Complex64::new(v, 0.0));
        fft3_inplace(&mut buf, Direction::Forward);
        Zip::from(&mut buf).and(&self.density_hat).par_for_each(|b, &d| *b *= d);
        fft3_inplace(&mut buf, Direction::Inverse);
        let n = self.lay.n;
        let values = buf.slice(s![..n[0], ..n[1], ..n[2]]).mapv(|c| c.re);
        ScalarField3D { grid: self.grid, values, unit: FieldUnit::Energy }
    }

    pub fn solve(&self, params: &KernelParams) -> Result<PotentialSolution> {
        params.validate()?;
        let m = self.lay.m;
        let mut table = Array3::<f64>::zeros((m[0], m[1], m[2]));
        match self.stack.mode {
            StackMode::PeriodicZ => {
                add_kernel_images(&mut table, &self.lay, params, self.stack.period, &[0]);
                Ok(PotentialSolution { potential: self.convolve(&table), images: 0, last_change: 0.0 })
            }
            StackMode::Truncated { images } => match self.stack.convergence_tol {
                None => {
                    let list: Vec<i64> = (-(images as i64)..=images as i64).collect();
                    add_kernel_images(&mut table, &self.lay, params, self.stack.period, &list);
                    Ok(PotentialSolution { potential: self.convolve(&table), images, last_change: 0.0 })
                }
                Some(tol) => self.solve_adaptive(params, &mut table, images, tol),
            },
        }
    }

    /// Double the image count from 1 until V_M and V_2M agree to `tol`.
    fn solve_adaptive(
        &self,
        params: &KernelParams,
        table: &mut Array3<f64>,
        cap: usize,
        tol: f64,
    ) -> Result<PotentialSolution> {
        let period = self.stack.period;
        let pair = |j: usize| [j as i64, -(j as i64)];
        add_kernel_images(table, &self.lay, params, period, &[0, 1, -1]);
        let mut current = 1usize;
        let mut prev = self.convolve(table);
        let mut last_change = f64::INFINITY;
        while 2 * current <= cap {
            let next = 2 * current;
            let extra: Vec<i64> = (current + 1..=next).flat_map(pair).collect();
            add_kernel_images(table, &self.lay, params, period, &extra);
            let v = self.convolve(table);
            let scale = v.max_abs();
            let diff = Zip::from(&v.values)
                .and(&prev.values)
                .fold(0.0_f64, |m, a, b| m.max((a - b).abs()));
            last_change = if scale > 0.0 { diff / scale } else { 0.0 };
            log::debug!("stack images {current} -> {next}: relative change {last_change:e}");
            if last_change <= tol {
                return Ok(PotentialSolution { potential: prev, images: current, last_change });
            }
            prev = v;
            current = next;
        }
        Err(Error::StackNotConverged { max_images: cap, last_change })
    }
}

/// FFT convolution of the density with the retarded kernel.
pub fn induced_potential(density: &ScalarField3D, kparams: &KernelParams, stack: &StackSpec) -> Result<ScalarField3D> {
    Ok(PotentialSolver::new(density, *stack, SolverOptions::default())?.solve(kparams)?.potential)
}

pub fn induced_potential_with(
    density: &ScalarField3D,
    kparams: &KernelParams,
    stack: &StackSpec,
    opts: &SolverOptions,
) -> Result<PotentialSolution> {
    PotentialSolver::new(density, *stack, *opts)?.solve(kparams)
}

/// O(N²) pairwise sum over source and target cells; the self cell (zero
/// displacement) is skipped. Wrapped axes use the same minimum-image rule
/// as the FFT path. Truncated mode uses exactly `images` copies.
pub fn direct_sum_potential(
    density: &ScalarField3D,
    kparams: &KernelParams,
    stack: &StackSpec,
    opts: &SolverOptions,
) -> Result<ScalarField3D> {
    validate_density(density)?;
    kparams.validate()?;
    let grid = density.grid;
    let cells = grid.len();
    if cells > opts.direct_sum_cap {
        return Err(Error::DirectSumTooLarge { cells, cap: opts.direct_sum_cap });
    }
    let lay = layout(&grid, stack, opts)?;
    let images: Vec<i64> = match stack.mode {
        StackMode::PeriodicZ => vec![0],
        StackMode::Truncated { images } => (-(images as i64)..=images as i64).collect(),
    };
    let dv = grid.cell_volume();
    let h = grid.spacing[0];
    let wrap = |d: isize, m: usize| signed_alias(d.rem_euclid(m as isize) as usize, m) as f64 * h;
    let sources: Vec<([usize; 3], f64)> = density
        .values
        .indexed_iter()
        .filter(|(_, &v)| v != 0.0)
        .map(|((i, j, k), &v)| ([i, j, k], v * dv))
        .collect();

    let mut out = ScalarField3D::zeros(grid, FieldUnit::Energy);
    Zip::indexed(&mut out.values).par_for_each(|(ti, tj, tk), v| {
        let mut acc = 0.0;
        for (s, weight) in &sources {
            let dx = wrap(ti as isize - s[0] as isize, lay.m[0]);
            let dy = wrap(tj as isize - s[1] as isize, lay.m[1]);
            let dz0 = wrap(tk as isize - s[2] as isize, lay.m[2]);
            for &img in &images {
                let dz = dz0 - img as f64 * stack.period;
                if dx * dx + dy * dy + dz * dz > 0.0 {
                    acc += weight * crate::kernel::kernel_value([dx, dy, dz], kparams).expect("nonzero separation");
                }
            }
        }
        *v = acc;
    });
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceleration {
    /// |∇V|/m in m/s².
    pub value: f64,
    pub index: [usize; 3],
    pub position: [f64; 3],
}

/// Gradient component along `axis` at `idx`: central differences inside,
/// one-sided at the box edges.
fn derivative(field: &ScalarField3D, idx: [usize; 3], axis: Axis) -> f64 {
    let a = axis.index();
    let n = field.grid.n[a];
    let h = field.grid.spacing[a];
    let at = |i: usize| {
        let mut q = idx;
        q[a] = i;
        field.values[q]
    };
    let i = idx[a];
    if i == 0 {
        (at(1) - at(0)) / h
    } else if i == n - 1 {
        (at(n - 1) - at(n - 2)) / h
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

pub fn gradient_magnitude(field: &ScalarField3D, idx: [usize; 3]) -> f64 {
    Axis::ALL.iter().map(|&a| derivative(field, idx, a).powi(2)).sum::<f64>().sqrt()
}

/// Largest |∇V|/m over the grid and where it occurs.
pub fn max_acceleration(potential: &ScalarField3D, mass: f64) -> Acceleration {
    max_acceleration_where(potential, mass, &Axis::ALL, |_| true)
}

/// Largest |∇V|/m using only the gradient components along `axes`, over
/// the cells accepted by `include`.
pub fn max_acceleration_where(
    potential: &ScalarField3D,
    mass: f64,
    axes: &[Axis],
    include: impl Fn([usize; 3]) -> bool,
) -> Acceleration {
    let mut best = Acceleration { value: 0.0, index: [0; 3], position: potential.grid.position(0, 0, 0) };
    for ((i, j, k), _) in potential.values.indexed_iter() {
        if !include([i, j, k]) {
            continue;
        }
        let g = axes.iter().map(|&a| derivative(potential, [i, j, k], a).powi(2)).sum::<f64>().sqrt() / mass;
        if g > best.value {
            best = Acceleration { value: g, index: [i, j, k], position: potential.grid.position(i, j, k) };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{kernel_value, tabulate_kernel};
    use crate::units::{debye_to_si, rb87_defaults};

    fn params(angle: f64) -> KernelParams {
        KernelParams::flash(debye_to_si(5.26), rb87_defaults().lambda0, angle).unwrap()
    }

    #[test]
    fn delta_density_reproduces_kernel() {
        let grid = GridSpec::cubic([16, 16, 16], 40e-9).unwrap();
        let mut rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        let c = grid.center_index();
        rho.values[c] = 1.0 / grid.cell_volume();
        let p = params(20.0);
        let v = induced_potential(&rho, &p, &StackSpec::single()).unwrap();
        let k = tabulate_kernel(&grid, &p).unwrap();
        let scale = k.max_abs();
        for (a, b) in v.values.iter().zip(k.values.iter()) {
            assert!((a - b).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn two_point_sources_pair_energy() {
        let grid = GridSpec::cubic([8, 8, 8], 50e-9).unwrap();
        let mut rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        let (a, b) = ([2, 3, 4], [5, 4, 2]);
        rho.values[a] = 1.0 / grid.cell_volume();
        rho.values[b] = 1.0 / grid.cell_volume();
        let p = params(40.0);
        let v = direct_sum_potential(&rho, &p, &StackSpec::single(), &SolverOptions::default()).unwrap();
        let ra = grid.position(a[0], a[1], a[2]);
        let rb = grid.position(b[0], b[1], b[2]);
        let sep = [ra[0] - rb[0], ra[1] - rb[1], ra[2] - rb[2]];
        let pair = kernel_value(sep, &p).unwrap();
        assert!(((v.values[a] - pair) / pair).abs() < 1e-14);
        assert!(((v.values[b] - pair) / pair).abs() < 1e-14);
    }

    #[test]
    fn zero_density_zero_potential() {
        let grid = GridSpec::cubic([8, 8, 8], 50e-9).unwrap();
        let rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        let v = direct_sum_potential(&rho, &params(0.0), &StackSpec::single(), &SolverOptions::default()).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn direct_sum_cap() {
        let grid = GridSpec::cubic([32, 32, 32], 50e-9).unwrap();
        let rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        let r = direct_sum_potential(&rho, &params(0.0), &StackSpec::single(), &SolverOptions::default());
        assert!(matches!(r, Err(Error::DirectSumTooLarge { .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let grid = GridSpec::cubic([8, 8, 8], 50e-9).unwrap();
        let mut rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        rho.values[[1, 1, 1]] = -1.0;
        assert!(induced_potential(&rho, &params(0.0), &StackSpec::single()).is_err());

        let rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        // 7 cells per period does not divide 8
        let st = StackSpec::periodic(7.0 * 50e-9);
        assert!(matches!(induced_potential(&rho, &params(0.0), &st), Err(Error::IncommensurateStack(_))));
        let st = StackSpec::periodic(3.3 * 50e-9);
        assert!(matches!(induced_potential(&rho, &params(0.0), &st), Err(Error::IncommensurateStack(_))));

        let aniso = GridSpec::centered([8, 8, 8], [50e-9, 50e-9, 20e-9]).unwrap();
        let rho = ScalarField3D::zeros(aniso, FieldUnit::Density);
        assert!(matches!(induced_potential(&rho, &params(0.0), &StackSpec::single()), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn tiling() {
        let grid = GridSpec::cubic([4, 4, 16], 1.0).unwrap();
        let mut rho = ScalarField3D::zeros(grid, FieldUnit::Density);
        rho.values[[1, 2, 8]] = 3.0;
        let t = tile_along_z(&rho, 4.0).unwrap();
        for k in 0..16 {
            let expect = if k % 4 == 0 { 3.0 } else { 0.0 };
            assert_eq!(t.values[[1, 2, k]], expect);
        }
        assert!(tile_along_z(&rho, 5.0).is_err());
    }

    #[test]
    fn linear_ramp_acceleration() {
        let grid = GridSpec::cubic([8, 8, 8], 0.1).unwrap();
        let f = 3.0;
        let m = 2.0;
        let v = ScalarField3D::from_fn(grid, FieldUnit::Energy, |r| f * r[1]);
        let acc = max_acceleration(&v, m);
        assert!((acc.value - f / m).abs() < 1e-12);
        for idx in [[0, 0, 0], [7, 7, 7], [3, 4, 5]] {
            assert!((gradient_magnitude(&v, idx) / m - f / m).abs() < 1e-12);
        }
        let zero = ScalarField3D::zeros(grid, FieldUnit::Energy);
        assert_eq!(max_acceleration(&zero, m).value, 0.0);
    }

    #[test]
    fn adaptive_stack_reports_converged_images() {
        let grid = GridSpec::cubic([8, 8, 8], 49.0625e-9).unwrap();
        let rho = ScalarField3D::from_fn(grid, FieldUnit::Density, |r| {
            1e20 * (-(r[0] * r[0] + r[1] * r[1]) / 4e-14 - r[2] * r[2] / 4e-15).exp()
        });
        let mut st = StackSpec::truncated(392.5e-9, 64);
        st.convergence_tol = Some(0.05);
        let sol = induced_potential_with(&rho, &params(0.0), &st, &SolverOptions::default()).unwrap();
        assert!(sol.images >= 1 && sol.last_change <= 0.05);
        let m2 = induced_potential_with(&rho, &params(0.0), &StackSpec::truncated(392.5e-9, 2 * sol.images), &SolverOptions::default()).unwrap();
        let diff = (&m2.potential.values - &sol.potential.values).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff / m2.potential.max_abs() <= 0.05);

        st.mode = StackMode::Truncated { images: 1 };
        st.convergence_tol = Some(1e-15);
        assert!(matches!(
            induced_potential_with(&rho, &params(0.0), &st, &SolverOptions::default()),
            Err(Error::StackNotConverged { .. })
        ));
    }
}
