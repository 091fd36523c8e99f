//! Uniform rectangular lattices, real and complex fields on them, and the
//! spectral machinery (3D FFT, projections, integrals, resampling).
//!
//! Storage is row-major with z fastest: index (i, j, k) maps to x, y, z.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::{Array3, ArrayViewMut2, Axis as NdAxis, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis '{other}'"))),
        }
    }
}

/// How the convolution treats an axis: zero-padded (aperiodic) or wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Padded,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Points per axis.
    pub n: [usize; 3],
    /// Lattice spacing per axis in m.
    pub spacing: [f64; 3],
    /// Coordinate of index (0, 0, 0).
    pub origin: [f64; 3],
    pub boundary: [Boundary; 3],
}

/// Lattice wavelength of the 1D optical lattice holding the pancakes.
pub const LATTICE_WAVELENGTH: f64 = 785e-9;

impl GridSpec {
    pub fn new(n: [usize; 3], spacing: [f64; 3], origin: [f64; 3], boundary: [Boundary; 3]) -> Result<Self> {
        let g = Self { n, spacing, origin, boundary };
        g.validate()?;
        Ok(g)
    }

    /// Grid with the point r = 0 at index (nx/2, ny/2, nz/2).
    pub fn centered(n: [usize; 3], spacing: [f64; 3]) -> Result<Self> {
        let origin = [0, 1, 2].map(|a| -((n[a] / 2) as f64) * spacing[a]);
        Self::new(n, spacing, origin, [Boundary::Padded; 3])
    }

    pub fn cubic(n: [usize; 3], spacing: f64) -> Result<Self> {
        Self::centered(n, [spacing; 3])
    }

    /// 64 × 64 × 128 points at λ_lattice/32.
    pub fn lattice_default() -> Self {
        Self::cubic([64, 64, 128], LATTICE_WAVELENGTH / 32.0).expect("static grid is valid")
    }

    pub fn with_boundary(mut self, boundary: [Boundary; 3]) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..3 {
            let n = self.n[a];
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {n} points; need an even count of at least 4"
                )));
            }
            if !(self.spacing[a].is_finite() && self.spacing[a] > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {a} spacing must be positive")));
            }
            if !self.origin[a].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {a} origin is not finite")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n[0], self.n[1], self.n[2])
    }

    pub fn is_cubic(&self) -> bool {
        let h = self.spacing[0];
        self.spacing.iter().all(|&s| ((s - h) / h).abs() < 1e-12)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.n[a] as f64 * self.spacing[a])
    }

    pub fn coord(&self, axis: Axis, i: usize) -> f64 {
        let a = axis.index();
        self.origin[a] + self.spacing[a] * i as f64
    }

    pub fn coords(&self, axis: Axis) -> Vec<f64> {
        (0..self.n[axis.index()]).map(|i| self.coord(axis, i)).collect()
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.spacing[0] * i as f64,
            self.origin[1] + self.spacing[1] * j as f64,
            self.origin[2] + self.spacing[2] * k as f64,
        ]
    }

    pub fn center_index(&self) -> [usize; 3] {
        self.n.map(|n| n / 2)
    }

    /// Wavenumber of DFT bin `m` along `axis`, 2π m̃ / L with m̃ the signed alias.
    pub fn wavenumber(&self, axis: Axis, m: usize) -> f64 {
        let a = axis.index();
        2.0 * PI * signed_alias(m, self.n[a]) as f64 / (self.n[a] as f64 * self.spacing[a])
    }

    pub fn wavenumbers(&self, axis: Axis) -> Vec<f64> {
        (0..self.n[axis.index()]).map(|m| self.wavenumber(axis, m)).collect()
    }

    /// Centered grid of the momentum-space counterpart, ordered from -n/2 to
    /// n/2 - 1 (the layout produced by [`fftshift`]).
    pub fn spectral(&self) -> GridSpec {
        let dk = [0, 1, 2].map(|a| 2.0 * PI / (self.n[a] as f64 * self.spacing[a]));
        GridSpec::centered(self.n, dk).expect("spectral grid of a valid grid is valid")
    }

    /// True when both grids describe the same lattice points.
    pub fn same_points(&self, other: &GridSpec) -> bool {
        let close = |a: f64, b: f64, scale: f64| (a - b).abs() <= 1e-9 * scale;
        self.n == other.n
            && (0..3).all(|a| {
                close(self.spacing[a], other.spacing[a], self.spacing[a])
                    && close(self.origin[a], other.origin[a], self.spacing[a])
            })
    }

    pub fn ensure_same(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_points(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {:?}/{:?} vs {:?}/{:?}",
                self.n, self.spacing, other.n, other.spacing
            )))
        }
    }
}

/// Signed DFT index: m for m < n/2, m - n otherwise.
pub fn signed_alias(m: usize, n: usize) -> isize {
    if m < n / 2 {
        m as isize
    } else {
        m as isize - n as isize
    }
}

/// Smallest even integer ≥ `n` whose prime factors are all in {2, 3, 5, 7}.
pub fn fft_friendly_even(n: usize) -> usize {
    let mut m = n.max(4);
    if m % 2 == 1 {
        m += 1;
    }
    loop {
        let mut r = m;
        for p in [2, 3, 5, 7] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldUnit {
    /// m⁻³
    Density,
    /// J
    Energy,
    /// m⁻³ per atom, used for tabulated kernels and the like.
    Dimensionless,
    /// (rad/m)⁻³, momentum-space density.
    MomentumDensity,
}

impl FieldUnit {
    pub fn tag(self) -> &'static str {
        match self {
            FieldUnit::Density => "density_m-3",
            FieldUnit::Energy => "energy_J",
            FieldUnit::Dimensionless => "dimensionless",
            FieldUnit::MomentumDensity => "momentum_density_m3",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            FieldUnit::Density,
            FieldUnit::Energy,
            FieldUnit::Dimensionless,
            FieldUnit::MomentumDensity,
        ]
        .into_iter()
        .find(|u| u.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3D {
    pub grid: GridSpec,
    pub values: Array3<f64>,
    pub unit: FieldUnit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField3D {
    pub grid: GridSpec,
    pub values: Array3<Complex64>,
}

impl ScalarField3D {
    pub fn zeros(grid: GridSpec, unit: FieldUnit) -> Self {
        Self { values: Array3::zeros(grid.shape()), grid, unit }
    }

    pub fn from_fn(grid: GridSpec, unit: FieldUnit, f: impl Fn([f64; 3]) -> f64 + Sync) -> Self {
        let values = Array3::from_shape_fn(grid.shape(), |(i, j, k)| f(grid.position(i, j, k)));
        Self { grid, values, unit }
    }

    pub fn new(grid: GridSpec, values: Array3<f64>, unit: FieldUnit) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "array shape {:?} does not match grid {:?}",
                values.dim(),
                grid.n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("field contains non-finite values".into()));
        }
        Ok(Self { grid, values, unit })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn at(&self, idx: [usize; 3]) -> f64 {
        self.values[idx]
    }

    /// Trilinear interpolation; zero outside the grid.
    pub fn sample(&self, r: [f64; 3]) -> f64 {
        trilinear(&self.grid, &self.values, r, 0.0)
    }
}

impl ComplexField3D {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { values: Array3::zeros(grid.shape()), grid }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = Array3::from_shape_fn(grid.shape(), |(i, j, k)| f(grid.position(i, j, k)));
        Self { grid, values }
    }

    pub fn new(grid: GridSpec, values: Array3<Complex64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!(
                "array shape {:?} does not match grid {:?}",
                values.dim(),
                grid.n
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParameter("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn norm_sqr(&self) -> ScalarField3D {
        ScalarField3D {
            grid: self.grid,
            values: self.values.mapv(|c| c.norm_sqr()),
            unit: FieldUnit::Density,
        }
    }

    pub fn sample(&self, r: [f64; 3]) -> Complex64 {
        trilinear(&self.grid, &self.values, r, Complex64::new(0.0, 0.0))
    }
}

fn trilinear<T>(grid: &GridSpec, values: &Array3<T>, r: [f64; 3], zero: T) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let mut base = [0usize; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let u = (r[a] - grid.origin[a]) / grid.spacing[a];
        if !(u >= 0.0 && u <= (grid.n[a] - 1) as f64) {
            return zero;
        }
        let i = (u.floor() as usize).min(grid.n[a] - 2);
        base[a] = i;
        frac[a] = u - i as f64;
    }
    let mut acc = zero;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = base;
        for a in 0..3 {
            if corner >> a & 1 == 1 {
                idx[a] += 1;
                w *= frac[a];
            } else {
                w *= 1.0 - frac[a];
            }
        }
        if w != 0.0 {
            acc = acc + values[idx] * w;
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

fn plan(n: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let cell = PLANS.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cell.lock().expect("fft planner poisoned");
    let forward = dir == Direction::Forward;
    if let Some(p) = guard.1.get(&(n, forward)) {
        return Arc::clone(p);
    }
    let p = guard.0.plan_fft(
        n,
        if forward { FftDirection::Forward } else { FftDirection::Inverse },
    );
    guard.1.insert((n, forward), Arc::clone(&p));
    p
}

/// Transform along axis 0 of a 2D view by transposing into a contiguous
/// buffer, batching the 1D transforms, and scattering back.
fn fft_columns(mut view: ArrayViewMut2<Complex64>, fft: &Arc<dyn Fft<f64>>) {
    let (n, m) = view.dim();
    let mut buf = vec![Complex64::new(0.0, 0.0); n * m];
    for ((i, j), v) in view.indexed_iter() {
        buf[j * n + i] = *v;
    }
    fft.process(&mut buf);
    for ((i, j), v) in view.indexed_iter_mut() {
        *v = buf[j * n + i];
    }
}

/// In-place 3D DFT. The forward transform is unnormalized; the inverse
/// divides by the number of points so that inverse(forward(f)) = f.
pub fn fft3_inplace(data: &mut Array3<Complex64>, dir: Direction) {
    let (n0, n1, n2) = data.dim();
    if !data.is_standard_layout() {
        *data = data.as_standard_layout().into_owned();
    }

    let p2 = plan(n2, dir);
    let slice = data.as_slice_mut().expect("standard layout");
    slice.par_chunks_mut(n2 * n1).for_each(|chunk| p2.process(chunk));

    let p1 = plan(n1, dir);
    data.axis_iter_mut(NdAxis(0))
        .into_par_iter()
        .for_each(|slab| fft_columns(slab, &p1));

    let p0 = plan(n0, dir);
    data.axis_iter_mut(NdAxis(1))
        .into_par_iter()
        .for_each(|slab| fft_columns(slab, &p0));

    if dir == Direction::Inverse {
        let scale = 1.0 / (n0 * n1 * n2) as f64;
        data.par_mapv_inplace(|c| c * scale);
    }
}

/// 1D DFT of every lane along `axis`.
pub fn fft_axis_inplace(data: &mut Array3<Complex64>, axis: Axis, dir: Direction) {
    let n = data.len_of(NdAxis(axis.index()));
    let p = plan(n, dir);
    match axis {
        Axis::Z => {
            if !data.is_standard_layout() {
                *data = data.as_standard_layout().into_owned();
            }
            let nn = data.len_of(NdAxis(1)) * n;
            data.as_slice_mut()
                .expect("standard layout")
                .par_chunks_mut(nn)
                .for_each(|c| p.process(c));
        }
        Axis::Y => data
            .axis_iter_mut(NdAxis(0))
            .into_par_iter()
            .for_each(|slab| fft_columns(slab, &p)),
        Axis::X => data
            .axis_iter_mut(NdAxis(1))
            .into_par_iter()
            .for_each(|slab| fft_columns(slab, &p)),
    }
    if dir == Direction::Inverse {
        let scale = 1.0 / n as f64;
        data.par_mapv_inplace(|c| c * scale);
    }
}

pub fn fft3(field: &ComplexField3D, dir: Direction) -> ComplexField3D {
    let mut out = field.clone();
    fft3_inplace(&mut out.values, dir);
    out
}

/// Move the zero-frequency bin to index n/2 on every axis.
pub fn fftshift<T: Copy>(a: &Array3<T>) -> Array3<T> {
    let (n0, n1, n2) = a.dim();
    Array3::from_shape_fn((n0, n1, n2), |(i, j, k)| {
        a[((i + n0 - n0 / 2) % n0, (j + n1 - n1 / 2) % n1, (k + n2 - n2 / 2) % n2)]
    })
}

/// Inverse of [`fftshift`]: index n/2 goes to 0.
pub fn ifftshift<T: Copy>(a: &Array3<T>) -> Array3<T> {
    let (n0, n1, n2) = a.dim();
    Array3::from_shape_fn((n0, n1, n2), |(i, j, k)| {
        a[((i + n0 / 2) % n0, (j + n1 / 2) % n1, (k + n2 / 2) % n2)]
    })
}

/// A 1D profile along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile1D {
    pub axis: Axis,
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
}

impl Profile1D {
    pub fn spacing(&self) -> f64 {
        if self.coords.len() > 1 {
            self.coords[1] - self.coords[0]
        } else {
            1.0
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }
}

/// Integrate the field over the two axes orthogonal to `axis`.
pub fn project(field: &ScalarField3D, axis: Axis) -> Profile1D {
    let a = axis.index();
    let others: f64 = (0..3).filter(|&b| b != a).map(|b| field.grid.spacing[b]).product();
    let values = field
        .values
        .axis_iter(NdAxis(a))
        .map(|plane| plane.sum() * others)
        .collect();
    Profile1D { axis, coords: field.grid.coords(axis), values }
}

/// Riemann sum of the field times the cell volume.
pub fn integrate(field: &ScalarField3D) -> f64 {
    field.values.sum() * field.grid.cell_volume()
}

/// Profile through the central indices of the two other axes.
pub fn axis_cut(field: &ScalarField3D, axis: Axis) -> Profile1D {
    let c = field.grid.center_index();
    let a = axis.index();
    let values = (0..field.grid.n[a])
        .map(|i| {
            let mut idx = c;
            idx[a] = i;
            field.values[idx]
        })
        .collect();
    Profile1D { axis, coords: field.grid.coords(axis), values }
}

/// Resample `values` defined on `src` onto `dst` by trilinear interpolation,
/// evaluating the source at `map(r)` for each destination point r.
pub fn resample_complex(
    src: &ComplexField3D,
    dst: GridSpec,
    map: impl Fn([f64; 3]) -> [f64; 3] + Sync,
) -> ComplexField3D {
    let mut values = Array3::zeros(dst.shape());
    Zip::indexed(&mut values).par_for_each(|(i, j, k), v| {
        *v = src.sample(map(dst.position(i, j, k)));
    });
    ComplexField3D { grid: dst, values }
}
