//! Norm bookkeeping across the FFT, imprint and momentum stages.

use lightdd_core::gpe::Wavefunction;
use lightdd_core::grid::{fft3, Axis, ComplexField3D, Direction, FieldUnit, GridSpec, ScalarField3D};
use lightdd_core::raman_nath::{momentum_distribution, phase_imprint, projected_momentum};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_state(grid: GridSpec, seed: u64) -> Wavefunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = ComplexField3D::zeros(grid);
    f.values.mapv_inplace(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * 1e10);
    Wavefunction::from_field(f)
}

fn grid(nx: usize, ny: usize, nz: usize) -> GridSpec {
    GridSpec::centered([2 * nx + 2, 2 * ny + 2, 2 * nz + 2], [25e-9, 30e-9, 12e-9]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval(seed in any::<u64>(), nx in 1usize..6, ny in 1usize..6, nz in 1usize..5) {
        let psi = random_state(grid(nx, ny, nz), seed);
        let hat = fft3(&psi.field, Direction::Forward);
        let a: f64 = psi.field.values.iter().map(|c| c.norm_sqr()).sum();
        let b: f64 = hat.values.iter().map(|c| c.norm_sqr()).sum::<f64>() / psi.grid().len() as f64;
        prop_assert!((a - b).abs() / a <= 1e-9);
        let back = fft3(&hat, Direction::Inverse);
        let err = back.values.iter().zip(&psi.field.values).fold(0.0_f64, |m, (x, y)| m.max((x - y).norm()));
        let scale = psi.field.values.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        prop_assert!(err / scale <= 1e-12);
    }

    #[test]
    fn momentum_density_integrates_to_atom_number(seed in any::<u64>(), nx in 1usize..6, nz in 1usize..4) {
        let psi = random_state(grid(nx, nx + 1, nz), seed);
        let n = psi.norm();
        let spec = momentum_distribution(&psi, 8.05e6);
        prop_assert!((spec.total() - n).abs() / n <= 1e-9);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for padding in [1usize, 3] {
                let p = projected_momentum(&psi, axis, padding).unwrap();
                prop_assert!((p.integral() - n).abs() / n <= 1e-9, "{axis:?} padding {padding}");
            }
        }
    }

    #[test]
    fn imprint_preserves_norm_and_density(seed in any::<u64>(), v0 in -1e-25f64..1e-25, t in 0.0f64..1e-6) {
        let g = grid(3, 3, 2);
        let psi = random_state(g, seed);
        let v = ScalarField3D::from_fn(g, FieldUnit::Energy, |r| v0 * (r[0] * 1e7).sin() * (1.0 + r[2] * 1e7));
        let out = phase_imprint(&psi, &v, t).unwrap();
        prop_assert!((out.norm() - psi.norm()).abs() / psi.norm() <= 1e-12);
        for (a, b) in out.density().values.iter().zip(&psi.density().values) {
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300));
        }
    }
}

#[test]
fn padded_projection_matches_unpadded_on_shared_bins() {
    let psi = random_state(grid(4, 3, 2), 9);
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let p1 = projected_momentum(&psi, axis, 1).unwrap();
        let p3 = projected_momentum(&psi, axis, 3).unwrap();
        let scale = p1.values.iter().cloned().fold(0.0, f64::max);
        for (i, (&k, &v)) in p1.coords.iter().zip(&p1.values).enumerate() {
            let j = 3 * i + (p3.coords.len() / 2 - 3 * (p1.coords.len() / 2));
            assert!((p3.coords[j] - k).abs() < 1e-6 * p1.spacing());
            assert!((p3.values[j] - v).abs() <= 1e-10 * scale, "{axis:?} bin {i}");
        }
    }
}
