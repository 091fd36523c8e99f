//! Monte-Carlo recoil statistics against the compound-Poisson closed form.

use lightdd_core::kernel::polarization_vector;
use lightdd_core::light::FlashParams;
use lightdd_core::scattering::{
    compound_poisson_moments, pattern_density, sample_direction, simulate_photons, simulate_recoils, EmissionPattern,
    ScatterConfig,
};
use lightdd_core::units::rb87_defaults;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100_000;

fn check_against_closed_form(lambda: f64, prop: [f64; 3], pattern: EmissionPattern, seed: u64) {
    let cfg = ScatterConfig { emission_pattern: pattern, rng_seed: seed, samples: SAMPLES };
    let stats = simulate_photons(lambda, prop, &cfg, true).unwrap();
    let raw = stats.raw.as_ref().unwrap();
    let n = SAMPLES as f64;
    for (a, &(mean, var)) in compound_poisson_moments(lambda, prop, &pattern).iter().enumerate() {
        // Standard errors of the sample mean and sample variance.
        let se_mean = (var / n).sqrt();
        let m = stats.axes[a].mean;
        let m4 = raw.iter().map(|k| (k[a] - m).powi(4)).sum::<f64>() / n;
        let se_var = ((m4 - var * var) / n).sqrt();
        assert!((m - mean).abs() <= 3.0 * se_mean, "axis {a}: mean {m} vs {mean} (se {se_mean})");
        let s2 = stats.axes[a].sigma.powi(2);
        assert!((s2 - var).abs() <= 3.0 * se_var, "axis {a}: var {s2} vs {var} (se {se_var})");
    }
}

#[test]
fn isotropic_matches_compound_poisson() {
    check_against_closed_form(2.9, [0.0, 1.0, 0.0], EmissionPattern::Isotropic, 11);
}

#[test]
fn dipole_patterns_match_compound_poisson() {
    for (i, angle) in [0.0, 54.7356, 90.0].into_iter().enumerate() {
        let pattern = EmissionPattern::DipolePi { axis: polarization_vector(angle) };
        check_against_closed_form(2.9, [0.0, 1.0, 0.0], pattern, 100 + i as u64);
    }
    let pattern = EmissionPattern::DipolePi { axis: [0.0, 0.6, 0.8] };
    check_against_closed_form(7.0, [1.0, 0.0, 0.0], pattern, 7);
}

#[test]
fn emission_patterns_are_normalized() {
    // Midpoint rule on a fine (θ, φ) mesh.
    let (nt, np) = (400, 400);
    for pattern in [
        EmissionPattern::Isotropic,
        EmissionPattern::DipolePi { axis: [1.0, 0.0, 0.0] },
        EmissionPattern::DipolePi { axis: polarization_vector(33.0) },
    ] {
        let mut total = 0.0;
        for i in 0..nt {
            let th = (i as f64 + 0.5) * std::f64::consts::PI / nt as f64;
            for j in 0..np {
                let ph = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / np as f64;
                let u = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                total += pattern_density(&pattern, u) * th.sin();
            }
        }
        total *= std::f64::consts::PI / nt as f64 * 2.0 * std::f64::consts::PI / np as f64;
        assert!((total - 1.0).abs() <= 1e-3, "{pattern:?}: {total}");
    }
}

#[test]
fn sampled_directions_follow_the_pattern() {
    // ⟨u_a²⟩ = 2/5 off-axis and 1/5 along the dipole.
    let pattern = EmissionPattern::DipolePi { axis: [0.0, 0.0, 1.0] };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let mut m = [0.0; 3];
    for _ in 0..n {
        let u = sample_direction(&pattern, &mut rng);
        assert!(((u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() - 1.0).abs() < 1e-12);
        for a in 0..3 {
            m[a] += u[a] * u[a] / n as f64;
        }
    }
    // Var(u²) ≤ 1, so 3σ ≈ 3/√n.
    let tol = 3.0 / (n as f64).sqrt();
    assert!((m[0] - 0.4).abs() < tol && (m[1] - 0.4).abs() < tol && (m[2] - 0.2).abs() < tol, "{m:?}");
}

#[test]
fn identical_seeds_identical_outputs() {
    let sp = rb87_defaults();
    let flash = FlashParams::paper_defaults(&sp);
    let cfg = ScatterConfig { samples: 20_000, rng_seed: 42, ..Default::default() };
    let a = simulate_recoils(&flash, &sp, &cfg).unwrap();
    let b = simulate_recoils(&flash, &sp, &cfg).unwrap();
    assert_eq!(a, b);
    let c = simulate_recoils(&flash, &sp, &ScatterConfig { rng_seed: 43, ..cfg }).unwrap();
    assert_ne!(a.axes[0].sigma, c.axes[0].sigma);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = ScatterConfig { samples: 30_000, rng_seed: 5, ..Default::default() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_photons(2.9, [0.0, 1.0, 0.0], &cfg, true).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.raw, b.raw);
    assert_eq!(a.axes, b.axes);
}
