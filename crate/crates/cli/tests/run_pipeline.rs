mod common;

use lightdd::config::ExperimentConfig;
use lightdd::output::{read_csv, BackgroundRow, CutRow, RadiusRow, WidthRow, BACKGROUND, FIG2_LEFT, FIG2_RIGHT, FIG3, MANIFEST, RAMAN_NATH};
use lightdd::pipeline::line_a;
use lightdd::{plot, run};

use common::{assert_csv_close, small_config};

#[test]
fn writes_every_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let summary = run(&cfg).unwrap();
    let out = &cfg.output.directory;

    let cuts: Vec<CutRow> = read_csv(&out.join(FIG2_LEFT)).unwrap();
    assert!(cuts.iter().any(|c| c.axis == "x") && cuts.iter().any(|c| c.axis == "y"));
    assert!(cuts.iter().all(|c| c.potential_mhz.is_finite()));

    let radii: Vec<RadiusRow> = read_csv(&out.join(FIG2_RIGHT)).unwrap();
    assert_eq!(radii.iter().map(|r| r.tf_radius_um).collect::<Vec<_>>(), cfg.sweep.tf_radius_um);
    for r in &radii {
        assert!(r.line_a_m_s2 > 0.0 && r.line_b_m_s2 > 0.0);
        assert!((r.line_a_m_s2 - line_a(&cfg.species())).abs() < 1e-9 * r.line_a_m_s2);
        assert!(r.max_transverse_acceleration_m_s2 <= r.max_acceleration_m_s2);
        assert_eq!(r.central_depth_mhz, r.central_potential_mhz.abs());
    }
    // Constant peak density: the atom number grows with the area.
    let ratio = radii[1].atoms / radii[0].atoms;
    let area = (0.5f64 / 0.3).powi(2);
    assert!((ratio / area - 1.0).abs() < 0.1, "{ratio} vs {area}");

    let widths: Vec<WidthRow> = read_csv(&out.join(FIG3)).unwrap();
    assert_eq!(widths.len(), 2 * cfg.sweep.polarization_deg.len());
    for w in &widths {
        let total = w.sigma_coherent_recoil.hypot(w.sigma_incoherent_recoil);
        assert!((w.sigma_total_recoil - total).abs() < 1e-12 * total);
    }
    let background: Vec<BackgroundRow> = read_csv(&out.join(BACKGROUND)).unwrap();
    assert_eq!(background.len(), 3 * cfg.sweep.polarization_deg.len());
    for b in background.iter().filter(|b| b.axis == "y") {
        // Mean push along the beam equals the mean photon number.
        assert!((b.mean_recoil - summary.photons_per_atom).abs() < 0.1);
    }
    assert!(out.join(RAMAN_NATH).exists());
    assert!((summary.photons_per_atom - 2.9).abs() < 0.1);
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    run(&cfg).unwrap();

    let mut again = ExperimentConfig::load(&cfg.output.directory.join(MANIFEST)).unwrap();
    assert!(again.provenance.is_some());
    again.output.directory = tmp.path().join("again");
    again.output.workers = Some(1);
    run(&again).unwrap();
    for name in [FIG2_LEFT, FIG2_RIGHT, FIG3, BACKGROUND, RAMAN_NATH] {
        assert_csv_close(&cfg.output.directory.join(name), &again.output.directory.join(name), 1e-12);
    }
}

#[test]
fn seed_controls_the_background() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    cfg.sweep.polarization_deg = vec![30.0];
    cfg.sweep.tf_radius_um = vec![0.3];
    run(&cfg).unwrap();
    let first: Vec<BackgroundRow> = read_csv(&cfg.output.directory.join(BACKGROUND)).unwrap();

    cfg.scatter.seed += 1;
    cfg.output.directory = tmp.path().join("other-seed");
    run(&cfg).unwrap();
    let second: Vec<BackgroundRow> = read_csv(&cfg.output.directory.join(BACKGROUND)).unwrap();
    assert_ne!(first, second);
    assert!(second.iter().all(|r| r.seed == cfg.scatter.seed));
}

#[test]
fn zero_intensity_leaves_the_cloud_unbroadened() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    cfg.flash.intensity_isat = 0.0;
    cfg.sweep.tf_radius_um = vec![0.3];
    let summary = run(&cfg).unwrap();
    assert_eq!(summary.dipole_c_m, 0.0);
    assert_eq!(summary.photons_per_atom, 0.0);

    let widths: Vec<WidthRow> = read_csv(&cfg.output.directory.join(FIG3)).unwrap();
    for w in &widths {
        let bare = summary.unflashed_widths.iter().find(|u| u.axis.name() == w.axis).unwrap();
        assert!((w.sigma_coherent_recoil - bare.sigma).abs() <= 1e-12 * bare.sigma, "{w:?}");
        assert_eq!(w.sigma_incoherent_recoil, 0.0);
    }
    let radii: Vec<RadiusRow> = read_csv(&cfg.output.directory.join(FIG2_RIGHT)).unwrap();
    assert!(radii.iter().all(|r| r.central_potential_mhz == 0.0 && r.max_acceleration_m_s2 == 0.0));
}

#[test]
fn plot_scripts_follow_the_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    run(&cfg).unwrap();
    let scripts = plot::emit_plot_scripts(&cfg.output.directory).unwrap();
    assert_eq!(scripts.len(), 2);
    for s in &scripts {
        let text = common::read(s);
        assert!(text.contains(".csv"));
        assert!(!text.contains(".json"), "plots read only the CSV tables");
    }
}
