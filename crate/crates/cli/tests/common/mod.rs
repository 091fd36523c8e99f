#![allow(dead_code)]

use std::path::Path;

use lightdd::config::ExperimentConfig;

/// A coarse but complete configuration: small ground-state grid, two radii,
/// three angles.
pub const SMALL: &str = r#"
[trap]
atom_number = 60.0

[grid]
min_transverse_cells = 32

[ground_state]
radial_cells = 32
axial_cells = 12
radial_spacing_nm = 80.0
axial_spacing_nm = 20.0
dtau_ns = 20.0
tolerance_rel = 1e-8

[stack]
images = 256
convergence_tol_rel = 1e-2

[scatter]
samples = 5000

[sweep]
polarization_deg = [0.0, 45.0, 90.0]
tf_radius_um = [0.3, 0.5]
reference_tf_radius_um = 0.4
"#;

pub fn small_config(dir: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_toml(SMALL).unwrap();
    cfg.output.directory = dir.join("out");
    cfg.output.cache_directory = Some(dir.join("cache"));
    cfg.output.workers = Some(2);
    cfg
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every numeric cell of two CSV files agrees to `tol` (relative), and the
/// text cells are identical.
pub fn assert_csv_close(a: &Path, b: &Path, tol: f64) {
    let (ta, tb) = (read(a), read(b));
    let (la, lb): (Vec<&str>, Vec<&str>) = (ta.lines().collect(), tb.lines().collect());
    assert_eq!(la.len(), lb.len(), "{} rows differ", a.display());
    for (ra, rb) in la.iter().zip(&lb) {
        for (x, y) in ra.split(',').zip(rb.split(',')) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(x), Ok(y)) => {
                    let scale = x.abs().max(y.abs()).max(1e-300);
                    assert!((x - y).abs() / scale <= tol, "{}: {x} vs {y}", a.display());
                }
                _ => assert_eq!(x, y, "{}", a.display()),
            }
        }
    }
}
