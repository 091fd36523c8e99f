//! Matplotlib scripts that read only the figure CSVs.

use std::path::{Path, PathBuf};

use anyhow::bail;

use crate::output::{write_atomic, FIG2_LEFT, FIG2_RIGHT, FIG3};

const FIG2_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Potential cuts and maximum acceleration versus cloud radius."""
import csv
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def rows(name):
    with open(os.path.join(here, name), newline="") as f:
        return list(csv.DictReader(f))


cuts = defaultdict(lambda: ([], []))
for r in rows("fig2_left.csv"):
    if r["axis"] != "y":
        continue
    xs, vs = cuts[float(r["tf_radius_um"])]
    xs.append(float(r["coord_um"]))
    vs.append(float(r["potential_mhz"]))

right = rows("fig2_right.csv")
radius = [float(r["tf_radius_um"]) for r in right]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4.2))
for rho in sorted(cuts):
    xs, vs = cuts[rho]
    (line,) = ax1.plot(xs, vs, label=f"{rho:g}")
    ax1.axvline(rho, color=line.get_color(), lw=0.6, ls=":")
ax1.set_xlabel("y (um)")
ax1.set_ylabel("V / h (MHz)")
ax1.legend(title="TF radius (um)", fontsize=7)

ax2.semilogy(radius, [float(r["max_acceleration_m_s2"]) for r in right], "o-", label="max |grad V| / m")
ax2.semilogy(
    radius, [float(r["max_transverse_acceleration_m_s2"]) for r in right], "s--", label="in-plane, inside cloud"
)
ax2.axhline(float(right[0]["line_a_m_s2"]), color="k", lw=0.8, label="a) radiation pressure")
ax2.axhline(float(right[0]["line_b_m_s2"]), color="k", lw=0.8, ls="--", label="b) momentum diffusion")
ax2.set_xlabel("TF radius (um)")
ax2.set_ylabel("acceleration (m/s^2)")
ax2.legend(fontsize=7)

fig.tight_layout()
fig.savefig(os.path.join(here, "fig2.png"), dpi=150)
"#;

const FIG3_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Momentum widths versus polarization angle, one panel per projection."""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

with open(os.path.join(here, "fig3.csv"), newline="") as f:
    data = list(csv.DictReader(f))

fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), sharey=True)
for ax, axis in zip(axes, ["y", "x"]):
    sel = sorted((r for r in data if r["axis"] == axis), key=lambda r: float(r["angle_deg"]))
    phi = [float(r["angle_deg"]) for r in sel]
    ax.plot(phi, [float(r["sigma_coherent_recoil"]) for r in sel], "-.", label="coherent")
    ax.plot(phi, [float(r["sigma_incoherent_recoil"]) for r in sel], "-", label="incoherent")
    ax.plot(phi, [float(r["sigma_total_recoil"]) for r in sel], ":", label="total")
    ax.axvline(54.74, color="grey", lw=0.6)
    ax.set_title(f"projection onto {axis}")
    ax.set_xlabel("polarization angle (deg)")
axes[0].set_ylabel("sigma (recoils)")
axes[0].legend(fontsize=7)

fig.tight_layout()
fig.savefig(os.path.join(here, "fig3.png"), dpi=150)
"#;

/// Write `fig2.py` and/or `fig3.py` next to their CSVs. A figure is
/// emitted when all of its CSVs exist; with none available the first
/// missing file is reported.
pub fn emit_plot_scripts(out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let figures: [(&str, &[&str], &str); 2] =
        [("fig2.py", &[FIG2_LEFT, FIG2_RIGHT], FIG2_SCRIPT), ("fig3.py", &[FIG3], FIG3_SCRIPT)];
    let mut written = Vec::new();
    let mut missing = Vec::new();
    for (script, inputs, body) in figures {
        let absent: Vec<_> = inputs.iter().filter(|n| !out.join(n).exists()).collect();
        if absent.is_empty() {
            let path = out.join(script);
            write_atomic(&path, body.as_bytes())?;
            written.push(path);
        } else {
            missing.extend(absent.into_iter().map(|n| out.join(n)));
        }
    }
    if written.is_empty() {
        bail!("missing {}", missing[0].display());
    }
    for m in &missing {
        log::warn!("skipping a plot: missing {}", m.display());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn empty_dir_names_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_plot_scripts(dir.path()).unwrap_err().to_string();
        assert!(err.contains("fig2_left.csv"), "{err}");
    }

    #[test]
    fn fig3_only_and_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(FIG3), "angle_deg,axis\n").unwrap();
        let first = emit_plot_scripts(dir.path()).unwrap();
        assert_eq!(first, vec![dir.path().join("fig3.py")]);
        let a = fs::read(&first[0]).unwrap();
        let text = String::from_utf8(a.clone()).unwrap();
        assert!(text.contains("sigma_coherent_recoil") && text.contains("sigma_incoherent_recoil"));
        assert!(!text.contains("lightdd"));
        emit_plot_scripts(dir.path()).unwrap();
        assert_eq!(fs::read(&first[0]).unwrap(), a);
    }
}
