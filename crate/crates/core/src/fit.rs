//! One-parameter-nonlinear least squares by variable projection: the
//! amplitude is solved in closed form for each trial width, and the width is
//! found by a log-spaced scan followed by golden-section refinement.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeFit {
    pub amplitude: f64,
    /// σ for a Gaussian, the zero-crossing radius for a parabola.
    pub width: f64,
    /// √(Σ(y − model)² / Σy²)
    pub residual: f64,
}

/// Best amplitude and residual sum of squares for a fixed unit-amplitude shape.
fn project_amplitude(y: &[f64], shape: &[f64]) -> (f64, f64) {
    let (mut yg, mut gg) = (0.0, 0.0);
    for (&yi, &gi) in y.iter().zip(shape) {
        yg += yi * gi;
        gg += gi * gi;
    }
    if gg == 0.0 {
        return (0.0, y.iter().map(|v| v * v).sum());
    }
    let a = yg / gg;
    let sse = y.iter().zip(shape).map(|(&yi, &gi)| (yi - a * gi).powi(2)).sum();
    (a, sse)
}

fn fit_width(
    x: &[f64],
    y: &[f64],
    lo: f64,
    hi: f64,
    shape: impl Fn(f64, f64) -> f64,
    what: &str,
) -> Result<ShapeFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::DegenerateFit(format!("{what}: need at least 3 matching samples")));
    }
    let yy: f64 = y.iter().map(|v| v * v).sum();
    if !(yy > 0.0) || !yy.is_finite() {
        return Err(Error::DegenerateFit(format!("{what}: profile is zero or non-finite")));
    }
    let cost = |w: f64| {
        let g: Vec<f64> = x.iter().map(|&xi| shape(xi, w)).collect();
        project_amplitude(y, &g)
    };

    const SCAN: usize = 240;
    let (llo, lhi) = (lo.ln(), hi.ln());
    let at = |i: usize| (llo + (lhi - llo) * i as f64 / SCAN as f64).exp();
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=SCAN {
        let c = cost(at(i)).1;
        if c < best.1 {
            best = (i, c);
        }
    }
    if best.0 == 0 || best.0 == SCAN {
        return Err(Error::DegenerateFit(format!("{what}: best width at the search boundary")));
    }

    let (mut a, mut b) = (at(best.0 - 1).ln(), at(best.0 + 1).ln());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (cost(c.exp()).1, cost(d.exp()).1);
    while (b - a).abs() > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c.exp()).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = cost(d.exp()).1;
        }
    }
    let width = (0.5 * (a + b)).exp();
    let (amplitude, sse) = cost(width);
    Ok(ShapeFit { amplitude, width, residual: (sse / yy).sqrt() })
}

/// Fit A·exp(−x²/2σ²) with the center fixed at 0.
pub fn fit_centered_gaussian(x: &[f64], y: &[f64]) -> Result<ShapeFit> {
    let span = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let step = x.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min);
    if !(span > 0.0 && step > 0.0 && step.is_finite()) {
        return Err(Error::DegenerateFit("gaussian: degenerate abscissa".into()));
    }
    fit_width(
        x,
        y,
        step / 8.0,
        span * 8.0,
        |xi, s| (-xi * xi / (2.0 * s * s)).exp(),
        "gaussian",
    )
}

/// Fit a·max(0, 1 − ρ²/R²) to samples at radii `rho`.
pub fn fit_inverted_parabola(rho: &[f64], y: &[f64]) -> Result<ShapeFit> {
    let span = rho.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut sorted: Vec<f64> = rho.iter().map(|r| r.abs()).filter(|&r| r > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let step = sorted.first().copied().unwrap_or(0.0);
    if !(span > 0.0 && step > 0.0) {
        return Err(Error::DegenerateFit("parabola: degenerate abscissa".into()));
    }
    fit_width(
        rho,
        y,
        step / 2.0,
        span * 4.0,
        |r, big_r| (1.0 - r * r / (big_r * big_r)).max(0.0),
        "parabola",
    )
}
