//! Mechanical effect of light-induced dipole-dipole interactions on a
//! pancake-shaped Bose-Einstein condensate.
//!
//! The pipeline is: [`gpe`] ground state → [`light`] steady-state dipole →
//! [`potential`] FFT convolution of the retarded [`kernel`] with the density
//! → [`raman_nath`] phase imprint and momentum widths, compared against the
//! [`scattering`] background.

pub mod error;
pub mod fit;
pub mod gpe;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod light;
pub mod potential;
pub mod raman_nath;
pub mod scattering;
pub mod units;

pub use error::{Error, Result};
