//! Spherical harmonic analysis and needlet window design.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: Legendre polynomials, spherical harmonics, Wigner-3j symbols
//!   and Gaunt integrals.
//! * [`grid`]: iso-latitude Gauss–Legendre ring grids with exact quadrature.
//! * [`sht`]: forward/inverse spherical harmonic transforms on those grids.
//! * [`frames`]: spectral windows, needlet frames, duals and the needlet
//!   analysis/synthesis pipeline.
//! * [`slepian`]: spatial concentration of band-limited axisymmetric windows
//!   on polar caps.
//! * [`mise`]: Gaussian random fields, masks, pseudo-spectra and the
//!   mean-integrated-square-error window design under masks.
//! * [`linalg`]: dense symmetric eigendecomposition and linear solves.
//! * [`io`]: the CSV/JSON file formats exchanged by the command-line tool.

pub mod error;
pub mod frames;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mise;
pub mod sht;
pub mod slepian;
pub mod specfun;

pub use error::{Error, ErrorClass, Result};

pub(crate) const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}
