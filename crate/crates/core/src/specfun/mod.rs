//! Special functions: Legendre polynomials and kernels, normalised
//! associated Legendre functions, spherical harmonics, Wigner-3j symbols,
//! Gaunt integrals and Legendre product-coupling coefficients.
//!
//! Harmonics follow `Y_lm(θ,φ) = sqrt((2l+1)/4π (l-m)!/(l+m)!) P_lm(cos θ) e^{imφ}`
//! with the Condon–Shortley phase inside `P_lm`, and
//! `Y_{l,-m} = (-1)^m Y*_lm`. Gaunt integrals conjugate the third harmonic.

mod legendre;
mod wigner;

pub use legendre::{
    legendre_kernel, legendre_p, legendre_values, spherical_harmonic, NormalizedLegendre,
};
pub(crate) use legendre::{fill_legendre, kernel_series};
pub use wigner::{
    alpha_coupling, gaunt, ln_factorial, wigner3j, wigner3j_000, wigner3j_range, TripleIndex,
    RACAH_MAX_DEGREE,
};
pub(crate) use wigner::gaunt_zonal_range;
