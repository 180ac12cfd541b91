use num_complex::Complex64;

use crate::{Error, Result, FOUR_PI};

fn check_argument(x: f64) -> Result<()> {
    if x.is_nan() || x.abs() > 1.0 {
        return Err(Error::domain(format!(
            "Legendre argument {x} outside [-1, 1]"
        )));
    }
    Ok(())
}

/// Values `P_0(x), ..., P_lmax(x)` by the three-term recurrence.
///
/// No domain check; callers guarantee `|x| <= 1`.
pub fn legendre_values(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    fill_legendre(x, &mut p);
    p
}

/// Fills `out[l] = P_l(x)` for `l < out.len()`.
pub(crate) fn fill_legendre(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for l in 2..out.len() {
        let lf = l as f64;
        out[l] = ((2.0 * lf - 1.0) * x * out[l - 1] - (lf - 1.0) * out[l - 2]) / lf;
    }
}

/// Legendre polynomial `P_l(x)` normalised by `P_l(1) = 1`.
pub fn legendre_p(l: usize, x: f64) -> Result<f64> {
    check_argument(x)?;
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return Ok(p0);
    }
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    Ok(p1)
}

/// Projection kernel `L_l(x) = (2l+1)/(4π) P_l(x)`.
pub fn legendre_kernel(l: usize, x: f64) -> Result<f64> {
    Ok((2 * l + 1) as f64 / FOUR_PI * legendre_p(l, x)?)
}

/// Evaluates `Σ_l coeffs[l] L_l(x)` for `l` starting at `lmin`, by Clenshaw summation
/// of the Legendre recurrence.
pub(crate) fn kernel_series(lmin: usize, coeffs: &[f64], x: f64) -> f64 {
    // Clenshaw on c_l = coeffs[l - lmin] (2l+1)/(4π) with P_l recurrence.
    let lmax = lmin + coeffs.len();
    if coeffs.is_empty() {
        return 0.0;
    }
    let c = |l: usize| -> f64 {
        if l < lmin || l >= lmax {
            0.0
        } else {
            coeffs[l - lmin] * (2 * l + 1) as f64 / FOUR_PI
        }
    };
    // P_{l+1} = alpha_l P_l + beta_l P_{l-1}, alpha_l = (2l+1)x/(l+1), beta_l = -l/(l+1)
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for l in (1..lmax).rev() {
        let lf = l as f64;
        let alpha = (2.0 * lf + 1.0) * x / (lf + 1.0);
        let beta_next = -(lf + 1.0) / (lf + 2.0);
        let b0 = c(l) + alpha * b1 + beta_next * b2;
        b2 = b1;
        b1 = b0;
    }
    // S = c_0 P_0 + b1 P_1 + beta_1 b2 P_0
    c(0) + b1 * x + (-0.5) * b2
}

/// Fully normalised associated Legendre functions.
///
/// `lambda_lm(x) = sqrt((2l+1)/(4π) (l-m)!/(l+m)!) P_lm(x)` with the
/// Condon–Shortley phase included in `P_lm`, so that
/// `Y_lm(θ, φ) = lambda_lm(cos θ) e^{imφ}`. Computed by the normalised
/// recurrence, which never forms factorial ratios.
#[derive(Debug, Clone)]
pub struct NormalizedLegendre {
    lmax: usize,
    // a_lm = sqrt((4l^2-1)/(l^2-m^2)), packed by m then l.
    a: Vec<f64>,
    offsets: Vec<usize>,
}

impl NormalizedLegendre {
    pub fn new(lmax: usize) -> Self {
        let mut a = Vec::with_capacity((lmax + 1) * (lmax + 2) / 2);
        let mut offsets = Vec::with_capacity(lmax + 1);
        for m in 0..=lmax {
            offsets.push(a.len());
            for l in m..=lmax {
                let lf = l as f64;
                let mf = m as f64;
                if l <= m {
                    a.push(0.0);
                } else {
                    a.push(((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt());
                }
            }
        }
        NormalizedLegendre { lmax, a, offsets }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Fills `out[l - m] = lambda_lm(cos θ)` for `l = m..=lmax`, given
    /// `z = cos θ` and `s = sin θ >= 0`.
    pub fn fill(&self, m: usize, z: f64, s: f64, out: &mut [f64]) {
        debug_assert!(m <= self.lmax);
        debug_assert!(out.len() > self.lmax - m);
        // lambda_mm
        let mut pmm = (1.0 / FOUR_PI).sqrt();
        for k in 1..=m {
            let kf = k as f64;
            pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
        }
        out[0] = pmm;
        if m == self.lmax {
            return;
        }
        let a = &self.a[self.offsets[m]..];
        out[1] = z * ((2 * m + 3) as f64).sqrt() * pmm;
        for l in (m + 2)..=self.lmax {
            let i = l - m;
            out[i] = a[i] * (z * out[i - 1] - out[i - 2] / a[i - 1]);
        }
    }

    /// Convenience wrapper returning a fresh vector.
    pub fn values(&self, m: usize, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.lmax - m + 1];
        self.fill(m, theta.cos(), theta.sin().abs(), &mut out);
        out
    }
}

/// Complex spherical harmonic `Y_lm(θ, φ)`.
pub fn spherical_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if am > l {
        return Err(Error::domain(format!("|m| = {am} exceeds l = {l}")));
    }
    let leg = NormalizedLegendre::new(l);
    let lam = leg.values(am, theta)[l - am];
    let y = Complex64::from_polar(lam, am as f64 * phi);
    if m >= 0 {
        Ok(y)
    } else if am % 2 == 0 {
        Ok(y.conj())
    } else {
        Ok(-y.conj())
    }
}
