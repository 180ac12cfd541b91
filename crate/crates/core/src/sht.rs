//! Spherical harmonic transforms on ring grids, harmonic projection,
//! axisymmetric convolution and profile-to-spectrum conversion.
//!
//! Fields are real, so only `m >= 0` is stored and
//! `a_{l,-m} = (-1)^m conj(a_lm)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::{gauss_legendre_rule, RingGrid, SphereMap};
use crate::specfun::{fill_legendre, NormalizedLegendre};
use crate::{CompensatedSum, Error, Result};

/// Multipoles `a_lm`, `0 <= m <= l <= lmax`, packed by degree.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    lmax: usize,
    real: bool,
    data: Vec<Complex64>,
}

fn packed(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

impl HarmonicCoefficients {
    /// All-zero coefficients of a real field.
    pub fn zeros(lmax: usize) -> Self {
        HarmonicCoefficients {
            lmax,
            real: true,
            data: vec![Complex64::new(0.0, 0.0); packed(lmax + 1, 0)],
        }
    }

    /// Builds from packed data; `real` asserts that every `a_l0` is real.
    pub fn from_packed(lmax: usize, real: bool, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != packed(lmax + 1, 0) {
            return Err(Error::domain(format!(
                "expected {} coefficients for lmax = {lmax}, got {}",
                packed(lmax + 1, 0),
                data.len()
            )));
        }
        if real && (0..=lmax).any(|l| data[packed(l, 0)].im != 0.0) {
            return Err(Error::domain("real-field coefficients need real a_l0"));
        }
        Ok(HarmonicCoefficients { lmax, real, data })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn packed_data(&self) -> &[Complex64] {
        &self.data
    }

    /// `a_lm` for any `|m| <= l`, zero above `lmax`.
    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        let am = m.unsigned_abs() as usize;
        if l > self.lmax || am > l {
            return Complex64::new(0.0, 0.0);
        }
        let v = self.data[packed(l, am)];
        if m >= 0 {
            v
        } else if am % 2 == 0 {
            v.conj()
        } else {
            -v.conj()
        }
    }

    /// Sets `a_lm` for `m >= 0`; a complex `a_l0` clears the real flag.
    pub fn set(&mut self, l: usize, m: usize, v: Complex64) {
        assert!(m <= l && l <= self.lmax, "index ({l}, {m}) out of range");
        if m == 0 && v.im != 0.0 {
            self.real = false;
        }
        self.data[packed(l, m)] = v;
    }

    /// Coefficients of degree `l` for `m = 0..=l`.
    pub fn degree(&self, l: usize) -> &[Complex64] {
        &self.data[packed(l, 0)..=packed(l, l)]
    }

    fn degree_mut(&mut self, l: usize) -> &mut [Complex64] {
        &mut self.data[packed(l, 0)..=packed(l, l)]
    }

    /// `Σ_{l, |m| <= l} |a_lm|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.inner(self)
    }

    /// `Re Σ_{l, |m| <= l} a_lm conj(b_lm)` over the common degrees.
    pub fn inner(&self, other: &HarmonicCoefficients) -> f64 {
        let lmax = self.lmax.min(other.lmax);
        let mut s = CompensatedSum::default();
        for l in 0..=lmax {
            let (a, b) = (self.degree(l), other.degree(l));
            s.add((a[0] * b[0].conj()).re);
            for m in 1..=l {
                s.add(2.0 * (a[m] * b[m].conj()).re);
            }
        }
        s.value()
    }

    /// Coefficients truncated or zero-padded to a new `lmax`.
    pub fn resized(&self, lmax: usize) -> HarmonicCoefficients {
        let mut out = HarmonicCoefficients::zeros(lmax);
        out.real = self.real;
        let n = packed(lmax.min(self.lmax) + 1, 0);
        out.data[..n].copy_from_slice(&self.data[..n]);
        out
    }

    /// `max |a_lm - b_lm|` over `m >= 0`, treating missing degrees as zero.
    pub fn max_abs_diff(&self, other: &HarmonicCoefficients) -> f64 {
        let lmax = self.lmax.max(other.lmax);
        let mut worst = 0.0f64;
        for l in 0..=lmax {
            for m in 0..=l as i64 {
                worst = worst.max((self.get(l, m) - other.get(l, m)).norm());
            }
        }
        worst
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.data {
            *v *= c;
        }
    }

    /// `self += c * other`, over the degrees of `self`.
    pub fn add_scaled(&mut self, c: f64, other: &HarmonicCoefficients) {
        let lmax = self.lmax.min(other.lmax);
        let n = packed(lmax + 1, 0);
        for (a, b) in self.data[..n].iter_mut().zip(&other.data[..n]) {
            *a += c * b;
        }
        self.real &= other.real;
    }
}

fn plans(grid: &RingGrid, inverse: bool) -> HashMap<usize, Arc<dyn Fft<f64>>> {
    let mut planner = FftPlanner::new();
    let mut out = HashMap::new();
    for ring in grid.rings() {
        out.entry(ring.n_phi).or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(ring.n_phi)
            } else {
                planner.plan_fft_forward(ring.n_phi)
            }
        });
    }
    out
}

/// Forward transform `a_lm = Σ_k λ_k X(ξ_k) conj(Y_lm(ξ_k))` for `l <= lmax`.
pub fn analyze(map: &SphereMap, lmax: usize) -> Result<HarmonicCoefficients> {
    let grid = map.grid();
    if grid.exactness_degree() < 2 * lmax {
        return Err(Error::precondition(format!(
            "grid is exact to degree {}, analysis at lmax = {lmax} needs {}",
            grid.exactness_degree(),
            2 * lmax
        )));
    }
    let plans = plans(grid, false);
    let values = map.values();
    // per-ring azimuthal sums F_r(m) = Σ_j X_j e^{-i m φ_j}, weighted by λ
    let ring_sums: Vec<Vec<Complex64>> = grid
        .rings()
        .par_iter()
        .enumerate()
        .map(|(r, ring)| {
            let o = grid.ring_offset(r);
            let mut buf: Vec<Complex64> = values[o..o + ring.n_phi]
                .iter()
                .map(|v| Complex64::new(*v, 0.0))
                .collect();
            plans[&ring.n_phi].process(&mut buf);
            let w = ring.point_weight();
            (0..=lmax).map(|m| w * buf[m % ring.n_phi]).collect()
        })
        .collect();

    let leg = NormalizedLegendre::new(lmax);
    let per_m: Vec<Vec<Complex64>> = (0..=lmax)
        .into_par_iter()
        .map(|m| {
            let mut re = vec![CompensatedSum::default(); lmax - m + 1];
            let mut im = vec![CompensatedSum::default(); lmax - m + 1];
            let mut lam = vec![0.0; lmax - m + 1];
            for (ring, sums) in grid.rings().iter().zip(&ring_sums) {
                leg.fill(m, ring.cos_theta, ring.sin_theta, &mut lam);
                let f = sums[m];
                for i in 0..lam.len() {
                    re[i].add(f.re * lam[i]);
                    im[i].add(f.im * lam[i]);
                }
            }
            re.iter()
                .zip(&im)
                .map(|(r, i)| Complex64::new(r.value(), i.value()))
                .collect()
        })
        .collect();

    let mut out = HarmonicCoefficients::zeros(lmax);
    for (m, col) in per_m.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            let l = m + i;
            out.data[packed(l, m)] = if m == 0 { Complex64::new(v.re, 0.0) } else { v };
        }
    }
    Ok(out)
}

/// Inverse transform `X(ξ_k) = Σ_{l,m} a_lm Y_lm(ξ_k)`; the real part is
/// returned when some `a_l0` is complex.
pub fn synthesize(alm: &HarmonicCoefficients, grid: &Arc<RingGrid>) -> SphereMap {
    let lmax = alm.lmax;
    let plans = plans(grid, true);
    let leg = NormalizedLegendre::new(lmax);
    let rings: Vec<Vec<f64>> = grid
        .rings()
        .par_iter()
        .map(|ring| {
            let n = ring.n_phi;
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut lam = vec![0.0; lmax + 1];
            for m in 0..=lmax {
                let lam = &mut lam[..lmax - m + 1];
                leg.fill(m, ring.cos_theta, ring.sin_theta, lam);
                let mut re = CompensatedSum::default();
                let mut im = CompensatedSum::default();
                for (i, v) in lam.iter().enumerate() {
                    let a = alm.data[packed(m + i, m)];
                    re.add(a.re * v);
                    im.add(a.im * v);
                }
                let g = Complex64::new(re.value(), im.value());
                let c = if m == 0 { g } else { 2.0 * g };
                buf[m % n] += c;
            }
            plans[&n].process(&mut buf);
            buf.iter().map(|c| c.re).collect()
        })
        .collect();
    let values = rings.into_iter().flatten().collect();
    SphereMap::new(grid.clone(), values).expect("ring lengths match the grid")
}

/// Harmonic projection onto degree `l`.
pub fn project(alm: &HarmonicCoefficients, l: usize) -> HarmonicCoefficients {
    let mut out = HarmonicCoefficients::zeros(alm.lmax);
    out.real = alm.real;
    if l <= alm.lmax {
        out.degree_mut(l).copy_from_slice(alm.degree(l));
    }
    out
}

/// Axisymmetric convolution `a_lm -> h_l a_lm`, with `h[l]` indexed from
/// degree zero and zero past its end.
pub fn convolve_axisym(alm: &HarmonicCoefficients, h: &[f64]) -> HarmonicCoefficients {
    let mut out = alm.clone();
    for l in 0..=alm.lmax {
        let f = h.get(l).copied().unwrap_or(0.0);
        for v in out.degree_mut(l) {
            *v *= f;
        }
    }
    out
}

/// Spectral coefficients `b_l` of an axisymmetric profile
/// `ψ(θ) = Σ b_l L_l(cos θ)`, by Gauss–Legendre quadrature with
/// `2 lmax + 2` nodes.
pub fn axisym_to_spectral(profile: impl Fn(f64) -> f64, lmax: usize) -> Vec<f64> {
    axisym_to_spectral_with_nodes(profile, lmax, 2 * lmax + 2)
}

/// As [`axisym_to_spectral`] with an explicit node count (at least `lmax + 1`).
pub fn axisym_to_spectral_with_nodes(
    profile: impl Fn(f64) -> f64,
    lmax: usize,
    nodes: usize,
) -> Vec<f64> {
    let (z, w) = gauss_legendre_rule(nodes.max(lmax + 1)).expect("positive node count");
    let mut acc = vec![CompensatedSum::default(); lmax + 1];
    let mut p = vec![0.0; lmax + 1];
    for (zi, wi) in z.iter().zip(&w) {
        let f = wi * profile(zi.clamp(-1.0, 1.0).acos());
        fill_legendre(*zi, &mut p);
        for (a, pl) in acc.iter_mut().zip(&p) {
            a.add(f * pl);
        }
    }
    // 8π²/(2l+1) · (2l+1)/(4π) ∫ f P_l = 2π ∫ f P_l
    acc.iter().map(|a| 2.0 * PI * a.value()).collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::specfun::{legendre_kernel, spherical_harmonic};
    use crate::FOUR_PI;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_alm(lmax: usize, seed: u64) -> HarmonicCoefficients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = HarmonicCoefficients::zeros(lmax);
        for l in 0..=lmax {
            a.set(l, 0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
            for m in 1..=l {
                a.set(
                    l,
                    m,
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
        }
        a
    }

    #[test]
    fn constant_map() {
        let g = Arc::new(build_grid(8));
        let map = SphereMap::from_fn(g, |_, _| 2.5);
        let a = analyze(&map, 8).unwrap();
        assert!((a.get(0, 0).re - 2.5 * FOUR_PI.sqrt()).abs() < 1e-12);
        for l in 1..=8 {
            for m in 0..=l as i64 {
                assert!(a.get(l, m).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_basis_roundtrip() {
        let g = Arc::new(build_grid(6));
        let mut a = HarmonicCoefficients::zeros(6);
        a.set(3, 2, Complex64::new(1.0, 0.0));
        let back = analyze(&synthesize(&a, &g), 6).unwrap();
        assert!((back.get(3, 2) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let mut other = back.clone();
        other.set(3, 2, Complex64::new(0.0, 0.0));
        assert!(other.max_abs_diff(&HarmonicCoefficients::zeros(6)) < 1e-11);
    }

    #[test]
    fn synthesis_examples() {
        let g = Arc::new(build_grid(4));
        let zero = synthesize(&HarmonicCoefficients::zeros(4), &g);
        assert!(zero.values().iter().all(|v| *v == 0.0));
        let mut a = HarmonicCoefficients::zeros(4);
        a.set(0, 0, Complex64::new(FOUR_PI.sqrt(), 0.0));
        let one = synthesize(&a, &g);
        assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        let mut a = HarmonicCoefficients::zeros(4);
        a.set(1, 0, Complex64::new(1.0, 0.0));
        let map = synthesize(&a, &g);
        for k in 0..g.n_points() {
            let (t, _) = g.point(k);
            assert!((map.values()[k] - (3.0 / FOUR_PI).sqrt() * t.cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn synthesis_matches_pointwise_harmonics() {
        let g = Arc::new(build_grid(9));
        let a = random_alm(9, 4);
        let map = synthesize(&a, &g);
        for k in (0..g.n_points()).step_by(7) {
            let (t, p) = g.point(k);
            let mut s = Complex64::new(0.0, 0.0);
            for l in 0..=9usize {
                for m in -(l as i64)..=(l as i64) {
                    s += a.get(l, m) * spherical_harmonic(l, m, t, p).unwrap();
                }
            }
            assert!(s.im.abs() < 1e-12);
            assert!((s.re - map.values()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn roundtrip_and_parseval() {
        for &lmax in &[64usize, 128] {
            let g = Arc::new(build_grid(lmax));
            let a = random_alm(lmax, lmax as u64);
            let map = synthesize(&a, &g);
            let back = analyze(&map, lmax).unwrap();
            assert!(back.max_abs_diff(&a) < 1e-10, "lmax={lmax}");
            let energy = map.map(|v| v * v).integrate();
            assert!((energy - a.norm_sqr()).abs() < 1e-10 * a.norm_sqr());
            let again = synthesize(&back, &g);
            let err = map
                .values()
                .iter()
                .zip(again.values())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err < 1e-10);
        }
    }

    #[test]
    fn analysis_needs_exact_grid() {
        let g = Arc::new(build_grid(8));
        let map = SphereMap::zeros(g);
        assert!(matches!(analyze(&map, 9), Err(Error::Precondition(_))));
    }

    #[test]
    fn projection_properties() {
        let a = random_alm(10, 1);
        let p = project(&a, 4);
        assert_eq!(project(&p, 4), p);
        assert_eq!(project(&p, 5).norm_sqr(), 0.0);
        let mut sum = HarmonicCoefficients::zeros(10);
        for l in 0..=10 {
            sum.add_scaled(1.0, &project(&a, l));
        }
        assert!(sum.max_abs_diff(&a) == 0.0);
    }

    #[test]
    fn convolution_identities() {
        let a = random_alm(10, 2);
        assert_eq!(convolve_axisym(&a, &[1.0; 11]), a);
        let mut ind = vec![0.0; 11];
        ind[6] = 1.0;
        assert_eq!(convolve_axisym(&a, &ind), project(&a, 6));
        let h: Vec<f64> = (0..11).map(|l| 1.0 / (1.0 + l as f64)).collect();
        assert_eq!(
            convolve_axisym(&project(&a, 3), &h),
            project(&convolve_axisym(&a, &h), 3)
        );
    }

    #[test]
    fn convolution_matches_spatial_quadrature() {
        let lmax = 16;
        let g = Arc::new(build_grid(lmax));
        let a = random_alm(lmax, 9);
        let h: Vec<f64> = (0..=lmax).map(|l| (-(l as f64) / 5.0).exp()).collect();
        let x = synthesize(&a, &g);
        let conv = synthesize(&convolve_axisym(&a, &h), &g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = rng.random_range(0..g.n_points());
            let e = g.unit_vector(k);
            let s: f64 = (0..g.n_points())
                .map(|k2| {
                    let e2 = g.unit_vector(k2);
                    let t = (e[0] * e2[0] + e[1] * e2[1] + e[2] * e2[2]).clamp(-1.0, 1.0);
                    let kern: f64 = (0..=lmax)
                        .map(|l| h[l] * legendre_kernel(l, t).unwrap())
                        .sum();
                    g.weight(k2) * kern * x.values()[k2]
                })
                .sum();
            assert!((s - conv.values()[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_to_spectrum() {
        let b = axisym_to_spectral(|t| legendre_kernel(5, t.cos()).unwrap(), 12);
        for (l, v) in b.iter().enumerate() {
            let e = if l == 5 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-12, "l={l}: {v}");
        }
        let b = axisym_to_spectral(|_| 1.0, 6);
        assert!((b[0] - FOUR_PI).abs() < 1e-12);
        assert!(b[1..].iter().all(|v| v.abs() < 1e-12));
    }
}
