//! Gaussian isotropic fields, weight functions (masks), pseudo-spectra and
//! the coupling matrix, normalized mask errors and the mean integrated
//! square error (MISE) window design.
//!
//! Weight functions are band-limited: a mask is represented by its
//! multipoles up to a chosen degree, and every computation (analytic or
//! Monte-Carlo) uses that same band-limited function.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erf;

use crate::frames::SpectralWindow;
use crate::grid::{build_grid, gauss_legendre_rule, RingGrid, SphereMap};
use crate::linalg::{eig_symmetric, solve, SymmetricMatrix};
use crate::sht::{analyze, convolve_axisym, project, synthesize, HarmonicCoefficients};
use crate::specfun::{fill_legendre, gaunt_zonal_range, wigner3j_range};
use crate::{CompensatedSum, Error, Result, FOUR_PI};

/// Angular power spectrum `C_l`, `0 <= l <= lmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("power spectrum needs at least C_0"));
        }
        if let Some(l) = values.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::domain(format!(
                "C_{l} = {} is not a finite nonnegative value",
                values[l]
            )));
        }
        Ok(PowerSpectrum { values })
    }

    pub fn zeros(lmax: usize) -> Self {
        PowerSpectrum {
            values: vec![0.0; lmax + 1],
        }
    }

    pub fn from_fn(lmax: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        PowerSpectrum::new((0..=lmax).map(f).collect())
    }

    pub fn lmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `C_l`, zero above `lmax`.
    pub fn get(&self, l: usize) -> f64 {
        self.values.get(l).copied().unwrap_or(0.0)
    }

    /// `σ_l² = (2l+1) C_l`.
    pub fn sigma2(&self, l: usize) -> f64 {
        (2 * l + 1) as f64 * self.get(l)
    }

    /// Pointwise variance `(4π)⁻¹ Σ (2l+1) C_l` of the field.
    pub fn field_variance(&self) -> f64 {
        (0..=self.lmax()).map(|l| self.sigma2(l)).sum::<f64>() / FOUR_PI
    }
}

/// Zone `theta_start <= θ <= theta_end` (radians) where a zonal weight
/// takes `value`. Outside every zone the weight is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSegment {
    pub theta_start: f64,
    pub theta_end: f64,
    pub value: f64,
}

#[derive(Debug, Clone)]
enum Source {
    Constant(f64),
    Zonal { segments: Vec<ZoneSegment>, apod: f64 },
    Map,
    Complement,
}

/// Weight function `W` on the sphere, held as band-limited multipoles.
#[derive(Debug, Clone)]
pub struct WeightFunction {
    source: Source,
    multipoles: HarmonicCoefficients,
    axisymmetric: bool,
}

/// Default cosine-arch apodization width, 2 degrees.
pub const DEFAULT_APODIZATION: f64 = 2.0 * PI / 180.0;

/// Cosine-arch step: 0 below `-1/2`, 1 above `1/2`.
fn arch_step(x: f64) -> f64 {
    if x <= -0.5 {
        0.0
    } else if x >= 0.5 {
        1.0
    } else {
        0.5 * (1.0 - (PI * (x + 0.5)).cos())
    }
}

/// Apodized zonal profile: each nominal edge is replaced by a cosine arch
/// of total width `apod` centred on it. Edges at the poles stay sharp.
pub fn apodized_profile(segments: &[ZoneSegment], apod: f64, theta: f64) -> f64 {
    let step = |edge: f64| -> f64 {
        if edge <= 0.0 {
            1.0
        } else if edge >= PI {
            0.0
        } else if apod > 0.0 {
            arch_step((theta - edge) / apod)
        } else if theta >= edge {
            1.0
        } else {
            0.0
        }
    };
    let mut v = 1.0;
    for s in segments {
        v += (s.value - 1.0) * (step(s.theta_start) - step(s.theta_end));
    }
    v
}

fn validate_segments(segments: &[ZoneSegment], apod: f64) -> Result<()> {
    if !(apod.is_finite() && apod >= 0.0) {
        return Err(Error::domain("apodization width must be finite and nonnegative"));
    }
    let mut prev_end = f64::NEG_INFINITY;
    for s in segments {
        let ok = s.theta_start.is_finite()
            && s.theta_end.is_finite()
            && 0.0 <= s.theta_start
            && s.theta_start < s.theta_end
            && s.theta_end <= PI;
        if !ok {
            return Err(Error::domain(format!(
                "zone [{}, {}] is not a sub-interval of [0, π]",
                s.theta_start, s.theta_end
            )));
        }
        if !(0.0..=1.0).contains(&s.value) {
            return Err(Error::domain(format!("zone value {} outside [0, 1]", s.value)));
        }
        if s.theta_start < prev_end {
            return Err(Error::domain("zones must be sorted and disjoint"));
        }
        prev_end = s.theta_end;
    }
    Ok(())
}

/// `w_l0 = 2π ∫ W(θ) Y_l0(θ) sin θ dθ` by composite Gauss–Legendre panels
/// split at the kinks of the profile.
fn zonal_multipoles(profile: impl Fn(f64) -> f64, breaks: &[f64], lmax: usize) -> Vec<f64> {
    const NODES: usize = 20;
    let (x, w) = gauss_legendre_rule(NODES).expect("fixed node count");
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|t| *t > 0.0 && *t < PI).collect();
    pts.push(0.0);
    pts.push(PI);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let max_width = 2.0 * PI / (lmax + 1) as f64;
    let mut acc = vec![CompensatedSum::default(); lmax + 1];
    let mut p = vec![0.0; lmax + 1];
    for pair in pts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let lo = a + k as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                let t = lo + 0.5 * h * (xi + 1.0);
                let f = 0.5 * h * wi * t.sin() * profile(t);
                fill_legendre(t.cos(), &mut p);
                for (s, pl) in acc.iter_mut().zip(&p) {
                    s.add(f * pl);
                }
            }
        }
    }
    acc.iter()
        .enumerate()
        .map(|(l, s)| 2.0 * PI * ((2 * l + 1) as f64 / FOUR_PI).sqrt() * s.value())
        .collect()
}

impl WeightFunction {
    /// Constant weight `c`.
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::domain("constant weight must be finite"));
        }
        let mut alm = HarmonicCoefficients::zeros(0);
        alm.set(0, 0, Complex64::new(c * FOUR_PI.sqrt(), 0.0));
        Ok(WeightFunction {
            source: Source::Constant(c),
            multipoles: alm,
            axisymmetric: true,
        })
    }

    /// `W ≡ 1`.
    pub fn ones() -> Self {
        WeightFunction::constant(1.0).expect("finite")
    }

    /// Zonal mask with cosine-arch apodization of width `apod` (radians),
    /// band-limited to `lmax`.
    pub fn zonal(segments: Vec<ZoneSegment>, apod: f64, lmax: usize) -> Result<Self> {
        validate_segments(&segments, apod)?;
        let mut breaks = Vec::new();
        for s in &segments {
            for e in [s.theta_start, s.theta_end] {
                breaks.extend([e - 0.5 * apod, e, e + 0.5 * apod]);
            }
        }
        let w = if segments.iter().all(|s| s.value == 1.0) {
            let mut w = vec![0.0; lmax + 1];
            w[0] = FOUR_PI.sqrt();
            w
        } else {
            zonal_multipoles(|t| apodized_profile(&segments, apod, t), &breaks, lmax)
        };
        let mut alm = HarmonicCoefficients::zeros(lmax);
        for (l, v) in w.into_iter().enumerate() {
            alm.set(l, 0, Complex64::new(v, 0.0));
        }
        Ok(WeightFunction {
            source: Source::Zonal { segments, apod },
            multipoles: alm,
            axisymmetric: true,
        })
    }

    /// Weight sampled on a grid, band-limited to `lmax` by analysis.
    /// Values must lie in `[0, 1]`.
    pub fn from_map(map: &SphereMap, lmax: usize) -> Result<Self> {
        if let Some(v) = map.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("mask value {v} outside [0, 1]")));
        }
        let alm = analyze(map, lmax)?;
        let scale = alm.norm_sqr().sqrt();
        let axisymmetric = (1..=lmax)
            .all(|l| alm.degree(l)[1..].iter().all(|v| v.norm() <= 1e-12 * scale));
        Ok(WeightFunction {
            source: Source::Map,
            multipoles: alm,
            axisymmetric,
        })
    }

    pub fn multipoles(&self) -> &HarmonicCoefficients {
        &self.multipoles
    }

    pub fn lmax(&self) -> usize {
        self.multipoles.lmax()
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.axisymmetric
    }

    /// Zonal multipoles `w_l0`.
    pub fn zonal_coefficients(&self) -> Vec<f64> {
        (0..=self.lmax()).map(|l| self.multipoles.get(l, 0).re).collect()
    }

    /// The un-truncated profile, for zonal and constant weights.
    pub fn profile(&self, theta: f64) -> Option<f64> {
        match &self.source {
            Source::Constant(c) => Some(*c),
            Source::Zonal { segments, apod } => Some(apodized_profile(segments, *apod, theta)),
            _ => None,
        }
    }

    /// `1 - W`.
    pub fn complement(&self) -> WeightFunction {
        let mut alm = self.multipoles.clone();
        alm.scale(-1.0);
        let w00 = alm.get(0, 0);
        alm.set(0, 0, w00 + FOUR_PI.sqrt());
        WeightFunction {
            source: Source::Complement,
            multipoles: alm,
            axisymmetric: self.axisymmetric,
        }
    }

    /// `C^W_l = (2l+1)⁻¹ Σ_m |w_lm|²`.
    pub fn power_spectrum(&self) -> Vec<f64> {
        pseudo_spectrum(&self.multipoles).values
    }

    /// Values of the band-limited weight on a grid.
    pub fn to_map(&self, grid: &Arc<RingGrid>) -> SphereMap {
        synthesize(&self.multipoles, grid)
    }
}

/// Smallest minimal grid integrating products up to total degree `degree`.
fn product_grid(degree: usize) -> Arc<RingGrid> {
    Arc::new(build_grid(degree.div_ceil(2)))
}

/// Multiplies band-limited fields by a fixed weight and analyses the
/// product exactly up to `lmax_out`.
struct WeightedAnalysis {
    grid: Arc<RingGrid>,
    weight: Vec<f64>,
    lmax_out: usize,
}

impl WeightedAnalysis {
    fn new(weight: &WeightFunction, lmax_field: usize, lmax_out: usize) -> Self {
        let grid = product_grid(lmax_field + weight.lmax() + lmax_out);
        let weight = weight.to_map(&grid).into_values();
        WeightedAnalysis {
            grid,
            weight,
            lmax_out,
        }
    }

    fn apply(&self, alm: &HarmonicCoefficients) -> HarmonicCoefficients {
        let field = synthesize(alm, &self.grid);
        let values = field.values().iter().zip(&self.weight).map(|(x, w)| x * w).collect();
        let map = SphereMap::new(self.grid.clone(), values).expect("same grid");
        analyze(&map, self.lmax_out).expect("grid sized for the product")
    }
}

/// Realization `index` of the Gaussian isotropic field with spectrum `C`.
/// Each realization draws from its own stream of the seeded generator.
pub fn simulate_realization(spectrum: &PowerSpectrum, seed: u64, index: u64) -> HarmonicCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let lmax = spectrum.lmax();
    let mut alm = HarmonicCoefficients::zeros(lmax);
    for l in 0..=lmax {
        let c = spectrum.get(l);
        let z: f64 = rng.sample(StandardNormal);
        alm.set(l, 0, Complex64::new(c.sqrt() * z, 0.0));
        let s = (0.5 * c).sqrt();
        for m in 1..=l {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            alm.set(l, m, Complex64::new(s * re, s * im));
        }
    }
    alm
}

/// One realization of the field; same as realization 0 of the seed.
pub fn simulate_field(spectrum: &PowerSpectrum, seed: u64) -> HarmonicCoefficients {
    simulate_realization(spectrum, seed, 0)
}

/// `Ĉ_l = (2l+1)⁻¹ Σ_{|m| <= l} |a_lm|²`.
pub fn pseudo_spectrum(alm: &HarmonicCoefficients) -> PowerSpectrum {
    let values = (0..=alm.lmax())
        .map(|l| {
            let d = alm.degree(l);
            let s = d[0].norm_sqr() + 2.0 * d[1..].iter().map(|v| v.norm_sqr()).sum::<f64>();
            s / (2 * l + 1) as f64
        })
        .collect();
    PowerSpectrum { values }
}

/// Dense square matrix `M_{l l'}` acting on spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    data: Vec<f64>,
}

impl CouplingMatrix {
    pub fn lmax(&self) -> usize {
        self.n - 1
    }

    pub fn get(&self, l: usize, lp: usize) -> f64 {
        self.data[l * self.n + lp]
    }

    /// Row-major entries.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn apply(&self, c: &PowerSpectrum) -> Vec<f64> {
        (0..self.n)
            .map(|l| {
                self.data[l * self.n..(l + 1) * self.n]
                    .iter()
                    .enumerate()
                    .map(|(lp, m)| m * c.get(lp))
                    .collect::<CompensatedSum>()
                    .value()
            })
            .collect()
    }
}

/// Coupling matrix of the masked pseudo-spectrum:
/// `M_{l l'} = Σ_{l''} α_{l l' l''} (2l''+1)/(2l+1) C^W_{l''}` for
/// `l, l' <= lmax`. Mask multipoles past the weight's degree are zero.
pub fn coupling_matrix_master(mask: &WeightFunction, lmax: usize) -> CouplingMatrix {
    let cw = mask.power_spectrum();
    let n = lmax + 1;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|l| {
            (0..n)
                .map(|lp| {
                    let Some((lo, w)) = wigner3j_range(l as u32, lp as u32, 0, 0) else {
                        return 0.0;
                    };
                    let mut s = CompensatedSum::default();
                    for (i, wi) in w.iter().enumerate() {
                        let lpp = lo as usize + i;
                        if let Some(c) = cw.get(lpp) {
                            s.add((2 * lpp + 1) as f64 * wi * wi * c);
                        }
                    }
                    (2 * lp + 1) as f64 / FOUR_PI * s.value()
                })
                .collect()
        })
        .collect();
    CouplingMatrix {
        n,
        data: rows.into_iter().flatten().collect(),
    }
}

/// Solution of `M x = Ĉ` with the condition estimate of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub values: Vec<f64>,
    pub condition: f64,
}

/// Condition estimate above which the coupling matrix is not inverted.
pub const MAX_COUPLING_CONDITION: f64 = 1e12;

/// Unbiased spectrum estimate `M⁻¹ Ĉ` over the degrees of `M`.
pub fn unbiased_spectrum(pseudo: &PowerSpectrum, m: &CouplingMatrix) -> Result<SpectrumEstimate> {
    if pseudo.lmax() < m.lmax() {
        return Err(Error::domain(format!(
            "pseudo-spectrum stops at l = {}, coupling matrix needs {}",
            pseudo.lmax(),
            m.lmax()
        )));
    }
    let sol = solve(m.n, &m.data, &pseudo.values[..m.n])?;
    if sol.condition > MAX_COUPLING_CONDITION {
        return Err(Error::IllConditioned {
            condition: sol.condition,
        });
    }
    Ok(SpectrumEstimate {
        values: sol.x,
        condition: sol.condition,
    })
}

/// `(4π)⁻¹ Σ σ_l² b_l²`, the variance of the filtered field.
pub fn filtered_variance(spectrum: &PowerSpectrum, window: &SpectralWindow) -> f64 {
    (window.lmin()..=window.lmax())
        .map(|l| spectrum.sigma2(l) * window.get(l).powi(2))
        .sum::<f64>()
        / FOUR_PI
}

/// Normalized error field at the points of a grid.
#[derive(Debug, Clone)]
pub struct ErrorField {
    pub map: SphereMap,
    /// `E[ΦX(ξ)²]`.
    pub normalizer: f64,
}

fn normalizer(spectrum: &PowerSpectrum, window: &SpectralWindow) -> Result<f64> {
    let n = filtered_variance(spectrum, window);
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::domain("filtered field has zero variance under this spectrum"))
    }
}

fn check_window_grid(grid: &RingGrid, window: &SpectralWindow) -> Result<()> {
    if grid.exactness_degree() < 2 * window.lmax() {
        return Err(Error::precondition(format!(
            "grid is exact to degree {}, window needs {}",
            grid.exactness_degree(),
            2 * window.lmax()
        )));
    }
    Ok(())
}

fn error_map(
    abar: &HarmonicCoefficients,
    window: &SpectralWindow,
    grid: &Arc<RingGrid>,
    scale: f64,
) -> SphereMap {
    let filtered = convolve_axisym(abar, &window.dense());
    synthesize(&filtered, grid).map(|v| v * scale)
}

/// `ε(ξ_k) = (ΦX − Φ(XW))(ξ_k) / E^{1/2}[ΦX(ξ)²]` for the field `alm`.
pub fn error_coefficients(
    alm: &HarmonicCoefficients,
    mask: &WeightFunction,
    window: &SpectralWindow,
    spectrum: &PowerSpectrum,
    grid: &Arc<RingGrid>,
) -> Result<ErrorField> {
    check_window_grid(grid, window)?;
    let normalizer = normalizer(spectrum, window)?;
    let analysis = WeightedAnalysis::new(&mask.complement(), alm.lmax(), window.lmax());
    let abar = analysis.apply(alm);
    Ok(ErrorField {
        map: error_map(&abar, window, grid, normalizer.powf(-0.5)),
        normalizer,
    })
}

/// Band `[lmin, lmax]`, spectrum, mask `W` and region-of-interest weight `D`.
#[derive(Debug, Clone)]
pub struct MiseProblem {
    pub lmin: usize,
    pub lmax: usize,
    pub spectrum: PowerSpectrum,
    pub mask: WeightFunction,
    pub weight: WeightFunction,
}

impl MiseProblem {
    /// Problem with `D = W`.
    pub fn new(lmin: usize, lmax: usize, spectrum: PowerSpectrum, mask: WeightFunction) -> Result<Self> {
        if lmin > lmax {
            return Err(Error::domain(format!("empty band [{lmin}, {lmax}]")));
        }
        if let Some(l) = (lmin..=lmax).find(|&l| spectrum.get(l) <= 0.0) {
            return Err(Error::domain(format!("σ_{l} = 0 inside the band")));
        }
        Ok(MiseProblem {
            lmin,
            lmax,
            weight: mask.clone(),
            spectrum,
            mask,
        })
    }

    pub fn with_weight(mut self, weight: WeightFunction) -> Self {
        self.weight = weight;
        self
    }

    pub fn len(&self) -> usize {
        self.lmax - self.lmin + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// How `P(|ε_k| <= α)` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskErrorMethod {
    /// Per-pixel frequencies over the realizations.
    #[default]
    Empirical,
    /// Gaussian law of `ε_k` with the Monte-Carlo second moment.
    Gaussian,
}

/// `E_b(α) = Σ_k D(ξ_k) P(|ε_k| <= α) / Σ_k D(ξ_k)` on the minimal grid of
/// the window, for each `α`.
pub fn mask_error_curve(
    problem: &MiseProblem,
    window: &SpectralWindow,
    alphas: &[f64],
    n_mc: usize,
    seed: u64,
    method: MaskErrorMethod,
) -> Result<Vec<f64>> {
    if n_mc == 0 {
        return Err(Error::domain("mask-error curve needs at least one realization"));
    }
    if let Some(a) = alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::domain(format!("tolerance α = {a} must be finite and >= 0")));
    }
    let normalizer = normalizer(&problem.spectrum, window)?;
    let grid = Arc::new(build_grid(window.lmax()));
    let d: Vec<f64> = problem.weight.to_map(&grid).values().iter().map(|v| v.max(0.0)).collect();
    let total: f64 = d.iter().sum();
    if total <= 0.0 {
        return Err(Error::domain("weight function vanishes on the grid"));
    }
    let analysis = WeightedAnalysis::new(
        &problem.mask.complement(),
        problem.spectrum.lmax(),
        window.lmax(),
    );
    let scale = normalizer.powf(-0.5);
    let eps = |i: usize| -> Vec<f64> {
        let alm = simulate_realization(&problem.spectrum, seed, i as u64);
        error_map(&analysis.apply(&alm), window, &grid, scale).into_values()
    };
    let curve: Vec<f64> = match method {
        MaskErrorMethod::Empirical => {
            let per: Vec<Vec<f64>> = (0..n_mc)
                .into_par_iter()
                .map(|i| {
                    let e = eps(i);
                    alphas
                        .iter()
                        .map(|a| {
                            e.iter()
                                .zip(&d)
                                .filter(|(x, _)| x.abs() <= *a)
                                .fold(0.0, |acc, (_, w)| acc + w)
                        })
                        .collect()
                })
                .collect();
            (0..alphas.len())
                .map(|j| per.iter().map(|p| p[j]).sum::<f64>() / (n_mc as f64 * total))
                .collect()
        }
        MaskErrorMethod::Gaussian => {
            let per: Vec<Vec<f64>> = (0..n_mc).into_par_iter().map(eps).collect();
            let var: Vec<f64> = (0..d.len())
                .map(|k| per.iter().map(|e| e[k] * e[k]).sum::<f64>() / n_mc as f64)
                .collect();
            alphas
                .iter()
                .map(|a| {
                    var.iter()
                        .zip(&d)
                        .map(|(v, w)| {
                            let p = if *v > 0.0 { erf(a / (2.0 * v).sqrt()) } else { 1.0 };
                            w * p
                        })
                        .sum::<f64>()
                        / total
                })
                .collect()
        }
    };
    Ok(curve.into_iter().map(|v| v.min(1.0)).collect())
}

/// Per-realization `∫ D ε²` for the window, the Monte-Carlo counterpart
/// of [`mise_value`].
pub fn mise_samples(
    problem: &MiseProblem,
    window: &SpectralWindow,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let normalizer = normalizer(&problem.spectrum, window)?;
    let grid = product_grid(problem.weight.lmax() + 2 * window.lmax());
    let dw: Vec<f64> = problem
        .weight
        .to_map(&grid)
        .values()
        .iter()
        .zip(grid.weights())
        .map(|(d, l)| d * l)
        .collect();
    let analysis = WeightedAnalysis::new(
        &problem.mask.complement(),
        problem.spectrum.lmax(),
        window.lmax(),
    );
    let scale = normalizer.powf(-0.5);
    Ok((0..n_mc)
        .into_par_iter()
        .map(|i| {
            let alm = simulate_realization(&problem.spectrum, seed, i as u64);
            let e = error_map(&analysis.apply(&alm), window, &grid, scale);
            e.values()
                .iter()
                .zip(&dw)
                .map(|(x, d)| x * x * d)
                .collect::<CompensatedSum>()
                .value()
        })
        .collect())
}

/// Quadratic form `Q` of the MISE over a band, with per-entry standard
/// errors when estimated by Monte-Carlo.
#[derive(Debug, Clone)]
pub struct MiseMatrix {
    pub lmin: usize,
    pub q: SymmetricMatrix,
    pub std_err: Option<SymmetricMatrix>,
}

impl MiseMatrix {
    pub fn lmax(&self) -> usize {
        self.lmin + self.q.order() - 1
    }

    /// Entry for degrees `l, l'` of the band.
    pub fn get(&self, l: usize, lp: usize) -> f64 {
        self.q.get(l - self.lmin, lp - self.lmin)
    }
}

/// Analytic `Q_{l l'} = Σ_m A_{l l' m} D_{l l' m}` for axisymmetric `W` and `D`.
pub fn q_matrix_axisym(problem: &MiseProblem) -> Result<MiseMatrix> {
    if !problem.mask.is_axisymmetric() || !problem.weight.is_axisymmetric() {
        return Err(Error::precondition(
            "analytic Q needs axisymmetric mask and weight; use q_matrix_mc",
        ));
    }
    let wbar = problem.mask.complement().zonal_coefficients();
    let d = problem.weight.zonal_coefficients();
    let lc = problem.spectrum.lmax();
    let (lmin, lmax) = (problem.lmin, problem.lmax);

    // b[l - lmin][m][l1] = Σ_{l2} w̄_{l2} ∫ Y_{l1 m} Y_{l2 0} Y*_{l m}
    let b: Vec<Vec<Vec<f64>>> = (lmin..=lmax)
        .into_par_iter()
        .map(|l| {
            (0..=l)
                .map(|m| {
                    (0..=lc)
                        .map(|l1| {
                            if m > l1 || problem.spectrum.get(l1) == 0.0 {
                                return 0.0;
                            }
                            let Some((lo, g)) = gaunt_zonal_range(l1 as u32, l as u32, m as i32)
                            else {
                                return 0.0;
                            };
                            g.iter()
                                .enumerate()
                                .filter_map(|(i, gi)| wbar.get(lo as usize + i).map(|w| w * gi))
                                .collect::<CompensatedSum>()
                                .value()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let n = lmax - lmin + 1;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (l, lp) = (lmin + i, lmin + j);
            let mut q = CompensatedSum::default();
            for m in 0..=l.min(lp) {
                let Some((lo, g)) = gaunt_zonal_range(l as u32, lp as u32, m as i32) else {
                    continue;
                };
                let dm: f64 = g
                    .iter()
                    .enumerate()
                    .filter_map(|(k, gk)| d.get(lo as usize + k).map(|v| v * gk))
                    .sum();
                if dm == 0.0 {
                    continue;
                }
                let am: f64 = (0..=lc)
                    .map(|l1| problem.spectrum.get(l1) * b[i][m][l1] * b[j][m][l1])
                    .sum();
                q.add(if m == 0 { am * dm } else { 2.0 * am * dm });
            }
            q.value()
        })
        .collect();
    let mut out = SymmetricMatrix::zeros(n);
    for (&(i, j), v) in pairs.iter().zip(entries) {
        out.set(i, j, v);
    }
    Ok(MiseMatrix {
        lmin,
        q: out,
        std_err: None,
    })
}

/// Monte-Carlo moment estimate of `Q`: the average over realizations of
/// `∫ D Φ_l Φ_{l'}`, where `Φ_l` is the degree-`l` part of `X(1 - W)`.
pub fn q_matrix_mc(problem: &MiseProblem, n_mc: usize, seed: u64) -> Result<MiseMatrix> {
    if n_mc < 2 {
        return Err(Error::domain("Monte-Carlo Q needs at least two realizations"));
    }
    let (lmin, lmax) = (problem.lmin, problem.lmax);
    let n = lmax - lmin + 1;
    let analysis = WeightedAnalysis::new(&problem.mask.complement(), problem.spectrum.lmax(), lmax);
    let dgrid = product_grid(problem.weight.lmax() + 2 * lmax);
    let dw: Vec<f64> = problem
        .weight
        .to_map(&dgrid)
        .values()
        .iter()
        .zip(dgrid.weights())
        .map(|(d, w)| d * w)
        .collect();

    let samples: Vec<Vec<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let alm = simulate_realization(&problem.spectrum, seed, i as u64);
            let abar = analysis.apply(&alm);
            let phi: Vec<Vec<f64>> = (lmin..=lmax)
                .map(|l| synthesize(&project(&abar, l), &dgrid).into_values())
                .collect();
            let mut s = Vec::with_capacity(n * (n + 1) / 2);
            for a in 0..n {
                for b in a..n {
                    s.push(
                        phi[a]
                            .iter()
                            .zip(&phi[b])
                            .zip(&dw)
                            .map(|((x, y), w)| x * y * w)
                            .collect::<CompensatedSum>()
                            .value(),
                    );
                }
            }
            s
        })
        .collect();

    let nf = n_mc as f64;
    let mut q = SymmetricMatrix::zeros(n);
    let mut se = SymmetricMatrix::zeros(n);
    let mut k = 0;
    for a in 0..n {
        for b in a..n {
            let mean = samples.iter().map(|s| s[k]).collect::<CompensatedSum>().value() / nf;
            let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            q.set(a, b, mean);
            se.set(a, b, (var / nf).sqrt());
            k += 1;
        }
    }
    Ok(MiseMatrix {
        lmin,
        q,
        std_err: Some(se),
    })
}

fn band_vector(q: &MiseMatrix, window: &SpectralWindow) -> Result<Vec<f64>> {
    if window.lmin() < q.lmin || window.lmax() > q.lmax() {
        return Err(Error::domain(format!(
            "window [{}, {}] outside the band [{}, {}]",
            window.lmin(),
            window.lmax(),
            q.lmin,
            q.lmax()
        )));
    }
    Ok((q.lmin..=q.lmax()).map(|l| window.get(l)).collect())
}

/// `R(b) = 4π bᵀQb / Σ σ_l² b_l²`, the D-weighted mean integrated square
/// of the normalized error field.
pub fn mise_value(q: &MiseMatrix, spectrum: &PowerSpectrum, window: &SpectralWindow) -> Result<f64> {
    let b = band_vector(q, window)?;
    let den: f64 = b
        .iter()
        .enumerate()
        .map(|(i, v)| spectrum.sigma2(q.lmin + i) * v * v)
        .sum();
    if !(den > 0.0) {
        return Err(Error::domain("window has zero filtered variance"));
    }
    Ok(FOUR_PI * q.q.quadratic_form(&b) / den)
}

/// Unit window minimizing [`mise_value`]: lowest eigenvector of
/// `Q†_{l l'} = Q_{l l'} / (σ_l σ_l')`, mapped back by `b_l = b†_l / σ_l`.
pub fn mise_optimal_window(q: &MiseMatrix, spectrum: &PowerSpectrum) -> Result<SpectralWindow> {
    let n = q.q.order();
    let sigma: Vec<f64> = (0..n).map(|i| spectrum.sigma2(q.lmin + i).sqrt()).collect();
    if let Some(i) = sigma.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::domain(format!("σ_{} = 0 inside the band", q.lmin + i)));
    }
    let qd = SymmetricMatrix::from_fn(n, |i, j| q.q.get(i, j) / (sigma[i] * sigma[j]));
    let eig = eig_symmetric(&qd)?;
    let mut b: Vec<f64> = eig.vector(0).iter().zip(&sigma).map(|(v, s)| v / s).collect();
    let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if b.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    for v in &mut b {
        *v *= sign / norm;
    }
    SpectralWindow::new(q.lmin, b)
}

/// Window drawn uniformly from the unit sphere of coefficients on a band.
pub fn random_unit_window<R: Rng + ?Sized>(lmin: usize, lmax: usize, rng: &mut R) -> SpectralWindow {
    loop {
        let v: Vec<f64> = (lmin..=lmax).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x: &f64| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return SpectralWindow::new(lmin, v.into_iter().map(|x| x / norm).collect())
                .expect("finite coefficients");
        }
    }
}
