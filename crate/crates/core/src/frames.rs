//! Spectral windows, B-adic window families, needlet frames and their duals.
//!
//! A window `b` defines the axisymmetric needlet
//! `ψ_k(ξ) = sqrt(λ_k) Σ_l b_l L_l(ξ·ξ_k)`. Needlet coefficients of a field
//! are `β_k = sqrt(λ_k) (Φ X)(ξ_k)` with `Φ X = Σ b_l a_lm Y_lm`.

use std::sync::{Arc, OnceLock};

use crate::grid::{build_grid, gauss_legendre_rule, RingGrid, SphereMap};
use crate::sht::{analyze, axisym_to_spectral_with_nodes, convolve_axisym, synthesize, HarmonicCoefficients};
use crate::specfun::kernel_series;
use crate::{Error, Result};

/// Band-limited window `b_l` supported on `[lmin, lmax]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralWindow {
    lmin: usize,
    coeffs: Vec<f64>,
    nonnegative: bool,
}

impl SpectralWindow {
    /// Window with `coeffs[i] = b_{lmin + i}`.
    pub fn new(lmin: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::domain("window needs at least one coefficient"));
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("window coefficients must be finite"));
        }
        Ok(SpectralWindow {
            lmin,
            coeffs,
            nonnegative: false,
        })
    }

    /// Window flagged nonnegative; fails if some coefficient is negative.
    pub fn nonnegative(lmin: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut w = Self::new(lmin, coeffs)?;
        if w.coeffs.iter().any(|v| *v < 0.0) {
            return Err(Error::domain("nonnegative window has a negative coefficient"));
        }
        w.nonnegative = true;
        Ok(w)
    }

    /// Window from coefficients indexed from degree zero, trimmed to the
    /// band `[lmin, lmax]`.
    pub fn from_dense(dense: &[f64], lmin: usize, lmax: usize) -> Result<Self> {
        if lmin > lmax || lmax >= dense.len() {
            return Err(Error::domain(format!(
                "band [{lmin}, {lmax}] is not inside 0..{}",
                dense.len()
            )));
        }
        Self::new(lmin, dense[lmin..=lmax].to_vec())
    }

    /// Single-degree window `b_l = δ_{l l0}`.
    pub fn delta(l0: usize) -> Self {
        SpectralWindow {
            lmin: l0,
            coeffs: vec![1.0],
            nonnegative: true,
        }
    }

    pub fn lmin(&self) -> usize {
        self.lmin
    }

    pub fn lmax(&self) -> usize {
        self.lmin + self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    /// `b_l`, zero outside the band.
    pub fn get(&self, l: usize) -> f64 {
        if l < self.lmin {
            0.0
        } else {
            self.coeffs.get(l - self.lmin).copied().unwrap_or(0.0)
        }
    }

    /// Coefficients indexed from degree zero up to `lmax`.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.lmax() + 1];
        out[self.lmin..].copy_from_slice(&self.coeffs);
        out
    }

    /// Coefficientwise square root of a nonnegative window.
    pub fn sqrt(&self) -> Result<SpectralWindow> {
        if !self.nonnegative {
            return Err(Error::domain(
                "square root needs a window flagged nonnegative",
            ));
        }
        Ok(SpectralWindow {
            lmin: self.lmin,
            coeffs: self.coeffs.iter().map(|v| v.sqrt()).collect(),
            nonnegative: true,
        })
    }

    /// Window restricted to degrees `<= lmax`; `None` if nothing remains.
    pub fn truncate(&self, lmax: usize) -> Option<SpectralWindow> {
        if lmax < self.lmin {
            return None;
        }
        let n = (lmax - self.lmin + 1).min(self.coeffs.len());
        Some(SpectralWindow {
            lmin: self.lmin,
            coeffs: self.coeffs[..n].to_vec(),
            nonnegative: self.nonnegative,
        })
    }

    /// Window scaled so that `Σ b_l² = 1`.
    pub fn unit(&self) -> Result<SpectralWindow> {
        let n = self.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(Error::domain("zero window"));
        }
        Ok(SpectralWindow {
            lmin: self.lmin,
            coeffs: self.coeffs.iter().map(|v| v / n).collect(),
            nonnegative: self.nonnegative,
        })
    }

    /// `Σ_l b_l L_l(t)`.
    pub fn kernel(&self, t: f64) -> f64 {
        kernel_series(self.lmin, &self.coeffs, t)
    }
}

/// One scale of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct Scale {
    pub label: i32,
    pub window: SpectralWindow,
}

/// Ordered set of windows indexed by scale labels.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFamily {
    scales: Vec<Scale>,
}

impl WindowFamily {
    pub fn new(scales: Vec<(i32, SpectralWindow)>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::domain("window family is empty"));
        }
        let mut labels: Vec<i32> = scales.iter().map(|s| s.0).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("duplicate scale label in window family"));
        }
        Ok(WindowFamily {
            scales: scales
                .into_iter()
                .map(|(label, window)| Scale { label, window })
                .collect(),
        })
    }

    pub fn scales(&self) -> &[Scale] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn get(&self, label: i32) -> Option<&SpectralWindow> {
        self.scales.iter().find(|s| s.label == label).map(|s| &s.window)
    }

    pub fn lmin(&self) -> usize {
        self.scales.iter().map(|s| s.window.lmin()).min().unwrap_or(0)
    }

    pub fn lmax(&self) -> usize {
        self.scales.iter().map(|s| s.window.lmax()).max().unwrap_or(0)
    }

    /// `Σ_j (b^{(j)}_l)²`.
    pub fn sum_squares(&self, l: usize) -> f64 {
        self.scales.iter().map(|s| s.window.get(l).powi(2)).sum()
    }

    /// `Σ_j b^{(j)}_l`.
    pub fn sum(&self, l: usize) -> f64 {
        self.scales.iter().map(|s| s.window.get(l)).sum()
    }

    /// Family restricted to degrees `<= lmax`, dropping empty windows.
    pub fn truncate(&self, lmax: usize) -> Result<WindowFamily> {
        let scales: Vec<_> = self
            .scales
            .iter()
            .filter_map(|s| s.window.truncate(lmax).map(|w| (s.label, w)))
            .collect();
        WindowFamily::new(scales)
    }

    /// Coefficientwise square root of every window (`b = sqrt(h)`).
    pub fn sqrt(&self) -> Result<WindowFamily> {
        Ok(WindowFamily {
            scales: self
                .scales
                .iter()
                .map(|s| {
                    Ok(Scale {
                        label: s.label,
                        window: s.window.sqrt()?,
                    })
                })
                .collect::<Result<_>>()?,
        })
    }

    /// First degree in `[lmin, lmax]` with `Σ_j b² = 0`.
    pub fn first_uncovered(&self) -> Option<usize> {
        (self.lmin()..=self.lmax()).find(|&l| self.sum_squares(l) == 0.0)
    }
}

/// Monotone ramp `s` on `[0, 1]` with `s(0) = 0`, `s(1) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ramp {
    /// Polynomial smoothstep of odd degree `order`, i.e. the regularized
    /// incomplete beta function `I_t(k+1, k+1)` with `k = (order-1)/2`;
    /// `C^k` at both ends.
    Smoothstep { order: u32 },
    /// Normalized integral of `exp(-1/(1-x²))`; infinitely smooth.
    Bump,
}

impl Ramp {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match *self {
            Ramp::Smoothstep { order } => smoothstep((order as usize - 1) / 2, t),
            Ramp::Bump => bump_primitive(2.0 * t - 1.0) / bump_total(),
        }
    }
}

fn smoothstep(k: usize, t: f64) -> f64 {
    // t^{k+1} Σ_{i<=k} C(k+i, i) (1-t)^i
    let u = 1.0 - t;
    let mut c = 1.0;
    let mut pw = 1.0;
    let mut s = 0.0;
    for i in 0..=k {
        if i > 0 {
            c = c * (k + i) as f64 / i as f64;
            pw *= u;
        }
        s += c * pw;
    }
    s * t.powi(k as i32 + 1)
}

fn bump_nodes() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(96).expect("positive node count"))
}

fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// `G(y) = ∫_{-1}^{y} exp(-1/(1-x²)) dx`, constant outside `(-1, 1)`.
fn bump_primitive(y: f64) -> f64 {
    let y = y.clamp(-1.0, 1.0);
    if y <= -1.0 {
        return 0.0;
    }
    // integrate from the nearer end for accuracy in the tails
    let (a, b, flip) = if y <= 0.0 { (-1.0, y, false) } else { (y, 1.0, true) };
    let (x, w) = bump_nodes();
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let part: f64 = x.iter().zip(w).map(|(x, w)| w * bump(c + h * x)).sum::<f64>() * h;
    if flip {
        bump_total() - part
    } else {
        part
    }
}

fn bump_total() -> f64 {
    static TOTAL: OnceLock<f64> = OnceLock::new();
    *TOTAL.get_or_init(|| {
        let (x, w) = bump_nodes();
        // symmetric: twice the integral over [-1, 0]
        let part: f64 = x.iter().zip(w).map(|(x, w)| w * bump(-0.5 + 0.5 * x)).sum::<f64>() * 0.5;
        2.0 * part
    })
}

/// B-adic profile `𝗁` supported on `[1/B, B]` with `𝗁(x) + 𝗁(x/B) = 1` on `[1, B]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BadicProfile {
    pub base: f64,
    pub ramp: Ramp,
}

impl BadicProfile {
    pub fn new(base: f64, ramp: Ramp) -> Result<Self> {
        if !(base > 1.0) || !base.is_finite() {
            return Err(Error::domain(format!("B must exceed 1, got {base}")));
        }
        if let Ramp::Smoothstep { order } = ramp {
            if order % 2 == 0 {
                return Err(Error::domain(format!("spline order must be odd, got {order}")));
            }
        }
        Ok(BadicProfile { base, ramp })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let b = self.base;
        let inv = 1.0 / b;
        if x <= inv || x >= b {
            0.0
        } else if x <= 1.0 {
            self.ramp.eval((x - inv) / (1.0 - inv))
        } else {
            1.0 - self.ramp.eval((x / b - inv) / (1.0 - inv))
        }
    }

    /// `h^{(j)}_l = 𝗁(l / B^j)` over the degrees where it is positive.
    pub fn window(&self, j: i32) -> Option<SpectralWindow> {
        let scale = self.base.powi(j);
        let lo = (scale / self.base).floor() as usize;
        let hi = (scale * self.base).ceil() as usize;
        let vals: Vec<(usize, f64)> = (lo..=hi)
            .map(|l| (l, self.eval(l as f64 / scale)))
            .filter(|(_, v)| *v > 0.0)
            .collect();
        let (first, last) = (vals.first()?.0, vals.last()?.0);
        let coeffs = (first..=last).map(|l| self.eval(l as f64 / scale)).collect();
        Some(SpectralWindow::nonnegative(first, coeffs).expect("profile is nonnegative"))
    }
}

/// Family `{h^{(-1)} = δ_0} ∪ {h^{(j)}}_{j=0..=jmax}` of B-adic h-windows
/// built on a polynomial spline ramp of the given odd order.
///
/// `Σ_j h^{(j)}_l = 1` for every `l <= B^jmax`.
pub fn spline_family(base: f64, order: u32, jmax: u32) -> Result<WindowFamily> {
    badic_family(BadicProfile::new(base, Ramp::Smoothstep { order })?, jmax)
}

/// As [`spline_family`] for an arbitrary ramp.
pub fn badic_family(profile: BadicProfile, jmax: u32) -> Result<WindowFamily> {
    if jmax < 1 {
        return Err(Error::domain("jmax must be at least 1"));
    }
    let mut scales = vec![(-1, SpectralWindow::delta(0))];
    for j in 0..=jmax as i32 {
        if let Some(w) = profile.window(j) {
            scales.push((j, w));
        }
    }
    WindowFamily::new(scales)
}

/// Reference windows of the comparison study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceKind {
    /// `𝖻(x) = G(-4x+3) - G(-8x+3)` (normalized by `G(1)`), `b_l = 𝖻(l/2^j)`;
    /// support `l/2^j ∈ (1/4, 1)`.
    Exponential { j: u32 },
    /// `𝖻(x) = 3/2 (B₃(2x) - B₃(x))`, `b_l = 𝖻(l/2^j)`; support `l < 2^{j+1}`.
    BSpline3 { j: u32 },
    /// Spectral coefficients of the spatial profile
    /// `(1 - 2 tan²(θ/2)/R²) exp(-2 tan²(θ/2)/R²)` up to `lmax`.
    MexicanHat { r: f64, lmax: usize },
    /// `b_l = sqrt(h^{(j)}_l)` for the spline profile of the given order.
    SqrtSpline { base: f64, order: u32, j: i32 },
}

/// Cubic B-spline `(|x-2|³ - 4|x-1|³ + 6|x|³ - 4|x+1|³ + |x+2|³)/12`.
pub fn bspline3(x: f64) -> f64 {
    let c = |y: f64| y.abs().powi(3);
    (c(x - 2.0) - 4.0 * c(x - 1.0) + 6.0 * c(x) - 4.0 * c(x + 1.0) + c(x + 2.0)) / 12.0
}

/// Spatial Mexican-hat profile on the sphere.
pub fn mexican_hat_profile(r: f64, theta: f64) -> f64 {
    let t = (theta / 2.0).tan();
    let u = 2.0 * t * t / (r * r);
    if !u.is_finite() {
        return 0.0;
    }
    (1.0 - u) * (-u).exp()
}

fn sampled(lmin: usize, lmax: usize, f: impl Fn(usize) -> f64) -> Result<SpectralWindow> {
    let vals: Vec<(usize, f64)> = (lmin..=lmax).map(|l| (l, f(l))).filter(|(_, v)| *v != 0.0).collect();
    let (Some(first), Some(last)) = (vals.first(), vals.last()) else {
        return Err(Error::domain("window vanishes on its band"));
    };
    SpectralWindow::new(first.0, (first.0..=last.0).map(f).collect())
}

pub fn reference_window(kind: ReferenceKind) -> Result<SpectralWindow> {
    match kind {
        ReferenceKind::Exponential { j } => {
            let s = 2f64.powi(j as i32);
            let g1 = bump_total();
            let b = |l: usize| {
                let x = l as f64 / s;
                (bump_primitive(-4.0 * x + 3.0) - bump_primitive(-8.0 * x + 3.0)) / g1
            };
            let w = sampled(0, s.ceil() as usize, b)?;
            let lmin = w.lmin();
            SpectralWindow::nonnegative(lmin, w.coeffs.iter().map(|v| v.max(0.0)).collect())
        }
        ReferenceKind::BSpline3 { j } => {
            let s = 2f64.powi(j as i32);
            let b = |l: usize| {
                let x = l as f64 / s;
                1.5 * (bspline3(2.0 * x) - bspline3(x))
            };
            sampled(0, (2.0 * s).ceil() as usize, b)
        }
        ReferenceKind::MexicanHat { r, lmax } => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::domain(format!("Mexican hat needs R > 0, got {r}")));
            }
            // resolve the profile width ~R as well as the band
            let nodes = (2 * lmax + 2).max((8.0 / r).ceil() as usize);
            let b = axisym_to_spectral_with_nodes(|t| mexican_hat_profile(r, t), lmax, nodes);
            SpectralWindow::new(0, b)
        }
        ReferenceKind::SqrtSpline { base, order, j } => {
            let profile = BadicProfile::new(base, Ramp::Smoothstep { order })?;
            profile
                .window(j)
                .ok_or_else(|| Error::domain(format!("scale {j} has no support")))?
                .sqrt()
        }
    }
}

/// Dual windows `b̃ = b / Σ_j b²`.
pub fn dual_windows(family: &WindowFamily) -> Result<WindowFamily> {
    if let Some(l) = family.first_uncovered() {
        return Err(Error::Coverage { l });
    }
    let scales = family
        .scales()
        .iter()
        .map(|s| {
            let w = &s.window;
            let coeffs = w
                .coeffs()
                .iter()
                .enumerate()
                .map(|(i, b)| b / family.sum_squares(w.lmin() + i))
                .collect();
            let dual = SpectralWindow {
                lmin: w.lmin(),
                coeffs,
                nonnegative: w.nonnegative,
            };
            (s.label, dual)
        })
        .collect();
    WindowFamily::new(scales)
}

/// Frame bounds `(min, max)` of `Σ_j b²` over covered degrees.
pub fn frame_bounds(family: &WindowFamily) -> Result<(f64, f64)> {
    if family.is_empty() {
        return Err(Error::domain("window family is empty"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for l in family.lmin()..=family.lmax() {
        let s = family.sum_squares(l);
        if s > 0.0 {
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    if hi == 0.0 {
        return Err(Error::domain("window family is identically zero"));
    }
    Ok((lo, hi))
}

/// Needlet profile `sqrt(λ) Σ_l b_l L_l(t)` at `t = cos` of the angular distance.
pub fn needlet_profile(window: &SpectralWindow, weight: f64, t: f64) -> f64 {
    weight.sqrt() * window.kernel(t)
}

/// Needlet coefficients `β_k` of one scale on its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NeedletCoefficients {
    pub scale: i32,
    grid: Arc<RingGrid>,
    values: Vec<f64>,
}

impl NeedletCoefficients {
    pub fn new(scale: i32, grid: Arc<RingGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "{} needlet coefficients for a grid of {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(NeedletCoefficients { scale, grid, values })
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `Σ_k β_k β'_k`.
    pub fn dot(&self, other: &NeedletCoefficients) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

fn check_exact(grid: &RingGrid, lmax: usize) -> Result<()> {
    if grid.exactness_degree() < 2 * lmax {
        return Err(Error::precondition(format!(
            "grid is exact to degree {}, window reaches l = {lmax} and needs {}",
            grid.exactness_degree(),
            2 * lmax
        )));
    }
    Ok(())
}

/// `β_k = sqrt(λ_k) (Φ X)(ξ_k)` at one scale.
pub fn needlet_analyze(
    alm: &HarmonicCoefficients,
    window: &SpectralWindow,
    grid: &Arc<RingGrid>,
    scale: i32,
) -> Result<NeedletCoefficients> {
    check_exact(grid, window.lmax())?;
    let filtered = convolve_axisym(&alm.resized(window.lmax()), &window.dense());
    let map = synthesize(&filtered, grid);
    let w = grid.weights();
    let values = map.values().iter().zip(&w).map(|(x, l)| l.sqrt() * x).collect();
    NeedletCoefficients::new(scale, grid.clone(), values)
}

/// Grid used for each scale of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridPolicy {
    /// One minimal grid at the family's largest degree.
    #[default]
    Shared,
    /// The minimal grid of each window's own band limit.
    PerScale,
}

/// Needlet analysis at every scale of a family.
pub fn needlet_analyze_family(
    alm: &HarmonicCoefficients,
    family: &WindowFamily,
    policy: GridPolicy,
) -> Result<Vec<NeedletCoefficients>> {
    let shared = Arc::new(build_grid(family.lmax()));
    family
        .scales()
        .iter()
        .map(|s| {
            let grid = match policy {
                GridPolicy::Shared => shared.clone(),
                GridPolicy::PerScale => Arc::new(build_grid(s.window.lmax())),
            };
            needlet_analyze(alm, &s.window, &grid, s.label)
        })
        .collect()
}

/// Reconstruction `X = Σ_j Σ_k β_k ψ̃_k`: each scale's `β/sqrt(λ)` is
/// analysed back to `b_l a_lm`, multiplied by `b̃_l` and summed. Scales are
/// matched to dual windows by label.
pub fn needlet_synthesize(
    coeffs: &[NeedletCoefficients],
    duals: &WindowFamily,
) -> Result<HarmonicCoefficients> {
    let lmax = coeffs
        .iter()
        .map(|c| {
            duals
                .get(c.scale)
                .map(|w| w.lmax())
                .ok_or_else(|| Error::domain(format!("no dual window for scale {}", c.scale)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(0);
    let mut out = HarmonicCoefficients::zeros(lmax);
    for c in coeffs {
        let dual = duals.get(c.scale).expect("checked above");
        check_exact(&c.grid, dual.lmax())?;
        let w = c.grid.weights();
        let vals = c.values.iter().zip(&w).map(|(b, l)| b / l.sqrt()).collect();
        let map = SphereMap::new(c.grid.clone(), vals)?;
        let filtered = analyze(&map, dual.lmax())?;
        out.add_scaled(1.0, &convolve_axisym(&filtered, &dual.dense()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sht::tests::random_alm;
    use crate::specfun::legendre_kernel;
    use crate::FOUR_PI;

    #[test]
    fn ramps_are_monotone_and_smooth() {
        for ramp in [Ramp::Smoothstep { order: 1 }, Ramp::Smoothstep { order: 7 }, Ramp::Bump] {
            assert_eq!(ramp.eval(0.0), 0.0);
            assert_eq!(ramp.eval(1.0), 1.0);
            let mut prev = 0.0;
            for i in 1..=200 {
                let v = ramp.eval(i as f64 / 200.0);
                assert!(v >= prev);
                prev = v;
            }
            assert!((ramp.eval(0.5) - 0.5).abs() < 1e-14);
            for t in [0.1, 0.27, 0.4] {
                assert!((ramp.eval(t) + ramp.eval(1.0 - t) - 1.0).abs() < 1e-13);
            }
        }
        assert!((Ramp::Smoothstep { order: 3 }.eval(0.25) - (3.0 / 16.0 - 2.0 / 64.0)).abs() < 1e-15);
        // C^3 contact at 0 for order 7: s(t) = O(t^4)
        let s = Ramp::Smoothstep { order: 7 };
        assert!(s.eval(1e-3) < 40.0 * 1e-12);
    }

    #[test]
    fn bump_primitive_converged() {
        let (x, w) = gauss_legendre_rule(400).unwrap();
        let reference: f64 = x.iter().zip(&w).map(|(x, w)| w * bump(*x)).sum();
        assert!((bump_total() - reference).abs() < 1e-14);
        assert!((bump_primitive(0.0) - reference / 2.0).abs() < 1e-14);
    }

    #[test]
    fn partition_identity() {
        for ramp in [Ramp::Smoothstep { order: 7 }, Ramp::Bump] {
            let p = BadicProfile::new(1.7, ramp).unwrap();
            for i in 0..=100 {
                let x = 1.0 + 0.7 * i as f64 / 100.0;
                assert!((p.eval(x) + p.eval(x / 1.7) - 1.0).abs() < 1e-14);
            }
        }
        assert!(BadicProfile::new(1.0, Ramp::Bump).is_err());
        assert!(spline_family(1.7, 4, 3).is_err());
    }

    #[test]
    fn spline_family_structure() {
        let fam = spline_family(1.7, 7, 10).unwrap();
        assert_eq!(fam.len(), 12);
        let limit = 1.7f64.powi(10).floor() as usize;
        for l in 0..=limit {
            assert!((fam.sum(l) - 1.0).abs() < 1e-14, "l={l}");
        }
        // each window overlaps only its neighbours
        let sc = fam.scales();
        for a in 1..sc.len() {
            for b in (a + 2)..sc.len() {
                assert!(sc[a].window.lmax() < sc[b].window.lmin());
            }
        }
        let b = fam.sqrt().unwrap().truncate(limit).unwrap();
        let (lo, hi) = frame_bounds(&b).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reference_windows() {
        assert!((bspline3(0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(bspline3(2.0), 0.0);
        assert_eq!(bspline3(-2.0), 0.0);
        let e = reference_window(ReferenceKind::Exponential { j: 10 }).unwrap();
        assert!(e.lmin() > 256 && e.lmax() < 1024);
        assert!(e.coeffs().iter().all(|v| *v >= 0.0));
        let bs = reference_window(ReferenceKind::BSpline3 { j: 9 }).unwrap();
        assert!(bs.lmax() < 1024);
        assert!(reference_window(ReferenceKind::MexicanHat { r: -1.0, lmax: 10 }).is_err());
        let s = reference_window(ReferenceKind::SqrtSpline { base: 2.0, order: 3, j: 9 }).unwrap();
        assert_eq!((s.lmin(), s.lmax()), (257, 1023));
    }

    #[test]
    fn mexican_hat_is_band_limited_in_practice() {
        let w = reference_window(ReferenceKind::MexicanHat { r: 6e-3, lmax: 1100 }).unwrap();
        let max = w.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for l in 1024..=1100 {
            assert!(w.get(l).abs() < 1e-3 * max);
        }
    }

    #[test]
    fn duals() {
        let fam = spline_family(1.7, 7, 6).unwrap().sqrt().unwrap().truncate(24).unwrap();
        let d = dual_windows(&fam).unwrap();
        for (a, b) in fam.scales().iter().zip(d.scales()) {
            for l in 0..=24 {
                assert!((a.window.get(l) - b.window.get(l)).abs() < 1e-14);
            }
        }
        let single = WindowFamily::new(vec![(0, SpectralWindow::new(3, vec![2.0; 4]).unwrap())]).unwrap();
        let d = dual_windows(&single).unwrap();
        assert!(d.scales()[0].window.coeffs().iter().all(|v| *v == 0.5));
        let holed = WindowFamily::new(vec![
            (0, SpectralWindow::new(0, vec![1.0, 1.0]).unwrap()),
            (1, SpectralWindow::new(3, vec![1.0]).unwrap()),
        ])
        .unwrap();
        assert!(matches!(dual_windows(&holed), Err(Error::Coverage { l: 2 })));
    }

    #[test]
    fn bounds_of_single_window() {
        let fam = WindowFamily::new(vec![(0, SpectralWindow::new(2, vec![0.5, 1.0, 2.0]).unwrap())]).unwrap();
        assert_eq!(frame_bounds(&fam).unwrap(), (0.25, 4.0));
    }

    #[test]
    fn profile_examples() {
        let w = SpectralWindow::delta(0);
        assert!((needlet_profile(&w, 1.0, 0.3) - 1.0 / FOUR_PI).abs() < 1e-16);
        let w = SpectralWindow::new(2, vec![0.3, -0.2, 0.7]).unwrap();
        let at_pole = 4f64.sqrt() * (0.3 * 5.0 - 0.2 * 7.0 + 0.7 * 9.0) / FOUR_PI;
        assert!((needlet_profile(&w, 4.0, 1.0) - at_pole).abs() < 1e-14);
        let direct: f64 = (2..=4).map(|l| w.get(l) * legendre_kernel(l, 0.2).unwrap()).sum();
        assert!((w.kernel(0.2) - direct).abs() < 1e-15);
    }

    #[test]
    fn tight_frame_parseval_and_reconstruction() {
        let lmax = 64;
        let fam = spline_family(1.7, 7, 8).unwrap().sqrt().unwrap().truncate(lmax).unwrap();
        let duals = dual_windows(&fam).unwrap();
        let a = random_alm(lmax, 21);
        for policy in [GridPolicy::Shared, GridPolicy::PerScale] {
            let betas = needlet_analyze_family(&a, &fam, policy).unwrap();
            let energy: f64 = betas.iter().map(|b| b.energy()).sum();
            assert!((energy - a.norm_sqr()).abs() < 1e-10 * a.norm_sqr());
            let back = needlet_synthesize(&betas, &duals).unwrap();
            assert!(back.max_abs_diff(&a) < 1e-10);
        }
    }

    #[test]
    fn analysis_matches_direct_inner_product() {
        let lmax = 12;
        let g = Arc::new(build_grid(lmax));
        let w = SpectralWindow::new(4, (4..=lmax).map(|l| 1.0 / l as f64).collect()).unwrap();
        let a = random_alm(lmax, 3);
        let x = synthesize(&a, &g);
        let beta = needlet_analyze(&a, &w, &g, 0).unwrap();
        for k in [0usize, 17, 100, g.n_points() - 1] {
            let ek = g.unit_vector(k);
            let direct: f64 = (0..g.n_points())
                .map(|k2| {
                    let e2 = g.unit_vector(k2);
                    let t = (ek[0] * e2[0] + ek[1] * e2[1] + ek[2] * e2[2]).clamp(-1.0, 1.0);
                    g.weight(k2) * needlet_profile(&w, g.weight(k), t) * x.values()[k2]
                })
                .sum();
            assert!((direct - beta.values()[k]).abs() < 1e-9);
        }
        assert!(matches!(
            needlet_analyze(&a, &w, &Arc::new(build_grid(8)), 0),
            Err(Error::Precondition(_))
        ));
    }
}
