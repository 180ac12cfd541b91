//! Spatial concentration of axisymmetric band-limited windows on polar caps.
//!
//! A window `b` on `[lmin, lmax]` is mapped to `b̄_l = sqrt((2l+1)/8π²) b_l`,
//! for which `∫_S ψ² = ‖b̄‖²` when `ψ = Σ b_l L_l(cos θ)`. The cap
//! `Ω = {θ <= θ0}` has concentration matrix
//! `D_ll' = sqrt((2l+1)(2l'+1))/2 ∫_{cos θ0}^1 P_l P_l' dz`
//! and the criterion is `C = 1 - b̄ᵀ D b̄ / ‖b̄‖²`, the energy fraction outside
//! the cap. The complement `I - D` is assembled directly on `[-1, cos θ0]`
//! so that small criteria keep their relative accuracy.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::frames::SpectralWindow;
use crate::grid::gauss_legendre_rule;
use crate::linalg::{eig_symmetric, SymmetricEigen, SymmetricMatrix};
use crate::specfun::fill_legendre;
use crate::{CompensatedSum, Error, Result};

/// `sqrt((2l+1)/8π²)`.
fn bar_factor(l: usize) -> f64 {
    ((2 * l + 1) as f64 / (8.0 * PI * PI)).sqrt()
}

/// `b̄` of a window.
pub fn window_to_bar(window: &SpectralWindow) -> Vec<f64> {
    window
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, b)| b * bar_factor(window.lmin() + i))
        .collect()
}

/// Window from `b̄` on a band starting at `lmin`.
pub fn bar_to_window(lmin: usize, bar: &[f64]) -> Result<SpectralWindow> {
    SpectralWindow::new(
        lmin,
        bar.iter()
            .enumerate()
            .map(|(i, v)| v / bar_factor(lmin + i))
            .collect(),
    )
}

fn check_band(lmin: usize, lmax: usize) -> Result<()> {
    if lmin > lmax {
        return Err(Error::domain(format!("empty band [{lmin}, {lmax}]")));
    }
    Ok(())
}

fn check_theta(theta0: f64) -> Result<()> {
    if !(theta0 > 0.0 && theta0 <= PI) {
        return Err(Error::domain(format!(
            "cap opening must lie in (0, π], got {theta0}"
        )));
    }
    Ok(())
}

/// Gauss–Legendre rule on `[lo, hi]` with `p̃_l(z) = sqrt((2l+1)/2) P_l(z)`
/// tabulated at the nodes, for `l` in the band.
struct BandQuadrature {
    weights: Vec<f64>,
    /// Row-major `nodes x band` table of `p̃_l(z_k)`.
    table: Vec<f64>,
    width: usize,
}

impl BandQuadrature {
    fn new(lmin: usize, lmax: usize, lo: f64, hi: f64) -> Self {
        let width = lmax - lmin + 1;
        if hi <= lo {
            return BandQuadrature {
                weights: vec![],
                table: vec![],
                width,
            };
        }
        let (x, w) = gauss_legendre_rule(lmax + 1).expect("positive node count");
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let weights: Vec<f64> = w.iter().map(|w| w * half).collect();
        let rows: Vec<Vec<f64>> = x
            .par_iter()
            .map(|xi| {
                let mut p = vec![0.0; lmax + 1];
                fill_legendre(mid + half * xi, &mut p);
                (lmin..=lmax)
                    .map(|l| ((2 * l + 1) as f64 / 2.0).sqrt() * p[l])
                    .collect()
            })
            .collect();
        BandQuadrature {
            weights,
            table: rows.concat(),
            width,
        }
    }

    fn gram(&self) -> SymmetricMatrix {
        let n = self.width;
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i..n)
                    .map(|j| {
                        self.weights
                            .iter()
                            .enumerate()
                            .map(|(k, w)| w * self.table[k * n + i] * self.table[k * n + j])
                            .collect::<CompensatedSum>()
                            .value()
                    })
                    .collect()
            })
            .collect();
        SymmetricMatrix::from_fn(n, |i, j| rows[i][j - i])
    }

    /// `Σ_k w_k (Σ_l v_l p̃_l(z_k))²` for `v` on the quadrature band.
    fn quadratic(&self, v: &[f64]) -> f64 {
        let n = self.width;
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let s: f64 = self.table[k * n..(k + 1) * n]
                    .iter()
                    .zip(v)
                    .map(|(p, b)| p * b)
                    .collect::<CompensatedSum>()
                    .value();
                w * s * s
            })
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Concentration matrix `D` of the cap `θ <= θ0` over `[lmin, lmax]`.
pub fn coupling_matrix(lmin: usize, lmax: usize, theta0: f64) -> Result<SymmetricMatrix> {
    check_band(lmin, lmax)?;
    check_theta(theta0)?;
    Ok(BandQuadrature::new(lmin, lmax, theta0.cos(), 1.0).gram())
}

/// `I - D`, assembled on the complement `θ > θ0`.
pub fn complement_matrix(lmin: usize, lmax: usize, theta0: f64) -> Result<SymmetricMatrix> {
    check_band(lmin, lmax)?;
    check_theta(theta0)?;
    Ok(BandQuadrature::new(lmin, lmax, -1.0, theta0.cos()).gram())
}

/// Shannon number `tr D`.
pub fn shannon_number(d: &SymmetricMatrix) -> f64 {
    d.trace()
}

/// Fraction of `∫ψ²` outside the cap `θ <= θ0`.
pub fn concentration(window: &SpectralWindow, theta0: f64) -> Result<f64> {
    check_theta(theta0)?;
    let bar = window_to_bar(window);
    let norm: f64 = bar.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(Error::domain("zero window has no concentration"));
    }
    let q = BandQuadrature::new(window.lmin(), window.lmax(), -1.0, theta0.cos());
    Ok(q.quadratic(&bar) / norm)
}

/// Second-difference matrix `[1, -2, 1]` of order `n`, zero past both ends.
pub fn second_difference(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = -2.0;
        if i > 0 {
            h[i * n + i - 1] = 1.0;
        }
        if i + 1 < n {
            h[i * n + i + 1] = 1.0;
        }
    }
    h
}

/// `HᵀH` for [`second_difference`].
pub fn curvature_penalty(n: usize) -> SymmetricMatrix {
    let h = second_difference(n);
    SymmetricMatrix::from_fn(n, |i, j| {
        // H is banded; only |i-j| <= 2 contribute
        (i.saturating_sub(1)..(i + 2).min(n))
            .map(|k| h[k * n + i] * h[k * n + j])
            .sum()
    })
}

/// `‖H v‖`.
pub fn roughness(v: &[f64]) -> f64 {
    let n = v.len();
    let at = |i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
    (0..n as isize)
        .map(|i| (at(i - 1) - 2.0 * at(i) + at(i + 1)).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Smoothing parameter of the regularised problem.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Smoothing {
    /// Plain concentration problem.
    None,
    /// Fixed penalty weight `a`.
    Fixed(f64),
    /// Smallest weight in `{0} ∪ {1e-8, ..., 1e-2}·‖D‖` whose lowest
    /// eigenvalue is separated by more than `1e3·ε·‖A‖`.
    #[default]
    Auto,
}

/// Cap-concentration design problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationProblem {
    pub lmin: usize,
    pub lmax: usize,
    pub theta0: f64,
    pub smoothing: Smoothing,
}

impl ConcentrationProblem {
    pub fn new(lmin: usize, lmax: usize, theta0: f64) -> Result<Self> {
        check_band(lmin, lmax)?;
        check_theta(theta0)?;
        Ok(ConcentrationProblem {
            lmin,
            lmax,
            theta0,
            smoothing: Smoothing::Auto,
        })
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }
}

/// Result of [`slepian_window`].
#[derive(Debug, Clone)]
pub struct SlepianDesign {
    pub window: SpectralWindow,
    /// Unit vector `b̄`.
    pub bar: Vec<f64>,
    /// Penalty weight actually used.
    pub smoothing: f64,
    /// Concentration criterion of the window at the design opening.
    pub concentration: f64,
}

const GAP_FACTOR: f64 = 1e3;

fn cluster_tolerance(a: &SymmetricMatrix) -> f64 {
    GAP_FACTOR * f64::EPSILON * a.frobenius_norm()
}

/// Lowest eigenvector of `a`; a degenerate lowest cluster is resolved by
/// the smoothest member (least `‖H v‖`).
fn lowest_smoothest(e: &SymmetricEigen, tol: f64) -> Result<Vec<f64>> {
    let n = e.order();
    let lo = e.values[0];
    let cluster: Vec<usize> = (0..n).take_while(|&k| e.values[k] - lo <= tol).collect();
    if cluster.len() == 1 {
        return Ok(e.vector(0).to_vec());
    }
    let hth = curvature_penalty(n);
    let c = cluster.len();
    let proj = SymmetricMatrix::from_fn(c, |i, j| {
        let vj = hth.mul_vec(e.vector(cluster[j]));
        e.vector(cluster[i]).iter().zip(&vj).map(|(a, b)| a * b).sum()
    });
    let pe = eig_symmetric(&proj)?;
    let y = pe.vector(0);
    let mut v = vec![0.0; n];
    for (yi, &k) in y.iter().zip(&cluster) {
        for (vv, ek) in v.iter_mut().zip(e.vector(k)) {
            *vv += yi * ek;
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Best-concentrated window of the band, optionally smoothed.
///
/// Minimises `b̄ᵀ (I - D + a HᵀH) b̄` over unit `b̄`, which is the same as
/// maximising `b̄ᵀ (D - a HᵀH) b̄`. The result has `‖b̄‖ = 1` and `Σ b_l > 0`.
pub fn slepian_window(problem: &ConcentrationProblem) -> Result<SlepianDesign> {
    let ConcentrationProblem {
        lmin,
        lmax,
        theta0,
        smoothing,
    } = *problem;
    check_band(lmin, lmax)?;
    check_theta(theta0)?;
    let quad = BandQuadrature::new(lmin, lmax, -1.0, theta0.cos());
    let dc = quad.gram();
    let n = dc.order();
    let hth = curvature_penalty(n);

    let candidates: Vec<f64> = match smoothing {
        Smoothing::None => vec![0.0],
        Smoothing::Fixed(a) => {
            if !(a >= 0.0) || !a.is_finite() {
                return Err(Error::domain(format!("smoothing weight must be >= 0, got {a}")));
            }
            vec![a]
        }
        Smoothing::Auto => {
            let dnorm = coupling_matrix(lmin, lmax, theta0)?.frobenius_norm();
            std::iter::once(0.0)
                .chain((-8..=-2).map(|e| 10f64.powi(e) * dnorm))
                .collect()
        }
    };

    let mut chosen = None;
    for (i, &a) in candidates.iter().enumerate() {
        let m = dc.add_scaled(a, &hth);
        let e = eig_symmetric(&m)?;
        let tol = cluster_tolerance(&m);
        let separated = n == 1 || e.values[1] - e.values[0] > tol;
        let last = i + 1 == candidates.len();
        if separated || last || !matches!(smoothing, Smoothing::Auto) {
            chosen = Some((a, lowest_smoothest(&e, tol)?));
            break;
        }
    }
    let (a, mut bar) = chosen.expect("at least one candidate");
    let mut window = bar_to_window(lmin, &bar)?;
    if window.coeffs().iter().sum::<f64>() < 0.0 {
        for v in &mut bar {
            *v = -*v;
        }
        window = bar_to_window(lmin, &bar)?;
    }
    let concentration = quad.quadratic(&bar);
    Ok(SlepianDesign {
        window,
        bar,
        smoothing: a,
        concentration,
    })
}

/// Norm used by [`lp_concentration`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpNorm {
    L1,
    L2,
    Infinity,
}

impl LpNorm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(LpNorm::L1)
        } else if p == 2.0 {
            Ok(LpNorm::L2)
        } else if p.is_infinite() && p > 0.0 {
            Ok(LpNorm::Infinity)
        } else {
            Err(Error::domain(format!("p must be 1, 2 or ∞, got {p}")))
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            LpNorm::L1 => 1.0,
            LpNorm::L2 => 2.0,
            LpNorm::Infinity => f64::INFINITY,
        }
    }
}

const PANEL_NODES: usize = 16;

/// `∫_{θa}^{θb} f(θ) sin θ dθ` by composite Gauss–Legendre panels.
fn theta_integral(f: &(dyn Fn(f64) -> f64 + Sync), ta: f64, tb: f64, panels: usize) -> f64 {
    if tb <= ta {
        return 0.0;
    }
    let (x, w) = gauss_legendre_rule(PANEL_NODES).expect("positive node count");
    let h = (tb - ta) / panels as f64;
    let parts: Vec<f64> = (0..panels)
        .into_par_iter()
        .map(|p| {
            let a = ta + h * p as f64;
            x.iter()
                .zip(&w)
                .map(|(xi, wi)| {
                    let t = a + 0.5 * h * (xi + 1.0);
                    wi * f(t) * t.sin()
                })
                .sum::<f64>()
                * 0.5
                * h
        })
        .collect();
    parts.iter().copied().collect::<CompensatedSum>().value()
}

fn panels_for(lmax: usize, span: f64) -> usize {
    ((4.0 * (lmax + 1) as f64 * span / PI).ceil() as usize).max(8)
}

/// Largest `|ψ|` on `[ta, tb]`: dense sampling then golden-section refinement.
fn max_abs(f: &(dyn Fn(f64) -> f64 + Sync), ta: f64, tb: f64, lmax: usize) -> f64 {
    if tb < ta {
        return 0.0;
    }
    let n = ((16.0 * (lmax + 1) as f64 * (tb - ta) / PI).ceil() as usize).max(16);
    let h = (tb - ta) / n as f64;
    let samples: Vec<f64> = (0..=n).into_par_iter().map(|i| f(ta + h * i as f64).abs()).collect();
    let mut best = samples.iter().copied().fold(0.0f64, f64::max);
    // refine every sampled local maximum within a factor of the best
    let peaks: Vec<usize> = (1..n)
        .filter(|&i| samples[i] >= samples[i - 1] && samples[i] >= samples[i + 1])
        .filter(|&i| samples[i] >= 0.5 * best)
        .collect();
    for i in peaks {
        let (mut a, mut b) = (ta + h * (i - 1) as f64, ta + h * (i + 1) as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c).abs() > f(d).abs() {
                b = d;
            } else {
                a = c;
            }
        }
        best = best.max(f(0.5 * (a + b)).abs());
    }
    best
}

/// `L^p` concentration `1 - ‖ψ 1_Ω‖_p^p / ‖ψ‖_p^p` for `p ∈ {1, 2}`; for
/// `p = ∞` the ratio `max_{θ >= θ0} |ψ| / max |ψ|`.
pub fn lp_concentration(window: &SpectralWindow, theta0: f64, p: LpNorm) -> Result<f64> {
    check_theta(theta0)?;
    if window.coeffs().iter().all(|v| *v == 0.0) {
        return Err(Error::domain("zero window has no concentration"));
    }
    let psi = |t: f64| window.kernel(t.cos());
    let lmax = window.lmax();
    match p {
        LpNorm::Infinity => {
            let outside = max_abs(&psi, theta0, PI, lmax);
            let all = max_abs(&psi, 0.0, PI, lmax).max(outside);
            Ok(outside / all)
        }
        LpNorm::L1 | LpNorm::L2 => {
            let f = move |t: f64| {
                let v = psi(t).abs();
                if p == LpNorm::L1 {
                    v
                } else {
                    v * v
                }
            };
            let outside = theta_integral(&f, theta0, PI, panels_for(lmax, PI - theta0));
            let inside = theta_integral(&f, 0.0, theta0, panels_for(lmax, theta0));
            Ok(outside / (inside + outside))
        }
    }
}

/// Uncertainty product `Δ_ξ Δ_L` of an axisymmetric window.
///
/// `Δ_ξ = sqrt(1 - μ²)/μ` with `μ = ‖∫ ξ ψ² dξ‖` for `∫ψ² = 1`, and
/// `Δ_L = sqrt(Σ l(l+1) a_l² / Σ a_l²)` with `a_l = b_l sqrt((2l+1)/4π)`
/// the harmonic coefficients of `ψ`.
pub fn uncertainty_product(window: &SpectralWindow) -> Result<f64> {
    let (lmin, lmax) = (window.lmin(), window.lmax());
    let bar = window_to_bar(window);
    let norm: f64 = bar.iter().map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(Error::domain("zero window"));
    }
    // 1 - μ = ∫ (1 - z) ψ² / ∫ ψ², by exact quadrature of the polynomial
    let (x, w) = gauss_legendre_rule(lmax + 2).expect("positive node count");
    let mut p = vec![0.0; lmax + 1];
    let mut acc = CompensatedSum::default();
    for (xi, wi) in x.iter().zip(&w) {
        fill_legendre(*xi, &mut p);
        let s: f64 = (lmin..=lmax)
            .map(|l| ((2 * l + 1) as f64 / 2.0).sqrt() * p[l] * bar[l - lmin])
            .collect::<CompensatedSum>()
            .value();
        acc.add(wi * (1.0 - xi) * s * s);
    }
    let one_minus_mu = acc.value() / norm;
    let mu = 1.0 - one_minus_mu;
    if mu.abs() < GAP_FACTOR * f64::EPSILON {
        return Err(Error::domain("spatial moment vanishes; Δ_ξ is undefined"));
    }
    let dxi = (one_minus_mu * (1.0 + mu)).max(0.0).sqrt() / mu.abs();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, b) in window.coeffs().iter().enumerate() {
        let l = (lmin + i) as f64;
        let a2 = b * b * (2.0 * l + 1.0);
        num += l * (l + 1.0) * a2;
        den += a2;
    }
    Ok(dxi * (num / den).sqrt())
}
