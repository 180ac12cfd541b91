//! Iso-latitude Gauss–Legendre ring grids and quadrature of pixel maps.
//!
//! A grid with `n_rings` rings at Gauss–Legendre nodes in `cos θ` and
//! `n_phi` equispaced longitudes per ring integrates every spherical
//! harmonic of degree `ℓ ≤ min(2 n_rings - 1, n_phi - 1)` exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::{CompensatedSum, Error, Result};

const NEWTON_TOLERANCE: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// `n`-point Gauss–Legendre rule on `[-1, 1]`; nodes strictly increasing.
pub fn gauss_legendre_rule(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::domain("Gauss-Legendre rule needs at least one node"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    // roots are symmetric; compute the upper half and mirror
    for i in 0..n.div_ceil(2) {
        // Tricomi-style initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos()
            * (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf));
        let mut dp = 1.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= NEWTON_TOLERANCE * x.abs().max(1.0) {
                dp = legendre_with_derivative(n, x).1;
                break;
            }
        }
        if 2 * i + 1 == n {
            x = 0.0;
            dp = legendre_with_derivative(n, 0.0).1;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok((nodes, weights))
}

/// `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// One iso-latitude ring.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub theta: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// Gauss–Legendre weight of the ring node in `cos θ`.
    pub weight: f64,
    pub n_phi: usize,
}

impl Ring {
    /// Quadrature weight of each point on the ring.
    pub fn point_weight(&self) -> f64 {
        self.weight * 2.0 * PI / self.n_phi as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }
}

/// Iso-latitude quadrature grid; rings are ordered by increasing colatitude.
#[derive(Debug, Clone, PartialEq)]
pub struct RingGrid {
    rings: Vec<Ring>,
    offsets: Vec<usize>,
    exactness: usize,
}

impl RingGrid {
    /// Grid with `n_rings` Gauss–Legendre rings and `n_phi` longitudes each.
    pub fn new(n_rings: usize, n_phi: usize) -> Result<Self> {
        if n_phi == 0 {
            return Err(Error::domain("rings need at least one longitude"));
        }
        let (nodes, weights) = gauss_legendre_rule(n_rings)?;
        let mut rings = Vec::with_capacity(n_rings);
        let mut offsets = Vec::with_capacity(n_rings + 1);
        let mut total = 0;
        for (z, w) in nodes.iter().zip(&weights).rev() {
            offsets.push(total);
            total += n_phi;
            let s = (1.0 - z * z).max(0.0).sqrt();
            rings.push(Ring {
                theta: z.acos(),
                cos_theta: *z,
                sin_theta: s,
                weight: *w,
                n_phi,
            });
        }
        offsets.push(total);
        let exactness = (2 * n_rings - 1).min(n_phi - 1);
        Ok(RingGrid {
            rings,
            offsets,
            exactness,
        })
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Largest degree `ℓ` such that every `Y_ℓm` is integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        self.exactness
    }

    /// Largest band limit whose products are still integrated exactly.
    pub fn band_limit(&self) -> usize {
        self.exactness / 2
    }

    pub fn n_points(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Flat index of the first point of ring `r`.
    pub fn ring_offset(&self, r: usize) -> usize {
        self.offsets[r]
    }

    /// `(ring, longitude)` indices of flat index `k`.
    pub fn locate(&self, k: usize) -> (usize, usize) {
        let r = self.offsets.partition_point(|&o| o <= k) - 1;
        (r, k - self.offsets[r])
    }

    /// `(θ, φ)` of flat index `k`.
    pub fn point(&self, k: usize) -> (f64, f64) {
        let (r, j) = self.locate(k);
        (self.rings[r].theta, self.rings[r].phi(j))
    }

    /// Quadrature weight `λ_k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.rings[self.locate(k).0].point_weight()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rings
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.point_weight(), r.n_phi))
            .collect()
    }

    /// Unit vector of flat index `k`.
    pub fn unit_vector(&self, k: usize) -> [f64; 3] {
        let (r, j) = self.locate(k);
        let ring = &self.rings[r];
        let phi = ring.phi(j);
        [
            ring.sin_theta * phi.cos(),
            ring.sin_theta * phi.sin(),
            ring.cos_theta,
        ]
    }
}

/// Minimal grid exact at degree `2 lmax`: `lmax + 1` rings of `2 lmax + 1` points.
pub fn build_grid(lmax: usize) -> RingGrid {
    RingGrid::new(lmax + 1, 2 * lmax + 1).expect("minimal grid parameters are valid")
}

/// Real field sampled on a ring grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereMap {
    grid: Arc<RingGrid>,
    values: Vec<f64>,
}

impl SphereMap {
    pub fn new(grid: Arc<RingGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::domain(format!(
                "map has {} values but the grid has {} points",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(SphereMap { grid, values })
    }

    pub fn zeros(grid: Arc<RingGrid>) -> Self {
        let n = grid.n_points();
        SphereMap {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f(θ, φ)` at every grid point.
    pub fn from_fn(grid: Arc<RingGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.n_points())
            .map(|k| {
                let (t, p) = grid.point(k);
                f(t, p)
            })
            .collect();
        SphereMap { grid, values }
    }

    pub fn grid(&self) -> &Arc<RingGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise product; both maps must share a grid.
    pub fn multiply(&self, other: &SphereMap) -> Result<SphereMap> {
        if self.grid != other.grid {
            return Err(Error::precondition("maps live on different grids"));
        }
        Ok(SphereMap {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SphereMap {
        SphereMap {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    /// `Σ_k λ_k values[k]`.
    pub fn integrate(&self) -> f64 {
        let mut total = CompensatedSum::default();
        for (r, ring) in self.grid.rings().iter().enumerate() {
            let o = self.grid.ring_offset(r);
            let s: CompensatedSum = self.values[o..o + ring.n_phi].iter().copied().collect();
            total.add(ring.point_weight() * s.value());
        }
        total.value()
    }
}

/// Free-function form of [`SphereMap::integrate`].
pub fn integrate(map: &SphereMap) -> f64 {
    map.integrate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::spherical_harmonic;
    use crate::FOUR_PI;

    #[test]
    fn small_rules() {
        let (x, w) = gauss_legendre_rule(1).unwrap();
        assert_eq!(x, vec![0.0]);
        assert!((w[0] - 2.0).abs() < 1e-15);
        let (x, w) = gauss_legendre_rule(2).unwrap();
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15 && (w[1] - 1.0).abs() < 1e-15);
        assert!(gauss_legendre_rule(0).is_err());
    }

    #[test]
    fn monomial_exactness() {
        let (x, w) = gauss_legendre_rule(16).unwrap();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        for n in [3usize, 17, 64, 255, 1000] {
            let (x, w) = gauss_legendre_rule(n).unwrap();
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            assert!(w.iter().all(|v| *v > 0.0));
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}: {total}");
        }
    }

    #[test]
    fn grid_shapes() {
        let g = build_grid(0);
        assert_eq!(g.n_points(), 1);
        assert!((g.weight(0) - FOUR_PI).abs() < 1e-14);
        let g = build_grid(16);
        assert_eq!(g.rings().len(), 17);
        assert!(g.rings().iter().all(|r| r.n_phi == 33));
        assert_eq!(g.exactness_degree(), 32);
        let s: f64 = g.weights().iter().sum();
        assert!((s - FOUR_PI).abs() < 1e-12);
        assert!(g.rings().windows(2).all(|r| r[0].theta < r[1].theta));
        assert_eq!(g.locate(33), (1, 0));
        assert_eq!(g.locate(32), (0, 32));
    }

    #[test]
    fn exactness_boundary() {
        let g = Arc::new(build_grid(32));
        let norm = |l: usize, m: i64| {
            SphereMap::from_fn(g.clone(), |t, p| {
                spherical_harmonic(l, m, t, p).unwrap().norm_sqr()
            })
            .integrate()
        };
        assert!((norm(32, 5) - 1.0).abs() < 1e-10);
        assert!((norm(40, 5) - 1.0).abs() > 1e-6);
    }

    #[test]
    fn integrate_examples() {
        let g = Arc::new(build_grid(8));
        let one = SphereMap::from_fn(g.clone(), |_, _| 1.0);
        assert!((one.integrate() - FOUR_PI).abs() < 1e-12);
        let y20 = SphereMap::from_fn(g.clone(), |t, p| spherical_harmonic(2, 0, t, p).unwrap().re);
        assert!(y20.integrate().abs() < 1e-12);
        let y31 = SphereMap::from_fn(g.clone(), |t, p| {
            spherical_harmonic(3, 1, t, p).unwrap().norm_sqr()
        });
        assert!((integrate(&y31) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn harmonics_integrate_to_delta() {
        let g = Arc::new(build_grid(10));
        for l in 0..=g.exactness_degree() {
            for m in -(l as i64)..=(l as i64) {
                let re = SphereMap::from_fn(g.clone(), |t, p| {
                    spherical_harmonic(l, m, t, p).unwrap().re
                })
                .integrate();
                let im = SphereMap::from_fn(g.clone(), |t, p| {
                    spherical_harmonic(l, m, t, p).unwrap().im
                })
                .integrate();
                let expected = if l == 0 { FOUR_PI.sqrt() } else { 0.0 };
                assert!((re - expected).abs() < 1e-10 && im.abs() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn azimuthal_shift_invariance() {
        let g = build_grid(12);
        for ring in g.rings() {
            let d = 2.0 * PI / ring.n_phi as f64;
            for j in 0..ring.n_phi {
                let shifted = ring.phi(j) + d;
                let next = ring.phi((j + 1) % ring.n_phi);
                let diff = (shifted - next).rem_euclid(2.0 * PI);
                assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12);
            }
        }
        let w = g.weights();
        for (r, ring) in g.rings().iter().enumerate() {
            let o = g.ring_offset(r);
            assert!(w[o..o + ring.n_phi].iter().all(|v| *v == w[o]));
        }
    }

    #[test]
    fn map_length_checked() {
        let g = Arc::new(build_grid(2));
        assert!(SphereMap::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(SphereMap::new(g, vec![0.0; 15]).is_ok());
    }
}
