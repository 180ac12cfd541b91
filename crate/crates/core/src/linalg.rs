//! Dense symmetric eigendecomposition (cyclic Jacobi) and pivoted linear solves.

use crate::{Error, Result};

/// Dense symmetric matrix; only the upper triangle is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        SymmetricMatrix {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds the matrix from `f(i, j)`, evaluated for `i <= j` only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(f(i, j));
            }
        }
        SymmetricMatrix { n, upper }
    }

    /// Symmetrises a full row-major matrix as `(A + Aᵀ)/2`.
    pub fn from_dense(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::domain(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                a.len()
            )));
        }
        Ok(Self::from_fn(n, |i, j| 0.5 * (a[i * n + j] + a[j * n + i])))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.upper[k] = v;
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.get(i, j);
            }
        }
        a
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j).powi(2);
            }
        }
        s.sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }

    /// `A + c B`.
    pub fn add_scaled(&self, c: f64, other: &SymmetricMatrix) -> SymmetricMatrix {
        assert_eq!(self.n, other.n);
        SymmetricMatrix {
            n: self.n,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + c * b)
                .collect(),
        }
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column-major: eigenvector `k` is `vectors[k * n .. (k + 1) * n]`.
    vectors: Vec<f64>,
    n: usize,
}

impl SymmetricEigen {
    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.n..(k + 1) * self.n]
    }

    pub fn order(&self) -> usize {
        self.n
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_TOLERANCE: f64 = 1e-14;

/// Cyclic Jacobi eigendecomposition.
///
/// Converges when the off-diagonal Frobenius norm drops below
/// `1e-14 ‖A‖_F`; fails after 100 sweeps.
pub fn eig_symmetric(a: &SymmetricMatrix) -> Result<SymmetricEigen> {
    if !a.is_finite() {
        return Err(Error::domain("matrix has non-finite entries"));
    }
    let n = a.order();
    let mut m = a.to_dense();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.frobenius_norm();
    let target = JACOBI_TOLERANCE * norm;

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = norm == 0.0 || off(&m) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // rotate rows/columns p and q
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                // accumulate: column p and q of V (stored row-major V[k][p])
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &col in &order {
        for k in 0..n {
            vectors.push(v[k * n + col]);
        }
    }
    Ok(SymmetricEigen { values, vectors, n })
}

/// Solution of a square linear system with its 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub condition: f64,
}

/// LU factorisation with partial pivoting, row-major.
#[derive(Debug, Clone)]
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(n: usize, a: &[f64]) -> Result<Lu> {
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax <= f64::EPSILON * scale * n as f64 || pmax == 0.0 {
                return Err(Error::Singular);
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let d = lu[k * n + k];
            for i in (k + 1)..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in (k + 1)..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                y[i] -= self.lu[i * n + j] * y[j];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }

    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        // Aᵀ = Uᵀ Lᵀ P
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                z[i] -= self.lu[j * n + i] * z[j];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                z[i] -= self.lu[j * n + i] * z[j];
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// Hager's estimate of `‖A⁻¹‖₁`.
    fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            let new_est: f64 = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, -1.0), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            est = f64::max(est, new_est);
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        // alternative lower bound from a sign-alternating probe
        let probe: Vec<f64> = (0..n)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
            })
            .collect();
        let y = self.solve(&probe);
        let alt = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
        est.max(alt)
    }
}

fn norm1(n: usize, a: &[f64]) -> f64 {
    (0..n)
        .map(|j| (0..n).map(|i| a[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A x = rhs` for a general square row-major matrix.
pub fn solve(n: usize, a: &[f64], rhs: &[f64]) -> Result<Solution> {
    if a.len() != n * n || rhs.len() != n {
        return Err(Error::domain("matrix/rhs dimensions do not match"));
    }
    if n == 0 {
        return Ok(Solution {
            x: vec![],
            condition: 1.0,
        });
    }
    let lu = Lu::factor(n, a)?;
    let x = lu.solve(rhs);
    let condition = norm1(n, a) * lu.inverse_norm1_estimate();
    if !condition.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    Ok(Solution { x, condition })
}

/// Solves `A x = rhs` for a symmetric matrix.
pub fn solve_symmetric(a: &SymmetricMatrix, rhs: &[f64]) -> Result<Solution> {
    solve(a.order(), &a.to_dense(), rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> SymmetricMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SymmetricMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn packed_storage_is_symmetric() {
        let m = SymmetricMatrix::from_fn(4, |i, j| (10 * i + j) as f64);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert_eq!(m.get(1, 3), 13.0);
        assert_eq!(m.trace(), 0.0 + 11.0 + 22.0 + 33.0);
    }

    #[test]
    fn identity_and_diagonal() {
        let e = eig_symmetric(&SymmetricMatrix::identity(5)).unwrap();
        assert!(e.values.iter().all(|v| *v == 1.0));
        let d = SymmetricMatrix::from_fn(3, |i, j| if i == j { [3.0, 1.0, 2.0][i] } else { 0.0 });
        let e = eig_symmetric(&d).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(e.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(e.vector(1), &[0.0, 0.0, 1.0]);
        assert_eq!(e.vector(2), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_reconstruction_and_residuals() {
        let n = 50;
        let a = random_symmetric(n, 7);
        let e = eig_symmetric(&a).unwrap();
        let norm = a.frobenius_norm();
        for k in 0..n {
            let v = e.vector(k);
            let av = a.mul_vec(v);
            let res: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - e.values[k] * y).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-11 * norm, "residual {res}");
        }
        for k in 0..n {
            for l in 0..n {
                let d: f64 = e.vector(k).iter().zip(e.vector(l)).map(|(a, b)| a * b).sum();
                let expected = if k == l { 1.0 } else { 0.0 };
                assert!((d - expected).abs() < 1e-11);
            }
        }
        let mut err = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..n).map(|k| e.values[k] * e.vector(k)[i] * e.vector(k)[j]).sum();
                err += (r - a.get(i, j)).powi(2);
            }
        }
        assert!(err.sqrt() < 1e-10 * norm);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(20, 3);
        let e1 = eig_symmetric(&a).unwrap();
        let e2 = eig_symmetric(&a).unwrap();
        assert_eq!(e1.values, e2.values);
        assert_eq!(e1.vectors, e2.vectors);
    }

    #[test]
    fn rejects_nan() {
        let mut a = SymmetricMatrix::identity(2);
        a.set(0, 1, f64::NAN);
        assert!(eig_symmetric(&a).is_err());
    }

    #[test]
    fn solve_examples() {
        let i3 = SymmetricMatrix::identity(3);
        let s = solve_symmetric(&i3, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(s.x, vec![1.0, -2.0, 3.0]);
        assert!((s.condition - 1.0).abs() < 1e-12);
        let d = SymmetricMatrix::from_fn(3, |i, j| if i == j { [2.0, 4.0, 0.5][i] } else { 0.0 });
        let s = solve_symmetric(&d, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(s.x, vec![0.5, 0.25, 2.0]);
        assert!((s.condition - 8.0).abs() < 1e-12);
    }

    #[test]
    fn solve_random_well_conditioned() {
        let n = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for i in 0..n {
            a[i * n + i] += 2.0 * n as f64;
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect();
        let s = solve(n, &a, &b).unwrap();
        for (u, v) in s.x.iter().zip(&x) {
            assert!((u - v).abs() < 1e-10);
        }
        assert!(s.condition < 10.0);
    }

    #[test]
    fn singular_is_reported() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(matches!(solve(2, &a, &[1.0, 1.0]), Err(Error::Singular)));
    }

    #[test]
    fn condition_estimate_tracks_hilbert() {
        let n = 8;
        let a: Vec<f64> = (0..n * n)
            .map(|k| 1.0 / ((k / n + k % n + 1) as f64))
            .collect();
        let s = solve(n, &a, &vec![1.0; n]).unwrap();
        // κ₁(H₈) ≈ 3.4e10
        assert!(s.condition > 1e10 && s.condition < 1e11, "{}", s.condition);
    }
}
