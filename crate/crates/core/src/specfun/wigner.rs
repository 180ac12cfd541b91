use std::sync::OnceLock;

use crate::{CompensatedSum, FOUR_PI};

/// Largest degree evaluated by the single-sum Racah formula; larger
/// symbols go through the two-sided recurrence.
pub const RACAH_MAX_DEGREE: u32 = 10;

const LN_FACTORIAL_TABLE: usize = 16_384;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        let mut acc = CompensatedSum::default();
        t.push(0.0);
        for k in 1..LN_FACTORIAL_TABLE {
            acc.add((k as f64).ln());
            t.push(acc.value());
        }
        t
    })
}

/// `ln(n!)`.
pub fn ln_factorial(n: u64) -> f64 {
    let t = ln_factorial_table();
    if (n as usize) < t.len() {
        t[n as usize]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// Six integer indices of a Wigner-3j symbol or Gaunt integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripleIndex {
    pub l1: u32,
    pub l2: u32,
    pub l3: u32,
    pub m1: i32,
    pub m2: i32,
    pub m3: i32,
}

impl TripleIndex {
    pub fn new(l: [u32; 3], m: [i32; 3]) -> Self {
        TripleIndex {
            l1: l[0],
            l2: l[1],
            l3: l[2],
            m1: m[0],
            m2: m[1],
            m3: m[2],
        }
    }

    pub fn triangle(&self) -> bool {
        let (a, b, c) = (self.l1 as i64, self.l2 as i64, self.l3 as i64);
        (a - b).abs() <= c && c <= a + b
    }

    fn orders_valid(&self) -> bool {
        self.m1.unsigned_abs() <= self.l1
            && self.m2.unsigned_abs() <= self.l2
            && self.m3.unsigned_abs() <= self.l3
    }

    /// Selection rule of the Gaunt convention: triangle and `m1 + m2 = m3`.
    pub fn gaunt_selected(&self) -> bool {
        self.orders_valid() && self.triangle() && self.m1 + self.m2 == self.m3
    }

    /// Selection rule of the raw 3j symbol: triangle and `m1 + m2 + m3 = 0`.
    pub fn wigner_selected(&self) -> bool {
        self.orders_valid() && self.triangle() && self.m1 + self.m2 + self.m3 == 0
    }
}

/// `(l1 l2 l3; 0 0 0)` in closed form.
pub fn wigner3j_000(l1: u32, l2: u32, l3: u32) -> f64 {
    let t = TripleIndex::new([l1, l2, l3], [0, 0, 0]);
    if !t.triangle() {
        return 0.0;
    }
    let big = (l1 + l2 + l3) as u64;
    if big % 2 == 1 {
        return 0.0;
    }
    let g = big / 2;
    let (a, b, c) = (l1 as u64, l2 as u64, l3 as u64);
    let ln = 0.5
        * (ln_factorial(big - 2 * a) + ln_factorial(big - 2 * b) + ln_factorial(big - 2 * c)
            - ln_factorial(big + 1))
        + ln_factorial(g)
        - ln_factorial(g - a)
        - ln_factorial(g - b)
        - ln_factorial(g - c);
    let v = ln.exp();
    if g % 2 == 0 {
        v
    } else {
        -v
    }
}

/// Racah single-sum formula with log-factorials and compensated summation.
fn racah(t: &TripleIndex) -> f64 {
    let (j1, j2, j3) = (t.l1 as i64, t.l2 as i64, t.l3 as i64);
    let (m1, m2, m3) = (t.m1 as i64, t.m2 as i64, t.m3 as i64);
    let lf = |n: i64| ln_factorial(n as u64);
    let prefactor = 0.5
        * (lf(j1 + j2 - j3) + lf(j1 - j2 + j3) + lf(-j1 + j2 + j3) - lf(j1 + j2 + j3 + 1)
            + lf(j1 + m1)
            + lf(j1 - m1)
            + lf(j2 + m2)
            + lf(j2 - m2)
            + lf(j3 + m3)
            + lf(j3 - m3));
    let kmin = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let kmax = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = CompensatedSum::default();
    for k in kmin..=kmax {
        let denom = lf(k)
            + lf(j3 - j2 + k + m1)
            + lf(j3 - j1 + k - m2)
            + lf(j1 + j2 - j3 - k)
            + lf(j1 - k - m1)
            + lf(j2 - k + m2);
        let term = (prefactor - denom).exp();
        sum.add(if k % 2 == 0 { term } else { -term });
    }
    let phase = (j1 - j2 - m3).rem_euclid(2);
    if phase == 0 {
        sum.value()
    } else {
        -sum.value()
    }
}

/// All symbols `(j1 j2 j3; m1 m2 m3)` for fixed `j2, j3, m2, m3` and
/// `m1 = -m2 - m3`, over every admissible `j1`.
///
/// Returns `(j1min, values)` with `values[i]` the symbol at `j1 = j1min + i`,
/// or `None` when no `j1` is admissible. Uses the three-term recurrence in
/// `j1`, run forward from `j1min` up to the first magnitude maximum and
/// backward from `j1max`, matched by least squares on the overlap and
/// normalised by `Σ (2 j1 + 1) f² = 1`.
pub fn wigner3j_range(j2: u32, j3: u32, m2: i32, m3: i32) -> Option<(u32, Vec<f64>)> {
    if m2.unsigned_abs() > j2 || m3.unsigned_abs() > j3 {
        return None;
    }
    let m1 = -(m2 as i64) - m3 as i64;
    let j1min = (j2 as i64 - j3 as i64).abs().max(m1.abs());
    let j1max = j2 as i64 + j3 as i64;
    if j1min > j1max {
        return None;
    }
    let n = (j1max - j1min + 1) as usize;
    let sign_top = if (j2 as i64 - j3 as i64 - m1).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    };
    if n == 1 {
        let v = sign_top / ((2 * j1min + 1) as f64).sqrt();
        return Some((j1min as u32, vec![v]));
    }

    let (fj2, fj3) = (j2 as f64, j3 as f64);
    let (fm1, fm2, fm3) = (m1 as f64, m2 as f64, m3 as f64);
    let a = |j: f64| -> f64 {
        let d = fj2 - fj3;
        let s = fj2 + fj3 + 1.0;
        ((j * j - d * d) * (s * s - j * j) * (j * j - fm1 * fm1))
            .max(0.0)
            .sqrt()
    };
    let b = |j: f64| -> f64 {
        -(2.0 * j + 1.0)
            * (fj2 * (fj2 + 1.0) * fm1 - fj3 * (fj3 + 1.0) * fm1 - j * (j + 1.0) * (fm3 - fm2))
    };
    const HUGE: f64 = 1e150;

    // Backward sweep from j1max over the whole range (used above the match point).
    let mut back = vec![0.0; n];
    back[n - 1] = 1.0;
    {
        let j = j1max as f64;
        back[n - 2] = -b(j) * back[n - 1] / ((j + 1.0) * a(j));
    }
    // Forward sweep from j1min, unless j1min == 0 (degenerate start).
    let forward_start_ok = j1min > 0;
    let mut fwd = vec![0.0; n];
    let mut split = 0usize; // indices < split come from the forward sweep
    if forward_start_ok {
        fwd[0] = 1.0;
        let j = j1min as f64;
        fwd[1] = -b(j) * fwd[0] / (j * a(j + 1.0));
        split = 2;
        // advance until pair magnitude |f_i| + |f_{i-1}| stops increasing
        let mut i = 1;
        while i + 1 < n {
            let j = (j1min + i as i64) as f64;
            let next = -(b(j) * fwd[i] + (j + 1.0) * a(j) * fwd[i - 1]) / (j * a(j + 1.0));
            fwd[i + 1] = next;
            if fwd[i + 1].abs() > HUGE {
                for v in fwd.iter_mut().take(i + 2) {
                    *v /= HUGE;
                }
            }
            let cur = fwd[i + 1].abs() + fwd[i].abs();
            let prev = fwd[i].abs() + fwd[i - 1].abs();
            i += 1;
            split = i + 1;
            if cur < prev {
                break;
            }
        }
    }
    // Backward sweep down to (split - 3), keeping a 3-point overlap.
    let stop = split.saturating_sub(3);
    let mut i = n - 2;
    while i > stop {
        let j = (j1min + i as i64) as f64;
        // j A(j+1) f(j+1) + B(j) f(j) + (j+1) A(j) f(j-1) = 0
        let prev = -(j * a(j + 1.0) * back[i + 1] + b(j) * back[i]) / ((j + 1.0) * a(j));
        back[i - 1] = prev;
        if back[i - 1].abs() > HUGE {
            for v in back.iter_mut().skip(i - 1) {
                *v /= HUGE;
            }
        }
        i -= 1;
    }

    let mut f = vec![0.0; n];
    if split == 0 {
        f.copy_from_slice(&back);
    } else {
        let lo = split.saturating_sub(3);
        let hi = split.min(n);
        let (mut fg, mut gg) = (0.0, 0.0);
        for k in lo..hi {
            fg += fwd[k] * back[k];
            gg += back[k] * back[k];
        }
        let scale = if gg > 0.0 { fg / gg } else { 0.0 };
        for k in 0..n {
            f[k] = if k < split.saturating_sub(1) {
                fwd[k]
            } else {
                scale * back[k]
            };
        }
        if scale == 0.0 {
            // overlap entirely zero: use the backward sweep alone
            f.copy_from_slice(&back);
        }
    }
    let norm: f64 = f
        .iter()
        .enumerate()
        .map(|(k, v)| (2.0 * (j1min as f64 + k as f64) + 1.0) * v * v)
        .sum::<f64>()
        .sqrt();
    let s = if f[n - 1] * sign_top >= 0.0 { 1.0 } else { -1.0 };
    for v in &mut f {
        *v *= s / norm;
    }
    Some((j1min as u32, f))
}

/// Wigner-3j symbol `(l1 l2 l3; m1 m2 m3)`; zero when the selection rules fail.
pub fn wigner3j(t: TripleIndex) -> f64 {
    if !t.wigner_selected() {
        return 0.0;
    }
    if t.m1 == 0 && t.m2 == 0 && t.m3 == 0 {
        return wigner3j_000(t.l1, t.l2, t.l3);
    }
    if t.l1.max(t.l2).max(t.l3) <= RACAH_MAX_DEGREE {
        return racah(&t);
    }
    match wigner3j_range(t.l2, t.l3, t.m2, t.m3) {
        Some((j1min, v)) => v[(t.l1 - j1min) as usize],
        None => 0.0,
    }
}

/// Gaunt integral `∫ Y_{l1 m1} Y_{l2 m2} Y*_{l3 m3} dξ`.
pub fn gaunt(t: TripleIndex) -> f64 {
    if !t.gaunt_selected() {
        return 0.0;
    }
    let w0 = wigner3j_000(t.l1, t.l2, t.l3);
    if w0 == 0.0 {
        return 0.0;
    }
    let wm = wigner3j(TripleIndex::new([t.l1, t.l2, t.l3], [t.m1, t.m2, -t.m3]));
    let norm = ((2 * t.l1 + 1) as f64 * (2 * t.l2 + 1) as f64 * (2 * t.l3 + 1) as f64 / FOUR_PI)
        .sqrt();
    let phase = if t.m3.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    phase * norm * w0 * wm
}

/// Coefficient of `L_{l''}` in the product expansion `L_l L_{l'} = Σ α L_{l''}`.
pub fn alpha_coupling(l: u32, lp: u32, lpp: u32) -> f64 {
    let w = wigner3j_000(l, lp, lpp);
    (2 * l + 1) as f64 * (2 * lp + 1) as f64 / FOUR_PI * w * w
}

/// Gaunt integrals `∫ Y_{l1 m} Y_{l2 0} Y*_{l m} dξ` for fixed `l1`, `l`, `m`
/// over every admissible `l2`. Returns `(l2min, values)`.
pub(crate) fn gaunt_zonal_range(l1: u32, l: u32, m: i32) -> Option<(u32, Vec<f64>)> {
    // ∫ Y_{l1 m} Y_{l2 0} Y*_{l m} = (-1)^m sqrt(...) (l1 l2 l;000)(l1 l2 l; m 0 -m)
    // and (l1 l2 l; m 0 -m) = (-1)^{l1+l2+l} (l2 l1 l; 0 m -m); the parity
    // factor is +1 wherever (l1 l2 l;000) is nonzero.
    if m.unsigned_abs() > l1.min(l) {
        return None;
    }
    let (lo0, zero) = wigner3j_range(l1, l, 0, 0)?;
    let (lom, mm) = wigner3j_range(l1, l, m, -m)?;
    debug_assert_eq!(lo0, lom);
    let phase = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let base = ((2 * l1 + 1) as f64 * (2 * l + 1) as f64 / FOUR_PI).sqrt();
    let vals = zero
        .iter()
        .zip(&mm)
        .enumerate()
        .map(|(i, (z, w))| {
            let l2 = lo0 + i as u32;
            if (l1 + l2 + l) % 2 == 1 {
                0.0
            } else {
                phase * base * ((2 * l2 + 1) as f64).sqrt() * z * w
            }
        })
        .collect();
    Some((lo0, vals))
}
