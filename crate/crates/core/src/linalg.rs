//! Dense symmetric matrices, inertia counting and banded solves.
//!
//! Loop Hessians couple each sample only to its two neighbours on a cycle.
//! Under a zig-zag ordering of the cycle the matrix is banded, and both the
//! inertia count and the Newton solve run in `O(n b^2)`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot {pivot} at step {step})")]
    Singular { step: usize, pivot: usize },
    #[error("dimension mismatch")]
    Dimension,
}

/// Dense symmetric matrix, row-major full storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    /// Adds `v` to `(i, j)` and, off the diagonal, to `(j, i)`.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
        if i != j {
            self.data[j * self.n + i] += v;
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `P A P^T` where row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> SymMatrix {
        let n = self.n;
        let mut out = SymMatrix::zeros(n);
        for (a, &pa) in perm.iter().enumerate() {
            let src = self.row(pa);
            let dst = &mut out.data[a * n..(a + 1) * n];
            for (b, &pb) in perm.iter().enumerate() {
                dst[b] = src[pb];
            }
        }
        out
    }

    /// Largest `|i - j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        let n = self.n;
        let mut bw = 0;
        for i in 0..n {
            let row = self.row(i);
            if let Some(last) = row.iter().rposition(|&v| v != 0.0) {
                bw = bw.max(last.saturating_sub(i));
            }
        }
        bw
    }
}

/// Counts of eigenvalues below `-tol`, within `[-tol, tol]`, above `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// Which route produced an inertia count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InertiaRoute {
    BandedLdlt,
    TridiagonalSturm,
}

/// Negative pivot count of the unpivoted `LDL^T` of `A - shift I`, or
/// `None` when a pivot is tiny or the multipliers grow.
fn banded_negative_count(a: &SymMatrix, shift: f64, bw: usize) -> Option<usize> {
    let n = a.dim();
    let scale = a.max_abs().max(shift.abs()).max(f64::MIN_POSITIVE);
    let mut w = a.clone();
    for i in 0..n {
        w.data[i * n + i] -= shift;
    }
    let mut negatives = 0;
    for k in 0..n {
        let d = w.data[k * n + k];
        if !d.is_finite() || d.abs() <= 1e-13 * scale {
            return None;
        }
        if d < 0.0 {
            negatives += 1;
        }
        let end = (k + bw + 1).min(n);
        for i in k + 1..end {
            let l = w.data[i * n + k] / d;
            if l == 0.0 {
                continue;
            }
            if l.abs() > 1e8 {
                return None;
            }
            for j in k + 1..=i {
                let v = w.data[j * n + k];
                if v != 0.0 {
                    w.data[i * n + j] -= l * v;
                }
            }
        }
    }
    Some(negatives)
}

/// Householder reduction to tridiagonal form: `(diagonal, off_diagonal)`.
pub fn tridiagonalize(a: &SymMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    let mut m = a.data.clone();
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(2) {
        let mut alpha2 = 0.0;
        for i in k + 1..n {
            alpha2 += m[i * n + k] * m[i * n + k];
        }
        let x0 = m[(k + 1) * n + k];
        let alpha = if x0 >= 0.0 {
            -libm::sqrt(alpha2)
        } else {
            libm::sqrt(alpha2)
        };
        off[k] = alpha;
        if alpha2 == 0.0 {
            continue;
        }
        // v = x - alpha e1, H = I - 2 v v^T / (v^T v)
        let mut v = vec![0.0; n];
        for i in k + 1..n {
            v[i] = m[i * n + k];
        }
        v[k + 1] -= alpha;
        let vtv: f64 = v[k + 1..].iter().map(|t| t * t).sum();
        if vtv == 0.0 {
            continue;
        }
        let beta = 2.0 / vtv;
        // p = beta A v ; w = p - (beta/2)(v^T p) v ; A -= v w^T + w v^T
        let mut p = vec![0.0; n];
        for i in k + 1..n {
            let row = &m[i * n..(i + 1) * n];
            p[i] = beta * (k + 1..n).map(|j| row[j] * v[j]).sum::<f64>();
        }
        let vp: f64 = (k + 1..n).map(|i| v[i] * p[i]).sum();
        let c = 0.5 * beta * vp;
        for i in k + 1..n {
            p[i] -= c * v[i];
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i * n + j] -= v[i] * p[j] + p[i] * v[j];
            }
        }
    }
    if n >= 2 {
        off[n - 2] = m[(n - 1) * n + (n - 2)];
    }
    let diag = (0..n).map(|i| m[i * n + i]).collect();
    (diag, off)
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below `sigma`.
pub fn sturm_count(diag: &[f64], off: &[f64], sigma: f64) -> usize {
    let scale = diag
        .iter()
        .chain(off)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * scale;
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - sigma - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Inertia via full tridiagonal reduction and Sturm counts.
pub fn inertia_dense(a: &SymMatrix, tol: f64) -> Inertia {
    let (d, e) = tridiagonalize(a);
    let negative = sturm_count(&d, &e, -tol);
    let at_most_tol = sturm_count(&d, &e, tol);
    // Sturm counts eigenvalues strictly below sigma; eigenvalues exactly at
    // +tol fall on the zero side, which is immaterial at this resolution.
    Inertia {
        negative,
        zero: at_most_tol - negative,
        positive: a.dim() - at_most_tol,
    }
}

/// Inertia of `a` with respect to `tol`. `ordering` is a permutation under
/// which `a` is banded; the banded `LDL^T` route is tried first and a dense
/// tridiagonal route is used on breakdown.
pub fn inertia(a: &SymMatrix, tol: f64, ordering: Option<&[usize]>) -> (Inertia, InertiaRoute) {
    let permuted;
    let b = match ordering {
        Some(p) => {
            permuted = a.permuted(p);
            &permuted
        }
        None => a,
    };
    let bw = b.bandwidth();
    let neg = banded_negative_count(b, -tol, bw);
    let below_pos = banded_negative_count(b, tol, bw);
    match (neg, below_pos) {
        (Some(negative), Some(below)) if below >= negative => (
            Inertia {
                negative,
                zero: below - negative,
                positive: b.dim() - below,
            },
            InertiaRoute::BandedLdlt,
        ),
        _ => (inertia_dense(a, tol), InertiaRoute::TridiagonalSturm),
    }
}

/// Solves `a x = rhs` by banded Gaussian elimination with partial pivoting
/// after permuting with `ordering` (same convention as [`SymMatrix::permuted`]).
pub fn solve_banded(a: &SymMatrix, rhs: &[f64], ordering: &[usize]) -> Result<Vec<f64>, LinalgError> {
    let n = a.dim();
    if rhs.len() != n || ordering.len() != n {
        return Err(LinalgError::Dimension);
    }
    let mut m = a.permuted(ordering).data;
    let bw = SymMatrix { n, data: m.clone() }.bandwidth();
    let mut b: Vec<f64> = ordering.iter().map(|&p| rhs[p]).collect();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE);
    // Row swaps can push fill up to 2 * bw above the diagonal.
    let upper = 2 * bw;
    for k in 0..n {
        let last_row = (k + bw + 1).min(n);
        let mut piv = k;
        let mut best = m[k * n + k].abs();
        for i in k + 1..last_row {
            let v = m[i * n + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if !(best > 1e-13 * scale) {
            return Err(LinalgError::Singular { step: k, pivot: piv });
        }
        let last_col = (k + upper + 1).min(n);
        if piv != k {
            for j in k..last_col {
                m.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let d = m[k * n + k];
        for i in k + 1..last_row {
            let l = m[i * n + k] / d;
            if l == 0.0 {
                continue;
            }
            m[i * n + k] = 0.0;
            for j in k + 1..last_col {
                m[i * n + j] -= l * m[k * n + j];
            }
            b[i] -= l * b[k];
        }
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let last_col = (k + upper + 1).min(n);
        let mut acc = b[k];
        for j in k + 1..last_col {
            acc -= m[k * n + j] * y[j];
        }
        y[k] = acc / m[k * n + k];
    }
    let mut x = vec![0.0; n];
    for (k, &p) in ordering.iter().enumerate() {
        x[p] = y[k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Cyclic tridiagonal test matrix with a chosen diagonal.
    fn cyclic(n: usize, diag: f64, off: f64) -> SymMatrix {
        let mut a = SymMatrix::zeros(n);
        for i in 0..n {
            a.set(i, i, diag);
            a.set(i, (i + 1) % n, off);
        }
        a
    }

    fn zigzag(n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        let (mut lo, mut hi) = (0usize, n - 1);
        while lo <= hi {
            out.push(lo);
            if hi != lo {
                out.push(hi);
            }
            lo += 1;
            if hi == 0 {
                break;
            }
            hi -= 1;
        }
        out
    }

    #[test]
    fn cyclic_laplacian_inertia() {
        // Eigenvalues 2 - 2 cos(2 pi k / n) - c: discrete circle spectrum.
        let n = 40;
        let c = 0.1;
        let a = cyclic(n, 2.0 - c, -1.0);
        let expected_neg = (0..n)
            .filter(|k| 2.0 - 2.0 * libm::cos(core::f64::consts::TAU * *k as f64 / n as f64) - c < -1e-9)
            .count();
        let perm = zigzag(n);
        assert!(a.permuted(&perm).bandwidth() <= 2);
        let (i1, route) = inertia(&a, 1e-9, Some(&perm));
        assert_eq!(route, InertiaRoute::BandedLdlt);
        assert_eq!(i1.negative, expected_neg);
        assert_eq!(i1.zero, 0);
        assert_eq!(inertia_dense(&a, 1e-9), i1);
    }

    #[test]
    fn singular_laplacian_has_one_zero() {
        let a = cyclic(16, 2.0, -1.0);
        let perm = zigzag(16);
        let (inn, _) = inertia(&a, 1e-9, Some(&perm));
        assert_eq!(
            inn,
            Inertia {
                negative: 0,
                zero: 1,
                positive: 15
            }
        );
        assert_eq!(inertia_dense(&a, 1e-9), inn);
        assert!(matches!(
            solve_banded(&a, &[1.0; 16], &perm),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn banded_solve_matches_residual() {
        let n = 30;
        let mut a = cyclic(n, 0.3, -1.0);
        a.set(3, 3, -4.0);
        let perm = zigzag(n);
        let rhs: Vec<f64> = (0..n).map(|i| libm::sin(i as f64)).collect();
        let x = solve_banded(&a, &rhs, &perm).unwrap();
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&rhs) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_pivot_falls_back() {
        // Leading zero pivot breaks unpivoted LDL^T.
        let mut a = SymMatrix::zeros(3);
        a.set(0, 1, 1.0);
        a.set(2, 2, 1.0);
        let (inn, route) = inertia(&a, 0.0, None);
        assert_eq!(route, InertiaRoute::TridiagonalSturm);
        assert_eq!(
            inn,
            Inertia {
                negative: 1,
                zero: 0,
                positive: 2
            }
        );
    }
}
