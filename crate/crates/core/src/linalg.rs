//! Small dense linear-algebra kernels.

use crate::scalar::Real;

/// Largest singular value of a dense row-major matrix, by power iteration
/// on `AᵀA` until the Rayleigh quotient moves by less than `rel_tol`
/// (relative).
pub fn spectral_norm<T: Real>(a: &[Vec<T>], rel_tol: T, max_iter: usize) -> T {
    let rows = a.len();
    if rows == 0 {
        return T::zero();
    }
    let cols = a[0].len();
    if cols == 0 || a.iter().all(|r| r.iter().all(|x| *x == T::zero())) {
        return T::zero();
    }
    // A deterministic start with no symmetry, so it is not orthogonal to
    // the top singular vector except by accident.
    let mut v: Vec<T> = (0..cols)
        .map(|j| T::one() + T::lit(0.37) * T::count((j * 7 + 3) % 11) / T::lit(11.0))
        .collect();
    normalize(&mut v);
    let mut lambda = T::zero();
    let mut av = vec![T::zero(); rows];
    for _ in 0..max_iter {
        mat_vec(a, &v, &mut av);
        let mut w = vec![T::zero(); cols];
        for (i, row) in a.iter().enumerate() {
            for (wj, aij) in w.iter_mut().zip(row) {
                *wj = *wj + *aij * av[i];
            }
        }
        // Rayleigh quotient vᵀAᵀAv = |Av|²
        let next: T = av.iter().map(|x| *x * *x).sum();
        let norm_w = w.iter().map(|x| *x * *x).sum::<T>().sqrt();
        if norm_w == T::zero() {
            return next.sqrt();
        }
        for x in &mut w {
            *x = *x / norm_w;
        }
        v = w;
        if (next - lambda).abs() <= rel_tol * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    mat_vec(a, &v, &mut av);
    let last: T = av.iter().map(|x| *x * *x).sum();
    lambda.max(last).sqrt()
}

/// `max_j Σ_i |a_ij|`, the operator norm induced by `ℓ₁` on column vectors.
pub fn max_column_sum<T: Real>(a: &[Vec<T>]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j].abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

/// `max_i Σ_j |a_ij|`.
pub fn max_row_sum<T: Real>(a: &[Vec<T>]) -> T {
    a.iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

fn mat_vec<T: Real>(a: &[Vec<T>], v: &[T], out: &mut [T]) {
    for (o, row) in out.iter_mut().zip(a) {
        *o = row.iter().zip(v).map(|(x, y)| *x * *y).sum();
    }
}

fn normalize<T: Real>(v: &mut [T]) {
    let n = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
    if n > T::zero() {
        for x in v {
            *x = *x / n;
        }
    }
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `tiny` (relative to the
/// largest entry of `M`).
pub fn solve_dense<T: Real>(mut m: Vec<Vec<T>>, mut b: Vec<T>, tiny: T) -> Option<Vec<T>> {
    let n = b.len();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .fold(T::zero(), |acc, x| acc.max(x.abs()));
    if scale == T::zero() {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[piv][col].abs() <= tiny * scale {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != T::zero() {
                for c in col..n {
                    let sub = f * m[col][c];
                    m[r][c] = m[r][c] - sub;
                }
                b[r] = b[r] - f * b[col];
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / m[r][r];
    }
    Some(x)
}
