//! Dense linear-algebra helpers on flat row-major buffers.
//!
//! Everything in this crate works with tiny matrices (feature dimension d,
//! or |C|*J LP columns), so plain `Vec<f64>` routines beat pulling in a
//! matrix library.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y = A x for a square row-major `n x n` matrix.
pub fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(x.len(), n);
    (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}

/// A += scale * x x^T (symmetric rank-one update).
pub fn add_outer(a: &mut [f64], n: usize, x: &[f64], scale: f64) {
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] += scale * x[i] * x[j];
        }
    }
}

/// x^T A x.
pub fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    dot(x, &mat_vec(a, n, x))
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or
/// `None` if a pivot drops below zero.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve A x = b given the lower Cholesky factor of A.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    // forward substitution L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    // back substitution L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, n)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let x = cholesky_solve(&l, n, &e);
        e[col] = 0.0;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

/// max |A B - I| over all entries.
pub fn inverse_drift(a: &[f64], b: &[f64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

/// Solve a general square system by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is (numerically) singular.
pub fn solve_general(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[piv * n + col].abs() {
                piv = row;
            }
        }
        if m[piv * n + col].abs() < 1e-12 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            rhs.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i * n + i]).collect())
}
