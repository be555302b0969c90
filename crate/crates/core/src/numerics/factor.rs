//! Pivoted triangular factorizations: positive-definiteness screening,
//! determinants, and dense linear solves.

use rug::Float;

use super::SymMatrix;
use crate::error::NumericsError;
use crate::precision::PrecisionConfig;

/// Attempted pivoted Cholesky (LDL^T with symmetric max-diagonal pivoting).
/// Returns `true` iff the factorization completes with strictly positive
/// pivots, i.e. the matrix is positive definite up to rounding.
pub fn cholesky_pd(m: &SymMatrix, cfg: &PrecisionConfig) -> bool {
    let n = m.dim();
    let bits = cfg.bits();
    let mut a = m.to_dense();
    for k in 0..n {
        let mut pivot_row = k;
        for j in (k + 1)..n {
            if a[j][j] > a[pivot_row][pivot_row] {
                pivot_row = j;
            }
        }
        if pivot_row != k {
            symmetric_swap(&mut a, k, pivot_row);
        }
        let d = a[k][k].clone();
        if !(d.is_finite() && d.is_sign_positive() && !d.is_zero()) {
            return false;
        }
        for i in (k + 1)..n {
            let factor = Float::with_val(bits, &a[i][k] / &d);
            for j in (k + 1)..=i {
                let delta = Float::with_val(bits, &factor * &a[j][k]);
                let updated = Float::with_val(bits, &a[i][j] - &delta);
                a[i][j] = updated.clone();
                a[j][i] = updated;
            }
        }
    }
    true
}

fn symmetric_swap(a: &mut [Vec<Float>], p: usize, q: usize) {
    let n = a.len();
    for j in 0..n {
        let tmp = a[p][j].clone();
        a[p][j] = a[q][j].clone();
        a[q][j] = tmp;
    }
    for row in a.iter_mut().take(n) {
        let tmp = row[p].clone();
        row[p] = row[q].clone();
        row[q] = tmp;
    }
}

/// Determinant via LU with partial pivoting; exact zero pivots yield 0.
pub fn determinant(m: &SymMatrix, cfg: &PrecisionConfig) -> Float {
    let n = m.dim();
    let bits = cfg.bits();
    let mut a = m.to_dense();
    let mut det = Float::with_val(bits, 1u32);
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_abs = Float::with_val(bits, a[k][k].clone().abs());
        for i in (k + 1)..n {
            let cand = Float::with_val(bits, a[i][k].clone().abs());
            if cand > pivot_abs {
                pivot_abs = cand;
                pivot_row = i;
            }
        }
        if pivot_abs.is_zero() {
            return Float::new(bits);
        }
        if pivot_row != k {
            a.swap(k, pivot_row);
            det = -det;
        }
        det *= &a[k][k];
        for i in (k + 1)..n {
            let factor = Float::with_val(bits, &a[i][k] / &a[k][k]);
            for j in (k + 1)..n {
                let delta = Float::with_val(bits, &factor * &a[k][j]);
                a[i][j] -= delta;
            }
        }
    }
    det
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(
    mut a: Vec<Vec<Float>>,
    mut b: Vec<Float>,
    cfg: &PrecisionConfig,
) -> Result<Vec<Float>, NumericsError> {
    let n = a.len();
    let bits = cfg.bits();
    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_abs = Float::with_val(bits, a[k][k].clone().abs());
        for i in (k + 1)..n {
            let cand = Float::with_val(bits, a[i][k].clone().abs());
            if cand > pivot_abs {
                pivot_abs = cand;
                pivot_row = i;
            }
        }
        if pivot_abs.is_zero() {
            return Err(NumericsError::SingularSystem { dim: n });
        }
        if pivot_row != k {
            a.swap(k, pivot_row);
            b.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let factor = Float::with_val(bits, &a[i][k] / &a[k][k]);
            for j in (k + 1)..n {
                let delta = Float::with_val(bits, &factor * &a[k][j]);
                a[i][j] -= delta;
            }
            let delta = Float::with_val(bits, &factor * &b[k]);
            b[i] -= delta;
        }
    }
    let mut x = vec![Float::new(bits); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for j in (k + 1)..n {
            acc -= Float::with_val(bits, &a[k][j] * &x[j]);
        }
        x[k] = Float::with_val(bits, &acc / &a[k][k]);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(128).unwrap()
    }

    #[test]
    fn cholesky_accepts_pd_and_rejects_indefinite() {
        let cfg = cfg();
        let pd = SymMatrix::from_fn(2, &cfg, |i, j| {
            cfg.float_from_i64(if i == j { 2 } else { 1 })
        });
        assert!(cholesky_pd(&pd, &cfg));
        let indef = SymMatrix::diagonal(&[cfg.float_from_i64(1), cfg.float_from_i64(-1)], &cfg);
        assert!(!cholesky_pd(&indef, &cfg));
    }

    #[test]
    fn determinant_of_hilbert_3x3() {
        let cfg = cfg();
        let m = SymMatrix::from_fn(3, &cfg, |i, j| {
            Float::with_val(cfg.bits(), 1u32) / Float::with_val(cfg.bits(), (i + j + 1) as u32)
        });
        let det = determinant(&m, &cfg);
        let exact = Float::with_val(cfg.bits(), 1u32) / 2160u32;
        let diff = Float::with_val(cfg.bits(), &det - &exact).abs();
        assert!(diff.to_f64() < 1e-35);
    }

    #[test]
    fn solve_roundtrip() {
        let cfg = cfg();
        let a = vec![
            vec![cfg.float_from_i64(2), cfg.float_from_i64(1)],
            vec![cfg.float_from_i64(1), cfg.float_from_i64(3)],
        ];
        let b = vec![cfg.float_from_i64(5), cfg.float_from_i64(10)];
        let x = solve_dense(a, b, &cfg).unwrap();
        assert!((x[0].to_f64() - 1.0).abs() < 1e-30);
        assert!((x[1].to_f64() - 3.0).abs() < 1e-30);
    }
}
