//! Cyclic Jacobi diagonalization for symmetric matrices.
//!
//! Jacobi rotations are exact to working precision and deliver full
//! eigenvectors, which the cutting loop consumes as constraint generators.
//! Dimensions here stay small (a few dozen), so no faster scheme is needed.

use rug::Float;

use super::SymMatrix;
use crate::error::NumericsError;
use crate::precision::PrecisionConfig;

const MAX_SWEEPS: usize = 96;

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in ascending order.
    pub values: Vec<Float>,
    /// `vectors[k]` is the unit eigenvector paired with `values[k]`.
    pub vectors: Vec<Vec<Float>>,
}

/// Full symmetric eigendecomposition. Every returned pair satisfies
/// `||M v - lambda v||_inf <= psd_tolerance * (1 + ||M||_inf)`.
pub fn symmetric_eigen(
    m: &SymMatrix,
    cfg: &PrecisionConfig,
) -> Result<EigenDecomposition, NumericsError> {
    let n = m.dim();
    let bits = cfg.bits();
    let scale = m.tolerance_scale();
    let residual_cap = Float::with_val(bits, cfg.psd_tolerance() * &scale);
    // Converge the off-diagonal mass well below the residual cap; the cheap
    // post-check below catches the rare case where this is not enough.
    let stop = Float::with_val(bits, &residual_cap / (8 * n as u32));

    let mut a = m.to_dense();
    let mut v: Vec<Vec<Float>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Float::with_val(bits, i32::from(i == j)))
                .collect()
        })
        .collect();

    let mut sweeps = 0;
    loop {
        let off = max_offdiag(&a, bits);
        if off <= stop {
            let dec = sorted_decomposition(&a, &v, bits);
            if residuals_ok(m, &dec, &residual_cap, bits) {
                return Ok(dec);
            }
            // Off-diagonals small but residual still above the cap: tighten.
        }
        if sweeps >= MAX_SWEEPS {
            let dec = sorted_decomposition(&a, &v, bits);
            return Err(NumericsError::EigenNonConvergence {
                sweeps,
                best_offdiag: off.to_f64(),
                required: stop.to_f64(),
                best_values: dec.values.iter().map(Float::to_f64).collect(),
            });
        }
        sweeps += 1;
        sweep(&mut a, &mut v, bits, &stop);
    }
}

/// Minimal eigenpair of a symmetric matrix.
pub fn symmetric_min_eigpair(
    m: &SymMatrix,
    cfg: &PrecisionConfig,
) -> Result<(Float, Vec<Float>), NumericsError> {
    let dec = symmetric_eigen(m, cfg)?;
    Ok((dec.values[0].clone(), dec.vectors[0].clone()))
}

fn max_offdiag(a: &[Vec<Float>], bits: u32) -> Float {
    let n = a.len();
    let mut best = Float::new(bits);
    for p in 0..n {
        for q in (p + 1)..n {
            let abs = Float::with_val(bits, a[p][q].clone().abs());
            if abs > best {
                best = abs;
            }
        }
    }
    best
}

fn sweep(a: &mut [Vec<Float>], v: &mut [Vec<Float>], bits: u32, stop: &Float) {
    let n = a.len();
    // Rotating entries already far below the stop threshold only churns
    // rounding noise.
    let skip = Float::with_val(bits, stop / 16u32);
    for p in 0..n {
        for q in (p + 1)..n {
            let apq = a[p][q].clone();
            if Float::with_val(bits, apq.clone().abs()) <= skip {
                continue;
            }
            // theta = (a_qq - a_pp) / (2 a_pq); t = sgn(theta)/(|theta| + sqrt(theta^2+1))
            let diff = Float::with_val(bits, &a[q][q] - &a[p][p]);
            let theta = Float::with_val(bits, &diff / &Float::with_val(bits, 2 * &apq));
            let theta_abs = Float::with_val(bits, theta.clone().abs());
            let root = Float::with_val(bits, theta.clone().square() + 1u32).sqrt();
            let denom = Float::with_val(bits, &theta_abs + &root);
            let mut t = Float::with_val(bits, 1u32) / denom;
            if theta.is_sign_negative() && !theta.is_zero() {
                t = -t;
            }
            let c = (Float::with_val(bits, t.clone().square() + 1u32)).sqrt().recip();
            let s = Float::with_val(bits, &t * &c);

            let tapq = Float::with_val(bits, &t * &apq);
            let app = Float::with_val(bits, &a[p][p] - &tapq);
            let aqq = Float::with_val(bits, &a[q][q] + &tapq);
            a[p][p] = app;
            a[q][q] = aqq;
            a[p][q] = Float::new(bits);
            a[q][p] = Float::new(bits);
            for k in 0..n {
                if k == p || k == q {
                    continue;
                }
                let akp = a[k][p].clone();
                let akq = a[k][q].clone();
                let new_p = Float::with_val(bits, &c * &akp) - Float::with_val(bits, &s * &akq);
                let new_q = Float::with_val(bits, &s * &akp) + Float::with_val(bits, &c * &akq);
                a[k][p] = new_p.clone();
                a[p][k] = new_p;
                a[k][q] = new_q.clone();
                a[q][k] = new_q;
            }
            for row in v.iter_mut() {
                let vp = row[p].clone();
                let vq = row[q].clone();
                row[p] = Float::with_val(bits, &c * &vp) - Float::with_val(bits, &s * &vq);
                row[q] = Float::with_val(bits, &s * &vp) + Float::with_val(bits, &c * &vq);
            }
        }
    }
}

fn sorted_decomposition(a: &[Vec<Float>], v: &[Vec<Float>], bits: u32) -> EigenDecomposition {
    let n = a.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].partial_cmp(&a[j][j]).expect("eigenvalues are finite"));
    let values = order.iter().map(|&i| a[i][i].clone()).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut vec: Vec<Float> = (0..n).map(|row| v[row][col].clone()).collect();
            normalize(&mut vec, bits);
            vec
        })
        .collect();
    EigenDecomposition { values, vectors }
}

fn normalize(vec: &mut [Float], bits: u32) {
    let mut norm = Float::new(bits);
    for x in vec.iter() {
        norm += Float::with_val(bits, x.clone().square());
    }
    let norm = norm.sqrt();
    if norm.is_zero() {
        return;
    }
    for x in vec.iter_mut() {
        *x /= &norm;
    }
}

fn residuals_ok(m: &SymMatrix, dec: &EigenDecomposition, cap: &Float, bits: u32) -> bool {
    for (value, vector) in dec.values.iter().zip(dec.vectors.iter()) {
        let mv = m.mul_vec(vector);
        for (mv_k, v_k) in mv.iter().zip(vector.iter()) {
            let r = Float::with_val(bits, mv_k - &Float::with_val(bits, value * v_k)).abs();
            if r > *cap {
                return false;
            }
        }
    }
    true
}
