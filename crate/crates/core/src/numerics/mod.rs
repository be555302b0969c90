//! Extended-precision dense kernels: symmetric eigen-solving, positive
//! definiteness probes, determinants, and a small Chebyshev-center LP solver.

mod eigen;
mod factor;
mod lp;

pub use eigen::{symmetric_eigen, symmetric_min_eigpair, EigenDecomposition};
pub use factor::{cholesky_pd, determinant, solve_dense};
pub use lp::{
    lp_feasible_point, ChebyshevSolver, InfeasibilityCertificate, LinearCut, LinearProgram,
    LpOutcome, RowRef,
};

use rug::Float;

use crate::error::NumericsError;
use crate::precision::PrecisionConfig;

/// Dense symmetric matrix with packed lower-triangular storage, so
/// `entry(i, j) == entry(j, i)` holds exactly by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    bits: u32,
    data: Vec<Float>,
}

impl SymMatrix {
    pub fn zeros(dim: usize, cfg: &PrecisionConfig) -> Self {
        assert!(dim >= 1, "matrix dimension must be positive");
        let data = vec![Float::new(cfg.bits()); dim * (dim + 1) / 2];
        Self { dim, bits: cfg.bits(), data }
    }

    /// Builds from a function over the lower triangle (`i >= j`).
    pub fn from_fn(dim: usize, cfg: &PrecisionConfig, mut f: impl FnMut(usize, usize) -> Float) -> Self {
        let mut m = Self::zeros(dim, cfg);
        for i in 0..dim {
            for j in 0..=i {
                let idx = m.index(i, j);
                m.data[idx] = Float::with_val(cfg.bits(), f(i, j));
            }
        }
        m
    }

    pub fn diagonal(entries: &[Float], cfg: &PrecisionConfig) -> Self {
        let mut m = Self::zeros(entries.len(), cfg);
        for (i, v) in entries.iter().enumerate() {
            m.set(i, i, Float::with_val(cfg.bits(), v));
        }
        m
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        r * (r + 1) / 2 + c
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn entry(&self, i: usize, j: usize) -> &Float {
        &self.data[self.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Float) {
        let idx = self.index(i, j);
        self.data[idx] = v;
    }

    pub fn add_assign_scaled(&mut self, other: &SymMatrix, factor: &Float) {
        assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += Float::with_val(self.bits, b * factor);
        }
    }

    /// Induced infinity norm (maximal absolute row sum).
    pub fn inf_norm(&self) -> Float {
        let mut best = Float::new(self.bits);
        for i in 0..self.dim {
            let mut row = Float::new(self.bits);
            for j in 0..self.dim {
                row += Float::with_val(self.bits, self.entry(i, j).clone().abs());
            }
            if row > best {
                best = row;
            }
        }
        best
    }

    /// `1 + ||M||_inf`, the scale used by relative tolerances.
    pub fn tolerance_scale(&self) -> Float {
        let mut s = self.inf_norm();
        s += 1;
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<Float>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.entry(i, j).clone()).collect())
            .collect()
    }

    /// `M v` as a fresh vector.
    pub fn mul_vec(&self, v: &[Float]) -> Vec<Float> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let mut acc = Float::new(self.bits);
                for j in 0..self.dim {
                    acc += Float::with_val(self.bits, self.entry(i, j) * &v[j]);
                }
                acc
            })
            .collect()
    }

    /// Quadratic form `cᵀ M c`.
    pub fn quadratic_form(&self, c: &[Float]) -> Float {
        let mv = self.mul_vec(c);
        let mut acc = Float::new(self.bits);
        for (a, b) in c.iter().zip(mv.iter()) {
            acc += Float::with_val(self.bits, a * b);
        }
        acc
    }
}

/// Result of a positive-definiteness probe.
#[derive(Debug, Clone)]
pub enum PsdOutcome {
    Pass,
    /// The minimal eigenpair violating positivity; `witness` is the
    /// polynomial coefficient vector realising the negative quadratic form.
    Fail { eigenvalue: Float, witness: Vec<Float> },
}

impl PsdOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, PsdOutcome::Pass)
    }
}

/// Eigenvalue-based positivity test: passes iff the minimal eigenvalue is
/// at least `-psd_tolerance * (1 + ||M||_inf)`.
pub fn psd_test(m: &SymMatrix, cfg: &PrecisionConfig) -> Result<PsdOutcome, NumericsError> {
    let (value, vector) = symmetric_min_eigpair(m, cfg)?;
    let threshold = -Float::with_val(cfg.bits(), cfg.psd_tolerance() * &m.tolerance_scale());
    if value >= threshold {
        Ok(PsdOutcome::Pass)
    } else {
        Ok(PsdOutcome::Fail { eigenvalue: value, witness: vector })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(128).unwrap()
    }

    #[test]
    fn symmetric_storage_is_exact() {
        let cfg = cfg();
        let mut m = SymMatrix::zeros(3, &cfg);
        m.set(2, 0, cfg.float_from_f64(0.25));
        assert_eq!(m.entry(0, 2), m.entry(2, 0));
        assert_eq!(m.entry(0, 2).to_f64(), 0.25);
    }

    #[test]
    fn inf_norm_is_max_row_sum() {
        let cfg = cfg();
        let mut m = SymMatrix::zeros(2, &cfg);
        m.set(0, 0, cfg.float_from_i64(1));
        m.set(1, 0, cfg.float_from_i64(-3));
        m.set(1, 1, cfg.float_from_i64(2));
        assert_eq!(m.inf_norm().to_f64(), 5.0);
    }

    #[test]
    fn psd_test_diagonal_cases() {
        let cfg = cfg();
        let pass = psd_test(
            &SymMatrix::diagonal(&[cfg.float_from_i64(1), cfg.float_from_i64(1)], &cfg),
            &cfg,
        )
        .unwrap();
        assert!(pass.passed());

        let fail = psd_test(
            &SymMatrix::diagonal(&[cfg.float_from_i64(1), cfg.float_from_i64(-1)], &cfg),
            &cfg,
        )
        .unwrap();
        match fail {
            PsdOutcome::Fail { eigenvalue, witness } => {
                assert!((eigenvalue.to_f64() + 1.0).abs() < 1e-30);
                assert!(witness[0].to_f64().abs() < 1e-30);
                assert!((witness[1].to_f64().abs() - 1.0).abs() < 1e-30);
            }
            PsdOutcome::Pass => panic!("diag(1,-1) must fail the positivity test"),
        }
    }
}
