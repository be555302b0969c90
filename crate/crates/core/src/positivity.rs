//! Positivity constraint families and their quadratic forms.
//!
//! Each family entry is a weight polynomial over the moment lattice; pairing
//! it with a coefficient table turns positivity of the weighted measure into
//! symmetric matrices that are affine in the free missing moments. Violating
//! eigenvectors of those matrices become linear cuts in missing-moment space.

use std::collections::BTreeMap;

use rug::{Float, Rational};

use crate::error::MomentError;
use crate::moments::{MomentKey, NormalizedTable};
use crate::numerics::SymMatrix;
use crate::precision::PrecisionConfig;

/// One weight polynomial: a list of `(coefficient, lattice shift)` monomials.
#[derive(Debug, Clone)]
pub struct FamilyEntry {
    pub terms: Vec<(Rational, MomentKey)>,
}

/// An indexed family of weight polynomials defining the positivity
/// constraints of one moment problem.
#[derive(Debug, Clone)]
pub struct ConstraintFamily {
    pub dimension: usize,
    pub entries: Vec<FamilyEntry>,
}

impl ConstraintFamily {
    /// Whole-line problem: the single unshifted Hankel form.
    pub fn hamburger() -> Self {
        Self {
            dimension: 1,
            entries: vec![FamilyEntry {
                terms: vec![(Rational::from(1), MomentKey::one(0))],
            }],
        }
    }

    /// Half-line problem: unshifted plus once-shifted Hankel forms.
    pub fn stieltjes() -> Self {
        Self {
            dimension: 1,
            entries: vec![
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::one(0))] },
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::one(1))] },
            ],
        }
    }

    /// Bounded-interval problem on `[0, L^2]`: the Stieltjes pair plus the
    /// complementary weight `L^2 - y`.
    pub fn hausdorff(length: &Rational) -> Self {
        let l2 = Rational::from(length * length);
        Self {
            dimension: 1,
            entries: vec![
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::one(0))] },
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::one(1))] },
                FamilyEntry {
                    terms: vec![
                        (l2, MomentKey::one(0)),
                        (Rational::from(-1), MomentKey::one(1)),
                    ],
                },
            ],
        }
    }

    /// Triangular planar domain `{w >= 0, v >= 0, w + v <= a^2}` with unit
    /// base radius: weights `1, w, v, a^2 - w - v`.
    pub fn lens_triangle() -> Self {
        Self {
            dimension: 2,
            entries: vec![
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::two(0, 0))] },
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::two(1, 0))] },
                FamilyEntry { terms: vec![(Rational::from(1), MomentKey::two(0, 1))] },
                FamilyEntry {
                    terms: vec![
                        (Rational::from(1), MomentKey::two(0, 0)),
                        (Rational::from(-1), MomentKey::two(1, 0)),
                        (Rational::from(-1), MomentKey::two(0, 1)),
                    ],
                },
            ],
        }
    }

    /// Polynomial basis indexing the quadratic form of order `I`: powers
    /// `0..=I` on a line, row-major `(i, j) in [0, I]^2` on the plane.
    pub fn form_basis(&self, order: usize) -> Vec<MomentKey> {
        match self.dimension {
            1 => (0..=order as u32).map(MomentKey::one).collect(),
            _ => {
                let mut keys = Vec::with_capacity((order + 1) * (order + 1));
                for i in 0..=order as u32 {
                    for j in 0..=order as u32 {
                        keys.push(MomentKey::two(i, j));
                    }
                }
                keys
            }
        }
    }
}

/// Quadratic form affine in the free missing moments:
/// `M(chi) = constant + sum_l chi_l * coeffs[l]`.
#[derive(Debug, Clone)]
pub struct AffineForm {
    pub family_index: usize,
    pub energy: Float,
    pub basis: Vec<MomentKey>,
    pub constant: SymMatrix,
    pub coeffs: Vec<SymMatrix>,
}

impl AffineForm {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// One linear inequality `sum_l coeffs[l] * chi_l < bound` in free-moment
/// space, produced from a quadratic-form vector.
#[derive(Debug, Clone)]
pub struct Cut {
    pub coeffs: Vec<Float>,
    pub bound: Float,
    pub provenance: CutProvenance,
}

#[derive(Debug, Clone)]
pub struct CutProvenance {
    pub family_index: usize,
    pub vector: Vec<Float>,
    pub energy: Float,
}

/// Assembles one affine form per family entry at the given order.
pub fn assemble_forms(
    family: &ConstraintFamily,
    table: &NormalizedTable,
    order: usize,
    cfg: &PrecisionConfig,
) -> Result<Vec<AffineForm>, MomentError> {
    let basis = family.form_basis(order);
    let dim = basis.len();
    let free = table.free_count();
    let bits = cfg.bits();
    let mut forms = Vec::with_capacity(family.entries.len());
    for (family_index, entry) in family.entries.iter().enumerate() {
        let mut constant = SymMatrix::zeros(dim, cfg);
        let mut coeffs = vec![SymMatrix::zeros(dim, cfg); free];
        for r in 0..dim {
            for c in 0..=r {
                let mut const_acc = Float::new(bits);
                let mut coeff_acc = vec![Float::new(bits); free];
                for (weight, shift) in &entry.terms {
                    let key = basis[r].add(&basis[c]).add(shift);
                    let row = table.row(&key)?;
                    let w = Float::with_val(bits, weight);
                    const_acc += Float::with_val(bits, &w * &row.constant);
                    for (acc, x) in coeff_acc.iter_mut().zip(row.coeffs.iter()) {
                        *acc += Float::with_val(bits, &w * x);
                    }
                }
                constant.set(r, c, const_acc);
                for (m, v) in coeffs.iter_mut().zip(coeff_acc) {
                    m.set(r, c, v);
                }
            }
        }
        forms.push(AffineForm {
            family_index,
            energy: table.energy.clone(),
            basis: basis.clone(),
            constant,
            coeffs,
        });
    }
    Ok(forms)
}

/// `M(chi) = M_0 + sum_l chi_l M_l`.
pub fn evaluate_form(form: &AffineForm, free: &[Float]) -> SymMatrix {
    assert_eq!(free.len(), form.coeffs.len(), "free-moment arity mismatch");
    let mut m = form.constant.clone();
    for (coeff, x) in form.coeffs.iter().zip(free.iter()) {
        m.add_assign_scaled(coeff, x);
    }
    m
}

/// Converts a quadratic-form vector into the linear cut it induces:
/// the cut is violated at exactly those assignments where `cᵀ M(chi) c <= 0`.
pub fn cut_from_vector(form: &AffineForm, vector: &[Float]) -> Cut {
    assert_eq!(vector.len(), form.dim(), "vector arity mismatch");
    let coeffs = form
        .coeffs
        .iter()
        .map(|m| -m.quadratic_form(vector))
        .collect();
    let bound = form.constant.quadratic_form(vector);
    Cut {
        coeffs,
        bound,
        provenance: CutProvenance {
            family_index: form.family_index,
            vector: vector.to_vec(),
            energy: form.energy.clone(),
        },
    }
}

/// One determinant test in the chain.
#[derive(Debug, Clone)]
pub struct ChainEntry {
    pub family_index: usize,
    pub order: usize,
    pub determinant: Float,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub entries: Vec<ChainEntry>,
    pub pass: bool,
}

impl ChainReport {
    pub fn first_failure(&self) -> Option<&ChainEntry> {
        self.entries.iter().find(|e| !e.pass)
    }
}

/// Evaluates the nested-determinant positivity chain at a concrete moment
/// assignment, every family entry up to order `order`.
pub fn determinant_chain(
    moments: &BTreeMap<MomentKey, Float>,
    family: &ConstraintFamily,
    order: usize,
    cfg: &PrecisionConfig,
) -> Result<ChainReport, MomentError> {
    let caps = vec![order; family.entries.len()];
    determinant_chain_capped(moments, family, &caps, cfg)
}

/// Budget-aware variant: family entry `sigma` is tested at orders
/// `0..=caps[sigma]`.
pub fn determinant_chain_capped(
    moments: &BTreeMap<MomentKey, Float>,
    family: &ConstraintFamily,
    caps: &[usize],
    cfg: &PrecisionConfig,
) -> Result<ChainReport, MomentError> {
    assert_eq!(caps.len(), family.entries.len(), "one cap per family entry");
    let bits = cfg.bits();
    let mut entries = Vec::new();
    let mut pass = true;
    for (family_index, (entry, &cap)) in family.entries.iter().zip(caps.iter()).enumerate() {
        for order in 0..=cap {
            let basis = family.form_basis(order);
            let dim = basis.len();
            let m = build_matrix(moments, entry, &basis, cfg)?;
            let det = crate::numerics::determinant(&m, cfg);
            // Strict positivity margin relative to the Hadamard bound of the
            // matrix, so the verdict is scale invariant.
            let mut hadamard = Float::with_val(bits, 1u32);
            for r in 0..dim {
                let mut row = Float::new(bits);
                for c in 0..dim {
                    row += Float::with_val(bits, m.entry(r, c).clone().square());
                }
                hadamard *= row.sqrt();
            }
            let margin = Float::with_val(bits, cfg.psd_tolerance() * &hadamard);
            let ok = det > margin;
            pass &= ok;
            entries.push(ChainEntry { family_index, order, determinant: det, pass: ok });
        }
    }
    Ok(ChainReport { entries, pass })
}

fn build_matrix(
    moments: &BTreeMap<MomentKey, Float>,
    entry: &FamilyEntry,
    basis: &[MomentKey],
    cfg: &PrecisionConfig,
) -> Result<SymMatrix, MomentError> {
    let bits = cfg.bits();
    let dim = basis.len();
    let mut m = SymMatrix::zeros(dim, cfg);
    for r in 0..dim {
        for c in 0..=r {
            let mut acc = Float::new(bits);
            for (weight, shift) in &entry.terms {
                let key = basis[r].add(&basis[c]).add(shift);
                let value = moments
                    .get(&key)
                    .ok_or(MomentError::MissingTableKey { key })?;
                acc += Float::with_val(bits, &Float::with_val(bits, weight) * value);
            }
            m.set(r, c, acc);
        }
    }
    Ok(m)
}
