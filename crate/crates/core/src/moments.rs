//! Linear moment recurrences over a multi-index lattice.
//!
//! A recurrence turns a trial energy into a table of coefficients expressing
//! every lattice moment as an affine function of a finite set of
//! initialization ("missing") moments. Coefficients are stored as exact
//! rationals linear in the energy, so a table can be rebuilt bit-identically
//! at any working precision.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rug::{Float, Rational};

use crate::error::MomentError;
use crate::positivity::ConstraintFamily;
use crate::precision::PrecisionConfig;

/// Lattice index of a power moment: one component for line problems, two for
/// the planar (lens) problem.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MomentKey {
    dim: u8,
    idx: [u32; 2],
}

impl MomentKey {
    pub fn one(p: u32) -> Self {
        Self { dim: 1, idx: [p, 0] }
    }

    pub fn two(p: u32, q: u32) -> Self {
        Self { dim: 2, idx: [p, q] }
    }

    pub fn dim(&self) -> usize {
        usize::from(self.dim)
    }

    pub fn component(&self, axis: usize) -> u32 {
        self.idx[axis]
    }

    pub fn add(&self, other: &MomentKey) -> MomentKey {
        assert_eq!(self.dim, other.dim, "cannot add keys of unequal dimension");
        MomentKey {
            dim: self.dim,
            idx: [self.idx[0] + other.idx[0], self.idx[1] + other.idx[1]],
        }
    }

    /// Topological rank used as the generation order: ascending index on a
    /// line, ascending total degree then first component on the plane.
    fn generation_rank(&self) -> (u64, u64) {
        match self.dim {
            1 => (u64::from(self.idx[0]), 0),
            _ => (
                u64::from(self.idx[0]) + u64::from(self.idx[1]),
                u64::from(self.idx[0]),
            ),
        }
    }
}

impl fmt::Debug for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for MomentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dim == 1 {
            write!(f, "({})", self.idx[0])
        } else {
            write!(f, "({},{})", self.idx[0], self.idx[1])
        }
    }
}

/// Exact coefficient `constant + energy_slope * E`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLinear {
    pub constant: Rational,
    pub energy_slope: Rational,
}

impl EnergyLinear {
    pub fn constant(c: Rational) -> Self {
        Self { constant: c, energy_slope: Rational::new() }
    }

    pub fn from_i64(c: i64) -> Self {
        Self::constant(Rational::from(c))
    }

    pub fn energy(slope: Rational) -> Self {
        Self { constant: Rational::new(), energy_slope: slope }
    }

    pub fn affine(constant: Rational, slope: Rational) -> Self {
        Self { constant, energy_slope: slope }
    }

    pub fn zero() -> Self {
        Self { constant: Rational::new(), energy_slope: Rational::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0 && self.energy_slope == 0
    }

    pub fn value(&self, energy: &Float, cfg: &PrecisionConfig) -> Float {
        let bits = cfg.bits();
        let mut v = Float::with_val(bits, &self.constant);
        if self.energy_slope != 0 {
            v += Float::with_val(bits, energy * &Float::with_val(bits, &self.energy_slope));
        }
        v
    }
}

/// Generation rule for one lattice key: the moment equals
/// `(sum_i coeff_i * u(source_i) + inhomogeneous) / divisor`.
#[derive(Debug, Clone)]
pub struct KeyRule {
    pub sources: Vec<(EnergyLinear, MomentKey)>,
    pub inhomogeneous: EnergyLinear,
    pub divisor: EnergyLinear,
}

/// Which keys act as the missing-moment basis.
#[derive(Debug, Clone)]
pub enum MissingBasis {
    /// A fixed list of low-order keys (line problems).
    Fixed(Vec<MomentKey>),
    /// Both lattice axes, truncated by the requested grid (planar problems);
    /// ordered as (0,0), (1,0)..(N,0), (0,1)..(0,N).
    LatticeAxes,
    /// No free moments: the table is fully determined by the energy.
    None,
}

/// Open energy interval on which a recurrence's divisors stay nonzero.
#[derive(Debug, Clone)]
pub struct EnergyWindow {
    pub lower: Option<Rational>,
    pub upper: Option<Rational>,
}

impl EnergyWindow {
    pub fn positive() -> Self {
        Self { lower: Some(Rational::new()), upper: None }
    }

    pub fn all() -> Self {
        Self { lower: None, upper: None }
    }

    pub fn contains(&self, energy: &Float) -> bool {
        if let Some(lo) = &self.lower {
            if !(*energy > *lo) {
                return false;
            }
        }
        if let Some(hi) = &self.upper {
            if !(*energy < *hi) {
                return false;
            }
        }
        true
    }
}

type Rule = Arc<dyn Fn(&MomentKey) -> Option<KeyRule> + Send + Sync>;

/// A moment recurrence: missing basis, valid energy window, and the
/// per-key generation rule (returning `None` on basis keys).
#[derive(Clone)]
pub struct RecurrenceSpec {
    pub dimension: usize,
    pub missing: MissingBasis,
    pub window: EnergyWindow,
    rule: Rule,
}

impl fmt::Debug for RecurrenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecurrenceSpec")
            .field("dimension", &self.dimension)
            .field("missing", &self.missing)
            .field("window", &self.window)
            .finish_non_exhaustive()
    }
}

impl RecurrenceSpec {
    pub fn new(
        dimension: usize,
        missing: MissingBasis,
        window: EnergyWindow,
        rule: impl Fn(&MomentKey) -> Option<KeyRule> + Send + Sync + 'static,
    ) -> Self {
        Self { dimension, missing, window, rule: Arc::new(rule) }
    }

    pub fn rule_for(&self, key: &MomentKey) -> Option<KeyRule> {
        (self.rule)(key)
    }

    /// Missing basis concretized against a key set.
    pub fn basis_for(&self, keys: &BTreeSet<MomentKey>) -> Vec<MomentKey> {
        match &self.missing {
            MissingBasis::Fixed(list) => list.clone(),
            MissingBasis::None => Vec::new(),
            MissingBasis::LatticeAxes => {
                let mut origin = Vec::new();
                let mut first_axis = Vec::new();
                let mut second_axis = Vec::new();
                for key in keys {
                    let (p, q) = (key.component(0), key.component(1));
                    if p == 0 && q == 0 {
                        origin.push(*key);
                    } else if q == 0 {
                        first_axis.push(*key);
                    } else if p == 0 {
                        second_axis.push(*key);
                    }
                }
                first_axis.sort_by_key(|k| k.component(0));
                second_axis.sort_by_key(|k| k.component(1));
                origin.into_iter().chain(first_axis).chain(second_axis).collect()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    /// Inhomogeneous part (zero for homogeneous recurrences).
    pub constant: Float,
    /// Coefficients over the missing basis, length `basis.len()`.
    pub coeffs: Vec<Float>,
}

/// Energy-dependent linear map from missing moments to all required moments.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub energy: Float,
    pub basis: Vec<MomentKey>,
    pub rows: BTreeMap<MomentKey, TableRow>,
}

impl CoefficientTable {
    pub fn row(&self, key: &MomentKey) -> Result<&TableRow, MomentError> {
        self.rows.get(key).ok_or(MomentError::MissingTableKey { key: *key })
    }

    /// Missing-moment count `1 + m_s` (zero for fully determined problems).
    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }
}

/// Builds the coefficient table covering `keys` (plus recursive dependencies
/// and the missing basis) at energy `E`.
pub fn build_table(
    spec: &RecurrenceSpec,
    energy: &Float,
    keys: &BTreeSet<MomentKey>,
    cfg: &PrecisionConfig,
) -> Result<CoefficientTable, MomentError> {
    if !spec.window.contains(energy) {
        return Err(MomentError::OutsideWindow { energy: energy.to_f64() });
    }
    let bits = cfg.bits();

    // Dependency closure of the requested keys.
    let mut needed: BTreeSet<MomentKey> = keys.clone();
    let mut work: Vec<MomentKey> = keys.iter().copied().collect();
    while let Some(key) = work.pop() {
        if let Some(rule) = spec.rule_for(&key) {
            for (_, src) in &rule.sources {
                if needed.insert(*src) {
                    work.push(*src);
                }
            }
        }
    }
    let basis = spec.basis_for(&needed);
    for key in &basis {
        needed.insert(*key);
    }
    let basis_index: BTreeMap<MomentKey, usize> =
        basis.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    let mut ordered: Vec<MomentKey> = needed.into_iter().collect();
    ordered.sort_by_key(MomentKey::generation_rank);

    let mut rows: BTreeMap<MomentKey, TableRow> = BTreeMap::new();
    for key in ordered {
        if let Some(&slot) = basis_index.get(&key) {
            let mut coeffs = vec![Float::new(bits); basis.len()];
            coeffs[slot] = Float::with_val(bits, 1u32);
            rows.insert(key, TableRow { constant: Float::new(bits), coeffs });
            continue;
        }
        let rule = spec.rule_for(&key).ok_or(MomentError::Unreachable { key })?;
        let divisor = rule.divisor.value(energy, cfg);
        if divisor.is_zero() {
            return Err(MomentError::DivisorZero { key, energy: energy.to_f64() });
        }
        let mut constant = rule.inhomogeneous.value(energy, cfg);
        let mut coeffs = vec![Float::new(bits); basis.len()];
        for (coefficient, src) in &rule.sources {
            if coefficient.is_zero() {
                continue;
            }
            let c = coefficient.value(energy, cfg);
            let src_row = rows.get(src).ok_or(MomentError::Unreachable { key: *src })?;
            constant += Float::with_val(bits, &c * &src_row.constant);
            for (acc, s) in coeffs.iter_mut().zip(src_row.coeffs.iter()) {
                *acc += Float::with_val(bits, &c * s);
            }
        }
        constant /= &divisor;
        for c in coeffs.iter_mut() {
            *c /= &divisor;
        }
        rows.insert(key, TableRow { constant, coeffs });
    }

    Ok(CoefficientTable { energy: energy.clone(), basis, rows })
}

#[derive(Debug, Clone)]
pub struct NormalizedRow {
    pub constant: Float,
    /// Coefficients of the free moments (length `free_count`).
    pub coeffs: Vec<Float>,
}

/// Table after imposing the simplex normalization `sum of missing = 1`
/// (or with no free moments at all for fully determined problems).
#[derive(Debug, Clone)]
pub struct NormalizedTable {
    pub energy: Float,
    /// Free missing moments, i.e. the original basis minus its first entry.
    pub free_basis: Vec<MomentKey>,
    pub rows: BTreeMap<MomentKey, NormalizedRow>,
}

impl NormalizedTable {
    pub fn free_count(&self) -> usize {
        self.free_basis.len()
    }

    pub fn row(&self, key: &MomentKey) -> Result<&NormalizedRow, MomentError> {
        self.rows.get(key).ok_or(MomentError::MissingTableKey { key: *key })
    }
}

/// Eliminates the leading missing moment through the simplex normalization:
/// row `(a_0, a_1, .., a_m)` becomes constant `a_0` with free coefficients
/// `(a_1 - a_0, .., a_m - a_0)`.
pub fn normalize(table: &CoefficientTable) -> Result<NormalizedTable, MomentError> {
    if table.basis_len() < 2 {
        return Err(MomentError::NoMissingMoments);
    }
    let bits = table.energy.prec();
    let free_basis = table.basis[1..].to_vec();
    let rows = table
        .rows
        .iter()
        .map(|(key, row)| {
            let constant = Float::with_val(bits, &row.constant + &row.coeffs[0]);
            let coeffs = row.coeffs[1..]
                .iter()
                .map(|c| Float::with_val(bits, c - &row.coeffs[0]))
                .collect();
            (*key, NormalizedRow { constant, coeffs })
        })
        .collect();
    Ok(NormalizedTable { energy: table.energy.clone(), free_basis, rows })
}

/// Wraps a fully determined table (no missing moments) for evaluation and
/// form assembly; the companion of the determinantal path.
pub fn constants_only(table: &CoefficientTable) -> Result<NormalizedTable, MomentError> {
    if table.basis_len() != 0 {
        return Err(MomentError::NoMissingMoments);
    }
    let rows = table
        .rows
        .iter()
        .map(|(key, row)| {
            (*key, NormalizedRow { constant: row.constant.clone(), coeffs: Vec::new() })
        })
        .collect();
    Ok(NormalizedTable { energy: table.energy.clone(), free_basis: Vec::new(), rows })
}

/// Evaluates every tabulated moment at the given free-moment assignment.
pub fn evaluate_moments(
    table: &NormalizedTable,
    free: &[Float],
) -> BTreeMap<MomentKey, Float> {
    assert_eq!(free.len(), table.free_count(), "free-moment arity mismatch");
    let bits = table.energy.prec();
    table
        .rows
        .iter()
        .map(|(key, row)| {
            let mut v = row.constant.clone();
            for (c, x) in row.coeffs.iter().zip(free.iter()) {
                v += Float::with_val(bits, c * x);
            }
            (*key, v)
        })
        .collect()
}

/// All moment keys entering the order-`I` quadratic forms of a family:
/// every `key(i1) + key(i2) + shift`. Line families yield a contiguous range;
/// planar families are widened to the full square grid `[0, 2I+1]^2`, which
/// the axis basis generates anyway.
pub fn required_grid(family: &ConstraintFamily, order: usize) -> BTreeSet<MomentKey> {
    let mut keys = BTreeSet::new();
    match family.dimension {
        1 => {
            let reach = 2 * order as u32;
            for entry in &family.entries {
                for (_, shift) in &entry.terms {
                    for s in 0..=reach {
                        keys.insert(MomentKey::one(s + shift.component(0)));
                    }
                }
            }
        }
        _ => {
            let max_shift = family
                .entries
                .iter()
                .flat_map(|e| e.terms.iter())
                .map(|(_, s)| s.component(0).max(s.component(1)))
                .max()
                .unwrap_or(0);
            let n = 2 * order as u32 + max_shift;
            for p in 0..=n {
                for q in 0..=n {
                    keys.insert(MomentKey::two(p, q));
                }
            }
        }
    }
    keys
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(128).unwrap()
    }

    /// Toy second-order recurrence u(k) = (E u(k-1) + 2 u(k-2)) / 3 with
    /// missing basis {u(0), u(1)}.
    fn toy_spec() -> RecurrenceSpec {
        RecurrenceSpec::new(
            1,
            MissingBasis::Fixed(vec![MomentKey::one(0), MomentKey::one(1)]),
            EnergyWindow::all(),
            |key| {
                let k = key.component(0);
                if k < 2 {
                    return None;
                }
                Some(KeyRule {
                    sources: vec![
                        (EnergyLinear::energy(Rational::from(1)), MomentKey::one(k - 1)),
                        (EnergyLinear::from_i64(2), MomentKey::one(k - 2)),
                    ],
                    inhomogeneous: EnergyLinear::zero(),
                    divisor: EnergyLinear::from_i64(3),
                })
            },
        )
    }

    #[test]
    fn missing_keys_get_identity_rows() {
        let cfg = cfg();
        let spec = toy_spec();
        let keys: BTreeSet<_> = (0..5).map(MomentKey::one).collect();
        let table = build_table(&spec, &cfg.float_from_i64(2), &keys, &cfg).unwrap();
        let row0 = table.row(&MomentKey::one(0)).unwrap();
        assert_eq!(row0.coeffs[0].to_f64(), 1.0);
        assert_eq!(row0.coeffs[1].to_f64(), 0.0);
        assert!(row0.constant.is_zero());
        let row1 = table.row(&MomentKey::one(1)).unwrap();
        assert_eq!(row1.coeffs[0].to_f64(), 0.0);
        assert_eq!(row1.coeffs[1].to_f64(), 1.0);
    }

    #[test]
    fn generated_rows_satisfy_the_recurrence() {
        let cfg = cfg();
        let spec = toy_spec();
        let keys: BTreeSet<_> = (0..8).map(MomentKey::one).collect();
        let energy = cfg.float_from_f64(1.5);
        let table = build_table(&spec, &energy, &keys, &cfg).unwrap();
        for k in 2..8u32 {
            let row = table.row(&MomentKey::one(k)).unwrap();
            let prev = table.row(&MomentKey::one(k - 1)).unwrap();
            let prev2 = table.row(&MomentKey::one(k - 2)).unwrap();
            for slot in 0..2 {
                let expect = (energy.to_f64() * prev.coeffs[slot].to_f64()
                    + 2.0 * prev2.coeffs[slot].to_f64())
                    / 3.0;
                assert!((row.coeffs[slot].to_f64() - expect).abs() < 1e-30);
            }
        }
    }

    #[test]
    fn normalization_matches_reference_algebra() {
        let cfg = cfg();
        let spec = RecurrenceSpec::new(
            1,
            MissingBasis::Fixed(vec![
                MomentKey::one(0),
                MomentKey::one(1),
                MomentKey::one(2),
            ]),
            EnergyWindow::all(),
            |key| {
                let k = key.component(0);
                if k < 3 {
                    return None;
                }
                Some(KeyRule {
                    sources: vec![
                        (EnergyLinear::from_i64(5), MomentKey::one(k - 1)),
                        (EnergyLinear::from_i64(-2), MomentKey::one(k - 2)),
                        (EnergyLinear::from_i64(1), MomentKey::one(k - 3)),
                    ],
                    inhomogeneous: EnergyLinear::zero(),
                    divisor: EnergyLinear::from_i64(1),
                })
            },
        );
        let keys: BTreeSet<_> = (0..4).map(MomentKey::one).collect();
        let table = build_table(&spec, &cfg.float_from_i64(1), &keys, &cfg).unwrap();
        let nt = normalize(&table).unwrap();

        // Row u(3) = 5 u(2) - 2 u(1) + 1 u(0): constant a0 = 1,
        // coefficients (a1 - a0, a2 - a0) = (-3, 4).
        let row = nt.row(&MomentKey::one(3)).unwrap();
        assert_eq!(row.constant.to_f64(), 1.0);
        assert_eq!(row.coeffs[0].to_f64(), -3.0);
        assert_eq!(row.coeffs[1].to_f64(), 4.0);

        // Identity row for the eliminated moment: (1,0,0) -> constant 1,
        // coefficients (-1,-1).
        let row0 = nt.row(&MomentKey::one(0)).unwrap();
        assert_eq!(row0.constant.to_f64(), 1.0);
        assert_eq!(row0.coeffs[0].to_f64(), -1.0);
        assert_eq!(row0.coeffs[1].to_f64(), -1.0);
    }

    #[test]
    fn normalize_requires_free_moments() {
        let cfg = cfg();
        let spec = RecurrenceSpec::new(1, MissingBasis::None, EnergyWindow::all(), |key| {
            let k = key.component(0);
            Some(KeyRule {
                sources: if k == 0 {
                    Vec::new()
                } else {
                    vec![(EnergyLinear::from_i64(2), MomentKey::one(k - 1))]
                },
                inhomogeneous: if k == 0 { EnergyLinear::from_i64(1) } else { EnergyLinear::zero() },
                divisor: EnergyLinear::from_i64(1),
            })
        });
        let keys: BTreeSet<_> = (0..3).map(MomentKey::one).collect();
        let table = build_table(&spec, &cfg.float_from_i64(1), &keys, &cfg).unwrap();
        assert!(matches!(normalize(&table), Err(MomentError::NoMissingMoments)));
        let nt = constants_only(&table).unwrap();
        let moments = evaluate_moments(&nt, &[]);
        assert_eq!(moments[&MomentKey::one(2)].to_f64(), 4.0);
    }

    #[test]
    fn both_evaluation_paths_agree_on_the_simplex() {
        use rand::{Rng, SeedableRng};
        let cfg = cfg();
        let spec = toy_spec();
        let keys: BTreeSet<_> = (0..10).map(MomentKey::one).collect();
        let energy = cfg.float_from_f64(0.75);
        let table = build_table(&spec, &energy, &keys, &cfg).unwrap();
        let nt = normalize(&table).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            // chi_1 free; chi_0 = 1 - chi_1 on the simplex.
            let chi1: f64 = rng.gen_range(-1.0..1.0);
            let chi0 = 1.0 - chi1;
            let via_nt = evaluate_moments(&nt, &[cfg.float_from_f64(chi1)]);
            for (key, row) in &table.rows {
                let direct = row.constant.to_f64()
                    + row.coeffs[0].to_f64() * chi0
                    + row.coeffs[1].to_f64() * chi1;
                let got = via_nt[key].to_f64();
                assert!(
                    (direct - got).abs() <= 1e-12 * (1.0 + direct.abs()),
                    "paths disagree at {key}: {direct} vs {got}"
                );
            }
        }
    }

    #[test]
    fn divisor_zero_is_reported_with_the_key() {
        let cfg = cfg();
        let spec = RecurrenceSpec::new(
            1,
            MissingBasis::Fixed(vec![MomentKey::one(0)]),
            EnergyWindow::all(),
            |key| {
                let k = key.component(0);
                if k == 0 {
                    return None;
                }
                Some(KeyRule {
                    sources: vec![(EnergyLinear::from_i64(1), MomentKey::one(k - 1))],
                    inhomogeneous: EnergyLinear::zero(),
                    divisor: EnergyLinear::energy(Rational::from(1)),
                })
            },
        );
        let keys: BTreeSet<_> = (0..2).map(MomentKey::one).collect();
        let err = build_table(&spec, &cfg.float_from_i64(0), &keys, &cfg).unwrap_err();
        match err {
            MomentError::DivisorZero { key, .. } => assert_eq!(key, MomentKey::one(1)),
            other => panic!("expected divisor error, got {other:?}"),
        }
    }
}
