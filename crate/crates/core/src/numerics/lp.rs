//! Dense linear-programming feasibility for the missing-moment space.
//!
//! Feasibility of a set of strict cuts `a.x < b` inside a bounded box is
//! decided through the Chebyshev-center reformulation
//!
//! ```text
//!   maximize r   subject to   a.x + ||a|| r <= b   for every cut and box face
//! ```
//!
//! whose optimum is the largest slack margin any interior point can achieve.
//! The set of strict inequalities is declared nonempty only when that margin
//! exceeds `lp_tolerance` (times the box scale); emptiness always comes with
//! a nonnegative row combination certifying that no larger margin exists.
//!
//! The optimization itself runs as a revised primal simplex on the dual
//! program, whose basis has size `vars + 1` regardless of how many cuts have
//! accumulated. Adding a cut adds one dual column and keeps the current basis
//! feasible, so the cutting loop re-optimizes in a handful of pivots.

use rug::Float;

use super::factor::solve_dense;
use crate::error::NumericsError;
use crate::precision::PrecisionConfig;

/// One strict linear inequality `coeffs . x < bound`.
#[derive(Debug, Clone)]
pub struct LinearCut {
    pub coeffs: Vec<Float>,
    pub bound: Float,
}

/// Feasibility problem over `var_count` variables boxed by `bounds`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub var_count: usize,
    pub cuts: Vec<LinearCut>,
    pub bounds: Vec<(Float, Float)>,
}

/// Identifies a constraint row in certificates and diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRef {
    Cut(usize),
    BoxLower(usize),
    BoxUpper(usize),
}

/// Nonnegative combination of rows proving that no point attains slack
/// above `combined_bound`: the multipliers cancel all variable coefficients,
/// so the combined inequality reads `0 < combined_bound` (scaled by the
/// combined ball coefficient), a contradiction once `combined_bound` is at
/// or below the feasibility threshold.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    pub rows: Vec<CertificateRow>,
    pub combined_bound: Float,
    pub threshold: Float,
}

#[derive(Debug, Clone)]
pub struct CertificateRow {
    pub row: RowRef,
    pub multiplier: Float,
    pub normal: Vec<Float>,
    pub ball: Float,
    pub bound: Float,
}

impl InfeasibilityCertificate {
    /// Recomputes the combination and checks it proves emptiness.
    pub fn validate(&self, var_count: usize, cfg: &PrecisionConfig) -> bool {
        let bits = cfg.bits();
        let mut combined_normal = vec![Float::new(bits); var_count];
        let mut combined_ball = Float::new(bits);
        let mut combined_bound = Float::new(bits);
        let mut normal_scale = Float::with_val(bits, 1u32);
        for row in &self.rows {
            if row.multiplier.is_sign_negative() && !row.multiplier.is_zero() {
                return false;
            }
            for (acc, a) in combined_normal.iter_mut().zip(row.normal.iter()) {
                *acc += Float::with_val(bits, &row.multiplier * a);
                normal_scale += Float::with_val(bits, &row.multiplier * a).abs();
            }
            combined_ball += Float::with_val(bits, &row.multiplier * &row.ball);
            combined_bound += Float::with_val(bits, &row.multiplier * &row.bound);
        }
        let eps = loose_eps(cfg);
        let cancel_cap = Float::with_val(bits, &eps * &normal_scale);
        if combined_normal.iter().any(|c| c.clone().abs() > cancel_cap) {
            return false;
        }
        // Chebyshev form: ball mass 1, bound at most the margin threshold.
        // Pure Farkas form (constant cuts): no ball mass, bound <= 0.
        let one_gap = Float::with_val(bits, &combined_ball - &Float::with_val(bits, 1u32)).abs();
        if one_gap <= eps {
            combined_bound <= self.threshold
        } else if combined_ball.clone().abs() <= eps {
            combined_bound <= 0u32
        } else {
            false
        }
    }
}

/// Outcome of a feasibility solve.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    /// Interior point maximizing the minimum slack over all cuts and faces.
    Point { x: Vec<Float>, radius: Float },
    Infeasible(InfeasibilityCertificate),
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, LpOutcome::Point { .. })
    }
}

/// One-shot feasibility solve; see [`ChebyshevSolver`] for incremental use.
pub fn lp_feasible_point(
    lp: &LinearProgram,
    cfg: &PrecisionConfig,
) -> Result<LpOutcome, NumericsError> {
    let mut solver = ChebyshevSolver::new(&lp.bounds, cfg)?;
    for cut in &lp.cuts {
        solver.add_cut(cut.coeffs.clone(), cut.bound.clone());
    }
    solver.solve()
}

struct Row {
    normal: Vec<Float>,
    ball: Float,
    bound: Float,
    kind: RowRef,
}

/// Incremental Chebyshev-center solver; rows persist across `add_cut` /
/// `solve` calls and the dual basis is warm-started.
pub struct ChebyshevSolver {
    cfg: PrecisionConfig,
    var_count: usize,
    rows: Vec<Row>,
    basis: Vec<usize>,
    binv: Vec<Vec<Float>>,
    threshold: Float,
    violated_constant_cut: Option<usize>,
    use_bland: bool,
    cut_serial: usize,
}

const REFACTOR_EVERY: usize = 64;

impl ChebyshevSolver {
    pub fn new(bounds: &[(Float, Float)], cfg: &PrecisionConfig) -> Result<Self, NumericsError> {
        let bits = cfg.bits();
        let n = bounds.len();
        let mut box_scale = Float::with_val(bits, 1u32);
        for (lo, hi) in bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(NumericsError::Inconsistent {
                    what: format!("box must be bounded with lower < upper, got [{lo}, {hi}]"),
                });
            }
            for v in [lo, hi] {
                let a = v.clone().abs();
                if a > box_scale {
                    box_scale = a;
                }
            }
        }
        box_scale += 1;
        let threshold = Float::with_val(bits, cfg.lp_tolerance() * &box_scale);

        let mut rows = Vec::with_capacity(2 * n);
        for (i, (_, hi)) in bounds.iter().enumerate() {
            let mut normal = vec![Float::new(bits); n];
            normal[i] = Float::with_val(bits, 1u32);
            rows.push(Row {
                normal,
                ball: Float::with_val(bits, 1u32),
                bound: hi.clone(),
                kind: RowRef::BoxUpper(i),
            });
        }
        for (i, (lo, _)) in bounds.iter().enumerate() {
            let mut normal = vec![Float::new(bits); n];
            normal[i] = Float::with_val(bits, -1i32);
            rows.push(Row {
                normal,
                ball: Float::with_val(bits, 1u32),
                bound: Float::with_val(bits, -lo.clone()),
                kind: RowRef::BoxLower(i),
            });
        }

        let mut solver = Self {
            cfg: cfg.clone(),
            var_count: n,
            rows,
            basis: Vec::new(),
            binv: Vec::new(),
            threshold,
            violated_constant_cut: None,
            use_bland: false,
            cut_serial: 0,
        };
        if n > 0 {
            // Upper faces plus one lower face form a feasible starting basis:
            // it encodes the bound r <= (hi_0 - lo_0) / 2.
            let mut basis: Vec<usize> = (0..n).collect();
            basis.push(n);
            solver.basis = basis;
            solver.refactor()?;
        }
        Ok(solver)
    }

    /// Registers `coeffs . x < bound`. Constant cuts (zero normal) are
    /// handled out of band: satisfied ones are dropped, violated ones flag
    /// the whole program infeasible.
    pub fn add_cut(&mut self, coeffs: Vec<Float>, bound: Float) {
        let bits = self.cfg.bits();
        assert_eq!(coeffs.len(), self.var_count, "cut arity mismatch");
        let idx = self.cut_serial;
        self.cut_serial += 1;
        let mut norm2 = Float::new(bits);
        for c in &coeffs {
            norm2 += Float::with_val(bits, c.clone().square());
        }
        if norm2.is_zero() {
            if bound <= 0u32 && self.violated_constant_cut.is_none() {
                self.rows.push(Row {
                    normal: coeffs,
                    ball: Float::new(bits),
                    bound,
                    kind: RowRef::Cut(idx),
                });
                self.violated_constant_cut = Some(self.rows.len() - 1);
            }
            return;
        }
        self.rows.push(Row {
            normal: coeffs,
            ball: norm2.sqrt(),
            bound,
            kind: RowRef::Cut(idx),
        });
    }

    pub fn cut_count(&self) -> usize {
        self.cut_serial
    }

    pub fn solve(&mut self) -> Result<LpOutcome, NumericsError> {
        if let Some(row) = self.violated_constant_cut {
            return Ok(LpOutcome::Infeasible(self.constant_certificate(row)));
        }
        if self.var_count == 0 {
            return Ok(LpOutcome::Point {
                x: Vec::new(),
                radius: Float::with_val(self.cfg.bits(), f64::INFINITY),
            });
        }
        self.optimize()?;
        let bits = self.cfg.bits();
        let radius = self.objective();
        if radius > self.threshold {
            let x = self.recover_point(&radius)?;
            Ok(LpOutcome::Point { x, radius })
        } else {
            let y = self.basic_solution();
            let mut rows = Vec::new();
            for (slot, &row_idx) in self.basis.iter().enumerate() {
                if y[slot].is_zero() || y[slot].is_sign_negative() {
                    continue;
                }
                let row = &self.rows[row_idx];
                rows.push(CertificateRow {
                    row: row.kind,
                    multiplier: y[slot].clone(),
                    normal: row.normal.clone(),
                    ball: row.ball.clone(),
                    bound: row.bound.clone(),
                });
            }
            let cert = InfeasibilityCertificate {
                rows,
                combined_bound: Float::with_val(bits, &radius),
                threshold: self.threshold.clone(),
            };
            if !cert.validate(self.var_count, &self.cfg) {
                return Err(NumericsError::Inconsistent {
                    what: "infeasibility certificate failed validation".into(),
                });
            }
            Ok(LpOutcome::Infeasible(cert))
        }
    }

    fn constant_certificate(&self, row_idx: usize) -> InfeasibilityCertificate {
        let bits = self.cfg.bits();
        let row = &self.rows[row_idx];
        InfeasibilityCertificate {
            rows: vec![CertificateRow {
                row: row.kind,
                multiplier: Float::with_val(bits, 1u32),
                normal: row.normal.clone(),
                ball: row.ball.clone(),
                bound: row.bound.clone(),
            }],
            combined_bound: row.bound.clone(),
            threshold: self.threshold.clone(),
        }
    }

    fn column(&self, row_idx: usize, slot: usize) -> &Float {
        let row = &self.rows[row_idx];
        if slot < self.var_count {
            &row.normal[slot]
        } else {
            &row.ball
        }
    }

    fn refactor(&mut self) -> Result<(), NumericsError> {
        let bits = self.cfg.bits();
        let k = self.var_count + 1;
        // Invert the basis matrix column by column.
        let mut b = vec![vec![Float::new(bits); k]; k];
        for (col, &row_idx) in self.basis.iter().enumerate() {
            for slot in 0..k {
                b[slot][col] = self.column(row_idx, slot).clone();
            }
        }
        let mut inv = vec![vec![Float::new(bits); k]; k];
        for j in 0..k {
            let mut e = vec![Float::new(bits); k];
            e[j] = Float::with_val(bits, 1u32);
            let col = solve_dense(b.clone(), e, &self.cfg)?;
            for i in 0..k {
                inv[i][j] = col[i].clone();
            }
        }
        self.binv = inv;
        Ok(())
    }

    /// Basic dual variables: `y_B = B^{-1} e_last`.
    fn basic_solution(&self) -> Vec<Float> {
        let k = self.var_count + 1;
        (0..k).map(|i| self.binv[i][k - 1].clone()).collect()
    }

    fn objective(&self) -> Float {
        let bits = self.cfg.bits();
        let y = self.basic_solution();
        let mut acc = Float::new(bits);
        for (slot, &row_idx) in self.basis.iter().enumerate() {
            acc += Float::with_val(bits, &y[slot] * &self.rows[row_idx].bound);
        }
        acc
    }

    fn optimize(&mut self) -> Result<(), NumericsError> {
        let bits = self.cfg.bits();
        let k = self.var_count + 1;
        let pivot_eps = tight_eps(&self.cfg);
        let iter_cap = 400 + 60 * self.rows.len();
        let stall_cap = 4 * (self.rows.len() + k) + 32;

        let mut pivots_since_refactor = 0usize;
        let mut stall = 0usize;
        let mut last_obj = self.objective();

        for iteration in 0..iter_cap {
            // Simplex multipliers pi = c_B^T B^{-1}.
            let mut pi = vec![Float::new(bits); k];
            for (slot, &row_idx) in self.basis.iter().enumerate() {
                let cost = &self.rows[row_idx].bound;
                for (j, pij) in pi.iter_mut().enumerate() {
                    *pij += Float::with_val(bits, cost * &self.binv[slot][j]);
                }
            }

            let entering = self.price(&pi, &pivot_eps);
            let Some(enter) = entering else {
                return Ok(());
            };

            // Direction through the basis.
            let mut w = vec![Float::new(bits); k];
            for (i, wi) in w.iter_mut().enumerate() {
                for j in 0..k {
                    *wi += Float::with_val(bits, &self.binv[i][j] * self.column(enter, j));
                }
            }
            let y = self.basic_solution();
            let mut leave: Option<(usize, Float)> = None;
            for i in 0..k {
                if w[i] <= pivot_eps {
                    continue;
                }
                let ratio = Float::with_val(bits, &y[i] / &w[i]);
                match &leave {
                    None => leave = Some((i, ratio)),
                    Some((best_i, best)) => {
                        if ratio < *best
                            || (ratio == *best && self.basis[i] < self.basis[*best_i])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
            let Some((leave_slot, _)) = leave else {
                // The primal always admits arbitrarily negative slack, so an
                // unbounded dual signals numerical breakdown.
                return Err(NumericsError::Inconsistent {
                    what: "dual ratio test found no blocking row".into(),
                });
            };

            // Pivot: replace the leaving column and update the inverse.
            self.basis[leave_slot] = enter;
            let pivot = w[leave_slot].clone();
            for j in 0..k {
                self.binv[leave_slot][j] = Float::with_val(bits, &self.binv[leave_slot][j] / &pivot);
            }
            for i in 0..k {
                if i == leave_slot || w[i].is_zero() {
                    continue;
                }
                for j in 0..k {
                    let delta =
                        Float::with_val(bits, &w[i] * &self.binv[leave_slot][j]);
                    self.binv[i][j] -= delta;
                }
            }

            pivots_since_refactor += 1;
            if pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                pivots_since_refactor = 0;
            }

            let obj = self.objective();
            let improvement = Float::with_val(bits, &last_obj - &obj);
            if improvement > pivot_eps {
                stall = 0;
                self.use_bland = false;
            } else {
                stall += 1;
                if stall > stall_cap {
                    self.use_bland = true;
                }
            }
            last_obj = obj;
            let _ = iteration;
        }
        Err(NumericsError::SimplexStalled { iterations: iter_cap })
    }

    /// Entering column: Dantzig rule, or first-index Bland when stalling.
    fn price(&self, pi: &[Float], pivot_eps: &Float) -> Option<usize> {
        let bits = self.cfg.bits();
        let k = self.var_count + 1;
        let mut best: Option<(usize, Float)> = None;
        for (row_idx, row) in self.rows.iter().enumerate() {
            if self.basis.contains(&row_idx) {
                continue;
            }
            let mut rc = row.bound.clone();
            for j in 0..k {
                rc -= Float::with_val(bits, &pi[j] * self.column(row_idx, j));
            }
            let gate = Float::with_val(
                bits,
                pivot_eps * &Float::with_val(bits, row.bound.clone().abs() + 1u32),
            );
            if rc >= -gate {
                continue;
            }
            if self.use_bland {
                return Some(row_idx);
            }
            match &best {
                None => best = Some((row_idx, rc)),
                Some((_, best_rc)) => {
                    if rc < *best_rc {
                        best = Some((row_idx, rc));
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    /// The optimal basis marks `vars + 1` tight rows; their intersection is
    /// the Chebyshev center.
    fn recover_point(&self, radius: &Float) -> Result<Vec<Float>, NumericsError> {
        let bits = self.cfg.bits();
        let k = self.var_count + 1;
        // Solve B^T z = b_B via z = (B^{-1})^T b_B.
        let mut z = vec![Float::new(bits); k];
        for (slot, &row_idx) in self.basis.iter().enumerate() {
            let b = &self.rows[row_idx].bound;
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += Float::with_val(bits, &self.binv[slot][j] * b);
            }
        }
        let r = z.pop().expect("slack coordinate present");
        let gap = Float::with_val(bits, &r - radius).abs();
        let gap_cap = Float::with_val(
            bits,
            &loose_eps(&self.cfg) * &Float::with_val(bits, radius.clone().abs() + 1u32),
        );
        if gap > gap_cap {
            return Err(NumericsError::Inconsistent {
                what: format!("primal/dual slack mismatch: {r} vs {radius}"),
            });
        }
        // Every row must leave at least the certified margin.
        for row in &self.rows {
            let mut lhs = Float::new(bits);
            for (a, xi) in row.normal.iter().zip(z.iter()) {
                lhs += Float::with_val(bits, a * xi);
            }
            lhs += Float::with_val(bits, &row.ball * radius);
            let slack = Float::with_val(bits, &row.bound - &lhs);
            let tol = Float::with_val(
                bits,
                &loose_eps(&self.cfg) * &Float::with_val(bits, row.bound.clone().abs() + 1u32),
            );
            if slack < -tol.clone() {
                return Err(NumericsError::Inconsistent {
                    what: format!("recovered point violates a row by {slack}"),
                });
            }
        }
        Ok(z)
    }
}

/// `2^(-(3 bits / 4))`: pivot-level zero threshold.
fn tight_eps(cfg: &PrecisionConfig) -> Float {
    Float::with_val(cfg.bits(), 2u32).pow(-(3 * cfg.bits() as i32 / 4))
}

/// `2^(-(bits / 2))`: consistency-check threshold.
fn loose_eps(cfg: &PrecisionConfig) -> Float {
    Float::with_val(cfg.bits(), 2u32).pow(-(cfg.bits() as i32 / 2))
}

use rug::ops::Pow;

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PrecisionConfig {
        PrecisionConfig::new(128).unwrap()
    }

    fn unit_box(cfg: &PrecisionConfig, n: usize) -> Vec<(Float, Float)> {
        (0..n)
            .map(|_| (Float::new(cfg.bits()), Float::with_val(cfg.bits(), 1u32)))
            .collect()
    }

    #[test]
    fn empty_cut_list_yields_box_center() {
        let cfg = cfg();
        let lp = LinearProgram { var_count: 2, cuts: Vec::new(), bounds: unit_box(&cfg, 2) };
        match lp_feasible_point(&lp, &cfg).unwrap() {
            LpOutcome::Point { x, radius } => {
                assert!((x[0].to_f64() - 0.5).abs() < 1e-30);
                assert!((x[1].to_f64() - 0.5).abs() < 1e-30);
                assert!((radius.to_f64() - 0.5).abs() < 1e-30);
            }
            LpOutcome::Infeasible(_) => panic!("box must be feasible"),
        }
    }

    #[test]
    fn nonnegative_box_contradicts_negative_sum() {
        let cfg = cfg();
        let lp = LinearProgram {
            var_count: 2,
            cuts: vec![LinearCut {
                coeffs: vec![cfg.float_from_i64(1), cfg.float_from_i64(1)],
                bound: cfg.zero(),
            }],
            bounds: unit_box(&cfg, 2),
        };
        match lp_feasible_point(&lp, &cfg).unwrap() {
            LpOutcome::Infeasible(cert) => {
                assert!(cert.validate(2, &cfg));
                assert!(cert.combined_bound.to_f64() <= cert.threshold.to_f64());
            }
            LpOutcome::Point { x, .. } => panic!("x0+x1<0 infeasible in [0,1]^2, got {x:?}"),
        }
    }

    #[test]
    fn single_cut_midpoint() {
        let cfg = cfg();
        let lp = LinearProgram {
            var_count: 1,
            cuts: vec![LinearCut {
                coeffs: vec![cfg.float_from_i64(1)],
                bound: cfg.float_from_f64(0.2),
            }],
            bounds: unit_box(&cfg, 1),
        };
        match lp_feasible_point(&lp, &cfg).unwrap() {
            LpOutcome::Point { x, radius } => {
                assert!((x[0].to_f64() - 0.1).abs() < 1e-25, "got {}", x[0]);
                assert!((radius.to_f64() - 0.1).abs() < 1e-25);
            }
            LpOutcome::Infeasible(_) => panic!("surviving interval (0, 0.2) is nonempty"),
        }
    }

    #[test]
    fn zero_variable_program_and_constant_cuts() {
        let cfg = cfg();
        let clean = LinearProgram { var_count: 0, cuts: Vec::new(), bounds: Vec::new() };
        assert!(lp_feasible_point(&clean, &cfg).unwrap().is_feasible());

        let satisfied = LinearProgram {
            var_count: 0,
            cuts: vec![LinearCut { coeffs: Vec::new(), bound: cfg.float_from_i64(3) }],
            bounds: Vec::new(),
        };
        assert!(lp_feasible_point(&satisfied, &cfg).unwrap().is_feasible());

        let violated = LinearProgram {
            var_count: 0,
            cuts: vec![LinearCut { coeffs: Vec::new(), bound: cfg.float_from_i64(-1) }],
            bounds: Vec::new(),
        };
        match lp_feasible_point(&violated, &cfg).unwrap() {
            LpOutcome::Infeasible(cert) => assert!(cert.validate(0, &cfg)),
            LpOutcome::Point { .. } => panic!("0 < -1 must be infeasible"),
        }
    }

    #[test]
    fn incremental_solver_tracks_one_shot() {
        let cfg = cfg();
        let mut solver = ChebyshevSolver::new(&unit_box(&cfg, 2), &cfg).unwrap();
        // Slice away the top-right corner repeatedly; stays feasible.
        for k in 1..=6 {
            let bound = cfg.float_from_f64(2.0 - 0.2 * f64::from(k));
            solver.add_cut(vec![cfg.float_from_i64(1), cfg.float_from_i64(1)], bound.clone());
            let one_shot = lp_feasible_point(
                &LinearProgram {
                    var_count: 2,
                    cuts: (1..=k)
                        .map(|j| LinearCut {
                            coeffs: vec![cfg.float_from_i64(1), cfg.float_from_i64(1)],
                            bound: cfg.float_from_f64(2.0 - 0.2 * f64::from(j)),
                        })
                        .collect(),
                    bounds: unit_box(&cfg, 2),
                },
                &cfg,
            )
            .unwrap();
            let inc = solver.solve().unwrap();
            match (inc, one_shot) {
                (LpOutcome::Point { radius: r1, .. }, LpOutcome::Point { radius: r2, .. }) => {
                    let gap = (r1.to_f64() - r2.to_f64()).abs();
                    assert!(gap < 1e-25, "incremental {} vs one-shot {}", r1, r2);
                }
                _ => panic!("both solves must stay feasible"),
            }
        }
        // Now cut everything away.
        solver.add_cut(
            vec![cfg.float_from_i64(-1), cfg.float_from_i64(-1)],
            cfg.float_from_f64(-1.5),
        );
        solver.add_cut(vec![cfg.float_from_i64(1), cfg.float_from_i64(1)], cfg.float_from_f64(0.4));
        match solver.solve().unwrap() {
            LpOutcome::Infeasible(cert) => assert!(cert.validate(2, &cfg)),
            LpOutcome::Point { x, .. } => {
                panic!("x0+x1>1.5 and x0+x1<0.4 cannot both hold, got {x:?}")
            }
        }
    }
}
