//! Error types shared across the crate.

use thiserror::Error;

use crate::moments::MomentKey;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("significand width {bits} is below the supported minimum {min}")]
    BitsTooSmall { bits: u32, min: u32 },
    #[error("tolerance {name} = {value:?} must lie strictly between 0 and 1")]
    BadTolerance { name: &'static str, value: f64 },
    #[error("cannot parse `{text}` as a decimal number")]
    BadDecimal { text: String },
}

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error(
        "Jacobi eigensolver failed to converge after {sweeps} sweeps \
         (best off-diagonal {best_offdiag:e}, required {required:e})"
    )]
    EigenNonConvergence {
        sweeps: usize,
        best_offdiag: f64,
        required: f64,
        /// Best eigenvalue estimates at abort, ascending.
        best_values: Vec<f64>,
    },
    #[error("simplex did not terminate after {iterations} pivots")]
    SimplexStalled { iterations: usize },
    #[error("linear system solve hit a zero pivot (dimension {dim})")]
    SingularSystem { dim: usize },
    #[error("internal consistency check failed: {what}")]
    Inconsistent { what: String },
}

#[derive(Debug, Error)]
pub enum MomentError {
    #[error("recurrence divisor vanishes at E = {energy} while generating {key}")]
    DivisorZero { key: MomentKey, energy: f64 },
    #[error("key {key} is not reachable from the missing-moment basis")]
    Unreachable { key: MomentKey },
    #[error("energy {energy} lies outside the problem's valid window")]
    OutsideWindow { energy: f64 },
    #[error("no missing moments: use the determinantal path instead of normalization")]
    NoMissingMoments,
    #[error("table has no row for key {key}")]
    MissingTableKey { key: MomentKey },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("no feasible energy found in [{window_lo}, {window_hi}] at the scanned resolution; widen the window, raise scan_points, or lower the order")]
    NoFeasiblePoint { window_lo: f64, window_hi: f64 },
    #[error("found {count} disjoint feasible runs (single-interval assumption violated); feasible scan energies: {energies:?}")]
    MultipleFeasibleRuns { count: usize, energies: Vec<f64> },
    #[error("feasible run touches the {side} edge of the scan window; widen the window to certify that endpoint")]
    RunTouchesWindow { side: &'static str },
    #[error("scan needs at least 3 points, got {got}")]
    TooFewScanPoints { got: usize },
    #[error("empty or inverted energy window")]
    BadWindow,
}
