//! Working-precision configuration and extended-precision scalar helpers.
//!
//! Every numerical kernel in this crate operates on [`rug::Float`] values
//! whose significand width is set at run time. Problem data (couplings,
//! geometry ratios, recurrence coefficients) is kept as exact rationals so
//! that tables can be rebuilt identically at any precision.

use rug::{Float, Rational};

use crate::error::ConfigError;

/// Runtime precision settings shared by all kernels.
///
/// `psd_tolerance` and `lp_tolerance` are relative margins: a quadratic form
/// counts as positive semidefinite when its minimal eigenvalue is above
/// `-psd_tolerance * (1 + ||M||_inf)`, and a constraint set counts as feasible
/// only when its Chebyshev radius exceeds `lp_tolerance` times the box scale.
#[derive(Debug, Clone)]
pub struct PrecisionConfig {
    bits: u32,
    psd_tolerance: Float,
    lp_tolerance: Float,
}

impl PrecisionConfig {
    pub const MIN_BITS: u32 = 64;
    pub const DEFAULT_BITS: u32 = 256;

    /// Default configuration: 256-bit significands, psd tolerance 1e-30,
    /// lp tolerance 1e-20.
    pub fn default_bits() -> Self {
        Self::new(Self::DEFAULT_BITS).expect("default bits are valid")
    }

    /// Tolerances scale with the significand width so that narrower builds
    /// keep the same headroom above rounding noise: at `bits = 256` the
    /// defaults are exactly 1e-30 and 1e-20.
    pub fn new(bits: u32) -> Result<Self, ConfigError> {
        if bits < Self::MIN_BITS {
            return Err(ConfigError::BitsTooSmall { bits, min: Self::MIN_BITS });
        }
        let psd = pow10_scaled(bits, -30.0);
        let lp = pow10_scaled(bits, -20.0);
        Self::with_tolerances(bits, psd, lp)
    }

    pub fn with_tolerances(
        bits: u32,
        psd_tolerance: Float,
        lp_tolerance: Float,
    ) -> Result<Self, ConfigError> {
        if bits < Self::MIN_BITS {
            return Err(ConfigError::BitsTooSmall { bits, min: Self::MIN_BITS });
        }
        for (name, tol) in [("psd_tolerance", &psd_tolerance), ("lp_tolerance", &lp_tolerance)] {
            if !(tol.is_finite() && tol.is_sign_positive() && *tol > 0 && *tol < 1) {
                return Err(ConfigError::BadTolerance {
                    name,
                    value: tol.to_f64(),
                });
            }
        }
        Ok(Self {
            bits,
            psd_tolerance: Float::with_val(bits, psd_tolerance),
            lp_tolerance: Float::with_val(bits, lp_tolerance),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn psd_tolerance(&self) -> &Float {
        &self.psd_tolerance
    }

    pub fn lp_tolerance(&self) -> &Float {
        &self.lp_tolerance
    }

    /// A fresh zero at working precision.
    pub fn zero(&self) -> Float {
        Float::new(self.bits)
    }

    pub fn float_from_i64(&self, v: i64) -> Float {
        Float::with_val(self.bits, v)
    }

    pub fn float_from_rational(&self, v: &Rational) -> Float {
        Float::with_val(self.bits, v)
    }

    pub fn float_from_f64(&self, v: f64) -> Float {
        Float::with_val(self.bits, v)
    }
}

/// `10^(exp256 * bits/256)` at precision `bits`; used for bit-scaled
/// tolerance defaults.
fn pow10_scaled(bits: u32, exp256: f64) -> Float {
    let exponent = Float::with_val(bits, exp256 * f64::from(bits) / 256.0);
    let ten = Float::with_val(bits, 10);
    ten.pow(&exponent)
}

use rug::ops::Pow;

/// Parses a plain decimal literal (optional sign, fraction, `e`/`E` exponent)
/// into an exact rational. This is the single entry point through which user
/// supplied numbers (couplings, windows, tolerances) become problem data, so
/// a value like `0.05` is stored as 1/20 rather than the nearest double.
pub fn rational_from_decimal(text: &str) -> Result<Rational, ConfigError> {
    let s = text.trim();
    let bad = || ConfigError::BadDecimal { text: text.to_string() };
    if s.is_empty() {
        return Err(bad());
    }
    let (mantissa, exp_part) = match s.find(['e', 'E']) {
        Some(pos) => {
            let (m, e) = s.split_at(pos);
            let exp: i64 = e[1..].parse().map_err(|_| bad())?;
            (m, exp)
        }
        None => (s, 0),
    };
    let (sign, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let mut numerator = Rational::new();
    for c in int_part.chars().chain(frac_part.chars()) {
        numerator *= 10;
        numerator += c.to_digit(10).unwrap();
    }
    if sign < 0 {
        numerator = -numerator;
    }
    let scale = exp_part - frac_part.len() as i64;
    let ten = Rational::from(10);
    let factor = if scale >= 0 {
        ten.pow(u32::try_from(scale).map_err(|_| bad())?)
    } else {
        let p = ten.pow(u32::try_from(-scale).map_err(|_| bad())?);
        Rational::from(1) / p
    };
    Ok(numerator * factor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tolerances_match_reference_bits() {
        let cfg = PrecisionConfig::default_bits();
        assert_eq!(cfg.bits(), 256);
        let psd = cfg.psd_tolerance().to_f64();
        let lp = cfg.lp_tolerance().to_f64();
        assert!((psd.log10() + 30.0).abs() < 1e-9, "psd default {psd:e}");
        assert!((lp.log10() + 20.0).abs() < 1e-9, "lp default {lp:e}");
    }

    #[test]
    fn rejects_narrow_significands() {
        assert!(PrecisionConfig::new(32).is_err());
        assert!(PrecisionConfig::new(64).is_ok());
    }

    #[test]
    fn decimal_parsing_is_exact() {
        let r = rational_from_decimal("0.05").unwrap();
        assert_eq!(r, Rational::from((1, 20)));
        let r = rational_from_decimal("-1.25e2").unwrap();
        assert_eq!(r, Rational::from(-125));
        let r = rational_from_decimal("3").unwrap();
        assert_eq!(r, Rational::from(3));
        let r = rational_from_decimal("2.4674011").unwrap();
        assert_eq!(r, Rational::from((24674011u64, 10000000u64)));
        assert!(rational_from_decimal("abc").is_err());
        assert!(rational_from_decimal("").is_err());
        assert!(rational_from_decimal("1.2.3").is_err());
    }
}
