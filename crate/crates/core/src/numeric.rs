//! Extended-precision helpers shared by every module: the log-domain
//! scalar, exact parsing of gamma values, decimal formatting and a
//! reproducible summation.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Div, Mul};

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Working precision used when none is configured.
pub const DEFAULT_PRECISION: u32 = 256;

/// A strictly positive quantity stored as its natural logarithm.
///
/// Products, quotients and powers are additions and scalings of the stored
/// logarithm, so quantities like `r_s` that decay doubly exponentially never
/// underflow.
#[derive(Clone, Debug)]
pub struct LogScalar {
    log: Float,
}

impl LogScalar {
    pub fn one(prec: u32) -> Self {
        LogScalar {
            log: Float::new(prec),
        }
    }

    /// Wraps a natural logarithm. Panics on NaN or infinity.
    pub fn from_log(log: Float) -> Self {
        assert!(log.is_finite(), "LogScalar requires a finite logarithm");
        LogScalar { log }
    }

    /// `None` when `value` is not strictly positive and finite.
    pub fn from_value(value: &Float) -> Option<Self> {
        if value.is_finite() && value.cmp0() == Some(Ordering::Greater) {
            Some(LogScalar {
                log: Float::with_val(value.prec(), value.ln_ref()),
            })
        } else {
            None
        }
    }

    pub fn from_rational(value: &Rational, prec: u32) -> Option<Self> {
        if value.cmp0() == Ordering::Greater {
            Some(LogScalar {
                log: Float::with_val(prec, value).ln(),
            })
        } else {
            None
        }
    }

    pub fn prec(&self) -> u32 {
        self.log.prec()
    }

    /// Natural logarithm of the represented value.
    pub fn ln(&self) -> &Float {
        &self.log
    }

    pub fn log2(&self) -> Float {
        let ln2 = Float::with_val(self.prec(), rug::float::Constant::Log2);
        Float::with_val(self.prec(), &self.log / &ln2)
    }

    /// Materializes the linear value.
    pub fn value(&self) -> Float {
        Float::with_val(self.prec(), self.log.exp_ref())
    }

    pub fn to_f64(&self) -> f64 {
        self.value().to_f64()
    }

    pub fn sqrt(&self) -> Self {
        LogScalar {
            log: Float::with_val(self.prec(), &self.log / 2u32),
        }
    }

    pub fn square(&self) -> Self {
        LogScalar {
            log: Float::with_val(self.prec(), &self.log * 2u32),
        }
    }

    pub fn powi(&self, exp: i64) -> Self {
        LogScalar {
            log: Float::with_val(self.prec(), &self.log * exp),
        }
    }

    pub fn recip(&self) -> Self {
        LogScalar {
            log: Float::with_val(self.prec(), -&self.log),
        }
    }

    /// |self / other - 1|, computed as |expm1(ln self - ln other)|.
    pub fn rel_diff(&self, other: &LogScalar) -> Float {
        let d = Float::with_val(self.prec(), &self.log - &other.log);
        d.exp_m1().abs()
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for &LogScalar {
    type Output = LogScalar;
    fn mul(self, rhs: &LogScalar) -> LogScalar {
        LogScalar {
            log: Float::with_val(self.prec(), &self.log + &rhs.log),
        }
    }
}

#[allow(clippy::suspicious_arithmetic_impl)]
#[allow(clippy::suspicious_arithmetic_impl)]
impl Div for &LogScalar {
    type Output = LogScalar;
    fn div(self, rhs: &LogScalar) -> LogScalar {
        LogScalar {
            log: Float::with_val(self.prec(), &self.log - &rhs.log),
        }
    }
}

impl PartialEq for LogScalar {
    fn eq(&self, other: &Self) -> bool {
        self.log == other.log
    }
}

impl PartialOrd for LogScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.log.partial_cmp(&other.log)
    }
}

impl fmt::Display for LogScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_decimal(&self.value()))
    }
}

/// Parses an exact rational from `p/q`, a decimal (`0.125`, `.5`) or a
/// decimal with exponent (`1.5e-2`).
pub fn parse_exact(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Config(format!("cannot parse `{text}` as an exact number"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num: Integer = num.trim().parse().map_err(|_| bad())?;
        let den: Integer = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(Error::Config(format!("zero denominator in `{text}`")));
        }
        return Ok(Rational::from((num, den)));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..].parse().map_err(|_| bad())?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(digits.parse::<Integer>().map_err(|_| bad())?);
    let scale = exponent - frac_part.len() as i64;
    let ten = Rational::from(10);
    let factor: Rational = ten.pow(scale.unsigned_abs() as u32);
    if scale >= 0 {
        value *= factor;
    } else {
        value /= factor;
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Number of significant decimal digits emitted for a given binary precision.
pub fn decimal_digits(prec: u32) -> usize {
    (prec as f64 * 0.3011).ceil() as usize + 2
}

/// Renders `x` with enough significant digits to round-trip at its own
/// precision. Trailing zeros are trimmed; moderate exponents use positional
/// notation.
pub fn format_decimal(x: &Float) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x.is_zero() {
        return "0".to_string();
    }
    let raw = x.to_string_radix(10, Some(decimal_digits(x.prec())));
    let (mant, exp) = match raw.split_once('e') {
        Some((m, e)) => (m.to_string(), e.parse::<i64>().unwrap_or(0)),
        None => (raw.clone(), 0),
    };
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(m) => ("-", m.to_string()),
        None => ("", mant),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((&mant, ""));
    let digits = format!("{ip}{fp}");
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    // decimal point sits after position `point` of `digits`
    let point = ip.len() as i64 + exp;
    if (-5..=21).contains(&point) {
        let body = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits)
        } else if point as usize >= digits.len() {
            format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
        } else {
            let (a, b) = digits.split_at(point as usize);
            format!("{a}.{b}")
        };
        format!("{sign}{body}")
    } else {
        let (a, b) = digits.split_at(1);
        let e = point - 1;
        if b.is_empty() {
            format!("{sign}{a}e{e}")
        } else {
            format!("{sign}{a}.{b}e{e}")
        }
    }
}

/// Parses a decimal string into a Float at `prec` bits.
pub fn parse_float(text: &str, prec: u32) -> Result<Float> {
    Float::parse(text.trim())
        .map(|p| Float::with_val(prec, p))
        .map_err(|e| Error::Config(format!("cannot parse `{text}`: {e}")))
}

/// |a - b| / max(|a|, |b|); zero when both are zero.
pub fn rel_diff(a: &Float, b: &Float) -> Float {
    let prec = a.prec().max(b.prec());
    let diff = Float::with_val(prec, a - b).abs();
    let scale = Float::with_val(prec, a.abs_ref()).max(&Float::with_val(prec, b.abs_ref()));
    if scale.is_zero() {
        Float::new(prec)
    } else {
        diff / scale
    }
}

/// `2^-(prec/2)`, the default agreement tolerance for a working precision.
pub fn half_precision_tolerance(prec: u32) -> Float {
    let mut t = Float::with_val(prec, 1);
    t >>= prec / 2;
    t
}

const SUM_CHUNK: usize = 64;

/// Deterministic pairwise-tree sum. Leaves are fixed-size chunks summed in
/// order, so the result does not depend on how many threads produced the
/// values.
pub fn pairwise_sum(values: &[Float], prec: u32) -> Float {
    let mut level: Vec<Float> = values
        .chunks(SUM_CHUNK)
        .map(|chunk| {
            let mut acc = Float::new(prec);
            for v in chunk {
                acc += v;
            }
            acc
        })
        .collect();
    if level.is_empty() {
        return Float::new(prec);
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => Float::with_val(prec, a + b),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop().unwrap()
}

/// Pairwise sum of `f(i)` for `i in 0..len`, with the leaves evaluated in
/// parallel.
pub fn par_pairwise_sum<F>(len: usize, prec: u32, f: F) -> Float
where
    F: Fn(usize) -> Float + Sync,
{
    use rayon::prelude::*;
    let values: Vec<Float> = (0..len).into_par_iter().map(&f).collect();
    pairwise_sum(&values, prec)
}
