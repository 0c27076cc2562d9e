//! Configurable-precision coefficients.
//!
//! [`Scalar`] is the number type every series coefficient and matrix entry
//! is made of. It is either a correctly-rounded float at the process-wide
//! working precision (see [`crate::precision`]) or an exact big rational.
//! Exact mode is closed under `+ - * /`; transcendental operations promote
//! to floating point.

use std::cmp::Ordering;
use std::fmt;

use rug::ops::{CompleteRound, Pow};
use rug::{Complete, Float, Integer, Rational};

use crate::precision;

/// Arithmetic mode for a computation: floating point at the working
/// precision, or exact rational arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Floating,
    Exact,
}

/// A coefficient: floating point at configurable precision, or exact rational.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Float(Float),
    Rational(Rational),
}

impl Scalar {
    pub fn mode(&self) -> Mode {
        match self {
            Scalar::Float(_) => Mode::Floating,
            Scalar::Rational(_) => Mode::Exact,
        }
    }

    pub fn zero(mode: Mode) -> Self {
        Self::from_i64(0, mode)
    }

    pub fn one(mode: Mode) -> Self {
        Self::from_i64(1, mode)
    }

    pub fn from_i64(v: i64, mode: Mode) -> Self {
        match mode {
            Mode::Floating => Scalar::Float(Float::with_val(precision::working_bits(), v)),
            Mode::Exact => Scalar::Rational(Rational::from(v)),
        }
    }

    /// Exact ratio `num/den`, rendered per `mode`.
    pub fn from_ratio(num: i64, den: i64, mode: Mode) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_rational(&Rational::from((num, den)), mode)
    }

    pub fn from_rational(q: &Rational, mode: Mode) -> Self {
        match mode {
            Mode::Floating => {
                Scalar::Float(Float::with_val(precision::working_bits(), q))
            }
            Mode::Exact => Scalar::Rational(q.clone()),
        }
    }

    /// A float at an explicit bit precision (used by the oracle, which
    /// elevates its internal precision).
    pub fn float_with_bits(bits: u32, v: f64) -> Self {
        Scalar::Float(Float::with_val(bits, v))
    }

    pub fn pi(bits: u32) -> Self {
        Scalar::Float(Float::with_val(bits, rug::float::Constant::Pi))
    }

    /// Render to a float at the given bit precision.
    pub fn to_float(&self, bits: u32) -> Float {
        match self {
            Scalar::Float(f) => Float::with_val(bits, f),
            Scalar::Rational(q) => Float::with_val(bits, q),
        }
    }

    /// Render an exact rational to the working float precision; floats are
    /// returned unchanged.
    pub fn rendered(&self) -> Scalar {
        match self {
            Scalar::Float(_) => self.clone(),
            Scalar::Rational(q) => {
                Scalar::Float(Float::with_val(precision::working_bits(), q))
            }
        }
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Scalar::Rational(q) => Some(q),
            Scalar::Float(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Float(f) => f.is_zero(),
            Scalar::Rational(q) => q.cmp0() == Ordering::Equal,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Scalar::Float(f) => f.is_sign_negative() && !f.is_zero(),
            Scalar::Rational(q) => q.cmp0() == Ordering::Less,
        }
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Float(f) => Scalar::Float(f.abs_ref().complete(f.prec())),
            Scalar::Rational(q) => Scalar::Rational(q.abs_ref().complete()),
        }
    }

    /// Compare absolute values. Operands of different modes are compared
    /// after rendering the rational one.
    pub fn abs_cmp(&self, other: &Scalar) -> Ordering {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => {
                a.cmp_abs(b).expect("NaN in coefficient arithmetic")
            }
            (Scalar::Rational(a), Scalar::Rational(b)) => a.cmp_abs(b),
            _ => {
                let bits = self.float_bits().max(other.float_bits());
                self.to_float(bits)
                    .cmp_abs(&other.to_float(bits))
                    .expect("NaN in coefficient arithmetic")
            }
        }
    }

    fn float_bits(&self) -> u32 {
        match self {
            Scalar::Float(f) => f.prec(),
            Scalar::Rational(_) => precision::working_bits(),
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Float(f) => f.to_f64(),
            Scalar::Rational(q) => q.to_f64(),
        }
    }

    pub fn recip(&self) -> Scalar {
        Scalar::one(self.mode()).div(self)
    }

    /// Integer power, `k` may be negative (then the base must be nonzero).
    pub fn pow_i(&self, k: i64) -> Scalar {
        match self {
            Scalar::Float(f) => {
                Scalar::Float(f.pow(k as i32).complete(f.prec()))
            }
            Scalar::Rational(q) => Scalar::Rational(q.pow(k as i32).complete()),
        }
    }

    pub fn sqrt(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.sqrt_ref().complete(f.prec()))
    }

    pub fn ln(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.ln_ref().complete(f.prec()))
    }

    pub fn exp(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.exp_ref().complete(f.prec()))
    }

    pub fn sinh(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.sinh_ref().complete(f.prec()))
    }

    pub fn cosh(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.cosh_ref().complete(f.prec()))
    }

    pub fn coth(&self) -> Scalar {
        let f = self.to_float(self.float_bits());
        Scalar::Float(f.coth_ref().complete(f.prec()))
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => {
                Scalar::Float((a + b).complete(a.prec().max(b.prec())))
            }
            (Scalar::Rational(a), Scalar::Rational(b)) => {
                Scalar::Rational((a + b).complete())
            }
            _ => self.promote_pair(other, |a, b, p| Scalar::Float((a + b).complete(p))),
        }
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => {
                Scalar::Float((a - b).complete(a.prec().max(b.prec())))
            }
            (Scalar::Rational(a), Scalar::Rational(b)) => {
                Scalar::Rational((a - b).complete())
            }
            _ => self.promote_pair(other, |a, b, p| Scalar::Float((a - b).complete(p))),
        }
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => {
                Scalar::Float((a * b).complete(a.prec().max(b.prec())))
            }
            (Scalar::Rational(a), Scalar::Rational(b)) => {
                Scalar::Rational((a * b).complete())
            }
            _ => self.promote_pair(other, |a, b, p| Scalar::Float((a * b).complete(p))),
        }
    }

    pub fn div(&self, other: &Scalar) -> Scalar {
        match (self, other) {
            (Scalar::Float(a), Scalar::Float(b)) => {
                Scalar::Float((a / b).complete(a.prec().max(b.prec())))
            }
            (Scalar::Rational(a), Scalar::Rational(b)) => {
                assert!(other.cmp0_nonzero(), "division by zero rational");
                Scalar::Rational((a / b).complete())
            }
            _ => self.promote_pair(other, |a, b, p| Scalar::Float((a / b).complete(p))),
        }
    }

    fn cmp0_nonzero(&self) -> bool {
        !self.is_zero()
    }

    pub fn neg(&self) -> Scalar {
        match self {
            Scalar::Float(a) => Scalar::Float((-a).complete(a.prec())),
            Scalar::Rational(a) => Scalar::Rational((-a).complete()),
        }
    }

    fn promote_pair(
        &self,
        other: &Scalar,
        op: impl Fn(&Float, &Float, u32) -> Scalar,
    ) -> Scalar {
        let bits = self.float_bits().max(other.float_bits());
        op(&self.to_float(bits), &other.to_float(bits), bits)
    }

    /// Decimal rendering with `sig` significant digits, deterministic for a
    /// given precision. Used by the CLI writers.
    pub fn to_decimal_string(&self, sig: usize) -> String {
        let f = self.to_float(self.float_bits());
        if f.is_zero() {
            return "0".to_string();
        }
        let (mantissa, exp) = f.to_string_radix(10, Some(sig)).split_at_exp();
        format!("{mantissa}e{exp}")
    }
}

/// Split rug's `digits@exp` scientific rendering into mantissa and a
/// decimal exponent of the form `d.ddd / e`.
trait SplitExp {
    fn split_at_exp(self) -> (String, i64);
}

impl SplitExp for String {
    fn split_at_exp(self) -> (String, i64) {
        // rug renders "-1.234e-5" style already when using to_string_radix?
        // It renders "[-]d.ddde[+-]x" only for radix <= 10 with exponent
        // separator 'e'; fall back to returning the raw string if no 'e'.
        if let Some(pos) = self.find(['e', 'E']) {
            let exp = self[pos + 1..].parse::<i64>().unwrap_or(0);
            (self[..pos].to_string(), exp)
        } else {
            (self, 0)
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Rational(q) => write!(f, "{q}"),
        }
    }
}

/// Parse a decimal string (optionally signed, with fraction and exponent)
/// into an exact rational. `"2.3" -> 23/10`, `"1e-3" -> 1/1000`.
pub fn parse_decimal_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    // Plain `num/den` is accepted too.
    if s.contains('/') {
        return Rational::parse(s).ok().map(|i| i.complete());
    }
    let (body, exp10) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (sign, digits) = match body.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, body.strip_prefix('+').unwrap_or(body)),
    };
    let (int_part, frac_part) = match digits.find('.') {
        Some(pos) => (&digits[..pos], &digits[pos + 1..]),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let joined = format!("{int_part}{frac_part}");
    if !joined.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mantissa = Integer::parse(&joined).ok()?.complete() * sign;
    let shift = exp10 - frac_part.len() as i64;
    let mut q = Rational::from(mantissa);
    match shift.cmp(&0) {
        Ordering::Greater => q *= Integer::from(10).pow(shift as u32),
        Ordering::Less => q /= Integer::from(10).pow((-shift) as u32),
        Ordering::Equal => {}
    }
    Some(q)
}

/// Parse into a [`Scalar`] under the requested mode.
pub fn parse_scalar(s: &str, mode: Mode) -> Option<Scalar> {
    parse_decimal_rational(s).map(|q| Scalar::from_rational(&q, mode))
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl std::ops::$trait for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar::$method(self, rhs)
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl std::ops::Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_arithmetic_is_exact() {
        let a = Scalar::from_ratio(1, 3, Mode::Exact);
        let b = Scalar::from_ratio(1, 6, Mode::Exact);
        let sum = a.add(&b);
        assert_eq!(sum.as_rational().unwrap(), &Rational::from((1, 2)));
        let prod = a.mul(&b);
        assert_eq!(prod.as_rational().unwrap(), &Rational::from((1, 18)));
    }

    #[test]
    fn mixed_mode_promotes_to_float() {
        let a = Scalar::from_ratio(1, 2, Mode::Exact);
        let b = Scalar::from_i64(1, Mode::Floating);
        assert_eq!(a.add(&b).mode(), Mode::Floating);
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(parse_decimal_rational("2.3").unwrap(), Rational::from((23, 10)));
        assert_eq!(parse_decimal_rational("1e-3").unwrap(), Rational::from((1, 1000)));
        assert_eq!(
            parse_decimal_rational("-0.125").unwrap(),
            Rational::from((-1, 8))
        );
        assert_eq!(parse_decimal_rational("3/7").unwrap(), Rational::from((3, 7)));
        assert!(parse_decimal_rational("abc").is_none());
    }

    #[test]
    fn coth_matches_definition() {
        let x = Scalar::from_i64(1, Mode::Floating);
        let direct = x.coth();
        let ratio = x.cosh().div(&x.sinh());
        let diff = direct.sub(&ratio).abs();
        assert!(diff.to_f64() < 1e-55);
    }
}
