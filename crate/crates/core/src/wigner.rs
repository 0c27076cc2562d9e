//! Exact Wigner 3j symbols and the translation factors built from them.
//!
//! The 3j symbols are evaluated by the Racah single-sum formula with exact
//! big-integer factorials and stored as `sign * sqrt(rational)`. Double
//! precision starts losing the cancellations around l ~ 20; the exact form
//! never does, and it also feeds the exact-rational assembly mode, where
//! the per-l square-root factors are removed by a similarity transform
//! (traces are unchanged by it).

use std::collections::HashMap;
use std::sync::Mutex;

use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::precision;
use crate::scalar::Scalar;

/// Exact value of a 3j symbol: `sign * sqrt(radicand)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreeJ {
    sign: i8,
    radicand: Rational,
}

impl ThreeJ {
    fn zero() -> Self {
        ThreeJ { sign: 0, radicand: Rational::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    /// The exact square with the sign of the value attached.
    pub fn signed_square(&self) -> Rational {
        if self.sign < 0 {
            (-&self.radicand).complete()
        } else {
            self.radicand.clone()
        }
    }

    pub fn square(&self) -> &Rational {
        &self.radicand
    }

    /// Render as a float at the given precision.
    pub fn to_float_bits(&self, bits: u32) -> rug::Float {
        let mut f = rug::Float::with_val(bits, &self.radicand);
        f = f.sqrt();
        if self.sign < 0 {
            f = -f;
        }
        f
    }

    /// Render at the working precision.
    pub fn value(&self) -> Scalar {
        Scalar::Float(self.to_float_bits(precision::working_bits()))
    }
}

fn fact(n: i64) -> Integer {
    debug_assert!(n >= 0);
    Integer::factorial(n as u32).complete()
}

static CACHE: Mutex<Option<HashMap<[i64; 6], ThreeJ>>> = Mutex::new(None);

/// Exact Wigner 3j symbol for integer angular momenta. Quantum numbers that
/// violate the selection rules yield exact zero.
pub fn wigner3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> ThreeJ {
    let key = [j1, j2, j3, m1, m2, m3];
    {
        let guard = CACHE.lock().unwrap();
        if let Some(map) = guard.as_ref() {
            if let Some(v) = map.get(&key) {
                return v.clone();
            }
        }
    }
    let v = wigner3j_uncached(j1, j2, j3, m1, m2, m3);
    let mut guard = CACHE.lock().unwrap();
    guard.get_or_insert_with(HashMap::new).insert(key, v.clone());
    v
}

fn wigner3j_uncached(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> ThreeJ {
    if j1 < 0 || j2 < 0 || j3 < 0 {
        return ThreeJ::zero();
    }
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return ThreeJ::zero();
    }
    if j3 < (j1 - j2).abs() || j3 > j1 + j2 {
        return ThreeJ::zero();
    }

    // Racah sum over k with all factorial arguments nonnegative.
    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    if k_min > k_max {
        return ThreeJ::zero();
    }
    let mut sum = Rational::new();
    for k in k_min..=k_max {
        let den = fact(k)
            * fact(j1 + j2 - j3 - k)
            * fact(j1 - m1 - k)
            * fact(j2 + m2 - k)
            * fact(j3 - j2 + m1 + k)
            * fact(j3 - j1 - m2 + k);
        let term = Rational::from((Integer::from(1), den));
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.cmp0() == std::cmp::Ordering::Equal {
        return ThreeJ::zero();
    }

    let delta = Rational::from((
        fact(j1 + j2 - j3) * fact(j1 - j2 + j3) * fact(-j1 + j2 + j3),
        fact(j1 + j2 + j3 + 1),
    ));
    let prod = fact(j1 + m1)
        * fact(j1 - m1)
        * fact(j2 + m2)
        * fact(j2 - m2)
        * fact(j3 + m3)
        * fact(j3 - m3);

    let phase_neg = (j1 - j2 - m3).rem_euclid(2) == 1;
    let sum_neg = sum.cmp0() == std::cmp::Ordering::Less;
    let sign = if phase_neg == sum_neg { 1 } else { -1 };
    let radicand = sum.square() * delta * prod;
    ThreeJ { sign, radicand }
}

/// Exact square root of a rational known to be a perfect square.
pub fn exact_sqrt(q: &Rational) -> Option<Rational> {
    if q.cmp0() == std::cmp::Ordering::Less {
        return None;
    }
    let num = q.numer();
    let den = q.denom();
    if !num.is_perfect_square() || !den.is_perfect_square() {
        return None;
    }
    Some(Rational::from((num.sqrt_ref().complete(), den.sqrt_ref().complete())))
}

/// Sign and exact square of the translation factor
/// `H = sqrt((2l+1)(2l'+1)) (2l''+1) (l l' l''; 0 0 0)(l l' l''; m -m 0)`.
pub fn h_factor_parts(l: i64, lp: i64, lpp: i64, m: i64) -> (i8, Rational) {
    let a = wigner3j(l, lp, lpp, 0, 0, 0);
    let b = wigner3j(l, lp, lpp, m, -m, 0);
    if a.is_zero() || b.is_zero() {
        return (0, Rational::new());
    }
    let sign = a.sign() * b.sign();
    let weight = Rational::from((2 * l + 1) * (2 * lp + 1))
        * Rational::from(2 * lpp + 1).square();
    let radicand = weight * a.square() * b.square();
    (sign, radicand)
}

/// The translation factor rendered at the working precision.
pub fn h_factor(l: i64, lp: i64, lpp: i64, m: i64) -> Scalar {
    Scalar::Float(h_factor_bits(l, lp, lpp, m, precision::working_bits()))
}

pub fn h_factor_bits(l: i64, lp: i64, lpp: i64, m: i64, bits: u32) -> rug::Float {
    let (sign, radicand) = h_factor_parts(l, lp, lpp, m);
    let mut f = rug::Float::with_val(bits, &radicand);
    f = f.sqrt();
    if sign < 0 {
        f = -f;
    }
    f
}

/// `(2l+1)(l+m)!(l-m)!` — square of the scalar balancing weight that
/// renders all matrix entries rational in exact mode.
pub fn g_squared(l: i64, m: i64) -> Rational {
    Rational::from(fact(l + m) * fact(l - m) * Integer::from(2 * l + 1))
}

/// Exact-mode translation factor after the symmetric similarity transform:
/// `H * g_l / g_{l'}` with `g_l = sqrt((2l+1)(l+m)!(l-m)!)`, which is
/// rational because the square-root content of `H` factorizes as
/// `g_l * g_{l'}` times a rational.
pub fn h_factor_balanced(l: i64, lp: i64, lpp: i64, m: i64) -> Rational {
    let (sign, radicand) = h_factor_parts(l, lp, lpp, m);
    if sign == 0 {
        return Rational::new();
    }
    let scaled = radicand * g_squared(l, m) / g_squared(lp, m);
    let root = exact_sqrt(&scaled)
        .expect("translation factor square-root content must factorize per column");
    if sign < 0 {
        -root
    } else {
        root
    }
}

/// Vector-field translation factors of the polarization block:
/// `Lambda = [l''(l''+1) - l(l+1) - l'(l'+1)] / (2 sqrt(l(l+1) l'(l'+1)))`
/// and `LambdaTilde / (xi L) = 2m / sqrt(l(l+1) l'(l'+1))` (the caller
/// keeps the explicit frequency power in the series).
pub fn lambda_factors(l: i64, lp: i64, lpp: i64, m: i64) -> Result<(Scalar, Scalar)> {
    if l < 1 || lp < 1 {
        return Err(Error::InvalidArgument(format!(
            "vector translation factors need l, l' >= 1, got {l}, {lp}"
        )));
    }
    let num = (lpp * (lpp + 1) - l * (l + 1) - lp * (lp + 1)) as f64;
    let bits = precision::working_bits();
    let root = rug::Float::with_val(bits, (l * (l + 1) * lp * (lp + 1)) as u64).sqrt();
    let lam = rug::Float::with_val(bits, num) / (2u32 * root.clone());
    let lam_tilde = rug::Float::with_val(bits, 2 * m) / root;
    Ok((Scalar::Float(lam), Scalar::Float(lam_tilde)))
}

/// Exact-mode vector factors after the additional `sqrt(l(l+1))`
/// similarity: `Lambda * h_l / h_{l'}` and `(LambdaTilde/xiL) * h_l / h_{l'}`.
pub fn lambda_factors_balanced(l: i64, lp: i64, lpp: i64, m: i64) -> Result<(Rational, Rational)> {
    if l < 1 || lp < 1 {
        return Err(Error::InvalidArgument(format!(
            "vector translation factors need l, l' >= 1, got {l}, {lp}"
        )));
    }
    let den = 2 * lp * (lp + 1);
    let lam = Rational::from((lpp * (lpp + 1) - l * (l + 1) - lp * (lp + 1), den));
    let lam_tilde = Rational::from((2 * m, lp * (lp + 1)));
    Ok((lam, lam_tilde))
}
