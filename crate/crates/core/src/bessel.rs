//! Modified spherical Bessel functions of half-integer order.
//!
//! `s_l` is the regular solution (`sqrt(pi x/2) I_{l+1/2}`), `e_l` the
//! irregular one (`sqrt(2x/pi) K_{l+1/2}`); both have elementary closed
//! forms for integer `l`. Small-argument series feed the expansion
//! pipeline; point values and derivatives feed the plasma-model
//! composition and the finite-frequency oracle.
//!
//! `e_l` is expanded through the product of the `exp(-x)` series and the
//! exact reflection polynomial rather than through the difference of two
//! `I_nu`, which would cancel subtractively.

use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};
use crate::series::Series;

/// Small-argument series of the regular and irregular solutions at one
/// orbital index.
#[derive(Debug, Clone)]
pub struct BesselSeriesPair {
    pub l: i64,
    /// Regular solution; offset `l + 1`, positive leading coefficient.
    pub s: Series,
    /// Irregular solution; offset `-l`, positive leading coefficient.
    pub e: Series,
}

fn odd_double_factorial(n: i64) -> Integer {
    // (2k+1)!! for n = 2k+1; n = -1 maps to 1.
    let mut acc = Integer::from(1);
    let mut k = n;
    while k >= 2 {
        acc *= Integer::from(k);
        k -= 2;
    }
    acc
}

/// Coefficients of the reflection polynomial
/// `q_l(u) = sum_{k=0}^{l} (l+k)! / (k! (l-k)!) (u/2)^k`,
/// so that `e_l(x) = exp(-x) q_l(1/x)`.
pub fn reflection_coeffs(l: i64) -> Vec<Rational> {
    (0..=l)
        .map(|k| {
            let num = Integer::factorial((l + k) as u32).complete();
            let den = Integer::factorial(k as u32).complete()
                * Integer::factorial((l - k) as u32).complete()
                * Integer::from(1i64 << k);
            Rational::from((num, den))
        })
        .collect()
}

/// The series of `exp(sign * x)` with `len` coefficients.
pub fn exp_series(negative: bool, len: usize, mode: Mode) -> Series {
    let coeffs = (0..len)
        .map(|k| {
            let kfac = Integer::factorial(k as u32).complete();
            let sgn = if negative && k % 2 == 1 { -1 } else { 1 };
            Scalar::from_rational(&Rational::from((Integer::from(sgn), kfac)), mode)
        })
        .collect();
    Series::from_coeffs(0, coeffs)
}

/// Small-argument series of `s_l` and `e_l`, each with `order` stored
/// coefficients from its leading power.
pub fn sph_bessel_series(l: i64, order: usize, mode: Mode) -> BesselSeriesPair {
    assert!(l >= 0);
    // s_l(x) = sum_j x^{l+1+2j} / (2^j j! (2l+2j+1)!!)
    let s_coeffs = (0..order)
        .map(|k| {
            if k % 2 == 1 {
                return Scalar::zero(mode);
            }
            let j = (k / 2) as i64;
            let den = Integer::from(1i64 << j)
                * Integer::factorial(j as u32).complete()
                * odd_double_factorial(2 * l + 2 * j + 1);
            Scalar::from_rational(&Rational::from((Integer::from(1), den)), mode)
        })
        .collect();
    let s = Series::from_coeffs(2 * (l + 1), s_coeffs);

    // e_l(x) = exp(-x) * q_l(1/x): the reflection polynomial is exact, so
    // it is padded to the full requested order before the product.
    let refl = reflection_coeffs(l);
    let poly_coeffs = (0..=l)
        .map(|i| Scalar::from_rational(&refl[(l - i) as usize], mode))
        .collect();
    let poly = Series::from_coeffs(-2 * l, poly_coeffs).padded(order);
    let e = exp_series(true, order, mode).mul(&poly);

    BesselSeriesPair { l, s, e }
}

fn to_working_float(y: &Scalar) -> Scalar {
    match y {
        Scalar::Float(_) => y.clone(),
        Scalar::Rational(_) => y.rendered(),
    }
}

fn eps_for(y: &Scalar) -> Scalar {
    let bits = match y {
        Scalar::Float(f) => f.prec(),
        Scalar::Rational(_) => crate::precision::working_bits(),
    };
    Scalar::Float(rug::Float::with_val(bits, rug::Float::u_exp(1, -(bits as i32) - 8)))
}

/// `s_l(y)` by direct summation of the all-positive power series; stable
/// for every `y > 0`.
fn s_series_sum(l: i64, y: &Scalar) -> Scalar {
    let eps = eps_for(y);
    let y2 = y.mul(y);
    let mut term = y
        .pow_i(l + 1)
        .div(&Scalar::from_rational(
            &Rational::from(odd_double_factorial(2 * l + 1)),
            y.mode(),
        ));
    let mut sum = term.clone();
    let mut j: i64 = 0;
    loop {
        let den = Scalar::from_i64(2 * (j + 1) * (2 * l + 2 * j + 3), y.mode());
        term = term.mul(&y2).div(&den);
        sum = sum.add(&term);
        j += 1;
        if term.abs_cmp(&sum.mul(&eps)) == std::cmp::Ordering::Less || j > 100_000 {
            break;
        }
    }
    sum
}

/// `s_l'(y)` by summing the differentiated series (still all positive).
fn s_deriv_series_sum(l: i64, y: &Scalar) -> Scalar {
    let eps = eps_for(y);
    let y2 = y.mul(y);
    let mut base = y.pow_i(l).div(&Scalar::from_rational(
        &Rational::from(odd_double_factorial(2 * l + 1)),
        y.mode(),
    ));
    let mut sum = base.mul(&Scalar::from_i64(l + 1, y.mode()));
    let mut j: i64 = 0;
    loop {
        let den = Scalar::from_i64(2 * (j + 1) * (2 * l + 2 * j + 3), y.mode());
        base = base.mul(&y2).div(&den);
        let term = base.mul(&Scalar::from_i64(l + 3 + 2 * j, y.mode()));
        sum = sum.add(&term);
        j += 1;
        if term.abs_cmp(&sum.mul(&eps)) == std::cmp::Ordering::Less || j > 100_000 {
            break;
        }
    }
    sum
}

/// `e_l(y)` from the exact closed form (all terms positive).
fn e_closed(l: i64, y: &Scalar) -> Scalar {
    let mode = y.mode();
    let inv = y.recip();
    let mut acc = Scalar::zero(mode);
    let mut inv_pow = Scalar::one(mode);
    for c in reflection_coeffs(l) {
        acc = acc.add(&Scalar::from_rational(&c, mode).mul(&inv_pow));
        inv_pow = inv_pow.mul(&inv);
    }
    y.neg().exp().mul(&acc)
}

/// Values and the first `count - 1` derivatives of `s_l` and `e_l` at
/// `y0 > 0`. Higher derivatives follow from the second-order equation
/// `f'' = (1 + l(l+1)/x^2) f` solved order by order around `y0`.
pub fn sph_bessel_point_derivatives(
    l: i64,
    y0: &Scalar,
    count: usize,
) -> Result<(Vec<Scalar>, Vec<Scalar>)> {
    if y0.is_zero() || y0.is_negative() {
        return Err(Error::InvalidArgument(
            "point derivatives need y0 > 0".to_string(),
        ));
    }
    let y = to_working_float(y0);
    let mode = y.mode();

    let s0 = s_series_sum(l, &y);
    let s1 = s_deriv_series_sum(l, &y);
    let e0 = e_closed(l, &y);
    let e1 = if l == 0 {
        e0.neg()
    } else {
        // e_l' = -e_{l-1} - (l/y) e_l, a sum of same-sign terms.
        e_closed(l - 1, &y)
            .add(&Scalar::from_i64(l, mode).div(&y).mul(&e0))
            .neg()
    };

    let s_derivs = extend_by_ode(l, &y, s0, s1, count);
    let e_derivs = extend_by_ode(l, &y, e0, e1, count);
    Ok((s_derivs, e_derivs))
}

fn extend_by_ode(l: i64, y: &Scalar, f0: Scalar, f1: Scalar, count: usize) -> Vec<Scalar> {
    let mode = y.mode();
    if count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![f0];
    }
    // Taylor coefficients c_k = f^{(k)}(y0)/k!; the potential term uses
    // w(h) = 1/(y0+h)^2 = sum_j (j+1)(-1)^j y0^{-(j+2)} h^j.
    let ll1 = Scalar::from_i64(l * (l + 1), mode);
    let inv_y = y.recip();
    let mut w = Vec::with_capacity(count);
    let mut pow = inv_y.mul(&inv_y);
    for j in 0..count {
        let mag = pow.mul(&Scalar::from_i64(j as i64 + 1, mode));
        w.push(if j % 2 == 0 { mag } else { mag.neg() });
        pow = pow.mul(&inv_y);
    }
    let mut c = vec![f0, f1];
    for k in 0..count.saturating_sub(2) {
        // rhs_k = c_k + l(l+1) * sum_j w_j c_{k-j}
        let mut conv = Scalar::zero(mode);
        for j in 0..=k {
            conv = conv.add(&w[j].mul(&c[k - j]));
        }
        let rhs = c[k].add(&ll1.mul(&conv));
        let den = Scalar::from_i64(((k + 1) * (k + 2)) as i64, mode);
        c.push(rhs.div(&den));
    }
    // Derivatives are k! * c_k.
    let mut fac = Scalar::one(mode);
    c.into_iter()
        .enumerate()
        .map(|(k, ck)| {
            if k > 1 {
                fac = fac.mul(&Scalar::from_i64(k as i64, mode));
            }
            ck.mul(&fac)
        })
        .collect()
}

/// Closed-form point values used by the finite-frequency oracle. These use
/// the reflection polynomial with `exp(+-x)` directly; the caller controls
/// the precision of `x` to absorb the small-argument cancellation of the
/// regular solution.
pub fn s_value(l: i64, x: &rug::Float) -> rug::Float {
    let bits = x.prec();
    let inv = rug::Float::with_val(bits, 1u32) / x;
    let mut plus = rug::Float::with_val(bits, 0);
    let mut minus = rug::Float::with_val(bits, 0);
    let mut inv_pow = rug::Float::with_val(bits, 1u32);
    for (k, c) in reflection_coeffs(l).iter().enumerate() {
        let term = rug::Float::with_val(bits, c) * &inv_pow;
        if k % 2 == 0 {
            plus += &term;
        } else {
            minus += &term;
        }
        inv_pow *= &inv;
    }
    // q_l(-1/x) = plus - minus, q_l(1/x) = plus + minus.
    let ex = x.clone().exp();
    let emx = (-x.clone()).exp();
    let sign = if l % 2 == 0 { 1f32 } else { -1f32 };
    (ex * (plus.clone() - &minus) - sign * emx * (plus + minus)) / 2u32
}

pub fn e_value(l: i64, x: &rug::Float) -> rug::Float {
    let bits = x.prec();
    let inv = rug::Float::with_val(bits, 1u32) / x;
    let mut acc = rug::Float::with_val(bits, 0);
    let mut inv_pow = rug::Float::with_val(bits, 1u32);
    for c in reflection_coeffs(l) {
        acc += rug::Float::with_val(bits, &c) * &inv_pow;
        inv_pow *= &inv;
    }
    (-x.clone()).exp() * acc
}

pub fn s_deriv_value(l: i64, x: &rug::Float) -> rug::Float {
    if l == 0 {
        return x.clone().cosh();
    }
    s_value(l - 1, x) - rug::Float::with_val(x.prec(), l) / x * s_value(l, x)
}

pub fn e_deriv_value(l: i64, x: &rug::Float) -> rug::Float {
    if l == 0 {
        return -e_value(0, x);
    }
    -(e_value(l - 1, x) + rug::Float::with_val(x.prec(), l) / x * e_value(l, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn s0_is_sinh() {
        let pair = sph_bessel_series(0, 6, Mode::Exact);
        assert_eq!(pair.s.offset2(), 2);
        let expect = [q(1, 1), q(0, 1), q(1, 6), q(0, 1), q(1, 120), q(0, 1)];
        for (c, e) in pair.s.coeffs().iter().zip(&expect) {
            assert_eq!(c.as_rational().unwrap(), e);
        }
    }

    #[test]
    fn e0_is_exp_and_e1_matches() {
        let pair = sph_bessel_series(0, 5, Mode::Exact);
        assert_eq!(pair.e.offset2(), 0);
        let expect = [q(1, 1), q(-1, 1), q(1, 2), q(-1, 6), q(1, 24)];
        for (c, e) in pair.e.coeffs().iter().zip(&expect) {
            assert_eq!(c.as_rational().unwrap(), e);
        }

        // e_1 = exp(-x)(1 + 1/x): offset -1, coefficients [1, 0, -1/2, 1/3].
        let pair = sph_bessel_series(1, 4, Mode::Exact);
        assert_eq!(pair.e.offset2(), -2);
        let expect = [q(1, 1), q(0, 1), q(-1, 2), q(1, 3)];
        for (c, e) in pair.e.coeffs().iter().zip(&expect) {
            assert_eq!(c.as_rational().unwrap(), e);
        }
    }

    #[test]
    fn series_wronskian_is_minus_one() {
        // s_l e_l' - s_l' e_l = -1 as a series identity, to truncation.
        for l in 0..=5i64 {
            let order = (2 * l + 10) as usize;
            let pair = sph_bessel_series(l, order, Mode::Exact);
            let w = pair
                .s
                .mul(&pair.e.differentiate())
                .try_sub(&pair.s.differentiate().mul(&pair.e))
                .unwrap();
            assert_eq!(w.offset2(), 0, "l = {l}");
            assert_eq!(w.coeff2(0).unwrap().as_rational().unwrap(), &q(-1, 1));
            for k in 1..w.order().min(6) {
                assert!(
                    w.coeff2(2 * k as i64).unwrap().is_zero(),
                    "l = {l}, power {k}"
                );
            }
        }
    }

    #[test]
    fn point_values_match_closed_forms() {
        let one = Scalar::from_i64(1, Mode::Floating);
        let (s, e) = sph_bessel_point_derivatives(0, &one, 2).unwrap();
        let tol = 1e-55;
        assert!(s[0].sub(&one.sinh()).abs().to_f64() < tol);
        assert!(s[1].sub(&one.cosh()).abs().to_f64() < tol);
        assert!(e[0].sub(&one.neg().exp()).abs().to_f64() < tol);
        assert!(e[1].add(&one.neg().exp()).abs().to_f64() < tol);

        // s_1(1) = cosh 1 - sinh 1.
        let (s, _) = sph_bessel_point_derivatives(1, &one, 1).unwrap();
        let expect = one.cosh().sub(&one.sinh());
        assert!(s[0].sub(&expect).abs().to_f64() < tol);
    }

    #[test]
    fn point_derivatives_match_series() {
        // Derivatives from the ODE agree with term-wise differentiation of
        // the series evaluated at the point. The series side differentiates
        // exact coefficients, so the only rounding lives in the final
        // evaluation.
        let y0 = Scalar::from_ratio(7, 10, Mode::Floating);
        let count = 6;
        for l in 0..=3i64 {
            let (s_derivs, e_derivs) = sph_bessel_point_derivatives(l, &y0, count).unwrap();
            // Enough stored orders that the evaluation tail sits far below
            // the comparison tolerance even after five differentiations.
            let order = (2 * l + 52) as usize;
            let pair = sph_bessel_series(l, order, Mode::Exact);
            let mut s_series = pair.s.clone();
            let mut e_series = pair.e.clone();
            let tol = 10f64.powi(-(precision::digits() as i32 - 10));
            for k in 0..count {
                let sv = s_series.evaluate(&y0);
                let ev = e_series.evaluate(&y0);
                assert!(
                    s_derivs[k].sub(&sv).abs().to_f64() < tol * s_derivs[k].abs().to_f64().max(1.0),
                    "s l={l} k={k}"
                );
                assert!(
                    e_derivs[k].sub(&ev).abs().to_f64() < tol * e_derivs[k].abs().to_f64().max(1.0),
                    "e l={l} k={k}"
                );
                s_series = s_series.differentiate();
                e_series = e_series.differentiate();
            }
        }
    }

    #[test]
    fn rejects_nonpositive_point() {
        let zero = Scalar::zero(Mode::Floating);
        assert!(sph_bessel_point_derivatives(1, &zero, 2).is_err());
    }

    #[test]
    fn numeric_closed_forms_consistent() {
        let bits = 400;
        for l in 0..=6i64 {
            let x = rug::Float::with_val(bits, 0.3);
            // Wronskian at a point.
            let w = s_value(l, &x) * e_deriv_value(l, &x)
                - s_deriv_value(l, &x) * e_value(l, &x);
            let err = (w + 1u32).abs();
            assert!(err.to_f64() < 1e-80, "l = {l}: {err}");
        }
    }
}
