//! Truncated power series with half-integer leading powers.
//!
//! A [`Series`] stores coefficients for consecutive integer power steps
//! starting at a half-integer offset (kept exact as a doubled integer).
//! It represents `sum_k coeffs[k] * x^(offset + k)`: powers below the
//! offset are exactly zero, powers at and beyond `offset + len` are
//! unknown (lost to truncation). Every operation propagates the reliable
//! order conservatively; silent order loss is the dominant bug class in
//! series code, so the bookkeeping is explicit rather than implied.

use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};

/// A truncated power series in one formal variable.
#[derive(Debug, Clone)]
pub struct Series {
    /// Doubled power of the first stored coefficient (`2 * offset`), so the
    /// half-integer grid stays exact.
    offset2: i64,
    /// Coefficients for consecutive integer power steps.
    coeffs: Vec<Scalar>,
}

impl Series {
    /// The canonical zero series: no coefficients, unlimited reliability.
    pub fn zero() -> Self {
        Series { offset2: 0, coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Build from a doubled offset and coefficient list; leading exact
    /// zeros are trimmed (this preserves the reliable end).
    pub fn from_coeffs(offset2: i64, coeffs: Vec<Scalar>) -> Self {
        Series { offset2, coeffs }.canonical()
    }

    pub fn constant(c: Scalar) -> Self {
        Series::from_coeffs(0, vec![c])
    }

    /// A constant known to be exact, padded with trailing zeros so that it
    /// participates in arithmetic with reliable order `len`.
    pub fn constant_padded(c: Scalar, len: usize) -> Self {
        let mode = c.mode();
        let mut coeffs = vec![c];
        coeffs.resize_with(len.max(1), || Scalar::zero(mode));
        Series::from_coeffs(0, coeffs)
    }

    pub fn monomial(offset2: i64, c: Scalar) -> Self {
        Series::from_coeffs(offset2, vec![c])
    }

    fn canonical(mut self) -> Self {
        while self.coeffs.first().is_some_and(Scalar::is_zero) {
            self.coeffs.remove(0);
            self.offset2 += 2;
        }
        if self.coeffs.is_empty() {
            self.offset2 = 0;
        }
        self
    }

    /// Doubled power of the leading coefficient.
    pub fn offset2(&self) -> i64 {
        self.offset2
    }

    /// Number of stored (reliable) coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    /// One past the last reliable doubled power; `None` means unlimited
    /// (the zero series and exact polynomials padded to taste).
    pub fn end2(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.offset2 + 2 * self.coeffs.len() as i64)
        }
    }

    fn mode(&self) -> Mode {
        self.coeffs.first().map_or(Mode::Floating, Scalar::mode)
    }

    /// Coefficient at doubled power `p2`. Powers below the offset are
    /// exactly zero; powers at or beyond the reliable end are an error.
    pub fn coeff2(&self, p2: i64) -> Result<Scalar> {
        if let Some(end2) = self.end2() {
            if p2 >= end2 {
                return Err(Error::InsufficientOrder { have: end2 - 2, need: p2 });
            }
        }
        if p2 < self.offset2 || (p2 - self.offset2) % 2 != 0 {
            return Ok(Scalar::zero(self.mode()));
        }
        let idx = ((p2 - self.offset2) / 2) as usize;
        Ok(self
            .coeffs
            .get(idx)
            .cloned()
            .unwrap_or_else(|| Scalar::zero(self.mode())))
    }

    pub fn leading(&self) -> Option<(i64, &Scalar)> {
        self.coeffs.first().map(|c| (self.offset2, c))
    }

    /// Term-wise sum. The offsets must differ by an integer, otherwise the
    /// two power grids never align.
    pub fn try_add(&self, rhs: &Series) -> Result<Series> {
        if self.is_zero() {
            return Ok(rhs.clone());
        }
        if rhs.is_zero() {
            return Ok(self.clone());
        }
        if (self.offset2 - rhs.offset2).rem_euclid(2) != 0 {
            return Err(Error::IncompatibleOffsetGrid(self.offset2, rhs.offset2));
        }
        let start2 = self.offset2.min(rhs.offset2);
        let stop2 = self.end2().unwrap().min(rhs.end2().unwrap());
        let mut coeffs = Vec::new();
        let mut p2 = start2;
        while p2 < stop2 {
            let a = self.stored_or_zero(p2);
            let b = rhs.stored_or_zero(p2);
            coeffs.push(a.add(&b));
            p2 += 2;
        }
        Ok(Series::from_coeffs(start2, coeffs))
    }

    fn stored_or_zero(&self, p2: i64) -> Scalar {
        if p2 < self.offset2 {
            return Scalar::zero(self.mode());
        }
        let idx = ((p2 - self.offset2) / 2) as usize;
        self.coeffs
            .get(idx)
            .cloned()
            .unwrap_or_else(|| Scalar::zero(self.mode()))
    }

    pub fn neg(&self) -> Series {
        Series {
            offset2: self.offset2,
            coeffs: self.coeffs.iter().map(Scalar::neg).collect(),
        }
    }

    pub fn try_sub(&self, rhs: &Series) -> Result<Series> {
        self.try_add(&rhs.neg())
    }

    /// Cauchy product; offsets add, the reliable order is the minimum of
    /// the operands' orders.
    pub fn mul(&self, rhs: &Series) -> Series {
        if self.is_zero() || rhs.is_zero() {
            return Series::zero();
        }
        let rel = self.coeffs.len().min(rhs.coeffs.len());
        let mode = self.coeffs[0].mul(&rhs.coeffs[0]).mode();
        let mut coeffs = vec![Scalar::zero(mode); rel];
        for (i, a) in self.coeffs.iter().enumerate().take(rel) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                let k = i + j;
                if k >= rel {
                    break;
                }
                coeffs[k] = coeffs[k].add(&a.mul(b));
            }
        }
        Series::from_coeffs(self.offset2 + rhs.offset2, coeffs)
    }

    pub fn scalar_mul(&self, s: &Scalar) -> Series {
        if s.is_zero() {
            return Series::zero();
        }
        Series::from_coeffs(
            self.offset2,
            self.coeffs.iter().map(|c| c.mul(s)).collect(),
        )
    }

    /// Reciprocal of the first `rel` coefficients by standard series
    /// inversion.
    fn invert_to(&self, rel: usize) -> Result<Series> {
        let Some((_, lead)) = self.leading() else {
            return Err(Error::ZeroLeadingCoefficient);
        };
        if lead.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        let mode = lead.mode();
        let inv0 = lead.recip();
        let mut inv = vec![inv0.clone()];
        for k in 1..rel {
            let mut acc = Scalar::zero(mode);
            for j in 1..=k {
                let bj = match self.coeffs.get(j) {
                    Some(b) if !b.is_zero() => b,
                    _ => continue,
                };
                acc = acc.add(&bj.mul(&inv[k - j]));
            }
            inv.push(acc.mul(&inv0).neg());
        }
        Ok(Series::from_coeffs(-self.offset2, inv))
    }

    /// `self / rhs`. The divisor must have a nonzero leading coefficient.
    pub fn div(&self, rhs: &Series) -> Result<Series> {
        if rhs.is_zero() {
            return Err(Error::ZeroLeadingCoefficient);
        }
        if self.is_zero() {
            return Ok(Series::zero());
        }
        let rel = self.coeffs.len().min(rhs.coeffs.len());
        let inv = rhs.invert_to(rel)?;
        Ok(self.mul(&inv))
    }

    /// Formal derivative. A term with total power zero differentiates away.
    pub fn differentiate(&self) -> Series {
        if self.is_zero() {
            return Series::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let p2 = self.offset2 + 2 * k as i64;
                c.mul(&Scalar::from_ratio(p2, 2, c.mode()))
            })
            .collect();
        Series::from_coeffs(self.offset2 - 2, coeffs)
    }

    /// Multiply by `x^(delta2/2)`.
    pub fn shift2(&self, delta2: i64) -> Series {
        if self.is_zero() {
            return Series::zero();
        }
        Series { offset2: self.offset2 + delta2, coeffs: self.coeffs.clone() }
    }

    /// Substitute `x -> c * x` (integer offsets only).
    pub fn scale_argument(&self, c: &Scalar) -> Series {
        if self.is_zero() {
            return Series::zero();
        }
        debug_assert!(self.offset2 % 2 == 0, "argument scaling needs integer powers");
        let mut factor = c.pow_i(self.offset2 / 2);
        let coeffs = self
            .coeffs
            .iter()
            .map(|v| {
                let out = v.mul(&factor);
                factor = factor.mul(c);
                out
            })
            .collect();
        Series::from_coeffs(self.offset2, coeffs)
    }

    /// Keep at most the first `rel` coefficients.
    pub fn truncate_order(&self, rel: usize) -> Series {
        if self.coeffs.len() <= rel {
            return self.clone();
        }
        Series::from_coeffs(self.offset2, self.coeffs[..rel].to_vec())
    }

    /// Extend with trailing exact zeros. Only valid when the series is an
    /// exactly-known polynomial (the padding asserts reliability).
    pub fn padded(&self, len: usize) -> Series {
        if self.is_zero() {
            return Series::zero();
        }
        let mode = self.mode();
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < len {
            coeffs.resize_with(len, || Scalar::zero(mode));
        }
        Series { offset2: self.offset2, coeffs }
    }

    /// Evaluate at a positive point (Horner on the stored part).
    pub fn evaluate(&self, x: &Scalar) -> Scalar {
        let mode = x.mode();
        let mut acc = Scalar::zero(mode);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        if self.is_zero() {
            return acc;
        }
        let lead_pow = if self.offset2 % 2 == 0 {
            x.pow_i(self.offset2 / 2)
        } else {
            x.sqrt().pow_i(self.offset2)
        };
        acc.mul(&lead_pow)
    }

    /// Largest coefficient magnitude (useful for scale-aware comparisons).
    pub fn max_abs_coeff(&self) -> Scalar {
        let mut best = Scalar::zero(self.mode());
        for c in &self.coeffs {
            if c.abs_cmp(&best) == std::cmp::Ordering::Greater {
                best = c.abs();
            }
        }
        best
    }
}

/// Taylor series in `x` of `f(sqrt(y0^2 + scale^2 x^2))` about `x = 0`.
///
/// `f_point_derivatives` holds `f(y0), f'(y0), ...`; the inner square root
/// is analytic only for `y0 > 0`, and the result contains only even powers
/// of `x`. The reliable order is twice the number of supplied derivatives.
pub fn compose_shifted_sqrt(
    f_point_derivatives: &[Scalar],
    y0: &Scalar,
    scale: &Scalar,
) -> Result<Series> {
    if y0.is_zero() || y0.is_negative() {
        return Err(Error::NonAnalyticComposition);
    }
    let count = f_point_derivatives.len();
    if count == 0 {
        return Ok(Series::zero());
    }
    let mode = f_point_derivatives[0].mode();
    let target = 2 * count;

    // Deviation g(x) = sqrt(y0^2 + s^2 x^2) - y0 = y0 * (sqrt(1+z) - 1),
    // z = (s/y0)^2 x^2, via the binomial series for sqrt(1+z).
    let inner = if scale.is_zero() {
        Series::zero()
    } else {
        let z_unit = scale.div(y0).pow_i(2);
        let mut coeffs = Vec::new();
        let mut binom = Rational::from((1, 2));
        let mut z_pow = z_unit.clone();
        for p in 2..target as i64 {
            if p % 2 == 0 {
                let j = p / 2;
                if j > 1 {
                    // C_j = C_{j-1} * (3 - 2j) / (2j)
                    binom *= Rational::from((3 - 2 * j, 2 * j));
                    z_pow = z_pow.mul(&z_unit);
                }
                let c = Scalar::from_rational(&binom, mode).mul(&z_pow).mul(y0);
                coeffs.push(c);
            } else {
                coeffs.push(Scalar::zero(mode));
            }
        }
        Series::from_coeffs(4, coeffs)
    };

    // Horner over the Taylor polynomial of f about y0.
    let taylor_coeff = |k: usize| -> Scalar {
        let kfac = Integer::factorial(k as u32).complete();
        f_point_derivatives[k].mul(&Scalar::from_rational(
            &Rational::from((Integer::from(1), kfac)),
            mode,
        ))
    };
    let mut acc = Series::constant_padded(taylor_coeff(count - 1), target);
    for k in (0..count - 1).rev() {
        acc = acc.mul(&inner);
        acc = acc.try_add(&Series::constant_padded(taylor_coeff(k), target))?;
    }
    Ok(acc.truncate_order(target))
}

impl std::fmt::Display for Series {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        if self.offset2 % 2 == 0 {
            write!(f, "x^{}: [", self.offset2 / 2)?;
        } else {
            write!(f, "x^{}/2: [", self.offset2)?;
        }
        for (k, c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{:.6e}", c.to_f64())?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(offset2: i64, vals: &[(i64, i64)]) -> Series {
        Series::from_coeffs(
            offset2,
            vals.iter()
                .map(|&(n, d)| Scalar::from_ratio(n, d, Mode::Exact))
                .collect(),
        )
    }

    fn assert_coeffs(series: &Series, offset2: i64, expect: &[(i64, i64)]) {
        assert_eq!(series.offset2(), offset2, "offset of {series}");
        assert_eq!(series.order(), expect.len(), "order of {series}");
        for (c, &(n, d)) in series.coeffs().iter().zip(expect) {
            assert_eq!(c.as_rational().unwrap(), &Rational::from((n, d)));
        }
    }

    #[test]
    fn add_identity_and_cancellation() {
        let one = s(0, &[(1, 1)]);
        let zero_coeff = s(0, &[(0, 1)]);
        let sum = one.try_add(&zero_coeff).unwrap();
        assert_coeffs(&sum, 0, &[(1, 1)]);

        let a = s(2, &[(2, 1), (2, 1)]);
        let b = s(2, &[(-2, 1), (0, 1)]);
        let sum = a.try_add(&b).unwrap();
        // Leading cancellation trims the exact zero, reliability end kept.
        assert_coeffs(&sum, 4, &[(2, 1)]);
        assert_eq!(sum.end2(), Some(6));
    }

    #[test]
    fn add_rejects_incompatible_grids() {
        let half = s(-1, &[(1, 1)]);
        let whole = s(0, &[(1, 1)]);
        match half.try_add(&whole) {
            Err(Error::IncompatibleOffsetGrid(_, _)) => {}
            other => panic!("expected grid error, got {other:?}"),
        }
    }

    #[test]
    fn mul_offsets_cancel() {
        let a = s(1, &[(1, 1)]);
        let b = s(-1, &[(1, 1)]);
        assert_coeffs(&a.mul(&b), 0, &[(1, 1)]);

        let p = s(0, &[(1, 1), (1, 1)]);
        let q = s(0, &[(1, 1), (-1, 1)]);
        assert_coeffs(&p.mul(&q), 0, &[(1, 1), (0, 1)]);
    }

    #[test]
    fn mul_exponential_product() {
        // e^x * e^{-x} = 1, checked to order 4 with independently built
        // factorial coefficients.
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for k in 0..4u32 {
            let kfac = Integer::factorial(k).complete();
            pos.push(Scalar::from_rational(
                &Rational::from((Integer::from(1), kfac.clone())),
                Mode::Exact,
            ));
            neg.push(Scalar::from_rational(
                &Rational::from((Integer::from(if k % 2 == 0 { 1 } else { -1 }), kfac)),
                Mode::Exact,
            ));
        }
        let prod = Series::from_coeffs(0, pos).mul(&Series::from_coeffs(0, neg));
        assert_coeffs(&prod, 0, &[(1, 1), (0, 1), (0, 1), (0, 1)]);
    }

    #[test]
    fn div_examples() {
        let a = s(2, &[(1, 1)]);
        assert_coeffs(&a.div(&a).unwrap(), 0, &[(1, 1)]);

        let num = s(0, &[(1, 1), (0, 1), (0, 1)]);
        let den = s(0, &[(1, 1), (1, 1), (0, 1)]);
        assert_coeffs(&num.div(&den).unwrap(), 0, &[(1, 1), (-1, 1), (1, 1)]);

        let bad = s(2, &[(1, 1)]).shift2(-2); // x^0 coefficient... still fine
        assert!(!bad.is_zero());
        let zero_lead = Series::from_coeffs(
            0,
            vec![Scalar::zero(Mode::Exact), Scalar::one(Mode::Exact)],
        );
        // canonicalization turned [0, 1] into x^1: [1]; emulate an exactly
        // zero divisor instead.
        match s(0, &[(1, 1)]).div(&Series::zero()) {
            Err(Error::ZeroLeadingCoefficient) => {}
            other => panic!("expected zero-leading error, got {other:?}"),
        }
        // The canonicalized [0,1] divisor is x: division shifts the offset.
        let quot = s(0, &[(1, 1)]).div(&zero_lead).unwrap();
        assert_coeffs(&quot, -2, &[(1, 1)]);
    }

    #[test]
    fn differentiate_examples() {
        assert_coeffs(&s(4, &[(1, 1)]).differentiate(), 2, &[(2, 1)]);
        // Half-integer power rule: d/dx x^{-1/2} = -1/2 x^{-3/2}.
        let half = s(-1, &[(1, 1)]).differentiate();
        assert_coeffs(&half, -3, &[(-1, 2)]);
        // Constants differentiate to the canonical zero series.
        assert!(s(0, &[(7, 1)]).differentiate().is_zero());
    }

    #[test]
    fn product_rule_holds_to_truncation() {
        let a = s(0, &[(1, 1), (2, 1), (3, 1), (-1, 2)]);
        let b = s(2, &[(1, 3), (0, 1), (5, 1), (7, 1)]);
        let lhs = a.mul(&b).differentiate();
        let rhs = a
            .differentiate()
            .mul(&b)
            .try_add(&a.mul(&b.differentiate()))
            .unwrap();
        let stop = lhs.end2().unwrap().min(rhs.end2().unwrap());
        let mut p2 = lhs.offset2().min(rhs.offset2());
        while p2 < stop {
            assert_eq!(
                lhs.coeff2(p2).unwrap().as_rational(),
                rhs.coeff2(p2).unwrap().as_rational()
            );
            p2 += 2;
        }
    }

    #[test]
    fn compose_sqrt_binomial() {
        // f = identity: series of sqrt(1 + x^2).
        let one = Scalar::one(Mode::Exact);
        let derivs = vec![
            one.clone(),
            one.clone(),
            Scalar::zero(Mode::Exact),
            Scalar::zero(Mode::Exact),
            Scalar::zero(Mode::Exact),
        ];
        let series = compose_shifted_sqrt(&derivs, &one, &one).unwrap();
        assert_eq!(series.coeff2(0).unwrap().as_rational().unwrap(), &Rational::from(1));
        assert!(series.coeff2(2).unwrap().is_zero());
        assert_eq!(
            series.coeff2(4).unwrap().as_rational().unwrap(),
            &Rational::from((1, 2))
        );
        assert!(series.coeff2(6).unwrap().is_zero());
        assert_eq!(
            series.coeff2(8).unwrap().as_rational().unwrap(),
            &Rational::from((-1, 8))
        );
    }

    #[test]
    fn compose_sqrt_square_function() {
        // f(y) = y^2 at y0 = 2: f(sqrt(4 + x^2)) = 4 + x^2 exactly.
        let derivs = vec![
            Scalar::from_i64(4, Mode::Exact),
            Scalar::from_i64(4, Mode::Exact),
            Scalar::from_i64(2, Mode::Exact),
            Scalar::zero(Mode::Exact),
            Scalar::zero(Mode::Exact),
        ];
        let y0 = Scalar::from_i64(2, Mode::Exact);
        let series = compose_shifted_sqrt(&derivs, &y0, &Scalar::one(Mode::Exact)).unwrap();
        assert_eq!(series.coeff2(0).unwrap().as_rational().unwrap(), &Rational::from(4));
        assert_eq!(series.coeff2(4).unwrap().as_rational().unwrap(), &Rational::from(1));
        for p2 in [2, 6, 8] {
            assert!(series.coeff2(p2).unwrap().is_zero(), "power {p2}/2");
        }
    }

    #[test]
    fn compose_sqrt_rejects_zero_point() {
        let derivs = vec![Scalar::one(Mode::Exact)];
        let zero = Scalar::zero(Mode::Exact);
        assert!(matches!(
            compose_shifted_sqrt(&derivs, &zero, &Scalar::one(Mode::Exact)),
            Err(Error::NonAnalyticComposition)
        ));
    }

    #[test]
    fn compose_sqrt_zero_function() {
        let derivs = vec![Scalar::zero(Mode::Exact); 4];
        let series =
            compose_shifted_sqrt(&derivs, &Scalar::one(Mode::Exact), &Scalar::one(Mode::Exact))
                .unwrap();
        assert!(series.is_zero());
    }

    #[test]
    fn scale_argument_scales_powers() {
        let a = s(2, &[(1, 1), (1, 1)]); // x + x^2
        let two = Scalar::from_i64(2, Mode::Exact);
        let scaled = a.scale_argument(&two); // 2x + 4x^2
        assert_coeffs(&scaled, 2, &[(2, 1), (4, 1)]);
    }
}
