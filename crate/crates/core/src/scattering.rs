//! Small-frequency series of the sphere's T-matrix factors.
//!
//! Every case reduces to a ratio of regular/irregular Bessel combinations.
//! Internally the crate works with the reduced ratio (the physical factor
//! times pi/2), so that the pi from the translation prefactor cancels
//! symbolically and the exact-rational mode stays rational end to end.
//! The public `d_series_*` functions return the physical normalization.


use crate::bessel::{sph_bessel_point_derivatives, sph_bessel_series};
use crate::error::{Error, Result};
use crate::precision;
use crate::scalar::{Mode, Scalar};
use crate::series::{compose_shifted_sqrt, Series};

/// Which field the fluctuations belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Scalar,
    Electromagnetic,
}

/// Boundary or material condition on the sphere/ball.
#[derive(Debug, Clone)]
pub enum SphereBoundary {
    Dirichlet,
    Neumann,
    /// Perfectly conducting sphere (electromagnetic field).
    Conductor,
    /// Ball with constant permittivity and permeability.
    Dielectric { eps: Scalar, mu: Scalar },
    /// Plasma-model permittivity `1 + (omega_p/xi)^2`; the parameter is the
    /// dimensionless product `omega_p * R`.
    Plasma { omega_p_r: Scalar },
}

/// Condition on the plane. Neumann reverses the sign of the round-trip
/// matrix; the conducting plane of the electromagnetic cases corresponds
/// to the Dirichlet sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneBoundary {
    Dirichlet,
    Neumann,
}

/// Full physics selection: field type, sphere condition, plane sign.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub field: Field,
    pub sphere: SphereBoundary,
    pub plane: PlaneBoundary,
}

/// Polarization channel of a T-matrix factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Te,
    Tm,
}

impl BoundarySpec {
    pub fn scalar(sphere: SphereBoundary, plane: PlaneBoundary) -> Result<Self> {
        let spec = BoundarySpec { field: Field::Scalar, sphere, plane };
        spec.validate()?;
        Ok(spec)
    }

    pub fn em_conductor() -> Self {
        BoundarySpec {
            field: Field::Electromagnetic,
            sphere: SphereBoundary::Conductor,
            plane: PlaneBoundary::Dirichlet,
        }
    }

    pub fn dielectric(eps: Scalar, mu: Scalar) -> Result<Self> {
        let spec = BoundarySpec {
            field: Field::Electromagnetic,
            sphere: SphereBoundary::Dielectric { eps, mu },
            plane: PlaneBoundary::Dirichlet,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn plasma(omega_p_r: Scalar) -> Result<Self> {
        let spec = BoundarySpec {
            field: Field::Electromagnetic,
            sphere: SphereBoundary::Plasma { omega_p_r },
            plane: PlaneBoundary::Dirichlet,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.field, &self.sphere) {
            (Field::Scalar, SphereBoundary::Dirichlet | SphereBoundary::Neumann) => {}
            (Field::Scalar, _) => {
                return Err(Error::InvalidSpec(
                    "scalar field takes Dirichlet or Neumann sphere conditions".into(),
                ))
            }
            (Field::Electromagnetic, SphereBoundary::Conductor) => {}
            (Field::Electromagnetic, SphereBoundary::Dielectric { eps, mu }) => {
                if eps.is_zero() || eps.is_negative() || mu.is_zero() || mu.is_negative() {
                    return Err(Error::InvalidSpec("dielectric needs eps, mu > 0".into()));
                }
                let one = Scalar::one(eps.mode());
                if eps.sub(&one).is_zero() && mu.sub(&Scalar::one(mu.mode())).is_zero() {
                    return Err(Error::InvalidSpec(
                        "dielectric with eps = mu = 1 is transparent".into(),
                    ));
                }
            }
            (Field::Electromagnetic, SphereBoundary::Plasma { omega_p_r }) => {
                if omega_p_r.is_zero() || omega_p_r.is_negative() {
                    return Err(Error::InvalidSpec("plasma needs omega_p > 0".into()));
                }
            }
            (Field::Electromagnetic, _) => {
                return Err(Error::InvalidSpec(
                    "electromagnetic field takes conductor, dielectric or plasma spheres".into(),
                ))
            }
        }
        if self.field == Field::Electromagnetic && self.plane == PlaneBoundary::Neumann {
            return Err(Error::InvalidSpec(
                "electromagnetic cases use the conducting plane".into(),
            ));
        }
        Ok(())
    }

    pub fn is_em(&self) -> bool {
        self.field == Field::Electromagnetic
    }

    /// Lowest orbital index entering the trace.
    pub fn l_min(&self) -> i64 {
        if self.is_em() {
            1
        } else {
            0
        }
    }

    /// Sign applied to the round-trip matrix by the plane condition.
    pub fn plane_sign(&self) -> i64 {
        match self.plane {
            PlaneBoundary::Dirichlet => 1,
            PlaneBoundary::Neumann => -1,
        }
    }

    /// The plasma permittivity is irrational in the frequency, so exact
    /// mode is demoted to floating for it.
    pub fn effective_mode(&self, requested: Mode) -> Mode {
        match self.sphere {
            SphereBoundary::Plasma { .. } => Mode::Floating,
            _ => requested,
        }
    }
}

/// Margin of extra coefficients carried by the Bessel inputs relative to
/// the requested reduced order.
const ORDER_MARGIN: usize = 4;

fn bessel_inputs(l: i64, order: usize, mode: Mode) -> crate::bessel::BesselSeriesPair {
    // The e-series needs `order` coefficients past x^{-l}; the ratio then
    // keeps min() of the relative orders.
    sph_bessel_series(l, order + ORDER_MARGIN, mode)
}

/// Reduced Dirichlet factor `s_l / e_l` (equals the TE conductor one).
pub(crate) fn reduced_dirichlet(l: i64, order: usize, mode: Mode) -> Result<Series> {
    let pair = bessel_inputs(l, order, mode);
    pair.s.div(&pair.e)
}

/// Reduced scalar Neumann factor `(s_l/x)' / (e_l/x)'`.
pub(crate) fn reduced_neumann(l: i64, order: usize, mode: Mode) -> Result<Series> {
    let pair = bessel_inputs(l, order + 2, mode);
    let num = pair.s.shift2(-2).differentiate();
    let den = pair.e.shift2(-2).differentiate();
    num.div(&den)
}

/// Reduced TM conductor factor `s_l' / e_l'`.
pub(crate) fn reduced_tm_conductor(l: i64, order: usize, mode: Mode) -> Result<Series> {
    let pair = bessel_inputs(l, order + 2, mode);
    pair.s.differentiate().div(&pair.e.differentiate())
}

/// Rescale a series `f` with even-index coefficient structure so that it
/// represents `f(n x) / n^{offset}`, using only the exact square `n2 = n^2`.
fn scale_even_indices(series: &Series, n2: &Scalar) -> Series {
    if series.is_zero() {
        return Series::zero();
    }
    let mut factor = Scalar::one(n2.mode());
    let coeffs = series
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if k % 2 == 0 {
                if k > 0 {
                    factor = factor.mul(n2);
                }
                c.mul(&factor)
            } else {
                debug_assert!(c.is_zero(), "even-step series expected");
                c.clone()
            }
        })
        .collect();
    Series::from_coeffs(series.offset2(), coeffs)
}

/// Reduced dielectric factor. With `n^2 = eps*mu` the square roots drop
/// out of the ratio:
/// TE = (A D - mu B C) / (E D - mu E' C), where A = s_l(x), B = s_l'(x),
/// E = e_l(x), E' = e_l'(x), C = s_l(nx)/n^{l+1}, D = s_l'(nx)/n^l.
/// The TM factor swaps eps and mu.
pub(crate) fn reduced_dielectric(
    l: i64,
    pol: Polarization,
    eps: &Scalar,
    mu: &Scalar,
    order: usize,
    mode: Mode,
) -> Result<Series> {
    if eps.is_zero() || eps.is_negative() || mu.is_zero() || mu.is_negative() {
        return Err(Error::InvalidArgument("dielectric needs eps, mu > 0".into()));
    }
    let one = Scalar::one(mode);
    if eps.sub(&one).is_zero() && mu.sub(&one).is_zero() {
        // Transparent ball: the numerator is the Wronskian of identical
        // solutions and vanishes identically.
        return Ok(Series::zero());
    }
    let pair = bessel_inputs(l, order + 4, mode);
    let n2 = eps.mul(mu);
    let weight = match pol {
        Polarization::Te => mu.clone(),
        Polarization::Tm => eps.clone(),
    };
    let a = &pair.s;
    let b = pair.s.differentiate();
    let e = &pair.e;
    let ep = pair.e.differentiate();
    let c_inner = scale_even_indices(a, &n2);
    let d_inner = scale_even_indices(&b, &n2);

    let num = a
        .mul(&d_inner)
        .try_sub(&b.mul(&c_inner).scalar_mul(&weight))?;
    let den = e
        .mul(&d_inner)
        .try_sub(&ep.mul(&c_inner).scalar_mul(&weight))?;
    num.div(&den)
}

/// Reduced plasma-model factor at fixed `w = omega_p R`. The permittivity
/// `1 + w^2/x^2` brings the inner argument `u = sqrt(x^2 + w^2)`, which is
/// not small at small frequency; the inner Bessel functions are therefore
/// expanded about `u = w` through the shifted-sqrt composition. The
/// non-analytic `1/x` of `sqrt(eps)` is kept as an explicit power shift:
/// TE = (U A S'u - x B Su) / (U E S'u - x E' Su), with U the series of u,
/// Su = s_l(u(x)), S'u = s_l'(u(x)). TM swaps the u and x weights.
pub(crate) fn reduced_plasma(
    l: i64,
    pol: Polarization,
    omega_p_r: &Scalar,
    order: usize,
) -> Result<Series> {
    if omega_p_r.is_zero() || omega_p_r.is_negative() {
        return Err(Error::InvalidArgument("plasma needs omega_p > 0".into()));
    }
    let mode = Mode::Floating;
    let w = omega_p_r.rendered();
    let target = order + 6;
    let pair = bessel_inputs(l, target, mode);

    // Point data for s_l at w, one extra derivative for the s_l' window.
    let count = target / 2 + 2;
    let (s_derivs, _) = sph_bessel_point_derivatives(l, &w, count + 1)?;
    let one = Scalar::one(mode);
    let u = compose_shifted_sqrt(&[w.clone(), one.clone()], &w, &one)?.padded(target);
    let su = compose_shifted_sqrt(&s_derivs[..count], &w, &one)?;
    let spu = compose_shifted_sqrt(&s_derivs[1..], &w, &one)?;
    let x = Series::monomial(2, one).padded(target);

    let a = &pair.s;
    let b = pair.s.differentiate();
    let e = &pair.e;
    let ep = pair.e.differentiate();

    let (num, den) = match pol {
        Polarization::Te => (
            u.mul(a).mul(&spu).try_sub(&x.mul(&b).mul(&su))?,
            u.mul(e).mul(&spu).try_sub(&x.mul(&ep).mul(&su))?,
        ),
        Polarization::Tm => (
            x.mul(a).mul(&spu).try_sub(&u.mul(&b).mul(&su))?,
            x.mul(e).mul(&spu).try_sub(&u.mul(&ep).mul(&su))?,
        ),
    };
    num.div(&den)
}

/// Reduced factor for one channel of a boundary spec.
pub(crate) fn reduced_d(
    spec: &BoundarySpec,
    pol: Option<Polarization>,
    l: i64,
    order: usize,
    mode: Mode,
) -> Result<Series> {
    match (&spec.sphere, pol) {
        (SphereBoundary::Dirichlet, None) => reduced_dirichlet(l, order, mode),
        (SphereBoundary::Neumann, None) => reduced_neumann(l, order, mode),
        (SphereBoundary::Conductor, Some(Polarization::Te)) => reduced_dirichlet(l, order, mode),
        (SphereBoundary::Conductor, Some(Polarization::Tm)) => {
            reduced_tm_conductor(l, order, mode)
        }
        (SphereBoundary::Dielectric { eps, mu }, Some(p)) => {
            reduced_dielectric(l, p, eps, mu, order, mode)
        }
        (SphereBoundary::Plasma { omega_p_r }, Some(p)) => {
            reduced_plasma(l, p, omega_p_r, order)
        }
        _ => Err(Error::InvalidSpec(
            "polarization selection does not match the field type".into(),
        )),
    }
}

fn two_over_pi() -> Scalar {
    let bits = precision::working_bits();
    Scalar::from_i64(2, Mode::Floating).div(&Scalar::pi(bits))
}

/// Physical Dirichlet factor `I_nu / K_nu` as a series in `x = xi R`.
pub fn d_series_dirichlet(l: i64, order: usize) -> Result<Series> {
    Ok(reduced_dirichlet(l, order, Mode::Floating)?.scalar_mul(&two_over_pi()))
}

/// Physical scalar Neumann factor `(I_nu/sqrt(x))' / (K_nu/sqrt(x))'`.
pub fn d_series_neumann(l: i64, order: usize) -> Result<Series> {
    Ok(reduced_neumann(l, order, Mode::Floating)?.scalar_mul(&two_over_pi()))
}

/// Physical TM conductor factor `(I_nu sqrt(x))' / (K_nu sqrt(x))'`.
pub fn d_series_tm_conductor(l: i64, order: usize) -> Result<Series> {
    Ok(reduced_tm_conductor(l, order, Mode::Floating)?.scalar_mul(&two_over_pi()))
}

/// Physical dielectric factor for one polarization.
pub fn d_series_dielectric(
    l: i64,
    pol: Polarization,
    eps: &Scalar,
    mu: &Scalar,
    order: usize,
) -> Result<Series> {
    Ok(reduced_dielectric(l, pol, eps, mu, order, Mode::Floating)?.scalar_mul(&two_over_pi()))
}

/// Physical plasma-model factor for one polarization at `w = omega_p R`.
pub fn d_series_plasma(
    l: i64,
    pol: Polarization,
    omega_p_r: &Scalar,
    order: usize,
) -> Result<Series> {
    Ok(reduced_plasma(l, pol, omega_p_r, order)?.scalar_mul(&two_over_pi()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rug::{Complete, Integer, Rational};

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn dirichlet_l0_is_expansion_of_closed_form() {
        // d_0 = (e^{2x} - 1)/pi: coefficients 2^k/(k! pi) from x^1.
        let d = d_series_dirichlet(0, 6).unwrap();
        assert_eq!(d.offset2(), 2);
        let inv_pi = Scalar::pi(crate::precision::working_bits()).recip();
        for (k, c) in d.coeffs().iter().enumerate().take(5) {
            let fac = Integer::factorial(k as u32 + 1).complete();
            let expect = Scalar::from_rational(
                &Rational::from((Integer::from(1) << (k as u32 + 1), fac)),
                Mode::Floating,
            )
            .mul(&inv_pi);
            let rel = c.sub(&expect).abs().to_f64() / expect.to_f64();
            assert!(rel < 1e-50, "k = {k}: rel = {rel:e}");
        }
    }

    #[test]
    fn leading_powers() {
        for l in 0..=4i64 {
            let d = d_series_dirichlet(l, 6).unwrap();
            assert_eq!(d.offset2(), 2 * (2 * l + 1), "dirichlet l = {l}");
        }
        // Scalar Neumann: 2l+1 for l >= 1; the s-wave is pushed to x^3
        // because the constant term of (s_0/x) differentiates away.
        for l in 1..=4i64 {
            let d = d_series_neumann(l, 6).unwrap();
            assert_eq!(d.offset2(), 2 * (2 * l + 1), "neumann l = {l}");
        }
        assert_eq!(d_series_neumann(0, 6).unwrap().offset2(), 6);
        for l in 1..=4i64 {
            let d = d_series_tm_conductor(l, 6).unwrap();
            assert_eq!(d.offset2(), 2 * (2 * l + 1), "tm l = {l}");
        }
    }

    #[test]
    fn neumann_l0_leading_coefficient() {
        let d = d_series_neumann(0, 6).unwrap();
        let expect = -2.0 / (3.0 * std::f64::consts::PI);
        assert!(approx(d.coeffs()[0].to_f64(), expect, 1e-30));
        // Sign is opposite to the Dirichlet s-wave.
        let dd = d_series_dirichlet(0, 6).unwrap();
        assert!(dd.coeffs()[0].to_f64() > 0.0 && d.coeffs()[0].to_f64() < 0.0);
    }

    #[test]
    fn tm_differs_from_te_at_l1() {
        let te = d_series_dirichlet(1, 6).unwrap();
        let tm = d_series_tm_conductor(1, 6).unwrap();
        assert_eq!(te.offset2(), tm.offset2());
        let a = te.coeffs()[0].to_f64();
        let b = tm.coeffs()[0].to_f64();
        assert!((a - b).abs() > 1e-3);
        // TM leading coefficient is -(l+1)/l times the Dirichlet one.
        assert!(approx(b, -2.0 * a, 1e-25));
    }

    #[test]
    fn tm_series_matches_point_ratio() {
        // Two routes: the series evaluated at a point vs. the closed-form
        // hyperbolic ratio at the same point.
        let l = 1;
        let series = d_series_tm_conductor(l, 24).unwrap();
        let bits = 400u32;
        let x = rug::Float::with_val(bits, Rational::from((1, 10)));
        let num = crate::bessel::s_deriv_value(l, &x);
        let den = crate::bessel::e_deriv_value(l, &x);
        let two_over_pi = rug::Float::with_val(bits, 2u32)
            / rug::Float::with_val(bits, rug::float::Constant::Pi);
        let expect = two_over_pi * num / den;
        let got = series.evaluate(&Scalar::Float(x));
        let rel = got.sub(&Scalar::Float(expect.clone())).abs().to_f64() / expect.to_f64().abs();
        assert!(rel < 1e-20, "rel = {rel:e}");
    }

    #[test]
    fn dielectric_transparent_limit_is_zero() {
        let one = Scalar::one(Mode::Floating);
        let d = d_series_dielectric(1, Polarization::Te, &one, &one, 8).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn dielectric_swap_symmetry() {
        // TE with (eps, mu) equals TM with (mu, eps), coefficient by
        // coefficient, exactly in rational mode.
        let eps = Scalar::from_ratio(23, 10, Mode::Exact);
        let mu = Scalar::from_ratio(7, 5, Mode::Exact);
        for l in 1..=3 {
            let te = reduced_dielectric(l, Polarization::Te, &eps, &mu, 8, Mode::Exact).unwrap();
            let tm = reduced_dielectric(l, Polarization::Tm, &mu, &eps, 8, Mode::Exact).unwrap();
            assert_eq!(te.offset2(), tm.offset2());
            for (a, b) in te.coeffs().iter().zip(tm.coeffs()) {
                assert_eq!(a.as_rational().unwrap(), b.as_rational().unwrap());
            }
        }
    }

    #[test]
    fn dielectric_te_mu_one_is_suppressed() {
        // With mu = 1 the x^{2l+1} coefficient cancels exactly and the TE
        // factor starts two powers later.
        let eps = Scalar::from_ratio(23, 10, Mode::Floating);
        let mu = Scalar::one(Mode::Floating);
        for l in 1..=3i64 {
            let d =
                reduced_dielectric(l, Polarization::Te, &eps, &mu, 8, Mode::Floating).unwrap();
            assert_eq!(d.offset2(), 2 * (2 * l + 3), "l = {l}");
        }
    }

    #[test]
    fn dielectric_tm_conductor_limit() {
        // eps -> infinity at mu = 1 drives the TM factor to the conductor
        // one; at eps = 1e6 the leading coefficients agree to 1e-5.
        let eps = Scalar::from_i64(1_000_000, Mode::Floating);
        let mu = Scalar::one(Mode::Floating);
        for l in 1..=3 {
            let diel =
                reduced_dielectric(l, Polarization::Tm, &eps, &mu, 6, Mode::Floating).unwrap();
            let cond = reduced_tm_conductor(l, 6, Mode::Floating).unwrap();
            assert_eq!(diel.offset2(), cond.offset2());
            let rel = diel.coeffs()[0].sub(&cond.coeffs()[0]).abs().to_f64()
                / cond.coeffs()[0].abs().to_f64();
            assert!(rel < 1e-5, "l = {l}: rel = {rel:e}");
        }
    }

    #[test]
    fn plasma_offsets_and_rejection() {
        let w = Scalar::one(Mode::Floating);
        for l in 1..=3i64 {
            for pol in [Polarization::Te, Polarization::Tm] {
                let d = reduced_plasma(l, pol, &w, 8).unwrap();
                assert_eq!(d.offset2(), 2 * (2 * l + 1), "l = {l} {pol:?}");
            }
        }
        let zero = Scalar::zero(Mode::Floating);
        assert!(reduced_plasma(1, Polarization::Te, &zero, 8).is_err());
    }

    #[test]
    fn plasma_has_integer_steps_only() {
        let w = Scalar::from_ratio(1, 2, Mode::Floating);
        let d = reduced_plasma(2, Polarization::Tm, &w, 8).unwrap();
        assert_eq!(d.offset2() % 2, 0);
    }

    #[test]
    fn spec_validation() {
        assert!(BoundarySpec::scalar(SphereBoundary::Dirichlet, PlaneBoundary::Neumann).is_ok());
        assert!(BoundarySpec::scalar(SphereBoundary::Conductor, PlaneBoundary::Dirichlet).is_err());
        let one = Scalar::one(Mode::Floating);
        assert!(BoundarySpec::dielectric(one.clone(), one.clone()).is_err());
        assert!(BoundarySpec::plasma(Scalar::zero(Mode::Floating)).is_err());
        let ok = BoundarySpec::dielectric(Scalar::from_ratio(23, 10, Mode::Floating), one);
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().l_min(), 1);
        // Exact mode requests are demoted for the plasma model.
        let plasma = BoundarySpec::plasma(Scalar::one(Mode::Floating)).unwrap();
        assert_eq!(plasma.effective_mode(Mode::Exact), Mode::Floating);
    }

    #[test]
    fn integer_factorial_sanity() {
        assert_eq!(Integer::factorial(5).complete(), Integer::from(120));
    }
}
