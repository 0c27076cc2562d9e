//! Independent finite-frequency check of the series-extracted traces.
//!
//! The balanced round-trip matrix is evaluated at real frequencies from
//! the closed hyperbolic/exponential forms alone — no truncated series
//! anywhere — and `Tr ln(1 - M)` is computed by LU log-determinants. An
//! odd polynomial fitted to a descending frequency ladder must reproduce
//! `N1` and `N3`, and the residual left after the fit must fall with the
//! fifth power of the frequency window.
//!
//! The regular Bessel solution cancels catastrophically at small argument
//! in its closed form; the evaluation runs at an elevated internal
//! precision chosen from the truncation and the smallest frequency, which
//! is cheaper than it sounds and keeps this path fully independent.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::Float;

use crate::assembly::Geometry;
use crate::bessel::{e_deriv_value, e_value, s_deriv_value, s_value};
use crate::error::{Error, Result};
use crate::linalg::{fit_powers, lu_factor, spectral_radius_estimate, Matrix};
use crate::lowtemp::n_coefficients;
use crate::precision;
use crate::scalar::{Mode, Scalar};
use crate::scattering::{BoundarySpec, Polarization, SphereBoundary};
use crate::wigner;

/// The balanced matrix at one real frequency for one azimuthal index.
#[derive(Debug, Clone)]
pub struct NumericBlock {
    pub m: i64,
    /// Dimensionless frequency `t = xi L`.
    pub t: Scalar,
    pub matrix: Matrix,
}

fn internal_bits(l_max: i64, t: f64) -> u32 {
    let pad = if t < 1.0 {
        ((2 * l_max + 6) as f64 * (1.0 / t).log2()).ceil() as u32
    } else {
        0
    };
    precision::working_bits() + pad + 64
}

/// Reduced T-matrix factor (pi/2 times the physical one) at a real
/// argument, from the closed forms.
fn reduced_d_value(
    sphere: &SphereBoundary,
    pol: Option<Polarization>,
    l: i64,
    x: &Float,
) -> Float {
    let bits = x.prec();
    match (sphere, pol) {
        (SphereBoundary::Dirichlet, None)
        | (SphereBoundary::Conductor, Some(Polarization::Te)) => {
            s_value(l, x) / e_value(l, x)
        }
        (SphereBoundary::Neumann, None) => {
            // (s/x)' / (e/x)' = (x s' - s) / (x e' - e)
            let num = x.clone() * s_deriv_value(l, x) - s_value(l, x);
            let den = x.clone() * e_deriv_value(l, x) - e_value(l, x);
            num / den
        }
        (SphereBoundary::Conductor, Some(Polarization::Tm)) => {
            s_deriv_value(l, x) / e_deriv_value(l, x)
        }
        (SphereBoundary::Dielectric { eps, mu }, Some(p)) => {
            let (eps, mu) = match p {
                Polarization::Te => (eps.to_float(bits), mu.to_float(bits)),
                Polarization::Tm => (mu.to_float(bits), eps.to_float(bits)),
            };
            let n = (eps.clone() * &mu).sqrt();
            let nx = n * x;
            let se = eps.sqrt();
            let sm = mu.sqrt();
            let num = se.clone() * s_value(l, x) * s_deriv_value(l, &nx)
                - sm.clone() * s_deriv_value(l, x) * s_value(l, &nx);
            let den = se * e_value(l, x) * s_deriv_value(l, &nx)
                - sm * e_deriv_value(l, x) * s_value(l, &nx);
            num / den
        }
        (SphereBoundary::Plasma { omega_p_r }, Some(p)) => {
            let w = omega_p_r.to_float(bits);
            let u = (x.clone().square() + w.square()).sqrt();
            // sqrt(eps) = u/x; numerator and denominator scaled by x.
            let (num, den) = match p {
                Polarization::Te => (
                    u.clone() * s_value(l, x) * s_deriv_value(l, &u)
                        - x.clone() * s_deriv_value(l, x) * s_value(l, &u),
                    u.clone() * e_value(l, x) * s_deriv_value(l, &u)
                        - x.clone() * e_deriv_value(l, x) * s_value(l, &u),
                ),
                Polarization::Tm => (
                    x.clone() * s_value(l, x) * s_deriv_value(l, &u)
                        - u.clone() * s_deriv_value(l, x) * s_value(l, &u),
                    x.clone() * e_value(l, x) * s_deriv_value(l, &u)
                        - u.clone() * e_deriv_value(l, x) * s_value(l, &u),
                ),
            };
            num / den
        }
        _ => unreachable!("spec validation rules out this combination"),
    }
}

/// Direct evaluation of the balanced matrix at a real frequency.
pub fn m_matrix_numeric(
    m: i64,
    l_max: i64,
    geometry: &Geometry,
    spec: &BoundarySpec,
    xi: &Scalar,
) -> Result<NumericBlock> {
    spec.validate()?;
    if xi.is_zero() || xi.is_negative() {
        return Err(Error::InvalidArgument("the oracle needs xi > 0".into()));
    }
    let l0 = spec.l_min().max(m.abs());
    if l_max < l0 {
        return Err(Error::InvalidArgument(format!(
            "l_max = {l_max} below the lowest index {l0} of the m = {m} block"
        )));
    }
    let t_f64 = xi.to_f64() * geometry.center_distance().to_f64();
    let bits = internal_bits(l_max, t_f64);
    let t = xi.to_float(bits) * geometry.center_distance().to_float(bits);
    let x = geometry.rho().to_float(bits) * &t;
    let two_t = Float::with_val(bits, 2) * &t;
    let sign = Float::with_val(bits, spec.plane_sign());

    let n = (l_max - l0 + 1) as usize;
    let em = spec.is_em();
    let dim = n * if em { 2 } else { 1 };
    let mut matrix = Matrix::zeros(dim, Mode::Floating);

    // Translation values shared across elements.
    let e2t: Vec<Float> = (0..=2 * l_max).map(|lpp| e_value(lpp, &two_t)).collect();

    let d_values: Vec<(Float, Option<Float>)> = (l0..=l_max)
        .map(|l| {
            if em {
                (
                    reduced_d_value(&spec.sphere, Some(Polarization::Te), l, &x),
                    Some(reduced_d_value(&spec.sphere, Some(Polarization::Tm), l, &x)),
                )
            } else {
                (reduced_d_value(&spec.sphere, None, l, &x), None)
            }
        })
        .collect();

    for l in l0..=l_max {
        for lp in l0..=l_max {
            let mut sum_h = Float::with_val(bits, 0);
            let mut sum_lambda = Float::with_val(bits, 0);
            let mut lpp = (l - lp).abs();
            while lpp <= l + lp {
                let h = wigner::h_factor_bits(l, lp, lpp, m, bits);
                if !h.is_zero() {
                    if em {
                        let num = (lpp * (lpp + 1) - l * (l + 1) - lp * (lp + 1)) as f64;
                        let root = Float::with_val(bits, (l * (l + 1) * lp * (lp + 1)) as u64)
                            .sqrt();
                        let lam = Float::with_val(bits, num) / (2u32 * root);
                        sum_lambda += lam * &h * &e2t[lpp as usize];
                    }
                    sum_h += h * &e2t[lpp as usize];
                }
                lpp += 2;
            }
            let base = Float::with_val(bits, 0.5)
                * t.clone().pow((lp - l - 1) as i32)
                * &sign;
            let (i, j) = ((l - l0) as usize, (lp - l0) as usize);
            let (ref dte, ref dtm) = d_values[(l - l0) as usize];
            if em {
                let dtm = dtm.as_ref().unwrap();
                let te_te = base.clone() * dte * &sum_lambda;
                let tm_tm = -(base.clone() * dtm * &sum_lambda);
                matrix.set(i, j, Scalar::Float(te_te));
                matrix.set(n + i, n + j, Scalar::Float(tm_tm));
                if m != 0 {
                    let root = Float::with_val(bits, (l * (l + 1) * lp * (lp + 1)) as u64)
                        .sqrt();
                    let lam_tilde = Float::with_val(bits, 2 * m) * &t / root;
                    let te_tm = -(base.clone() * dtm * &sum_h * &lam_tilde);
                    let tm_te = base.clone() * dte * &sum_h * lam_tilde;
                    matrix.set(i, n + j, Scalar::Float(te_tm));
                    matrix.set(n + i, j, Scalar::Float(tm_te));
                }
            } else {
                matrix.set(i, j, Scalar::Float(base * dte * &sum_h));
            }
        }
    }
    Ok(NumericBlock { m, t: Scalar::Float(t), matrix })
}

/// `Tr ln(1 - M)` of one block through the LU log-determinant, guarded by
/// a spectral-radius estimate.
pub fn trace_log_numeric(block: &NumericBlock) -> Result<Scalar> {
    if block.matrix.n() == 0 {
        return Ok(Scalar::zero(Mode::Floating));
    }
    let radius = spectral_radius_estimate(&block.matrix, 120);
    if radius >= 1.0 {
        return Err(Error::SpectralRadius { m: block.m, radius });
    }
    let lu = lu_factor(&block.matrix.one_minus(), block.m)?;
    lu.log_det()
}

/// `Tr ln(1 - M(xi))` summed over the azimuthal index (ascending, with the
/// `-m` blocks folded in by symmetry).
pub fn total_trace_log(
    geometry: &Geometry,
    spec: &BoundarySpec,
    l_max: i64,
    xi: &Scalar,
) -> Result<Scalar> {
    let per_m: Vec<Scalar> = (0..=l_max)
        .into_par_iter()
        .map(|m| {
            let block = m_matrix_numeric(m, l_max, geometry, spec, xi)?;
            trace_log_numeric(&block)
        })
        .collect::<Result<_>>()?;
    let mut acc = Scalar::zero(Mode::Floating);
    for (m, v) in per_m.iter().enumerate() {
        let mult = Scalar::from_i64(if m == 0 { 1 } else { 2 }, Mode::Floating);
        acc = acc.add(&mult.mul(v));
    }
    // Round back to the working precision.
    Ok(Scalar::Float(acc.to_float(precision::working_bits())))
}

/// Outcome of the odd-fit consistency run.
#[derive(Debug, Clone)]
pub struct ConsistencyReport {
    /// Fitted coefficient of `(L xi)^1`.
    pub a1: Scalar,
    /// Fitted coefficient of `(L xi)^3`.
    pub a3: Scalar,
    /// Series-pipeline values being checked.
    pub n1: Scalar,
    pub n3: Scalar,
    /// Per-window RMS of the residual after the degree-4 fit, and the
    /// window scales; the log-log slope should be 5.
    pub window_scales: Vec<f64>,
    pub window_rms: Vec<f64>,
    pub residual_slope: f64,
    /// Relative drift of `a1`, `a3` when the coarsest window is dropped.
    pub drift_a1: f64,
    pub drift_a3: f64,
}

impl ConsistencyReport {
    pub fn err_a1(&self) -> f64 {
        relative_or_absolute(&self.a1, &self.n1)
    }

    pub fn err_a3(&self) -> f64 {
        relative_or_absolute(&self.a3, &self.n3)
    }
}

fn relative_or_absolute(fitted: &Scalar, reference: &Scalar) -> f64 {
    let diff = fitted.sub(reference).abs().to_f64();
    let scale = reference.abs().to_f64();
    if scale > 1e-20 {
        diff / scale
    } else {
        diff
    }
}

/// A descending geometric frequency ladder of `windows` half-decade
/// windows with `per_window` points each, starting at `xi_max`.
pub fn default_xi_grid(xi_max: f64, per_window: usize, windows: usize) -> Vec<Scalar> {
    let bits = precision::working_bits();
    let total = per_window * windows;
    let ratio = 0.5f64.powf(1.0 / per_window as f64);
    (0..total)
        .map(|i| {
            let v = Float::with_val(bits, xi_max) * Float::with_val(bits, ratio).pow(i as u32);
            Scalar::Float(v)
        })
        .collect()
}

/// Fit the odd trace coefficients from finite-frequency evaluations and
/// report their distance to the series-pipeline `N1`, `N3`.
///
/// The ladder is fitted whole with a degree-6 model (higher even/odd
/// powers as nuisance) for `a1`, `a3`; each window is additionally fitted
/// with a degree-4 model, whose residual RMS must scale as the fifth
/// power of the window frequency.
pub fn low_t_consistency_check(
    geometry: &Geometry,
    spec: &BoundarySpec,
    l_max: i64,
    xi_grid: &[Scalar],
    windows: usize,
) -> Result<ConsistencyReport> {
    if windows == 0 || xi_grid.len() % windows != 0 || xi_grid.len() / windows < 6 {
        return Err(Error::InvalidArgument(
            "grid must split into windows of at least 6 points".into(),
        ));
    }
    let per_window = xi_grid.len() / windows;
    let l_scale = geometry.center_distance();
    let data: Vec<(Scalar, Scalar)> = xi_grid
        .par_iter()
        .map(|xi| {
            let tr = total_trace_log(geometry, spec, l_max, xi)?;
            Ok((xi.mul(l_scale).rendered(), tr))
        })
        .collect::<Result<_>>()?;

    let ts: Vec<Scalar> = data.iter().map(|(t, _)| t.clone()).collect();
    let ys: Vec<Scalar> = data.iter().map(|(_, y)| y.clone()).collect();
    let full = fit_powers(&ts, &ys, &[0, 1, 2, 3, 4, 5, 6])?;
    let (a1, a3) = (full[1].clone(), full[3].clone());

    // Drift under grid refinement: drop the coarsest window and refit.
    let refit = fit_powers(
        &ts[per_window..],
        &ys[per_window..],
        &[0, 1, 2, 3, 4, 5, 6],
    )?;
    let drift_a1 = relative_or_absolute(&refit[1], &a1);
    let drift_a3 = relative_or_absolute(&refit[3], &a3);

    // Residual scaling across windows.
    let mut window_scales = Vec::with_capacity(windows);
    let mut window_rms = Vec::with_capacity(windows);
    for w in 0..windows {
        let lo = w * per_window;
        let hi = lo + per_window;
        let coeffs = fit_powers(&ts[lo..hi], &ys[lo..hi], &[0, 1, 2, 3, 4])?;
        let mut acc = 0f64;
        let mut scale_ln = 0f64;
        for i in lo..hi {
            let mut model = Scalar::zero(Mode::Floating);
            for (p, c) in coeffs.iter().enumerate() {
                model = model.add(&c.mul(&ts[i].pow_i(p as i64)));
            }
            let r = ys[i].sub(&model).to_f64();
            acc += r * r;
            scale_ln += ts[i].to_f64().ln();
        }
        window_scales.push((scale_ln / per_window as f64).exp());
        window_rms.push((acc / per_window as f64).sqrt());
    }
    let lnx: Vec<Scalar> = window_scales
        .iter()
        .map(|&s| Scalar::float_with_bits(64, s.ln()))
        .collect();
    let lny: Vec<Scalar> = window_rms
        .iter()
        .map(|&r| Scalar::float_with_bits(64, r.max(1e-300).ln()))
        .collect();
    let slope_fit = fit_powers(&lnx, &lny, &[0, 1])?;
    let residual_slope = slope_fit[1].to_f64();

    let series = n_coefficients(geometry, spec, l_max, Mode::Floating)?;
    Ok(ConsistencyReport {
        a1,
        a3,
        n1: series.n1,
        n3: series.n3,
        window_scales,
        window_rms,
        residual_slope,
        drift_a1,
        drift_a3,
    })
}
