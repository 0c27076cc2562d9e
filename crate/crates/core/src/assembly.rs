//! Per-m assembly of the balanced round-trip matrix expansion.
//!
//! Raw matrix elements diverge as `xi^{l-l'}` at small frequency; the
//! balanced element `(L xi)^{l'-l} M_{l,l'}` is finite because traces are
//! similarity invariant. The series variable is `t = L xi` throughout, the
//! sphere factors enter at `x = rho t`, the translation factors at `2t`.
//! The matrices `M0..M3` are the `t^0..t^3` coefficients of the balanced
//! elements.
//!
//! Exact-rational mode applies one more symmetric similarity with weights
//! `sqrt((2l+1)(l+m)!(l-m)!)` (and `sqrt(l(l+1))` for the vector field),
//! which renders every entry rational without touching any trace.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{Mode, Scalar};
use crate::scattering::{reduced_d, BoundarySpec, Polarization};
use crate::series::Series;
use crate::wigner;

/// Sphere radius and plane-center separation.
#[derive(Debug, Clone)]
pub struct Geometry {
    r: Scalar,
    l: Scalar,
}

impl Geometry {
    pub fn new(r: Scalar, l: Scalar) -> Result<Self> {
        let g = Geometry { r, l };
        let rho = g.rho().to_f64();
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < rho < 1 (sphere strictly between touching and shrinking), got {rho}"
            )));
        }
        Ok(g)
    }

    /// Geometry with `L = 1`, so `R = rho`.
    pub fn from_rho(rho: Scalar) -> Result<Self> {
        let one = Scalar::one(rho.mode());
        Geometry::new(rho, one)
    }

    pub fn radius(&self) -> &Scalar {
        &self.r
    }

    pub fn center_distance(&self) -> &Scalar {
        &self.l
    }

    pub fn separation(&self) -> Scalar {
        self.l.sub(&self.r)
    }

    pub fn rho(&self) -> Scalar {
        self.r.div(&self.l)
    }
}

/// Reliable doubled end carried by every balanced element (powers through
/// `t^7`; the extraction needs `t^3`).
const TARGET_END2: i64 = 16;
/// Relative order requested from the reduced sphere factors.
const D_ORDER: usize = 8;

pub(crate) enum SphereSet {
    Scalar(Vec<Series>),
    Em(Vec<(Series, Series)>),
}

/// Frequency-independent inputs shared by every block and every geometry:
/// sphere factors in `x` and translation factors in `t`.
pub(crate) struct AssemblyInputs {
    pub mode: Mode,
    sphere: SphereSet,
    /// `e_{l''}(2t)` for `l'' = 0..=2 l_max`.
    e2t: Vec<Series>,
}

pub(crate) fn assembly_inputs(
    spec: &BoundarySpec,
    l_max: i64,
    requested_mode: Mode,
) -> Result<AssemblyInputs> {
    spec.validate()?;
    let mode = spec.effective_mode(requested_mode);
    let l_min = spec.l_min();
    if l_max < l_min {
        return Err(Error::InvalidArgument(format!(
            "truncation l_max = {l_max} below the lowest orbital index {l_min}"
        )));
    }
    if mode == Mode::Exact {
        if let crate::scattering::SphereBoundary::Dielectric { eps, mu } = &spec.sphere {
            if eps.as_rational().is_none() || mu.as_rational().is_none() {
                return Err(Error::InvalidSpec(
                    "exact mode needs rational material parameters".into(),
                ));
            }
        }
    }
    let sphere = if spec.is_em() {
        let mut v = Vec::with_capacity((l_max + 1) as usize);
        for l in 0..=l_max {
            if l < 1 {
                v.push((Series::zero(), Series::zero()));
            } else {
                v.push((
                    reduced_d(spec, Some(Polarization::Te), l, D_ORDER, mode)?,
                    reduced_d(spec, Some(Polarization::Tm), l, D_ORDER, mode)?,
                ));
            }
        }
        SphereSet::Em(v)
    } else {
        let mut v = Vec::with_capacity((l_max + 1) as usize);
        for l in 0..=l_max {
            v.push(reduced_d(spec, None, l, D_ORDER, mode)?);
        }
        SphereSet::Scalar(v)
    };
    let two = Scalar::from_i64(2, mode);
    let e2t = (0..=2 * l_max)
        .map(|lpp| {
            let order = (TARGET_END2 / 2) as usize + lpp as usize;
            crate::bessel::sph_bessel_series(lpp, order, mode)
                .e
                .scale_argument(&two)
        })
        .collect();
    Ok(AssemblyInputs { mode, sphere, e2t })
}

/// Balanced matrix coefficients of one azimuthal block.
#[derive(Debug, Clone)]
pub struct BlockExpansion {
    pub m: i64,
    pub l_lo: i64,
    pub l_hi: i64,
    pub em: bool,
    /// `M0, M1, M2, M3`; for the vector field each is `2n x 2n` with the
    /// TE rows/columns first.
    pub mats: [Matrix; 4],
}

impl BlockExpansion {
    pub fn orbital_count(&self) -> usize {
        (self.l_hi - self.l_lo + 1) as usize
    }

    pub fn dim(&self) -> usize {
        self.orbital_count() * if self.em { 2 } else { 1 }
    }

    /// Polarization-diagonal sub-block of `mats[i]`.
    pub fn polarization_block(&self, i: usize, pol: Polarization) -> Matrix {
        assert!(self.em);
        let n = self.orbital_count();
        let range = match pol {
            Polarization::Te => 0..n,
            Polarization::Tm => n..2 * n,
        };
        self.mats[i].block(range.clone(), range)
    }

    /// Conjugate all four matrices by the same positive diagonal; every
    /// trace downstream is unchanged.
    pub fn conjugate_diag(&self, diag: &[Scalar]) -> BlockExpansion {
        BlockExpansion {
            m: self.m,
            l_lo: self.l_lo,
            l_hi: self.l_hi,
            em: self.em,
            mats: [
                self.mats[0].conjugate_diag(diag),
                self.mats[1].conjugate_diag(diag),
                self.mats[2].conjugate_diag(diag),
                self.mats[3].conjugate_diag(diag),
            ],
        }
    }
}

enum TranslationWeight {
    Plain,
    Orbital, // include the Lambda factor of the vector field
}

fn translation_sum(
    l: i64,
    lp: i64,
    m: i64,
    inputs: &AssemblyInputs,
    weight: TranslationWeight,
) -> Result<Series> {
    let mut acc = Series::zero();
    let mut lpp = (l - lp).abs();
    while lpp <= l + lp {
        let factor = match inputs.mode {
            Mode::Floating => {
                let h = wigner::h_factor(l, lp, lpp, m);
                match weight {
                    TranslationWeight::Plain => h,
                    TranslationWeight::Orbital => {
                        let (lam, _) = wigner::lambda_factors(l, lp, lpp, m)?;
                        h.mul(&lam)
                    }
                }
            }
            Mode::Exact => {
                let h = wigner::h_factor_balanced(l, lp, lpp, m);
                let q = match weight {
                    TranslationWeight::Plain => h,
                    TranslationWeight::Orbital => {
                        let (lam, _) = wigner::lambda_factors_balanced(l, lp, lpp, m)?;
                        h * lam
                    }
                };
                Scalar::Rational(q)
            }
        };
        if !factor.is_zero() {
            acc = acc.try_add(&inputs.e2t[lpp as usize].scalar_mul(&factor))?;
        }
        lpp += 2;
    }
    Ok(acc)
}

fn lambda_tilde_per_t(l: i64, lp: i64, m: i64, mode: Mode) -> Result<Scalar> {
    match mode {
        Mode::Floating => {
            let (_, lt) = wigner::lambda_factors(l, lp, 0, m)?;
            Ok(lt)
        }
        Mode::Exact => {
            let (_, lt) = wigner::lambda_factors_balanced(l, lp, 0, m)?;
            Ok(Scalar::Rational(lt))
        }
    }
}

fn balanced(l: i64, lp: i64, core: Series, mode: Mode) -> Series {
    // (1/2) t^{l'-l-1} times the d-series/translation product.
    core.shift2(2 * (lp - l - 1))
        .scalar_mul(&Scalar::from_ratio(1, 2, mode))
}

/// Balanced scalar element `t^{l'-l} M_{l,l'}(t)` as a series in `t`.
pub fn element_series_scalar(
    l: i64,
    lp: i64,
    m: i64,
    geometry: &Geometry,
    spec: &BoundarySpec,
    requested_mode: Mode,
) -> Result<Series> {
    if l < m.abs() || lp < m.abs() {
        return Err(Error::InvalidArgument(format!(
            "orbital indices must satisfy l, l' >= |m|; got l={l}, l'={lp}, m={m}"
        )));
    }
    let inputs = assembly_inputs(spec, l.max(lp), requested_mode)?;
    let rho = geometry.rho();
    let SphereSet::Scalar(ref d) = inputs.sphere else {
        return Err(Error::InvalidSpec("scalar element of a vector spec".into()));
    };
    let d_rho = d[l as usize].scale_argument(&rho);
    let sum = translation_sum(l, lp, m, &inputs, TranslationWeight::Plain)?;
    let sign = Scalar::from_i64(spec.plane_sign(), inputs.mode);
    Ok(balanced(l, lp, d_rho.mul(&sum), inputs.mode).scalar_mul(&sign))
}

/// Balanced 2x2 polarization block of the vector field, indexed
/// `[row][col]` with TE before TM.
pub fn element_series_em(
    l: i64,
    lp: i64,
    m: i64,
    geometry: &Geometry,
    spec: &BoundarySpec,
    requested_mode: Mode,
) -> Result<[[Series; 2]; 2]> {
    if l < m.abs().max(1) || lp < m.abs().max(1) {
        return Err(Error::InvalidArgument(format!(
            "vector indices must satisfy l, l' >= max(1, |m|); got l={l}, l'={lp}, m={m}"
        )));
    }
    let inputs = assembly_inputs(spec, l.max(lp), requested_mode)?;
    let rho = geometry.rho();
    let SphereSet::Em(ref d) = inputs.sphere else {
        return Err(Error::InvalidSpec("vector element of a scalar spec".into()));
    };
    let (ref te, ref tm) = d[l as usize];
    element_em_core(
        l,
        lp,
        m,
        &te.scale_argument(&rho),
        &tm.scale_argument(&rho),
        &inputs,
    )
}

fn element_em_core(
    l: i64,
    lp: i64,
    m: i64,
    dte_rho: &Series,
    dtm_rho: &Series,
    inputs: &AssemblyInputs,
) -> Result<[[Series; 2]; 2]> {
    let mode = inputs.mode;
    let sum_lambda = translation_sum(l, lp, m, inputs, TranslationWeight::Orbital)?;
    let te_te = balanced(l, lp, dte_rho.mul(&sum_lambda), mode);
    let tm_tm = balanced(l, lp, dtm_rho.mul(&sum_lambda), mode).neg();
    let (te_tm, tm_te) = if m == 0 {
        (Series::zero(), Series::zero())
    } else {
        // The cross entries carry the explicit t of the frequency-linear
        // vector translation factor.
        let lt = lambda_tilde_per_t(l, lp, m, mode)?;
        let sum_plain = translation_sum(l, lp, m, inputs, TranslationWeight::Plain)?
            .scalar_mul(&lt)
            .shift2(2);
        (
            balanced(l, lp, dtm_rho.mul(&sum_plain), mode).neg(),
            balanced(l, lp, dte_rho.mul(&sum_plain), mode),
        )
    };
    Ok([[te_te, te_tm], [tm_te, tm_tm]])
}

fn extract_four(elem: &Series, mode: Mode, l: i64, lp: i64, m: i64) -> Result<[Scalar; 4]> {
    if let Some((off2, lead)) = elem.leading() {
        if off2 < 0 && !lead.is_zero() {
            return Err(Error::UnbalancedElement(off2, l, lp, m));
        }
    }
    // Zeros from structurally empty series carry no mode of their own;
    // coerce them so exact matrices stay rational.
    let coerce = |v: Scalar| if v.is_zero() { Scalar::zero(mode) } else { v };
    Ok([
        coerce(elem.coeff2(0)?),
        coerce(elem.coeff2(2)?),
        coerce(elem.coeff2(4)?),
        coerce(elem.coeff2(6)?),
    ])
}

/// Assemble the balanced `M0..M3` for one azimuthal index.
pub fn assemble_block(
    m: i64,
    l_max: i64,
    geometry: &Geometry,
    spec: &BoundarySpec,
    requested_mode: Mode,
) -> Result<BlockExpansion> {
    let inputs = assembly_inputs(spec, l_max, requested_mode)?;
    assemble_block_with(m, l_max, geometry, spec, &inputs)
}

pub(crate) fn assemble_block_with(
    m: i64,
    l_max: i64,
    geometry: &Geometry,
    spec: &BoundarySpec,
    inputs: &AssemblyInputs,
) -> Result<BlockExpansion> {
    let mode = inputs.mode;
    let l_lo = spec.l_min().max(m.abs());
    if l_max < l_lo {
        return Err(Error::InvalidArgument(format!(
            "l_max = {l_max} below the lowest index {l_lo} of the m = {m} block"
        )));
    }
    if mode == Mode::Exact && geometry.rho().as_rational().is_none() {
        return Err(Error::InvalidSpec("exact mode needs a rational rho".into()));
    }
    let rho = geometry.rho();
    let n = (l_max - l_lo + 1) as usize;
    let dim = n * if spec.is_em() { 2 } else { 1 };
    let mut mats = [
        Matrix::zeros(dim, mode),
        Matrix::zeros(dim, mode),
        Matrix::zeros(dim, mode),
        Matrix::zeros(dim, mode),
    ];
    let sign = spec.plane_sign();

    match inputs.sphere {
        SphereSet::Scalar(ref d) => {
            let d_rho: Vec<Series> = (l_lo..=l_max)
                .map(|l| d[l as usize].scale_argument(&rho))
                .collect();
            for l in l_lo..=l_max {
                for lp in l_lo..=l_max {
                    let sum = translation_sum(l, lp, m, inputs, TranslationWeight::Plain)?;
                    let elem = balanced(l, lp, d_rho[(l - l_lo) as usize].mul(&sum), mode);
                    let vals = extract_four(&elem, mode, l, lp, m)?;
                    let (i, j) = ((l - l_lo) as usize, (lp - l_lo) as usize);
                    for (k, v) in vals.into_iter().enumerate() {
                        mats[k].set(i, j, if sign < 0 { v.neg() } else { v });
                    }
                }
            }
        }
        SphereSet::Em(ref d) => {
            let d_rho: Vec<(Series, Series)> = (l_lo..=l_max)
                .map(|l| {
                    let (ref te, ref tm) = d[l as usize];
                    (te.scale_argument(&rho), tm.scale_argument(&rho))
                })
                .collect();
            for l in l_lo..=l_max {
                for lp in l_lo..=l_max {
                    let (ref dte, ref dtm) = d_rho[(l - l_lo) as usize];
                    let block = element_em_core(l, lp, m, dte, dtm, inputs)?;
                    let (i, j) = ((l - l_lo) as usize, (lp - l_lo) as usize);
                    for (pr, row) in block.iter().enumerate() {
                        for (pc, elem) in row.iter().enumerate() {
                            let vals = extract_four(elem, mode, l, lp, m)?;
                            let (bi, bj) = (pr * n + i, pc * n + j);
                            for (k, v) in vals.into_iter().enumerate() {
                                mats[k].set(bi, bj, if sign < 0 { v.neg() } else { v });
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(BlockExpansion { m, l_lo, l_hi: l_max, em: spec.is_em(), mats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{PlaneBoundary, SphereBoundary};
    use rug::Rational;

    fn dd() -> BoundarySpec {
        BoundarySpec::scalar(SphereBoundary::Dirichlet, PlaneBoundary::Dirichlet).unwrap()
    }

    fn dn() -> BoundarySpec {
        BoundarySpec::scalar(SphereBoundary::Dirichlet, PlaneBoundary::Neumann).unwrap()
    }

    #[test]
    fn dirichlet_swave_block_closed_form() {
        // M = (e^{-2t(1-rho)} - e^{-2t})/(4t): M0 = rho/2,
        // M1 = -rho(2-rho)/2, exactly in rational mode.
        let rho = Scalar::from_ratio(1, 2, Mode::Exact);
        let geom = Geometry::from_rho(rho).unwrap();
        let block = assemble_block(0, 0, &geom, &dd(), Mode::Exact).unwrap();
        assert_eq!(
            block.mats[0].get(0, 0).as_rational().unwrap(),
            &Rational::from((1, 4))
        );
        assert_eq!(
            block.mats[1].get(0, 0).as_rational().unwrap(),
            &Rational::from((-3, 8))
        );
    }

    #[test]
    fn plane_sign_flips_all_orders() {
        let rho = Scalar::from_ratio(2, 5, Mode::Exact);
        let geom = Geometry::from_rho(rho).unwrap();
        let a = assemble_block(0, 1, &geom, &dd(), Mode::Exact).unwrap();
        let b = assemble_block(0, 1, &geom, &dn(), Mode::Exact).unwrap();
        for k in 0..4 {
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    assert_eq!(
                        a.mats[k].get(i, j).neg().as_rational(),
                        b.mats[k].get(i, j).as_rational(),
                        "order {k}, entry ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn off_diagonal_element_is_balanced_to_zero_offset() {
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
        let elem =
            element_series_scalar(0, 1, 0, &geom, &dd(), Mode::Exact).unwrap();
        assert_eq!(elem.offset2(), 0);
    }

    #[test]
    fn element_precondition() {
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
        assert!(element_series_scalar(0, 1, 1, &geom, &dd(), Mode::Exact).is_err());
    }

    #[test]
    fn em_m0_block_decouples_and_m1_vanishes() {
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
        let spec = BoundarySpec::em_conductor();
        let block = assemble_block(0, 2, &geom, &spec, Mode::Exact).unwrap();
        let n = block.orbital_count();
        // Polarizations decouple entirely at m = 0 ...
        for k in 0..4 {
            for i in 0..n {
                for j in n..2 * n {
                    assert!(block.mats[k].get(i, j).is_zero(), "order {k} ({i},{j})");
                    assert!(block.mats[k].get(j, i).is_zero(), "order {k} ({j},{i})");
                }
            }
        }
        // ... and the frequency-linear coefficient vanishes identically.
        for i in 0..2 * n {
            for j in 0..2 * n {
                assert!(block.mats[1].get(i, j).is_zero(), "M1 ({i},{j})");
            }
        }
    }

    #[test]
    fn em_cross_entries_carry_one_extra_power() {
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
        let spec = BoundarySpec::em_conductor();
        let elem = element_series_em(1, 1, 1, &geom, &spec, Mode::Exact).unwrap();
        let diag_off = elem[0][0].offset2();
        let cross_off = elem[0][1].offset2();
        assert_eq!(cross_off - diag_off, 2);
        // M0 has no cross entry, M1 does.
        assert!(elem[0][1].coeff2(0).unwrap().is_zero());
        assert!(!elem[0][1].coeff2(2).unwrap().is_zero());
    }

    #[test]
    fn tm_diagonal_sign_is_reversed() {
        // The assembled (TM,TM) entry carries the extra minus sign of the
        // polarization block, so it is positive although the naive TM
        // ratio has a negative leading coefficient.
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
        let spec = BoundarySpec::em_conductor();
        let block = assemble_block(0, 1, &geom, &spec, Mode::Exact).unwrap();
        let tm_entry = block.mats[0].get(1, 1);
        assert!(!tm_entry.is_zero() && !tm_entry.is_negative());
        let naive = crate::scattering::d_series_tm_conductor(1, 4).unwrap();
        assert!(naive.coeffs()[0].is_negative());
    }

    #[test]
    fn exact_and_float_blocks_share_traces() {
        let spec = dd();
        let rho_q = Scalar::from_ratio(2, 5, Mode::Exact);
        let rho_f = Scalar::from_ratio(2, 5, Mode::Floating);
        let bq = assemble_block(
            1,
            2,
            &Geometry::from_rho(rho_q).unwrap(),
            &spec,
            Mode::Exact,
        )
        .unwrap();
        let bf = assemble_block(
            1,
            2,
            &Geometry::from_rho(rho_f).unwrap(),
            &spec,
            Mode::Floating,
        )
        .unwrap();
        for k in 0..4 {
            let tq = bq.mats[k].trace().rendered();
            let tf = bf.mats[k].trace();
            assert!(
                tq.sub(&tf).abs().to_f64() < 1e-50,
                "trace of order {k} differs"
            );
        }
    }
}
