//! Trace extraction of the low-temperature coefficients and the derived
//! thermal quantities.
//!
//! Per azimuthal block, with `A = 1 - M0` factored once:
//! `N1 = -tr(A^{-1} M1)` and
//! `N3 = -tr(A^{-1} M3) - tr(A^{-1} M1 A^{-1} M2) - tr((A^{-1} M1)^3)/3`,
//! all through linear solves. Blocks for `m` and `-m` contribute equally,
//! so only `m >= 0` is assembled and the sum is reduced in ascending `m`
//! for bit-stable results.

use rayon::prelude::*;

use crate::assembly::{assemble_block_with, assembly_inputs, AssemblyInputs, Geometry};
use crate::error::{Error, Result};
use crate::linalg::{fit_powers, lu_factor};
use crate::precision;
use crate::scalar::{Mode, Scalar};
use crate::scattering::{BoundarySpec, Polarization};

/// Per-block trace values (a single block, not doubled for `-m`).
#[derive(Debug, Clone)]
pub struct PerBlock {
    pub m: i64,
    pub n1: Scalar,
    pub n3: Scalar,
    pub n3_te: Option<Scalar>,
    pub n3_tm: Option<Scalar>,
}

/// Totals of the frequency-linear and frequency-cubic trace coefficients,
/// plus the per-m breakdown.
#[derive(Debug, Clone)]
pub struct LowTResult {
    pub geometry: Geometry,
    pub l_max: i64,
    pub n1: Scalar,
    pub n3: Scalar,
    /// Vector field only: polarization-diagonal split of `N3`.
    pub n3_te: Option<Scalar>,
    pub n3_tm: Option<Scalar>,
    /// Blocks for `m = 0..=l_max`; the `-m` block equals the `+m` one.
    pub per_m: Vec<PerBlock>,
}

impl LowTResult {
    /// Block values for a signed azimuthal index.
    pub fn block(&self, m: i64) -> Option<&PerBlock> {
        self.per_m.get(m.unsigned_abs() as usize)
    }
}

fn block_traces(block: &crate::assembly::BlockExpansion) -> Result<PerBlock> {
    let a = block.mats[0].one_minus();
    let lu = lu_factor(&a, block.m)?;
    let x1 = lu.solve_matrix(&block.mats[1]);
    let x2 = lu.solve_matrix(&block.mats[2]);
    let x3 = lu.solve_matrix(&block.mats[3]);
    let n1 = x1.trace().neg();
    let mode = a.mode();
    let third = Scalar::from_ratio(1, 3, mode);
    let cubic = x1.matmul(&x1).trace_of_product(&x1);
    let n3 = x3
        .trace()
        .add(&x1.trace_of_product(&x2))
        .add(&third.mul(&cubic))
        .neg();

    let (n3_te, n3_tm) = if block.em {
        let mut split = Vec::with_capacity(2);
        for pol in [Polarization::Te, Polarization::Tm] {
            let m0 = block.polarization_block(0, pol);
            let m3 = block.polarization_block(3, pol);
            let lu_p = lu_factor(&m0.one_minus(), block.m)?;
            split.push(lu_p.solve_matrix(&m3).trace().neg());
        }
        let tm = split.pop();
        (split.pop(), tm)
    } else {
        (None, None)
    };
    Ok(PerBlock { m: block.m, n1, n3, n3_te, n3_tm })
}

pub(crate) fn n_with_inputs(
    inputs: &AssemblyInputs,
    geometry: &Geometry,
    spec: &BoundarySpec,
    l_max: i64,
) -> Result<LowTResult> {
    let blocks: Vec<PerBlock> = (0..=l_max)
        .into_par_iter()
        .map(|m| {
            let block = assemble_block_with(m, l_max, geometry, spec, inputs)?;
            block_traces(&block)
        })
        .collect::<Result<_>>()?;

    let mode = inputs.mode;
    let mut n1 = Scalar::zero(mode);
    let mut n3 = Scalar::zero(mode);
    let em = spec.is_em();
    let mut n3_te = em.then(|| Scalar::zero(mode));
    let mut n3_tm = em.then(|| Scalar::zero(mode));
    for b in &blocks {
        let mult = Scalar::from_i64(if b.m == 0 { 1 } else { 2 }, mode);
        n1 = n1.add(&mult.mul(&b.n1));
        n3 = n3.add(&mult.mul(&b.n3));
        if let (Some(te), Some(acc)) = (&b.n3_te, n3_te.as_mut()) {
            *acc = acc.add(&mult.mul(te));
        }
        if let (Some(tm), Some(acc)) = (&b.n3_tm, n3_tm.as_mut()) {
            *acc = acc.add(&mult.mul(tm));
        }
    }
    Ok(LowTResult {
        geometry: geometry.clone(),
        l_max,
        n1,
        n3,
        n3_te,
        n3_tm,
        per_m: blocks,
    })
}

/// `N1(rho)` and `N3(rho)` with the orbital sum truncated at `l_max`.
pub fn n_coefficients(
    geometry: &Geometry,
    spec: &BoundarySpec,
    l_max: i64,
    mode: Mode,
) -> Result<LowTResult> {
    let inputs = assembly_inputs(spec, l_max, mode)?;
    n_with_inputs(&inputs, geometry, spec, l_max)
}

fn pi() -> Scalar {
    Scalar::pi(precision::working_bits())
}

/// Low-temperature free-energy shift
/// `-(pi/6) N1 L T^2 + (pi^3/15) N3 L^3 T^4`.
pub fn free_energy_correction(result: &LowTResult, t: &Scalar) -> Scalar {
    let pi = pi();
    let l = result.geometry.center_distance().rendered();
    let t2 = t.mul(t).rendered();
    let t4 = t2.mul(&t2);
    let six = Scalar::from_i64(6, Mode::Floating);
    let fifteen = Scalar::from_i64(15, Mode::Floating);
    let quad = pi
        .div(&six)
        .mul(&result.n1.rendered())
        .mul(&l)
        .mul(&t2)
        .neg();
    let quart = pi
        .pow_i(3)
        .div(&fifteen)
        .mul(&result.n3.rendered())
        .mul(&l.pow_i(3))
        .mul(&t4);
    quad.add(&quart)
}

/// Sixth-order central-difference stencil for the first derivative.
const STENCIL: [(i64, i64); 6] = [(-3, -1), (-2, 9), (-1, -45), (1, 45), (2, -9), (3, 1)];
const STENCIL_DEN: i64 = 60;

struct ForceParts {
    /// `d(L N1)/dL`
    g1: Scalar,
    /// `d(L^3 N3)/dL`
    g3: Scalar,
}

fn force_parts(
    inputs: &AssemblyInputs,
    spec: &BoundarySpec,
    r: &Scalar,
    l_center: &Scalar,
    l_max: i64,
) -> Result<ForceParts> {
    let h = l_center.mul(&Scalar::from_ratio(1, 1_000_000, Mode::Floating));
    let terms: Vec<(Scalar, Scalar)> = STENCIL
        .par_iter()
        .map(|&(k, w)| {
            let lk = l_center.add(&Scalar::from_i64(k, Mode::Floating).mul(&h));
            let geom = Geometry::new(r.clone(), lk.clone())?;
            let res = n_with_inputs(inputs, &geom, spec, l_max)?;
            let w = Scalar::from_i64(w, Mode::Floating);
            Ok((
                w.mul(&lk).mul(&res.n1),
                w.mul(&lk.pow_i(3)).mul(&res.n3),
            ))
        })
        .collect::<Result<_>>()?;
    let mut g1 = Scalar::zero(Mode::Floating);
    let mut g3 = Scalar::zero(Mode::Floating);
    for (a, b) in terms {
        g1 = g1.add(&a);
        g3 = g3.add(&b);
    }
    let den = Scalar::from_i64(STENCIL_DEN, Mode::Floating).mul(&h);
    Ok(ForceParts { g1: g1.div(&den), g3: g3.div(&den) })
}

/// Thermal force corrections
/// `(pi/6) d(L N1)/dL T^2 - (pi^3/15) d(L^3 N3)/dL T^4`
/// over a grid of surface separations `a` at fixed sphere radius.
pub fn force_correction(
    spec: &BoundarySpec,
    r: &Scalar,
    a_grid: &[Scalar],
    l_max: i64,
    t: &Scalar,
) -> Result<Vec<Scalar>> {
    if a_grid.iter().any(|a| a.is_zero() || a.is_negative()) {
        return Err(Error::InvalidArgument("separations must be positive".into()));
    }
    let inputs = assembly_inputs(spec, l_max, Mode::Floating)?;
    let pi = pi();
    let t2 = t.mul(t).rendered();
    let t4 = t2.mul(&t2);
    let six = Scalar::from_i64(6, Mode::Floating);
    let fifteen = Scalar::from_i64(15, Mode::Floating);
    a_grid
        .iter()
        .map(|a| {
            let l_center = r.add(a).rendered();
            let parts = force_parts(&inputs, spec, r, &l_center, l_max)?;
            let quad = pi.div(&six).mul(&parts.g1).mul(&t2);
            let quart = pi.pow_i(3).div(&fifteen).mul(&parts.g3).mul(&t4);
            Ok(quad.sub(&quart))
        })
        .collect()
}

/// Small-separation coefficients of the quartic force term (sphere radius
/// fixed to one).
#[derive(Debug, Clone)]
pub struct CCoefficients {
    pub c2: Scalar,
    pub c3: Scalar,
    pub l_max: i64,
}

/// Extract `c2, c3` from `force/T^4 = c2 + c3 a + O(a^2)` on the small-a
/// grid `a = 0.001..0.010`. One sacrificial cubic term keeps the curvature
/// of the rational `N3` out of the linear coefficients.
pub fn c_coefficients(spec: &BoundarySpec, l_max: i64) -> Result<CCoefficients> {
    let one = Scalar::one(Mode::Floating);
    let inputs = assembly_inputs(spec, l_max, Mode::Floating)?;

    // Divergence probe at the closest grid point: growing per-l deltas of
    // N3 mean the truncation does not support a small-separation
    // extraction (the divergent TM regime close to contact). A single
    // large step from a low truncation is fine — every row of the
    // small-separation table is defined per truncation.
    let probe_geom = Geometry::new(
        one.clone(),
        one.add(&Scalar::from_ratio(1, 1000, Mode::Floating)),
    )?;
    if l_max >= spec.l_min() + 2 {
        let v2 = n_with_inputs(&inputs, &probe_geom, spec, l_max)?.n3;
        let v1 = n_with_inputs(&inputs, &probe_geom, spec, l_max - 1)?.n3;
        let v0 = n_with_inputs(&inputs, &probe_geom, spec, l_max - 2)?.n3;
        let d_last = v2.sub(&v1).abs().to_f64();
        let d_prev = v1.sub(&v0).abs().to_f64();
        if d_last > d_prev && d_last > 1e-3 * v2.abs().to_f64().max(1e-300) {
            return Err(Error::UnreliableExtraction(format!(
                "per-l deltas of N3 grow near contact ({d_prev:.3e} -> {d_last:.3e})"
            )));
        }
    }

    let pi = pi();
    let fifteen = Scalar::from_i64(15, Mode::Floating);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 1..=10i64 {
        let a = Scalar::from_ratio(i, 1000, Mode::Floating);
        let l_center = one.add(&a);
        let parts = force_parts(&inputs, spec, &one, &l_center, l_max)?;
        ys.push(pi.pow_i(3).div(&fifteen).mul(&parts.g3).neg());
        xs.push(a);
    }
    let coeffs = fit_powers(&xs, &ys, &[0, 1, 2, 3])?;
    Ok(CCoefficients { c2: coeffs[0].clone(), c3: coeffs[1].clone(), l_max })
}

/// Which trace function an asymptotic fit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitTarget {
    N1,
    N3,
    N3Te,
    N3Tm,
}

#[derive(Debug, Clone)]
pub struct AsymptoticFit {
    pub powers: Vec<i64>,
    pub coefficients: Vec<Scalar>,
}

fn select_target(res: &LowTResult, target: FitTarget) -> Result<Scalar> {
    match target {
        FitTarget::N1 => Ok(res.n1.clone()),
        FitTarget::N3 => Ok(res.n3.clone()),
        FitTarget::N3Te => res.n3_te.clone().ok_or_else(|| {
            Error::InvalidArgument("TE split exists only for the vector field".into())
        }),
        FitTarget::N3Tm => res.n3_tm.clone().ok_or_else(|| {
            Error::InvalidArgument("TM split exists only for the vector field".into())
        }),
    }
}

/// Least-squares fit of the selected trace function on a small-rho grid to
/// the given power model.
pub fn asymptotic_check(
    spec: &BoundarySpec,
    l_max: i64,
    rho_grid: &[Scalar],
    model_powers: &[i64],
    target: FitTarget,
) -> Result<AsymptoticFit> {
    for rho in rho_grid {
        let r = rho.to_f64();
        if !(r > 0.0 && r <= 0.2) {
            return Err(Error::InvalidArgument(format!(
                "asymptotic grid must lie in (0, 0.2], got {r}"
            )));
        }
    }
    let inputs = assembly_inputs(spec, l_max, Mode::Floating)?;
    let ys: Vec<Scalar> = rho_grid
        .par_iter()
        .map(|rho| {
            let geom = Geometry::from_rho(rho.rendered())?;
            let res = n_with_inputs(&inputs, &geom, spec, l_max)?;
            select_target(&res, target)
        })
        .collect::<Result<_>>()?;
    let coefficients = fit_powers(rho_grid, &ys, model_powers)?;
    Ok(AsymptoticFit { powers: model_powers.to_vec(), coefficients })
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub l_max: i64,
    pub n1: Scalar,
    pub n3: Scalar,
    pub n3_te: Option<Scalar>,
    pub n3_tm: Option<Scalar>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rho: Scalar,
    pub rows: Vec<SweepRow>,
    pub n1_converged: bool,
    pub n3_converged: bool,
    pub te_converged: Option<bool>,
    pub tm_converged: Option<bool>,
}

impl SweepReport {
    /// True when every reported column converges with growing truncation.
    pub fn converged(&self) -> bool {
        self.n1_converged
            && self.n3_converged
            && self.te_converged.unwrap_or(true)
            && self.tm_converged.unwrap_or(true)
    }
}

/// Non-convergence rule: the per-step deltas must show a net decrease over
/// the tail of the sweep (an exactly vanishing last step converges).
fn deltas_converged(values: &[f64]) -> bool {
    if values.len() < 2 {
        return true;
    }
    let deltas: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let last = *deltas.last().unwrap();
    if last == 0.0 {
        return true;
    }
    let tail_start = deltas.len().saturating_sub(4);
    last < deltas[tail_start]
}

/// Table of `N1, N3` against the truncation, with per-step convergence
/// flags. The divergent small-separation TM regimes show growing deltas.
pub fn convergence_sweep(
    spec: &BoundarySpec,
    rho: &Scalar,
    l_truncation_max: i64,
) -> Result<SweepReport> {
    let l_min = spec.l_min();
    if l_truncation_max < l_min {
        return Err(Error::InvalidArgument("truncation below the lowest index".into()));
    }
    let inputs = assembly_inputs(spec, l_truncation_max, Mode::Floating)?;
    let geom = Geometry::from_rho(rho.rendered())?;
    let rows: Vec<SweepRow> = (l_min..=l_truncation_max)
        .into_par_iter()
        .map(|lm| {
            let res = n_with_inputs(&inputs, &geom, spec, lm)?;
            Ok(SweepRow {
                l_max: lm,
                n1: res.n1,
                n3: res.n3,
                n3_te: res.n3_te,
                n3_tm: res.n3_tm,
            })
        })
        .collect::<Result<_>>()?;

    let col = |f: &dyn Fn(&SweepRow) -> Option<f64>| -> Option<Vec<f64>> {
        rows.iter().map(f).collect()
    };
    let n1_vals = col(&|r| Some(r.n1.to_f64())).unwrap();
    let n3_vals = col(&|r| Some(r.n3.to_f64())).unwrap();
    let te_vals = col(&|r| r.n3_te.as_ref().map(Scalar::to_f64));
    let tm_vals = col(&|r| r.n3_tm.as_ref().map(Scalar::to_f64));
    Ok(SweepReport {
        rho: rho.clone(),
        n1_converged: deltas_converged(&n1_vals),
        n3_converged: deltas_converged(&n3_vals),
        te_converged: te_vals.as_deref().map(deltas_converged),
        tm_converged: tm_vals.as_deref().map(deltas_converged),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::{PlaneBoundary, SphereBoundary};
    use rug::ops::Pow;
    use rug::Rational;

    fn dd() -> BoundarySpec {
        BoundarySpec::scalar(SphereBoundary::Dirichlet, PlaneBoundary::Dirichlet).unwrap()
    }

    fn dn() -> BoundarySpec {
        BoundarySpec::scalar(SphereBoundary::Dirichlet, PlaneBoundary::Neumann).unwrap()
    }

    #[test]
    fn dirichlet_n1_equals_rho_exactly() {
        // Independent of the truncation, exactly in rational mode.
        for (num, den) in [(1i64, 10i64), (1, 2), (9, 10)] {
            for l_max in [0i64, 2] {
                let rho = Scalar::from_ratio(num, den, Mode::Exact);
                let geom = Geometry::from_rho(rho.clone()).unwrap();
                let res = n_coefficients(&geom, &dd(), l_max, Mode::Exact).unwrap();
                assert_eq!(
                    res.n1.as_rational().unwrap(),
                    rho.as_rational().unwrap(),
                    "rho = {num}/{den}, l_max = {l_max}"
                );
            }
        }
    }

    #[test]
    fn dn_truncation_zero_and_one_closed_forms() {
        // l_max = 0: rho(-2+rho)/(2+rho);
        // l_max = 1: rho(-16+8 rho-4 rho^3+rho^4)/(16+8 rho+4 rho^3+rho^4).
        let rho_q = Rational::from((1, 2));
        let rho = Scalar::from_rational(&rho_q, Mode::Exact);
        let geom = Geometry::from_rho(rho).unwrap();

        let res0 = n_coefficients(&geom, &dn(), 0, Mode::Exact).unwrap();
        let expect0 = {
            let num = rho_q.clone() * (Rational::from(-2) + rho_q.clone());
            let den = Rational::from(2) + rho_q.clone();
            num / den
        };
        assert_eq!(res0.n1.as_rational().unwrap(), &expect0);

        let res1 = n_coefficients(&geom, &dn(), 1, Mode::Exact).unwrap();
        let r = |v: i64| Rational::from(v);
        let p = rho_q.clone();
        let expect1 = p.clone()
            * (r(-16) + r(8) * p.clone() + r(-4) * p.clone().pow(3) + p.clone().pow(4))
            / (r(16) + r(8) * p.clone() + r(4) * p.clone().pow(3) + p.clone().pow(4));
        assert_eq!(res1.n1.as_rational().unwrap(), &expect1);
    }

    #[test]
    fn neumann_sphere_kills_n1() {
        for plane in [PlaneBoundary::Dirichlet, PlaneBoundary::Neumann] {
            let spec = BoundarySpec::scalar(SphereBoundary::Neumann, plane).unwrap();
            let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Exact)).unwrap();
            let res = n_coefficients(&geom, &spec, 3, Mode::Exact).unwrap();
            assert!(res.n1.is_zero(), "{plane:?}");
            assert!(!res.n3.is_zero());
        }
    }

    #[test]
    fn em_conductor_n1_vanishes_and_n3_splits() {
        let spec = BoundarySpec::em_conductor();
        let geom = Geometry::from_rho(Scalar::from_ratio(3, 10, Mode::Exact)).unwrap();
        let res = n_coefficients(&geom, &spec, 3, Mode::Exact).unwrap();
        assert!(res.n1.is_zero());
        let te = res.n3_te.unwrap();
        let tm = res.n3_tm.unwrap();
        let sum = te.add(&tm);
        assert_eq!(sum.as_rational(), res.n3.as_rational());
    }

    #[test]
    fn plus_minus_m_blocks_agree() {
        let spec = BoundarySpec::em_conductor();
        let geom = Geometry::from_rho(Scalar::from_ratio(2, 5, Mode::Exact)).unwrap();
        for m in [1i64, 2] {
            let a = crate::assembly::assemble_block(m, 3, &geom, &spec, Mode::Exact).unwrap();
            let b = crate::assembly::assemble_block(-m, 3, &geom, &spec, Mode::Exact).unwrap();
            let ta = block_traces(&a).unwrap();
            let tb = block_traces(&b).unwrap();
            assert_eq!(ta.n1.as_rational(), tb.n1.as_rational());
            assert_eq!(ta.n3.as_rational(), tb.n3.as_rational());
        }
    }

    #[test]
    fn dd_force_has_no_quadratic_term() {
        // L N1 = R exactly, so the T^2 force piece differentiates to zero.
        let spec = dd();
        let r = Scalar::one(Mode::Floating);
        let a = vec![Scalar::from_ratio(1, 10, Mode::Floating)];
        let t = Scalar::one(Mode::Floating);
        let f = force_correction(&spec, &r, &a, 2, &t).unwrap();
        // Compare against the pure T^4 part computed directly.
        let inputs = assembly_inputs(&spec, 2, Mode::Floating).unwrap();
        let l_center = r.add(&a[0]);
        let parts = force_parts(&inputs, &spec, &r, &l_center, 2).unwrap();
        assert!(parts.g1.abs().to_f64() < 1e-40);
        let pi = pi();
        let expect = pi
            .pow_i(3)
            .div(&Scalar::from_i64(15, Mode::Floating))
            .mul(&parts.g3)
            .neg();
        assert!(f[0].sub(&expect).abs().to_f64() < 1e-40);
    }

    #[test]
    fn zero_result_gives_zero_energy() {
        let spec = dd();
        let geom = Geometry::from_rho(Scalar::from_ratio(1, 2, Mode::Floating)).unwrap();
        let mut res = n_coefficients(&geom, &spec, 0, Mode::Floating).unwrap();
        res.n1 = Scalar::zero(Mode::Floating);
        res.n3 = Scalar::zero(Mode::Floating);
        let f = free_energy_correction(&res, &Scalar::one(Mode::Floating));
        assert!(f.is_zero() || f.abs().to_f64() < 1e-70);
    }

    #[test]
    fn sweep_converges_for_dirichlet() {
        let spec = dd();
        let report =
            convergence_sweep(&spec, &Scalar::from_ratio(9, 10, Mode::Floating), 5).unwrap();
        assert!(report.n3_converged);
        assert!(report.converged());
        assert_eq!(report.rows.len(), 6);
    }

    #[test]
    fn asymptotic_grid_validation() {
        let spec = dd();
        let bad = vec![Scalar::from_ratio(1, 2, Mode::Floating)];
        assert!(asymptotic_check(&spec, 2, &bad, &[1, 2, 3], FitTarget::N3).is_err());
    }
}
