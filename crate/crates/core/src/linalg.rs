//! Dense linear algebra over [`Scalar`] for the small per-m blocks.
//!
//! The matrices never exceed a few tens of rows, so everything is plain
//! row-major storage with partial-pivot LU. The resolvent traces are
//! always computed through solves against the factorization, never by
//! forming an explicit inverse.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{Mode, Scalar};

#[derive(Debug, Clone)]
pub struct Matrix {
    n: usize,
    mode: Mode,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(n: usize, mode: Mode) -> Self {
        Matrix { n, mode, data: vec![Scalar::zero(mode); n * n] }
    }

    pub fn identity(n: usize, mode: Mode) -> Self {
        let mut m = Matrix::zeros(n, mode);
        for i in 0..n {
            m.set(i, i, Scalar::one(mode));
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> Scalar {
        let mut acc = Scalar::zero(self.mode);
        for i in 0..self.n {
            acc = acc.add(self.get(i, i));
        }
        acc
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.n, rhs.n);
        let mut out = Matrix::zeros(self.n, self.mode);
        for i in 0..self.n {
            for k in 0..self.n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..self.n {
                    let v = out.get(i, j).add(&a.mul(rhs.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_of_product(&self, rhs: &Matrix) -> Scalar {
        assert_eq!(self.n, rhs.n);
        let mut acc = Scalar::zero(self.mode);
        for i in 0..self.n {
            for j in 0..self.n {
                acc = acc.add(&self.get(i, j).mul(rhs.get(j, i)));
            }
        }
        acc
    }

    /// `I - self`.
    pub fn one_minus(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.mode);
        for i in 0..self.n {
            for j in 0..self.n {
                let base = if i == j {
                    Scalar::one(self.mode)
                } else {
                    Scalar::zero(self.mode)
                };
                out.set(i, j, base.sub(self.get(i, j)));
            }
        }
        out
    }

    pub fn neg(&self) -> Matrix {
        Matrix {
            n: self.n,
            mode: self.mode,
            data: self.data.iter().map(Scalar::neg).collect(),
        }
    }

    /// Similarity transform `D A D^{-1}` by a diagonal.
    pub fn conjugate_diag(&self, diag: &[Scalar]) -> Matrix {
        assert_eq!(diag.len(), self.n);
        let mut out = Matrix::zeros(self.n, self.mode);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = self.get(i, j).mul(&diag[i]).div(&diag[j]);
                out.set(i, j, v);
            }
        }
        out
    }

    /// Sub-block with the given row/column ranges.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Matrix {
        assert_eq!(rows.len(), cols.len());
        let n = rows.len();
        let mut out = Matrix::zeros(n, self.mode);
        for (bi, i) in rows.clone().enumerate() {
            for (bj, j) in cols.clone().enumerate() {
                out.set(bi, bj, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn max_abs(&self) -> Scalar {
        let mut best = Scalar::zero(self.mode);
        for v in &self.data {
            if v.abs_cmp(&best) == Ordering::Greater {
                best = v.abs();
            }
        }
        best
    }

    pub fn inf_norm(&self) -> Scalar {
        let mut best = Scalar::zero(self.mode);
        for i in 0..self.n {
            let mut row = Scalar::zero(self.mode);
            for j in 0..self.n {
                row = row.add(&self.get(i, j).abs());
            }
            if row.abs_cmp(&best) == Ordering::Greater {
                best = row;
            }
        }
        best
    }
}

/// Partial-pivot LU factorization.
pub struct Lu {
    n: usize,
    mode: Mode,
    lu: Vec<Scalar>,
    perm: Vec<usize>,
    swaps: usize,
}

/// Factor `a`; `m_label` only decorates the error for singular blocks.
pub fn lu_factor(a: &Matrix, m_label: i64) -> Result<Lu> {
    let n = a.n();
    let mode = a.mode();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    let scale = a.max_abs();
    let at = |lu: &Vec<Scalar>, i: usize, j: usize| -> Scalar { lu[i * n + j].clone() };

    for col in 0..n {
        // Pivot by magnitude.
        let mut best = col;
        for row in col + 1..n {
            if at(&lu, row, col).abs_cmp(&at(&lu, best, col)) == Ordering::Greater {
                best = row;
            }
        }
        if best != col {
            for j in 0..n {
                lu.swap(col * n + j, best * n + j);
            }
            perm.swap(col, best);
            swaps += 1;
        }
        let pivot = at(&lu, col, col);
        if pivot.is_zero() || is_negligible(&pivot, &scale, mode) {
            let condition = condition_proxy(&lu, n, col);
            return Err(Error::SingularBlock { m: m_label, condition });
        }
        for row in col + 1..n {
            let factor = at(&lu, row, col).div(&pivot);
            if !factor.is_zero() {
                for j in col + 1..n {
                    let v = at(&lu, row, j).sub(&factor.mul(&at(&lu, col, j)));
                    lu[row * n + j] = v;
                }
            }
            lu[row * n + col] = factor;
        }
    }
    Ok(Lu { n, mode, lu, perm, swaps })
}

fn is_negligible(pivot: &Scalar, scale: &Scalar, mode: Mode) -> bool {
    match mode {
        Mode::Exact => false,
        Mode::Floating => {
            let bits = crate::precision::working_bits() as i32;
            let threshold = scale.mul(&Scalar::Float(rug::Float::with_val(
                32,
                rug::Float::i_exp(1, -(bits - 8)),
            )));
            pivot.abs_cmp(&threshold) != Ordering::Greater
        }
    }
}

fn condition_proxy(lu: &[Scalar], n: usize, upto: usize) -> f64 {
    let mut max = 0f64;
    let mut min = f64::INFINITY;
    for i in 0..=upto.min(n - 1) {
        let p = lu[i * n + i].abs().to_f64();
        max = max.max(p);
        if p > 0.0 {
            min = min.min(p);
        }
    }
    if min.is_finite() && min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

impl Lu {
    fn at(&self, i: usize, j: usize) -> &Scalar {
        &self.lu[i * self.n + j]
    }

    pub fn solve_vec(&self, b: &[Scalar]) -> Vec<Scalar> {
        let n = self.n;
        let mut y: Vec<Scalar> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for i in 1..n {
            let mut acc = y[i].clone();
            for j in 0..i {
                acc = acc.sub(&self.at(i, j).mul(&y[j]));
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = y[i].clone();
            for j in i + 1..n {
                acc = acc.sub(&self.at(i, j).mul(&y[j]));
            }
            y[i] = acc.div(self.at(i, i));
        }
        y
    }

    /// `A^{-1} B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        assert_eq!(self.n, b.n());
        let mut out = Matrix::zeros(self.n, self.mode);
        for j in 0..self.n {
            let col: Vec<Scalar> = (0..self.n).map(|i| b.get(i, j).clone()).collect();
            let x = self.solve_vec(&col);
            for (i, v) in x.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    /// `ln det` of the factored matrix; the determinant must be positive.
    pub fn log_det(&self) -> Result<Scalar> {
        let mut negatives = self.swaps;
        let mut acc = Scalar::zero(Mode::Floating);
        for i in 0..self.n {
            let p = self.at(i, i);
            if p.is_negative() {
                negatives += 1;
            }
            acc = acc.add(&p.abs().ln());
        }
        if negatives % 2 == 1 {
            return Err(Error::UnreliableExtraction(
                "negative determinant in log-determinant".into(),
            ));
        }
        Ok(acc)
    }

    pub fn condition_estimate(&self) -> f64 {
        condition_proxy(&self.lu, self.n, self.n - 1)
    }
}

/// Spectral-radius estimate by power iteration with a deterministic start
/// vector, capped by the row-sum norm.
pub fn spectral_radius_estimate(a: &Matrix, iters: usize) -> f64 {
    let n = a.n();
    if n == 0 {
        return 0.0;
    }
    let norm = a.inf_norm().to_f64();
    if norm < 1.0 {
        return norm;
    }
    let mode = a.mode();
    let mut v: Vec<Scalar> = (0..n)
        .map(|i| Scalar::from_ratio(n as i64 + i as i64, n as i64, mode))
        .collect();
    let mut radius = 0f64;
    for _ in 0..iters {
        let mut w = vec![Scalar::zero(mode); n];
        for i in 0..n {
            for j in 0..n {
                w[i] = w[i].add(&a.get(i, j).mul(&v[j]));
            }
        }
        let mut wmax = Scalar::zero(mode);
        for x in &w {
            if x.abs_cmp(&wmax) == Ordering::Greater {
                wmax = x.abs();
            }
        }
        let wmax_f = wmax.to_f64();
        if wmax_f == 0.0 {
            return 0.0;
        }
        radius = wmax_f; // v is kept max-normalized, so |w|_inf estimates |lambda|
        for x in &mut w {
            *x = x.div(&wmax);
        }
        v = w;
    }
    radius.min(norm)
}

/// Least-squares fit of `y ~ sum_j c_j x^{powers[j]}` via column-scaled
/// normal equations at the working precision.
pub fn fit_powers(xs: &[Scalar], ys: &[Scalar], powers: &[i64]) -> Result<Vec<Scalar>> {
    let n = xs.len();
    let k = powers.len();
    if n < k || k == 0 {
        return Err(Error::RankDeficientFit(format!(
            "{n} points cannot determine {k} coefficients"
        )));
    }
    let mode = xs.first().map_or(Mode::Floating, Scalar::mode);
    // Design matrix with per-column scaling.
    let mut design = vec![Scalar::zero(mode); n * k];
    let mut scales = vec![Scalar::zero(mode); k];
    for (j, &p) in powers.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let v = x.pow_i(p);
            if v.abs_cmp(&scales[j]) == Ordering::Greater {
                scales[j] = v.abs();
            }
            design[i * k + j] = v;
        }
        if scales[j].is_zero() {
            return Err(Error::RankDeficientFit(format!("column x^{p} is zero")));
        }
        for i in 0..n {
            design[i * k + j] = design[i * k + j].div(&scales[j]);
        }
    }
    let mut gram = Matrix::zeros(k, mode);
    let mut rhs = vec![Scalar::zero(mode); k];
    for a in 0..k {
        for b in 0..k {
            let mut acc = Scalar::zero(mode);
            for i in 0..n {
                acc = acc.add(&design[i * k + a].mul(&design[i * k + b]));
            }
            gram.set(a, b, acc);
        }
        let mut acc = Scalar::zero(mode);
        for i in 0..n {
            acc = acc.add(&design[i * k + a].mul(&ys[i]));
        }
        rhs[a] = acc;
    }
    let lu = lu_factor(&gram, 0).map_err(|_| {
        Error::RankDeficientFit("normal equations are singular".into())
    })?;
    let beta = lu.solve_vec(&rhs);
    Ok(beta
        .into_iter()
        .zip(&scales)
        .map(|(b, s)| b.div(s))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(vals: &[&[i64]], mode: Mode) -> Matrix {
        let n = vals.len();
        let mut m = Matrix::zeros(n, mode);
        for (i, row) in vals.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, Scalar::from_i64(v, mode));
            }
        }
        m
    }

    #[test]
    fn solve_small_system_exact() {
        let a = mat(&[&[2, 1], &[1, 3]], Mode::Exact);
        let b = vec![
            Scalar::from_i64(5, Mode::Exact),
            Scalar::from_i64(10, Mode::Exact),
        ];
        let lu = lu_factor(&a, 0).unwrap();
        let x = lu.solve_vec(&b);
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3.
        assert_eq!(x[0].as_rational().unwrap(), &rug::Rational::from(1));
        assert_eq!(x[1].as_rational().unwrap(), &rug::Rational::from(3));
    }

    #[test]
    fn singular_detected() {
        let a = mat(&[&[1, 2], &[2, 4]], Mode::Exact);
        assert!(matches!(
            lu_factor(&a, 7),
            Err(Error::SingularBlock { m: 7, .. })
        ));
    }

    #[test]
    fn log_det_matches_scalar_log() {
        let mut a = Matrix::zeros(1, Mode::Floating);
        a.set(0, 0, Scalar::from_ratio(1, 2, Mode::Floating));
        let lu = lu_factor(&a, 0).unwrap();
        let ld = lu.log_det().unwrap();
        let expect = Scalar::from_ratio(1, 2, Mode::Floating).ln();
        assert!(ld.sub(&expect).abs().to_f64() < 1e-55);
    }

    #[test]
    fn trace_of_product_matches_matmul() {
        let a = mat(&[&[1, 2], &[3, 4]], Mode::Exact);
        let b = mat(&[&[5, 6], &[7, 8]], Mode::Exact);
        let direct = a.trace_of_product(&b);
        let full = a.matmul(&b).trace();
        assert_eq!(direct.as_rational(), full.as_rational());
    }

    #[test]
    fn conjugation_preserves_trace() {
        let a = mat(&[&[1, 2], &[3, 4]], Mode::Exact);
        let d = vec![
            Scalar::from_i64(3, Mode::Exact),
            Scalar::from_i64(7, Mode::Exact),
        ];
        let c = a.conjugate_diag(&d);
        assert_eq!(c.trace().as_rational(), a.trace().as_rational());
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let a = mat(&[&[2, 0], &[0, 1]], Mode::Floating);
        let r = spectral_radius_estimate(&a, 80);
        assert!((r - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fit_recovers_polynomial() {
        let xs: Vec<Scalar> = (1..=8)
            .map(|i| Scalar::from_ratio(i, 100, Mode::Floating))
            .collect();
        // y = 3 x - 2 x^3
        let ys: Vec<Scalar> = xs
            .iter()
            .map(|x| {
                Scalar::from_i64(3, Mode::Floating)
                    .mul(x)
                    .sub(&Scalar::from_i64(2, Mode::Floating).mul(&x.pow_i(3)))
            })
            .collect();
        let c = fit_powers(&xs, &ys, &[1, 3]).unwrap();
        assert!(c[0].sub(&Scalar::from_i64(3, Mode::Floating)).abs().to_f64() < 1e-40);
        assert!(c[1].add(&Scalar::from_i64(2, Mode::Floating)).abs().to_f64() < 1e-40);
    }

    #[test]
    fn fit_detects_rank_deficiency() {
        let xs = vec![Scalar::from_i64(1, Mode::Floating); 4];
        let ys = xs.clone();
        assert!(matches!(
            fit_powers(&xs, &ys, &[0, 1]),
            Err(Error::RankDeficientFit(_))
        ));
    }
}
