//! Stationary vector autoregressions with BIC lag selection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::ols_multi;

#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub intercept: DVector<f64>,
    /// `A_1..A_p`, each `N x N`.
    pub coef: Vec<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
}

impl VarFit {
    pub fn order(&self) -> usize {
        self.coef.len()
    }

    /// Iterated forecasts for horizons `1..=h` (`h x N`) from the end of `history` (`T x N`).
    pub fn forecast(&self, history: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
        let n = self.intercept.len();
        let p = self.order();
        let t = history.nrows();
        let mut path: Vec<DVector<f64>> = (t.saturating_sub(p)..t).map(|s| history.row(s).transpose()).collect();
        let mut out = DMatrix::zeros(h, n);
        for k in 0..h {
            let m = path.len();
            let mut next = self.intercept.clone();
            for j in 0..p {
                next += &self.coef[j] * &path[m - 1 - j];
            }
            out.set_row(k, &next.transpose());
            path.push(next);
        }
        out
    }
}

fn design(x: &DMatrix<f64>, p: usize, start: usize, intercept: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t, n) = x.shape();
    let rows = t - start;
    let off = usize::from(intercept);
    let mut m = DMatrix::zeros(rows, off + n * p);
    for r in 0..rows {
        let s = start + r;
        if intercept {
            m[(r, 0)] = 1.0;
        }
        for j in 1..=p {
            for i in 0..n {
                m[(r, off + (j - 1) * n + i)] = x[(s - j, i)];
            }
        }
    }
    (m, x.rows(start, rows).into_owned())
}

fn fit_order(x: &DMatrix<f64>, p: usize, start: usize, intercept: bool) -> Result<(VarFit, f64)> {
    let n = x.ncols();
    let (m, y) = design(x, p, start, intercept);
    let rows = y.nrows() as f64;
    let (coef, resid) = if m.ncols() == 0 {
        (DMatrix::zeros(0, n), y.clone())
    } else {
        ols_multi(&m, &y)?
    };
    let sigma = resid.transpose() * &resid / rows;
    let off = usize::from(intercept);
    let intercept_v = if intercept { coef.row(0).transpose() } else { DVector::zeros(n) };
    let lags = (0..p)
        .map(|j| coef.rows(off + j * n, n).transpose())
        .collect();
    let logdet = match sigma.clone().cholesky() {
        Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => f64::NEG_INFINITY,
    };
    Ok((VarFit { intercept: intercept_v, coef: lags, sigma }, logdet))
}

/// Lag order in `0..=p_max` (or `1..=p_max` when `min_lag = 1`) minimising
/// `log|Σ̂| + k log(n)/n` on a common sample.
pub fn select_var_lag_bic(x: &DMatrix<f64>, min_lag: usize, p_max: usize, intercept: bool) -> Result<usize> {
    let (t, n) = x.shape();
    if min_lag > p_max {
        return Err(Error::param("min_lag exceeds p_max"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("VAR input contains missing values"));
    }
    let k_max = n * p_max + usize::from(intercept);
    if t < p_max + k_max + 2 {
        return Err(Error::insufficient(format!("VAR lag selection needs more than {} rows, got {t}", p_max + k_max + 1)));
    }
    let rows = (t - p_max) as f64;
    let mut best = (min_lag, f64::INFINITY);
    for p in min_lag..=p_max {
        let (_, logdet) = fit_order(x, p, p_max, intercept)?;
        if !logdet.is_finite() {
            continue;
        }
        let k = (n * (n * p + usize::from(intercept))) as f64;
        let bic = logdet + k * rows.ln() / rows;
        if bic < best.1 {
            best = (p, bic);
        }
    }
    Ok(best.0)
}

/// VAR with BIC-selected order (at most `p_max`), refitted on all usable rows.
pub fn fit_var_bic(x: &DMatrix<f64>, p_max: usize, intercept: bool) -> Result<VarFit> {
    let p = select_var_lag_bic(x, 0, p_max, intercept)?;
    Ok(fit_order(x, p, p, intercept)?.0)
}

/// VAR of fixed order `p`.
pub fn fit_var(x: &DMatrix<f64>, p: usize, intercept: bool) -> Result<VarFit> {
    if x.nrows() <= p + x.ncols() * p + 1 {
        return Err(Error::insufficient("too few rows for the VAR order"));
    }
    Ok(fit_order(x, p, p, intercept)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn simulate(a: &DMatrix<f64>, t: usize, seed: u64) -> DMatrix<f64> {
        let n = a.nrows();
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(t, n);
        for s in 1..t {
            let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let next = a * x.row(s - 1).transpose() + e;
            x.set_row(s, &next.transpose());
        }
        x
    }

    #[test]
    fn recovers_var1() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, -0.1, 0.3]);
        let x = simulate(&a, 3000, 1);
        let fit = fit_var_bic(&x, 3, true).unwrap();
        assert_eq!(fit.order(), 1);
        assert!((&fit.coef[0] - &a).amax() < 0.06);
    }

    #[test]
    fn forecast_matches_recursion() {
        let fit = VarFit {
            intercept: DVector::from_vec(vec![1.0, 0.0]),
            coef: vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5])],
            sigma: DMatrix::identity(2, 2),
        };
        let hist = DMatrix::from_row_slice(1, 2, &[4.0, 2.0]);
        let f = fit.forecast(&hist, 2);
        assert_eq!(f[(0, 0)], 3.0);
        assert_eq!(f[(0, 1)], 1.0);
        assert_eq!(f[(1, 0)], 2.5);
        assert_eq!(f[(1, 1)], 0.5);
    }
}
