//! Univariate autoregressions with BIC order selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ols;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArFit {
    pub intercept: f64,
    /// `φ_1..φ_p`.
    pub coef: Vec<f64>,
    pub sigma2: f64,
}

impl ArFit {
    pub fn order(&self) -> usize {
        self.coef.len()
    }

    /// Iterated forecasts for horizons `1..=h` from the end of `history`.
    pub fn forecast(&self, history: &[f64], h: usize) -> Vec<f64> {
        let p = self.order();
        let mut path: Vec<f64> = history[history.len().saturating_sub(p)..].to_vec();
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let m = path.len();
            let next = self.intercept + (0..p).map(|j| self.coef[j] * path[m - 1 - j]).sum::<f64>();
            out.push(next);
            path.push(next);
        }
        out
    }
}

fn design(x: &[f64], p: usize, start: usize, intercept: bool) -> (DMatrix<f64>, DVector<f64>) {
    let rows = x.len() - start;
    let k = p + usize::from(intercept);
    let mut m = DMatrix::zeros(rows, k);
    let y = DVector::from_fn(rows, |r, _| x[start + r]);
    for r in 0..rows {
        let t = start + r;
        let mut c = 0;
        if intercept {
            m[(r, 0)] = 1.0;
            c = 1;
        }
        for j in 1..=p {
            m[(r, c + j - 1)] = x[t - j];
        }
    }
    (m, y)
}

fn fit_order(x: &[f64], p: usize, start: usize, intercept: bool) -> Result<(ArFit, f64, usize)> {
    let (m, y) = design(x, p, start, intercept);
    let n = y.len();
    if m.ncols() == 0 {
        let rss = y.norm_squared();
        return Ok((ArFit { intercept: 0.0, coef: vec![], sigma2: rss / n as f64 }, rss, n));
    }
    let fit = ols(&m, &y)?;
    let off = usize::from(intercept);
    Ok((
        ArFit {
            intercept: if intercept { fit.coef[0] } else { 0.0 },
            coef: (0..p).map(|j| fit.coef[off + j]).collect(),
            sigma2: fit.rss / n as f64,
        },
        fit.rss,
        n,
    ))
}

/// AR(p) with `p ≤ p_max` chosen by BIC on a common sample, then refitted on
/// all usable observations.
pub fn fit_ar_bic(x: &[f64], p_max: usize, intercept: bool) -> Result<ArFit> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("autoregression input contains missing values"));
    }
    let k_needed = p_max + usize::from(intercept) + 2;
    if x.len() < p_max + k_needed {
        return Err(Error::insufficient(format!(
            "AR order selection up to {p_max} needs at least {} observations, got {}",
            p_max + k_needed,
            x.len()
        )));
    }
    let mut best = (0, f64::INFINITY);
    for p in 0..=p_max {
        // an exactly collinear order (e.g. a deterministic path) is skipped
        let (rss, n) = match fit_order(x, p, p_max, intercept) {
            Ok((_, rss, n)) => (rss, n),
            Err(Error::Numerical(_)) if p > 0 => continue,
            Err(e) => return Err(e),
        };
        let k = (p + usize::from(intercept)) as f64;
        let bic = (rss.max(1e-300) / n as f64).ln() + k * (n as f64).ln() / n as f64;
        if bic < best.1 {
            best = (p, bic);
        }
    }
    Ok(fit_order(x, best.0, best.0, intercept)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn closed_form_ar1_forecast() {
        let fit = ArFit { intercept: 1.0, coef: vec![0.5], sigma2: 1.0 };
        let f = fit.forecast(&[0.0, 4.0], 3);
        // mean 2, deviations halve
        assert!((f[0] - 3.0).abs() < 1e-12);
        assert!((f[1] - 2.5).abs() < 1e-12);
        assert!((f[2] - 2.25).abs() < 1e-12);
    }

    #[test]
    fn white_noise_forecast_is_near_mean() {
        let mut rng = crate::rng::Rng::seed_from_u64(2);
        let x: Vec<f64> = (0..300).map(|_| { let e: f64 = StandardNormal.sample(&mut rng); 3.0 + e }).collect();
        let fit = fit_ar_bic(&x, 3, true).unwrap();
        let f = fit.forecast(&x, 12);
        let mean = crate::linalg::mean(&x);
        assert!((f[11] - mean).abs() < 0.2);
    }

    #[test]
    fn recovers_ar2_order() {
        let mut rng = crate::rng::Rng::seed_from_u64(5);
        let mut x = vec![0.0, 0.0];
        for t in 2..600 {
            let e: f64 = StandardNormal.sample(&mut rng);
            x.push(0.5 * x[t - 1] - 0.3 * x[t - 2] + e);
        }
        let fit = fit_ar_bic(&x, 3, false).unwrap();
        assert_eq!(fit.order(), 2);
        assert!((fit.coef[0] - 0.5).abs() < 0.1);
        let one = fit.forecast(&x, 1)[0];
        let n = x.len();
        assert!((one - (fit.coef[0] * x[n - 1] + fit.coef[1] * x[n - 2])).abs() < 1e-12);
    }
}
