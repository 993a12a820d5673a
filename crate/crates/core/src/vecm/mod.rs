//! Vector error-correction models: Johansen ML, rank selection, QR group-lasso
//! and penalized-likelihood estimators, and iterated forecasting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::row_major;
use crate::panel::{DeterministicSpec, Panel};

mod johansen;
mod pml;
mod qr;

pub use johansen::{johansen_eigen, johansen_ml, select_rank_ic, JohansenEigen};
pub use pml::{pml_vecm, PmlConfig, PmlFit};
pub use qr::{qr_vecm, qr_vecm_fixed, QrVecmFit, QrVecmState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Johansen,
    QrGroupLasso,
    PenalizedMl,
}

/// `Δz_t = c + d t + A B' z_{t-1} + Σ_j Φ_j Δz_{t-j} + e_t`, with `t` the
/// 1-based row of `z_t` in the estimation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecmModel {
    #[serde(with = "row_major")]
    pub a: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub b: DMatrix<f64>,
    #[serde(with = "row_major::list")]
    pub phi: Vec<DMatrix<f64>>,
    pub intercept: Vec<f64>,
    pub trend: Vec<f64>,
    /// Innovation covariance.
    #[serde(with = "row_major")]
    pub sigma: DMatrix<f64>,
    /// Precision matrix when the estimator works with it directly.
    #[serde(with = "row_major::option", default)]
    pub precision: Option<DMatrix<f64>>,
    pub rank: usize,
    pub lags: usize,
    pub deterministics: DeterministicSpec,
    pub estimator: Estimator,
    /// Rows of the estimation sample (including the `p + 1` initial values).
    pub nobs: usize,
    pub loglik: Option<f64>,
}

impl VecmModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Long-run matrix `Π = A B'`.
    pub fn pi(&self) -> DMatrix<f64> {
        if self.rank == 0 {
            let n = self.n();
            return DMatrix::zeros(n, n);
        }
        &self.a * self.b.transpose()
    }

    /// Expected `Δz_t` given the full history up to `t - 1` (rows of `levels`).
    fn one_step(&self, pi: &DMatrix<f64>, levels: &[DVector<f64>], time: f64) -> DVector<f64> {
        let n = self.n();
        let last = levels.len() - 1;
        let mut d = DVector::from_column_slice(&self.intercept);
        for i in 0..n {
            d[i] += self.trend[i] * time;
        }
        d += pi * &levels[last];
        for (j, phi) in self.phi.iter().enumerate() {
            let dz = &levels[last - j] - &levels[last - j - 1];
            d += phi * dz;
        }
        d
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Levels forecasts for horizons `1..=h` (rows), iterating the one-step map.
///
/// `history` holds the most recent observations in rows and must end at the
/// last row of the estimation sample, so that deterministic time continues
/// from `model.nobs`.
pub fn vecm_iterated_forecast(model: &VecmModel, history: &DMatrix<f64>, h: usize) -> Result<DMatrix<f64>> {
    if h == 0 {
        return Err(Error::param("VECM forecasts need h >= 1; use a single-equation nowcast for h = 0"));
    }
    let n = model.n();
    let p = model.lags;
    if history.ncols() != n {
        return Err(Error::param(format!("history has {} series, model has {n}", history.ncols())));
    }
    if history.nrows() < p + 1 {
        return Err(Error::insufficient(format!("forecasting needs the last {} observations", p + 1)));
    }
    let pi = model.pi();
    let start = history.nrows() - (p + 1);
    let mut levels: Vec<DVector<f64>> = (start..history.nrows())
        .map(|t| history.row(t).transpose())
        .collect();
    let mut out = DMatrix::zeros(h, n);
    for k in 0..h {
        let time = (model.nobs + k + 1) as f64;
        let next = levels.last().expect("non-empty") + model.one_step(&pi, &levels, time);
        out.set_row(k, &next.transpose());
        levels.push(next);
        levels.remove(0);
    }
    Ok(out)
}

/// Regression blocks of the error-correction form on a balanced levels matrix.
#[derive(Debug, Clone)]
pub(crate) struct VecmDesign {
    /// `Δz_t`, `n x N`.
    pub dz: DMatrix<f64>,
    /// `z_{t-1}`.
    pub zlag: DMatrix<f64>,
    /// `[Δz_{t-1}, .., Δz_{t-p}]`, `n x Np`.
    pub dlags: DMatrix<f64>,
    /// 1-based row index of `z_t`.
    pub time: DVector<f64>,
}

impl VecmDesign {
    pub fn new(z: &DMatrix<f64>, p: usize) -> Result<Self> {
        let t = z.nrows();
        let n = z.ncols();
        if t < p + 2 {
            return Err(Error::insufficient(format!("{t} observations cannot support {p} lags")));
        }
        let rows = t - p - 1;
        let dz = DMatrix::from_fn(rows, n, |r, i| {
            let s = r + p + 1;
            z[(s, i)] - z[(s - 1, i)]
        });
        let zlag = DMatrix::from_fn(rows, n, |r, i| z[(r + p, i)]);
        let dlags = DMatrix::from_fn(rows, n * p, |r, c| {
            let (j, i) = (c / n + 1, c % n);
            let s = r + p + 1 - j;
            z[(s, i)] - z[(s - 1, i)]
        });
        let time = DVector::from_fn(rows, |r, _| (r + p + 2) as f64);
        Ok(VecmDesign { dz, zlag, dlags, time })
    }

    pub fn rows(&self) -> usize {
        self.dz.nrows()
    }

    /// Short-run regressors plus an intercept when requested.
    pub fn short_run(&self, intercept: bool) -> DMatrix<f64> {
        if !intercept {
            return self.dlags.clone();
        }
        let mut w = DMatrix::from_element(self.rows(), self.dlags.ncols() + 1, 1.0);
        w.view_mut((0, 0), (self.rows(), self.dlags.ncols())).copy_from(&self.dlags);
        w
    }
}

pub(crate) fn balanced_values(panel: &Panel) -> Result<&DMatrix<f64>> {
    if !panel.is_balanced() {
        return Err(Error::InvalidPanel("VECM estimation needs a balanced panel".into()));
    }
    Ok(panel.values())
}

/// Split stacked short-run coefficients (`N x (Np [+1])`, intercept last) into parts.
pub(crate) fn split_short_run(gamma: &DMatrix<f64>, n: usize, p: usize, intercept: bool) -> (Vec<DMatrix<f64>>, Vec<f64>) {
    let phi = (0..p).map(|j| gamma.columns(j * n, n).into_owned()).collect();
    let c = if intercept {
        gamma.column(n * p).iter().copied().collect()
    } else {
        vec![0.0; n]
    };
    (phi, c)
}

/// Residual projection `Y - X (X'X)^{-1} X'Y`, identity when `X` is empty.
pub(crate) fn partial_out(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Ok(y.clone());
    }
    Ok(crate::linalg::ols_multi(x, y)?.1)
}
