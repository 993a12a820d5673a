use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{balanced_values, partial_out, split_short_run, Estimator, VecmDesign, VecmModel};
use crate::cv::{self, Fold};
use crate::error::{Error, Result};
use crate::linalg::{group_kkt, group_threshold, ols_multi, row_major};
use crate::panel::{DeterministicSpec, Panel};

/// Pivoted QR factorisation of the OLS initializer `Π_OLS' P = Q R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrVecmState {
    #[serde(with = "row_major")]
    pub q: DMatrix<f64>,
    #[serde(with = "row_major")]
    pub r: DMatrix<f64>,
    /// Column `j` of `R` belongs to equation `pivot[j]`.
    pub pivot: Vec<usize>,
    /// Group weights `μ_k = sqrt(Σ_{i >= k} R_{k,i}^2)`.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct QrVecmFit {
    pub model: VecmModel,
    pub state: QrVecmState,
    /// Penalised `R`.
    pub r_hat: DMatrix<f64>,
    pub lambda: f64,
    /// Largest group-lasso KKT violation of the final fit.
    pub kkt: f64,
    pub lambda_grid: Vec<f64>,
    pub cv_loss: Vec<f64>,
}

struct Problem {
    design: VecmDesign,
    /// Rotated partialled levels `Z̃_{-1} Q`.
    x: DMatrix<f64>,
    /// Partialled differences, columns in pivot order.
    y: DMatrix<f64>,
    state: QrVecmState,
}

impl Problem {
    fn new(panel: &Panel, p: usize) -> Result<Self> {
        let z = balanced_values(panel)?;
        let n = z.ncols();
        let design = VecmDesign::new(z, p)?;
        if design.rows() <= n * (p + 1) {
            return Err(Error::insufficient(format!(
                "QR-VECM needs an OLS initializer, which requires N(p+1) < T: N(p+1) = {}, usable T = {}",
                n * (p + 1),
                design.rows()
            )));
        }
        let w = design.short_run(false);
        let dzt = partial_out(&design.dz, &w)?;
        let zt = partial_out(&design.zlag, &w)?;
        let (pi_t, _) = ols_multi(&zt, &dzt)?;
        let qr = pi_t.col_piv_qr();
        let q = qr.q();
        let r = qr.r();
        let mut idx = DMatrix::from_fn(1, n, |_, j| j as f64);
        qr.p().permute_columns(&mut idx);
        let pivot: Vec<usize> = idx.iter().map(|v| *v as usize).collect();
        let weights = (0..n)
            .map(|k| (k..n).map(|i| r[(k, i)] * r[(k, i)]).sum::<f64>().sqrt())
            .collect();
        let x = &zt * &q;
        let y = DMatrix::from_fn(dzt.nrows(), n, |t, j| dzt[(t, pivot[j])]);
        Ok(Problem {
            design,
            x,
            y,
            state: QrVecmState { q, r, pivot, weights },
        })
    }

    fn n(&self) -> usize {
        self.y.ncols()
    }

    fn group(&self, j: usize) -> (DMatrix<f64>, DVector<f64>) {
        let xj = self.x.columns(0, j + 1);
        (xj.transpose() * xj, xj.transpose() * self.y.column(j))
    }

    fn kappa(&self, lambda: f64, j: usize) -> f64 {
        let mu = self.state.weights[j];
        if lambda == 0.0 {
            0.0
        } else if mu > 0.0 {
            lambda / mu
        } else {
            f64::INFINITY
        }
    }

    /// Smallest penalty that zeroes every group.
    fn lambda_max(&self) -> f64 {
        (0..self.n())
            .map(|j| {
                let (_, xty) = self.group(j);
                2.0 * xty.norm() * self.state.weights[j]
            })
            .fold(0.0, f64::max)
    }

    fn solve(&self, lambda: f64) -> (DMatrix<f64>, f64) {
        let n = self.n();
        let mut r_hat = DMatrix::zeros(n, n);
        let mut kkt = 0.0f64;
        for j in 0..n {
            let (xtx, xty) = self.group(j);
            let kappa = self.kappa(lambda, j);
            let b = group_threshold(&xtx, &xty, kappa);
            kkt = kkt.max(group_kkt(&xtx, &xty, kappa, &b));
            r_hat.view_mut((0, j), (j + 1, 1)).copy_from(&b);
        }
        (r_hat, kkt)
    }

    fn assemble(&self, r_hat: &DMatrix<f64>, p: usize, nobs: usize) -> Result<VecmModel> {
        let n = self.n();
        let active: Vec<usize> = (0..n).filter(|&j| r_hat.column(j).iter().any(|v| *v != 0.0)).collect();
        let rank = active.len();
        let mut a = DMatrix::zeros(n, rank);
        let mut b = DMatrix::zeros(n, rank);
        for (c, &j) in active.iter().enumerate() {
            a[(self.state.pivot[j], c)] = 1.0;
            b.set_column(c, &(&self.state.q * r_hat.column(j)));
        }
        let pi = &a * b.transpose();
        let target = &self.design.dz - &self.design.zlag * pi.transpose();
        let w = self.design.short_run(false);
        let (gamma, resid) = if w.ncols() == 0 {
            (DMatrix::zeros(0, n), target)
        } else {
            ols_multi(&w, &target)?
        };
        let (phi, intercept) = split_short_run(&gamma.transpose(), n, p, false);
        let sigma = resid.transpose() * &resid / self.design.rows() as f64;
        Ok(VecmModel {
            a,
            b,
            phi,
            intercept,
            trend: vec![0.0; n],
            sigma,
            precision: None,
            rank,
            lags: p,
            deterministics: DeterministicSpec::None,
            estimator: Estimator::QrGroupLasso,
            nobs,
            loglik: None,
        })
    }
}

/// QR-VECM at a fixed penalty `lambda`.
///
/// Short-run dynamics are partialled out, the OLS long-run matrix is factored
/// by pivoted QR and the columns of `R` are shrunk by an adaptive group lasso
/// with weights `1/μ_j`; `Φ` is then re-estimated by OLS given `Π̂ = P R̂' Q'`.
pub fn qr_vecm_fixed(panel: &Panel, p: usize, lambda: f64) -> Result<QrVecmFit> {
    if !(lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be non-negative, got {lambda}")));
    }
    let prob = Problem::new(panel, p)?;
    let (r_hat, kkt) = prob.solve(lambda);
    let model = prob.assemble(&r_hat, p, panel.nobs())?;
    Ok(QrVecmFit {
        model,
        state: prob.state,
        r_hat,
        lambda,
        kkt,
        lambda_grid: vec![lambda],
        cv_loss: vec![f64::NAN],
    })
}

/// One-step squared prediction error of `model` over design rows `rows`.
pub(crate) fn one_step_loss(model: &VecmModel, design: &VecmDesign, rows: std::ops::Range<usize>) -> f64 {
    let pi = model.pi();
    let n = model.n();
    let mut loss = 0.0;
    for t in rows {
        let zl = design.zlag.row(t).transpose();
        let mut pred = &pi * zl;
        for i in 0..n {
            pred[i] += model.intercept[i] + model.trend[i] * design.time[t];
        }
        for (j, phi) in model.phi.iter().enumerate() {
            let lag = design.dlags.columns(j * n, n).row(t).transpose();
            pred += phi * lag;
        }
        loss += (design.dz.row(t).transpose() - pred).norm_squared();
    }
    loss
}

/// QR-VECM with `lambda` chosen from `lambda_grid` by expanding-window
/// cross-validation of one-step forecasts. An empty grid uses ten points from
/// the all-zero penalty down by three orders of magnitude.
pub fn qr_vecm(panel: &Panel, p: usize, lambda_grid: &[f64]) -> Result<QrVecmFit> {
    let full = Problem::new(panel, p)?;
    let grid = if lambda_grid.is_empty() {
        cv::geometric_grid(full.lambda_max() * (1.0 + 1e-9), 1e-3, 10)
    } else {
        lambda_grid.to_vec()
    };
    let design = &full.design;
    let folds = cv::expanding_folds(design.rows(), cv::DEFAULT_FOLDS);
    let (best, losses) = match folds {
        Ok(folds) if grid.len() > 1 => {
            // fit on panel rows preceding each validation block
            let score = |lambda: &f64, fold: &Fold| -> Result<f64> {
                let train = panel.slice_rows(0, fold.train.end + p + 1);
                let fit = qr_vecm_fixed(&train, p, *lambda)?;
                Ok(one_step_loss(&fit.model, design, fold.valid.clone()))
            };
            cv::tscv_select(&grid, &folds, |l| *l, score)?
        }
        _ => (0, vec![f64::NAN; grid.len()]),
    };
    let lambda = grid[best];
    let (r_hat, kkt) = full.solve(lambda);
    let model = full.assemble(&r_hat, p, panel.nobs())?;
    Ok(QrVecmFit {
        model,
        state: full.state,
        r_hat,
        lambda,
        kkt,
        lambda_grid: grid,
        cv_loss: losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_vecm, VecmParams};

    fn panel(seed: u64, t: usize) -> Panel {
        let mut params = VecmParams::random_walks(3);
        params.a = DMatrix::from_column_slice(3, 1, &[-0.4, 0.0, 0.2]);
        params.b = DMatrix::from_column_slice(3, 1, &[1.0, -1.0, 0.0]);
        params.phi = vec![DMatrix::identity(3, 3) * 0.2];
        simulate_vecm(&params, t, 50, seed).unwrap().panel
    }

    #[test]
    fn qr_state_invariants() {
        let prob = Problem::new(&panel(1, 150), 1).unwrap();
        let n = 3;
        let qtq = prob.state.q.transpose() * &prob.state.q;
        assert!((qtq - DMatrix::<f64>::identity(n, n)).amax() < 1e-10);
        for i in 0..n {
            for j in 0..i {
                assert!(prob.state.r[(i, j)].abs() < 1e-12);
            }
        }
        let mut sorted = prob.state.pivot.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn zero_penalty_reproduces_ols() {
        let pnl = panel(2, 150);
        let fit = qr_vecm_fixed(&pnl, 1, 0.0).unwrap();
        let (theta, _) = super::super::johansen::unrestricted_ols(&pnl, 1, DeterministicSpec::None);
        let pi = fit.model.pi();
        for i in 0..3 {
            for j in 0..3 {
                assert!((pi[(i, j)] - theta[(i, j)]).abs() < 1e-8);
                assert!((fit.model.phi[0][(i, j)] - theta[(i, 3 + j)]).abs() < 1e-8);
            }
        }
        assert!(fit.kkt < 1e-6);
    }

    #[test]
    fn huge_penalty_gives_rank_zero() {
        let fit = qr_vecm_fixed(&panel(3, 150), 1, 1e12).unwrap();
        assert_eq!(fit.model.rank, 0);
        assert_eq!(fit.r_hat, DMatrix::zeros(3, 3));
        assert_eq!(fit.model.pi(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn kkt_holds_along_the_grid() {
        let pnl = panel(4, 150);
        let fit = qr_vecm(&pnl, 1, &[]).unwrap();
        assert_eq!(fit.lambda_grid.len(), 10);
        for &l in &fit.lambda_grid {
            let f = qr_vecm_fixed(&pnl, 1, l).unwrap();
            assert!(f.kkt <= 1e-6, "lambda {l}: {}", f.kkt);
        }
        assert!(fit.model.rank <= 3);
    }

    #[test]
    fn dimension_bound_is_enforced() {
        let pnl = panel(5, 12);
        match qr_vecm_fixed(&pnl, 3, 0.1) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("N(p+1) < T")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
