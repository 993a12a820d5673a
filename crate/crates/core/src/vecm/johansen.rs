use nalgebra::DMatrix;

use super::{balanced_values, partial_out, split_short_run, Estimator, VecmDesign, VecmModel};
use crate::error::{Error, Result};
use crate::linalg::{ols_multi, sym_eigen_desc};
use crate::panel::{DeterministicSpec, Panel};

/// Reduced-rank regression quantities shared by every rank.
#[derive(Debug, Clone)]
pub struct JohansenEigen {
    /// Squared canonical correlations, non-increasing, in `[0, 1)`.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors normalised so that `V' S11 V = I` (columns).
    vectors: DMatrix<f64>,
    s01: DMatrix<f64>,
    log_det_s00: f64,
    design: VecmDesign,
    det: DeterministicSpec,
    p: usize,
    nobs: usize,
}

impl JohansenEigen {
    pub fn rows(&self) -> usize {
        self.design.rows()
    }

    /// Gaussian log-likelihood at rank `r`.
    pub fn loglik(&self, r: usize) -> f64 {
        let n = self.s01.nrows() as f64;
        let t = self.rows() as f64;
        let tail: f64 = self.eigenvalues[..r].iter().map(|l| (1.0 - l).ln()).sum();
        -0.5 * t * (n * (2.0 * std::f64::consts::PI).ln() + n + self.log_det_s00 + tail)
    }

    fn restricted(&self) -> DMatrix<f64> {
        let d = &self.design;
        if self.det == DeterministicSpec::Trend {
            let mut m = DMatrix::zeros(d.rows(), d.zlag.ncols() + 1);
            m.view_mut((0, 0), d.zlag.shape()).copy_from(&d.zlag);
            m.set_column(d.zlag.ncols(), &d.time);
            m
        } else {
            d.zlag.clone()
        }
    }

    /// Full model at rank `r`.
    pub fn model(&self, r: usize) -> Result<VecmModel> {
        let n = self.s01.nrows();
        if r > n {
            return Err(Error::param(format!("rank {r} exceeds the number of series {n}")));
        }
        let beta = self.vectors.columns(0, r).into_owned();
        let alpha = &self.s01 * &beta;
        let intercept = self.det != DeterministicSpec::None;
        let w = self.design.short_run(intercept);
        let zr = self.restricted();
        let target = &self.design.dz - &zr * &beta * alpha.transpose();
        let (gamma, resid) = if w.ncols() == 0 {
            (DMatrix::zeros(0, n), target)
        } else {
            ols_multi(&w, &target)?
        };
        let (phi, c) = split_short_run(&gamma.transpose(), n, self.p, intercept);
        let sigma = resid.transpose() * &resid / self.rows() as f64;
        // unit-length cointegrating vectors, loadings rescaled to keep Π fixed
        let mut a = alpha;
        let mut bfull = beta;
        for j in 0..r {
            let norm = bfull.view((0, j), (n, 1)).norm();
            if norm > 0.0 {
                let mut sign = 1.0;
                let (imax, _) = bfull
                    .view((0, j), (n, 1))
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
                if bfull[(imax, j)] < 0.0 {
                    sign = -1.0;
                }
                bfull.column_mut(j).scale_mut(sign / norm);
                a.column_mut(j).scale_mut(sign * norm);
            }
        }
        let b = bfull.rows(0, n).into_owned();
        let trend = if self.det == DeterministicSpec::Trend {
            (&a * bfull.row(n).transpose()).iter().copied().collect()
        } else {
            vec![0.0; n]
        };
        Ok(VecmModel {
            a,
            b,
            phi,
            intercept: c,
            trend,
            sigma,
            precision: None,
            rank: r,
            lags: self.p,
            deterministics: self.det,
            estimator: Estimator::Johansen,
            nobs: self.nobs,
            loglik: Some(self.loglik(r)),
        })
    }
}

fn singular(what: &str) -> Error {
    Error::numerical(format!("Johansen {what} moment matrix is singular; reduce the lag order p or the rank r"))
}

/// Concentrate out the short-run terms and solve the eigenproblem
/// `|λ S11 - S10 S00^{-1} S01| = 0`. A trend (when requested) is restricted
/// to the cointegrating space; the intercept is unrestricted.
pub fn johansen_eigen(panel: &Panel, p: usize, det: DeterministicSpec) -> Result<JohansenEigen> {
    let z = balanced_values(panel)?;
    let n = z.ncols();
    let design = VecmDesign::new(z, p)?;
    let rows = design.rows();
    let extra = usize::from(det == DeterministicSpec::Trend);
    if rows <= n * (p + 1) + extra + 1 {
        return Err(Error::insufficient(format!(
            "Johansen estimation with N = {n}, p = {p} needs more than {} observations, got {}",
            n * (p + 1) + extra + 2,
            z.nrows()
        )));
    }
    let w = design.short_run(det != DeterministicSpec::None);
    let eig = JohansenEigen {
        eigenvalues: Vec::new(),
        vectors: DMatrix::zeros(0, 0),
        s01: DMatrix::zeros(0, 0),
        log_det_s00: 0.0,
        design,
        det,
        p,
        nobs: z.nrows(),
    };
    let r0 = partial_out(&eig.design.dz, &w).map_err(|_| singular("short-run"))?;
    let r1 = partial_out(&eig.restricted(), &w).map_err(|_| singular("short-run"))?;
    let tf = rows as f64;
    let s00 = r0.transpose() * &r0 / tf;
    let s11 = r1.transpose() * &r1 / tf;
    let s01 = r0.transpose() * &r1 / tf;
    let c00 = s00.clone().cholesky().ok_or_else(|| singular("S00"))?;
    let c11 = s11.clone().cholesky().ok_or_else(|| singular("S11"))?;
    let log_det_s00 = 2.0 * c00.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let l11 = c11.l();
    let l11_inv = l11
        .clone()
        .try_inverse()
        .ok_or_else(|| singular("S11"))?;
    let s00_inv_s01 = c00.solve(&s01);
    let m = &l11_inv * s01.transpose() * s00_inv_s01 * l11_inv.transpose();
    let (vals, u) = sym_eigen_desc(&m);
    let vectors = l11_inv.transpose() * u;
    let eigenvalues = vals.iter().take(n).map(|v| v.clamp(0.0, 1.0 - 1e-15)).collect();
    Ok(JohansenEigen {
        eigenvalues,
        vectors,
        s01,
        log_det_s00,
        ..eig
    })
}

/// Johansen reduced-rank ML estimate at cointegrating rank `r` with `p` lagged differences.
pub fn johansen_ml(panel: &Panel, r: usize, p: usize, det: DeterministicSpec) -> Result<VecmModel> {
    let n = panel.nseries();
    if r > n {
        return Err(Error::param(format!("rank {r} exceeds the number of series {n}")));
    }
    let rows = panel.nobs().saturating_sub(p + 1);
    if rows <= n * (p + 1) + r + 1 {
        return Err(Error::insufficient(format!(
            "Johansen estimation needs T > N(p+1) + r + 2 = {}, got T = {}",
            n * (p + 1) + r + 2,
            panel.nobs()
        )));
    }
    johansen_eigen(panel, p, det)?.model(r)
}

/// Rank by a BIC-rate information criterion on the Johansen likelihood:
/// `-2 loglik(r) + k(r) log T_eff` with `k(r) = r(2N - r)` free long-run
/// parameters (plus `r` for a restricted trend). Ties go to the smaller rank.
pub fn select_rank_ic(panel: &Panel, p: usize, rmax: usize, det: DeterministicSpec) -> Result<usize> {
    let n = panel.nseries();
    if rmax > n {
        return Err(Error::param(format!("rmax {rmax} exceeds the number of series {n}")));
    }
    if rmax == 0 {
        return Ok(0);
    }
    let eig = johansen_eigen(panel, p, det)?;
    let ct = (eig.rows() as f64).ln();
    let extra = usize::from(det == DeterministicSpec::Trend);
    let mut best = (0, f64::INFINITY);
    for r in 0..=rmax {
        let k = (r * (2 * n - r) + r * extra) as f64;
        let ic = -2.0 * eig.loglik(r) + k * ct;
        if ic < best.1 {
            best = (r, ic);
        }
    }
    Ok(best.0)
}

/// Unrestricted OLS of `Δz_t` on `z_{t-1}`, lags and deterministics (test oracle).
#[cfg(test)]
pub(crate) fn unrestricted_ols(panel: &Panel, p: usize, det: DeterministicSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = VecmDesign::new(panel.values(), p).unwrap();
    let w = d.short_run(det != DeterministicSpec::None);
    let k = d.zlag.ncols() + w.ncols();
    let mut x = DMatrix::zeros(d.rows(), k);
    x.view_mut((0, 0), d.zlag.shape()).copy_from(&d.zlag);
    x.view_mut((0, d.zlag.ncols()), w.shape()).copy_from(&w);
    let theta = &x.clone().pseudo_inverse(1e-14).unwrap() * &d.dz;
    let e = &d.dz - &x * &theta;
    (theta.transpose(), e.transpose() * &e / d.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_vecm, VecmParams};

    fn cointegrated(seed: u64, t: usize) -> Panel {
        let mut params = VecmParams::random_walks(4);
        params.a = DMatrix::from_column_slice(4, 1, &[-0.3, 0.1, 0.0, 0.2]);
        params.b = DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 0.5, 0.0]);
        simulate_vecm(&params, t, 50, seed).unwrap().panel
    }

    #[test]
    fn full_rank_equals_unrestricted_var() {
        let panel = cointegrated(3, 120);
        for det in [DeterministicSpec::None, DeterministicSpec::Mean] {
            let m = johansen_ml(&panel, 4, 2, det).unwrap();
            let (theta, sigma) = unrestricted_ols(&panel, 2, det);
            let pi = m.pi();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((pi[(i, j)] - theta[(i, j)]).abs() < 1e-8);
                    assert!((m.phi[1][(i, j)] - theta[(i, 8 + j)]).abs() < 1e-8);
                    assert!((m.sigma[(i, j)] - sigma[(i, j)]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn rank_zero_is_differences_var() {
        let panel = cointegrated(4, 100);
        let m = johansen_ml(&panel, 0, 1, DeterministicSpec::Mean).unwrap();
        assert_eq!(m.pi(), DMatrix::zeros(4, 4));
        let d = VecmDesign::new(panel.values(), 1).unwrap();
        let (g, _) = ols_multi(&d.short_run(true), &d.dz).unwrap();
        for i in 0..4 {
            assert!((m.intercept[i] - g[(4, i)]).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_and_likelihood_ordering() {
        let panel = cointegrated(5, 150);
        for det in [DeterministicSpec::None, DeterministicSpec::Mean, DeterministicSpec::Trend] {
            let e = johansen_eigen(&panel, 1, det).unwrap();
            assert!(e.eigenvalues.iter().all(|l| (0.0..1.0).contains(l)));
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            for r in 0..4 {
                assert!(e.loglik(r + 1) >= e.loglik(r));
            }
        }
    }

    #[test]
    fn likelihood_matches_residual_covariance() {
        let panel = cointegrated(6, 150);
        let m = johansen_ml(&panel, 1, 1, DeterministicSpec::Mean).unwrap();
        let t = (panel.nobs() - 2) as f64;
        let ld = crate::linalg::spd_log_det(&m.sigma).unwrap();
        let direct = -0.5 * t * (4.0 * (2.0 * std::f64::consts::PI).ln() + 4.0 + ld);
        assert!((m.loglik.unwrap() - direct).abs() < 1e-6 * direct.abs());
    }

    #[test]
    fn rank_selection_bounds() {
        let panel = cointegrated(7, 200);
        assert_eq!(select_rank_ic(&panel, 1, 0, DeterministicSpec::Mean).unwrap(), 0);
        assert!(select_rank_ic(&panel, 1, 5, DeterministicSpec::Mean).is_err());
    }

    #[test]
    fn too_short_sample_is_insufficient() {
        let panel = cointegrated(8, 12);
        assert!(matches!(
            johansen_ml(&panel, 1, 2, DeterministicSpec::Mean),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn relabeling_permutes_estimates() {
        let panel = cointegrated(9, 150);
        let perm = [2, 0, 3, 1];
        let shuffled = panel.select_columns(&perm);
        let a = johansen_ml(&panel, 1, 1, DeterministicSpec::Mean).unwrap().pi();
        let b = johansen_ml(&shuffled, 1, 1, DeterministicSpec::Mean).unwrap().pi();
        for i in 0..4 {
            for j in 0..4 {
                assert!((b[(i, j)] - a[(perm[i], perm[j])]).abs() < 1e-8);
            }
        }
    }
}
