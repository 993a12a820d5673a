use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{balanced_values, split_short_run, Estimator, VecmDesign, VecmModel};
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_log_det, sym_eigen_desc};
use crate::panel::{DeterministicSpec, Panel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmlConfig {
    /// Penalty on the cointegrating vectors `B`.
    pub lambda_b: f64,
    /// Penalty on the short-run matrices `Φ`.
    pub lambda_phi: f64,
    /// Penalty on off-diagonal precision entries.
    pub lambda_omega: f64,
    pub max_cycles: usize,
    /// Relative objective change that ends the cycles.
    pub tolerance: f64,
}

impl PmlConfig {
    pub fn new(lambda_b: f64, lambda_phi: f64, lambda_omega: f64) -> Self {
        PmlConfig {
            lambda_b,
            lambda_phi,
            lambda_omega,
            max_cycles: 200,
            tolerance: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PmlFit {
    pub model: VecmModel,
    /// Objective after initialisation and after every cycle.
    pub objective_path: Vec<f64>,
    pub cycles: usize,
}

struct State {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    /// `[Φ_1 .. Φ_p]`, `N x Np`.
    phi: DMatrix<f64>,
    omega: DMatrix<f64>,
}

struct Data {
    dz: DMatrix<f64>,
    zlag: DMatrix<f64>,
    dlags: DMatrix<f64>,
    szz: DMatrix<f64>,
    sxx: DMatrix<f64>,
    rows: f64,
}

fn soft(u: f64, t: f64) -> f64 {
    if u > t {
        u - t
    } else if u < -t {
        u + t
    } else {
        0.0
    }
}

impl Data {
    fn residuals(&self, s: &State) -> DMatrix<f64> {
        let mut e = &self.dz - &self.zlag * &s.b * s.a.transpose();
        if self.dlags.ncols() > 0 {
            e -= &self.dlags * s.phi.transpose();
        }
        e
    }

    fn objective(&self, s: &State, cfg: &PmlConfig) -> Result<f64> {
        let e = self.residuals(s);
        let se = e.transpose() * &e / self.rows;
        let fit = (&s.omega * se).trace();
        let ld = spd_log_det(&s.omega)?;
        let p1: f64 = s.b.iter().map(|v| v.abs()).sum();
        let p2: f64 = s.phi.iter().map(|v| v.abs()).sum();
        let n = s.omega.nrows();
        let mut p3 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p3 += s.omega[(i, j)].abs();
                }
            }
        }
        Ok(fit - ld + cfg.lambda_b * p1 + cfg.lambda_phi * p2 + cfg.lambda_omega * p3)
    }

    fn update_a(&self, s: &mut State) {
        if s.b.ncols() == 0 {
            return;
        }
        let mut y = self.dz.clone();
        if self.dlags.ncols() > 0 {
            y -= &self.dlags * s.phi.transpose();
        }
        let x = &self.zlag * &s.b;
        let xtx = x.transpose() * &x;
        let tol = 1e-12 * xtx.amax().max(1e-300);
        let inv = xtx.pseudo_inverse(tol).expect("non-negative tolerance");
        s.a = (inv * x.transpose() * y).transpose();
    }

    /// Coordinate descent on the lasso problem in `B` given `A`, `Φ`, `Ω`.
    fn update_b(&self, s: &mut State, lambda: f64) {
        let r = s.a.ncols();
        if r == 0 {
            return;
        }
        let mut resp = self.dz.clone();
        if self.dlags.ncols() > 0 {
            resp -= &self.dlags * s.phi.transpose();
        }
        let srz = resp.transpose() * &self.zlag / self.rows;
        let h = s.a.transpose() * &s.omega * &s.a;
        let c = s.a.transpose() * &s.omega * srz;
        let n = s.b.nrows();
        let mut sb = &self.szz * &s.b;
        for _sweep in 0..1000 {
            let mut change = 0.0f64;
            let mut scale = 0.0f64;
            for j in 0..r {
                for i in 0..n {
                    let q = self.szz[(i, i)] * h[(j, j)];
                    if !(q > 0.0) {
                        continue;
                    }
                    let sbh: f64 = (0..r).map(|k| sb[(i, k)] * h[(k, j)]).sum();
                    let old = s.b[(i, j)];
                    let u = c[(j, i)] - sbh + q * old;
                    let new = soft(u, 0.5 * lambda) / q;
                    let delta = new - old;
                    if delta != 0.0 {
                        s.b[(i, j)] = new;
                        for m in 0..n {
                            sb[(m, j)] += delta * self.szz[(m, i)];
                        }
                    }
                    change = change.max(delta.abs());
                    scale = scale.max(new.abs());
                }
            }
            if change <= 1e-12 * scale.max(1e-12) {
                break;
            }
        }
    }

    /// Coordinate descent on the lasso problem in `Φ`.
    fn update_phi(&self, s: &mut State, lambda: f64) {
        let k = self.dlags.ncols();
        if k == 0 {
            return;
        }
        let y = &self.dz - &self.zlag * &s.b * s.a.transpose();
        let syx = y.transpose() * &self.dlags / self.rows;
        let osyx = &s.omega * syx;
        let n = s.phi.nrows();
        let mut m = &s.phi * &self.sxx;
        for _sweep in 0..1000 {
            let mut change = 0.0f64;
            let mut scale = 0.0f64;
            for j in 0..k {
                for i in 0..n {
                    let q = s.omega[(i, i)] * self.sxx[(j, j)];
                    if !(q > 0.0) {
                        continue;
                    }
                    let om: f64 = (0..n).map(|l| s.omega[(i, l)] * m[(l, j)]).sum();
                    let old = s.phi[(i, j)];
                    let u = osyx[(i, j)] - om + q * old;
                    let new = soft(u, 0.5 * lambda) / q;
                    let delta = new - old;
                    if delta != 0.0 {
                        s.phi[(i, j)] = new;
                        for l in 0..k {
                            m[(i, l)] += delta * self.sxx[(j, l)];
                        }
                    }
                    change = change.max(delta.abs());
                    scale = scale.max(new.abs());
                }
            }
            if change <= 1e-12 * scale.max(1e-12) {
                break;
            }
        }
    }

    fn update_omega(&self, s: &mut State, cfg: &PmlConfig) -> Result<()> {
        let e = self.residuals(s);
        let se = e.transpose() * &e / self.rows;
        let candidate = if cfg.lambda_omega == 0.0 {
            spd_inverse(&se).map_err(|_| {
                Error::numerical("residual covariance is singular; use a positive precision penalty")
            })?
        } else {
            match graphical_lasso(&se, cfg.lambda_omega) {
                Ok(o) => o,
                // near-singular residual covariance: solve a lightly ridged problem
                Err(_) => graphical_lasso(&conditioned(&se, 1e-6), cfg.lambda_omega)?,
            }
        };
        // keep the previous precision if the subproblem was solved less accurately
        let before = (&s.omega * &se).trace() - spd_log_det(&s.omega)?;
        let old = std::mem::replace(&mut s.omega, candidate);
        let after = (&s.omega * &se).trace() - spd_log_det(&s.omega).unwrap_or(f64::NEG_INFINITY);
        let pen = |o: &DMatrix<f64>| -> f64 {
            let n = o.nrows();
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| o[(i, j)].abs()).sum()
        };
        if !(after + cfg.lambda_omega * pen(&s.omega) <= before + cfg.lambda_omega * pen(&old)) {
            s.omega = old;
        }
        Ok(())
    }
}

/// `S` with its smallest eigenvalue lifted to at least `floor * λ_max`.
fn conditioned(s: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let (vals, _) = sym_eigen_desc(s);
    let n = s.nrows();
    let top = vals[0].max(1e-300);
    let low = vals[n - 1];
    let mut out = s.clone();
    if low < floor * top {
        for i in 0..n {
            out[(i, i)] += floor * top - low.min(0.0) * 2.0;
        }
    }
    out
}

/// Off-diagonal-penalised graphical lasso: minimises
/// `tr(S Ω) - ln|Ω| + λ Σ_{i≠j} |ω_ij|` by column-wise coordinate descent.
pub(crate) fn graphical_lasso(s: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let n = s.nrows();
    if (0..n).any(|i| !(s[(i, i)] > 0.0)) {
        return Err(Error::numerical("residual covariance has a zero variance"));
    }
    let mut w = s.clone();
    let mut betas = vec![vec![0.0; n.saturating_sub(1)]; n];
    let off_scale = {
        let mut m = 0.0f64;
        for i in 0..n {
            m = m.max(s[(i, i)]);
        }
        m
    };
    for _outer in 0..10_000 {
        let mut delta = 0.0f64;
        for j in 0..n {
            let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            let beta = &mut betas[j];
            // lasso: min 1/2 β' W11 β - β' s12 + λ |β|_1
            for _ in 0..10_000 {
                let mut change = 0.0f64;
                for (a, &ia) in others.iter().enumerate() {
                    let mut r = s[(ia, j)];
                    for (b, &ib) in others.iter().enumerate() {
                        if b != a {
                            r -= w[(ia, ib)] * beta[b];
                        }
                    }
                    let new = soft(r, lambda) / w[(ia, ia)];
                    change = change.max((new - beta[a]).abs());
                    beta[a] = new;
                }
                if change <= 1e-14 * off_scale.max(1.0) {
                    break;
                }
            }
            for &ia in &others {
                let v: f64 = others.iter().enumerate().map(|(b, &ib)| w[(ia, ib)] * beta[b]).sum();
                delta = delta.max((w[(ia, j)] - v).abs());
                w[(ia, j)] = v;
                w[(j, ia)] = v;
            }
        }
        if delta <= 1e-13 * off_scale {
            break;
        }
    }
    let mut omega = DMatrix::zeros(n, n);
    for j in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let beta = &betas[j];
        let w12b: f64 = others.iter().enumerate().map(|(a, &ia)| w[(ia, j)] * beta[a]).sum();
        let theta22 = 1.0 / (w[(j, j)] - w12b);
        omega[(j, j)] = theta22;
        for (a, &ia) in others.iter().enumerate() {
            omega[(ia, j)] = -beta[a] * theta22;
        }
    }
    let omega = (&omega + omega.transpose()) * 0.5;
    if omega.clone().cholesky().is_none() {
        return Err(Error::numerical("graphical lasso produced a non-positive-definite precision matrix"));
    }
    Ok(omega)
}

/// Reduced-rank start: ridge-concentrated canonical correlations when OLS is
/// infeasible, plain Johansen moments otherwise.
fn initialise(d: &Data, r: usize) -> Result<State> {
    let n = d.dz.ncols();
    let k = d.dlags.ncols();
    let rows = d.rows;
    let ridge = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let mut g = x.transpose() * x;
        let kk = g.nrows();
        if (kk as f64) >= rows - 1.0 || g.clone().cholesky().is_none() {
            let t = g.trace() / kk.max(1) as f64;
            for i in 0..kk {
                g[(i, i)] += 1e-2 * t.max(1e-12);
            }
        }
        g
    };
    let proj = |y: &DMatrix<f64>| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if k == 0 {
            return Ok((DMatrix::zeros(0, y.ncols()), y.clone()));
        }
        let g = ridge(&d.dlags);
        let coef = g
            .cholesky()
            .ok_or_else(|| Error::numerical("short-run Gram matrix is not positive definite"))?
            .solve(&(d.dlags.transpose() * y));
        let res = y - &d.dlags * &coef;
        Ok((coef, res))
    };
    let (_, r0) = proj(&d.dz)?;
    let (_, r1) = proj(&d.zlag)?;
    let s00 = r0.transpose() * &r0 / rows;
    let s01 = r0.transpose() * &r1 / rows;
    let mut s11 = r1.transpose() * &r1 / rows;
    let mut s00r = s00.clone();
    if s11.clone().cholesky().is_none() || (n as f64) >= rows - 1.0 {
        let t = s11.trace() / n as f64;
        for i in 0..n {
            s11[(i, i)] += 1e-2 * t.max(1e-12);
        }
    }
    if s00r.clone().cholesky().is_none() {
        let t = s00r.trace() / n as f64;
        for i in 0..n {
            s00r[(i, i)] += 1e-2 * t.max(1e-12);
        }
    }
    let l11 = s11.clone().cholesky().ok_or_else(|| Error::numerical("levels moment matrix is singular"))?.l();
    let l_inv = l11.try_inverse().ok_or_else(|| Error::numerical("levels moment matrix is singular"))?;
    let c00 = s00r.cholesky().ok_or_else(|| Error::numerical("difference moment matrix is singular"))?;
    let m = &l_inv * s01.transpose() * c00.solve(&s01) * l_inv.transpose();
    let (_, u) = sym_eigen_desc(&m);
    let b = l_inv.transpose() * u.columns(0, r);
    let a = &s01 * &b;
    let y = &d.dz - &d.zlag * &b * a.transpose();
    let phi = if k == 0 {
        DMatrix::zeros(n, 0)
    } else {
        let g = ridge(&d.dlags);
        g.cholesky()
            .ok_or_else(|| Error::numerical("short-run Gram matrix is not positive definite"))?
            .solve(&(d.dlags.transpose() * &y))
            .transpose()
    };
    let mut st = State {
        a,
        b,
        phi,
        omega: DMatrix::identity(n, n),
    };
    let e = d.residuals(&st);
    let se = e.transpose() * &e / rows;
    st.omega = spd_inverse(&conditioned(&se, 1e-8))?;
    Ok(st)
}

/// Penalised Gaussian likelihood VECM at fixed rank `r`, minimised block-wise
/// over `A`, `B`, `Φ` and `Ω`. The data are used as given (no deterministics),
/// so callers detrend first.
pub fn pml_vecm(panel: &Panel, r: usize, p: usize, cfg: &PmlConfig) -> Result<PmlFit> {
    let z = balanced_values(panel)?;
    let n = z.ncols();
    if r > n {
        return Err(Error::param(format!("rank {r} exceeds the number of series {n}")));
    }
    for (name, l) in [("lambda_b", cfg.lambda_b), ("lambda_phi", cfg.lambda_phi), ("lambda_omega", cfg.lambda_omega)] {
        if !(l >= 0.0) {
            return Err(Error::param(format!("{name} must be non-negative, got {l}")));
        }
    }
    if z.nrows() < n + p + 2 {
        return Err(Error::insufficient(format!(
            "penalised VECM needs at least N + p + 2 = {} observations, got {}",
            n + p + 2,
            z.nrows()
        )));
    }
    let design = VecmDesign::new(z, p)?;
    let rows = design.rows() as f64;
    let data = Data {
        szz: design.zlag.transpose() * &design.zlag / rows,
        sxx: design.dlags.transpose() * &design.dlags / rows,
        dz: design.dz,
        zlag: design.zlag,
        dlags: design.dlags,
        rows,
    };
    let mut st = initialise(&data, r)?;
    if cfg.lambda_omega > 0.0 {
        data.update_omega(&mut st, cfg)?;
    }
    let mut path = vec![data.objective(&st, cfg)?];
    let mut cycles = 0;
    while cycles < cfg.max_cycles {
        cycles += 1;
        let before = *path.last().expect("non-empty");
        data.update_a(&mut st);
        data.update_b(&mut st, cfg.lambda_b);
        data.update_phi(&mut st, cfg.lambda_phi);
        data.update_omega(&mut st, cfg)?;
        let after = data.objective(&st, cfg)?;
        path.push(after);
        if after > before + 1e-10 * before.abs().max(1.0) {
            return Err(Error::SolverFault { cycle: cycles, before, after });
        }
        if (before - after).abs() <= cfg.tolerance * after.abs().max(1.0) {
            break;
        }
    }
    let rank = r;
    let (phi, intercept) = split_short_run(&st.phi, n, p, false);
    let sigma = spd_inverse(&st.omega)?;
    let model = VecmModel {
        a: st.a,
        b: st.b,
        phi,
        intercept,
        trend: vec![0.0; n],
        sigma,
        precision: Some(st.omega),
        rank,
        lags: p,
        deterministics: DeterministicSpec::None,
        estimator: Estimator::PenalizedMl,
        nobs: z.nrows(),
        loglik: None,
    };
    Ok(PmlFit {
        model,
        objective_path: path,
        cycles,
    })
}
