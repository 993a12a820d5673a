//! Sparse-group-lasso single-equation estimators: the solver, SPECS and PADL
//! designs, direct forecasts and nowcasts, and cross-validated tuning.

mod design;
mod fit;

pub use design::{padl_design, specs_design, specs_design_ordered, SingleEqDesign};
pub use fit::{
    factor_augment, padl_fit, specs_fit, specs_fit_ordered, tscv_tune, LambdaGrid, SingleEqMethod, SingleEqModel, TuneOutcome,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;

pub const MAX_SWEEPS: usize = 10_000;
/// Relative KKT residual every returned fit satisfies.
pub const KKT_TOLERANCE: f64 = 1e-6;
const STOP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// OLS when the design has more rows than columns plus one, ridge otherwise.
    Auto,
    Ols,
    Ridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Group penalty on the lagged-levels block.
    pub lambda_g: f64,
    pub lambda_delta: f64,
    pub lambda_pi: f64,
    pub k_delta: f64,
    pub k_pi: f64,
    pub initializer: Initializer,
    /// Unpenalised intercept (handled by centring).
    pub intercept: bool,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda_g: 0.0,
            lambda_delta: 0.0,
            lambda_pi: 0.0,
            k_delta: 1.0,
            k_pi: 1.0,
            initializer: Initializer::Auto,
            intercept: true,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_g, self.lambda_delta, self.lambda_pi, self.k_delta, self.k_pi];
        if all.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("penalties and weight exponents must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SglFit {
    /// Levels block first, then the remaining columns.
    pub coef: DVector<f64>,
    pub intercept: f64,
    /// Relative KKT residual at the returned point.
    pub kkt: f64,
    pub sweeps: usize,
    pub objective: f64,
    /// Objective after every sweep.
    pub objective_path: Vec<f64>,
}

/// Centred (or raw) normal equations of a design.
struct Gram {
    g: DMatrix<f64>,
    c: DVector<f64>,
    yy: f64,
    x_mean: DVector<f64>,
    y_mean: f64,
}

impl Gram {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, intercept: bool) -> Self {
        let (n, k) = x.shape();
        let (x_mean, y_mean) = if intercept && n > 0 {
            (DVector::from_fn(k, |j, _| x.column(j).mean()), y.mean())
        } else {
            (DVector::zeros(k), 0.0)
        };
        let mut xc = x.clone();
        for j in 0..k {
            xc.column_mut(j).add_scalar_mut(-x_mean[j]);
        }
        let yc = y.add_scalar(-y_mean);
        Gram { g: xc.transpose() * &xc, c: xc.transpose() * &yc, yy: yc.norm_squared(), x_mean, y_mean }
    }
}

/// Penalised least squares
/// `||y - a - X b||² + λ_G ||b_{0..group}|| + Σ_j pen_j |b_j|`.
///
/// Columns with infinite `pen_j` are held at zero. Block coordinate descent:
/// exact one-dimensional updates for every coordinate (the group norm enters
/// the levels coordinates smoothly while the block is non-zero) and a proximal
/// gradient step on the block whenever it sits at zero but fails its KKT
/// condition.
pub fn sgl_solve_raw(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    group: usize,
    pen: &[f64],
    lambda_g: f64,
    intercept: bool,
) -> Result<SglFit> {
    let k = x.ncols();
    if pen.len() != k || group > k || y.len() != x.nrows() {
        return Err(Error::param("penalty vector, group size and design do not conform"));
    }
    if pen.iter().any(|p| !(*p >= 0.0)) || !(lambda_g >= 0.0) {
        return Err(Error::param("penalties must be non-negative"));
    }
    let gram = Gram::new(x, y, intercept);
    let (g, c) = (&gram.g, &gram.c);
    let active: Vec<bool> = (0..k).map(|j| pen[j].is_finite() && g[(j, j)] > 0.0).collect();
    let gsub = g.view((0, 0), (group, group)).into_owned();
    let lip = if group > 0 && lambda_g > 0.0 {
        2.0 * sym_eigen_desc(&gsub).0[0].max(f64::MIN_POSITIVE) * (1.0 + 1e-12)
    } else {
        0.0
    };
    let scale = (2.0 * c.amax()).max(f64::MIN_POSITIVE);
    let mut b: DVector<f64> = DVector::zeros(k);
    let mut q: DVector<f64> = DVector::zeros(k);
    let objective = |b: &DVector<f64>| {
        let fit = gram.yy - 2.0 * c.dot(b) + (g * b).dot(b);
        let grp = lambda_g * b.rows(0, group).norm();
        let ind: f64 = (0..k).filter(|&j| b[j] != 0.0).map(|j| pen[j] * b[j].abs()).sum();
        fit + grp + ind
    };
    let mut path = Vec::new();
    for sweep in 1..=MAX_SWEEPS {
        if group > 0 && lambda_g == 0.0 {
            for i in 0..group {
                if active[i] {
                    let old = b[i];
                    let bi = c[i] - (q[i] - g[(i, i)] * old);
                    let new = soft(2.0 * bi, pen[i]) / (2.0 * g[(i, i)]);
                    if new != old {
                        q.axpy(new - old, &g.column(i), 1.0);
                        b[i] = new;
                    }
                }
            }
        } else if group > 0 {
            // exact minimisation over the levels block given the other columns
            let old = b.rows(0, group).into_owned();
            let r = c.rows(0, group) - (q.rows(0, group) - &gsub * &old);
            let new = group_block(&gsub, &r, lambda_g, &pen[..group], &active[..group], &old, lip);
            for i in 0..group {
                let d = new[i] - old[i];
                if d != 0.0 {
                    q.axpy(d, &g.column(i), 1.0);
                    b[i] = new[i];
                }
            }
        }
        for j in group..k {
            if !active[j] {
                continue;
            }
            let old = b[j];
            let bj = c[j] - (q[j] - g[(j, j)] * old);
            let new = soft(2.0 * bj, pen[j]) / (2.0 * g[(j, j)]);
            if new != old {
                q.axpy(new - old, &g.column(j), 1.0);
                b[j] = new;
            }
        }
        if sweep % 64 == 0 {
            q = g * &b;
        }
        path.push(objective(&b));
        let kkt = sgl_kkt_gram(g, c, group, pen, lambda_g, &b, &q) / scale;
        if kkt <= STOP_TOLERANCE || sweep == MAX_SWEEPS {
            q = g * &b;
            let kkt = sgl_kkt_gram(g, c, group, pen, lambda_g, &b, &q) / scale;
            if kkt > KKT_TOLERANCE {
                if sweep < MAX_SWEEPS {
                    continue;
                }
                return Err(Error::Convergence { iterations: sweep, residual: kkt });
            }
            let intercept = gram.y_mean - gram.x_mean.dot(&b);
            return Ok(SglFit { coef: b, intercept, kkt, sweeps: sweep, objective: *path.last().unwrap(), objective_path: path });
        }
    }
    unreachable!("loop returns on its final sweep")
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Proximal map of `τ_G ||v|| + Σ τ_i |v_i|` (inactive entries forced to zero).
fn sparse_group_prox(v: &DVector<f64>, tau_g: f64, tau: &[f64], active: &[bool]) -> DVector<f64> {
    let u = DVector::from_fn(v.len(), |i, _| if active[i] { soft(v[i], tau[i]) } else { 0.0 });
    let nu = u.norm();
    if nu <= tau_g {
        DVector::zeros(v.len())
    } else {
        u * (1.0 - tau_g / nu)
    }
}

/// Block optimality residual of `d'G d - 2 r'd + λ_G ||d|| + Σ a_i |d_i|`.
fn block_kkt(gsub: &DMatrix<f64>, r: &DVector<f64>, lambda_g: f64, a: &[f64], active: &[bool], d: &DVector<f64>) -> f64 {
    let grad = (gsub * d - r) * 2.0;
    let nd = d.norm();
    if nd == 0.0 {
        let v = DVector::from_fn(d.len(), |i, _| if active[i] { soft(grad[i], a[i]) } else { 0.0 });
        return (v.norm() - lambda_g).max(0.0);
    }
    (0..d.len())
        .filter(|&i| active[i])
        .map(|i| {
            let gi = grad[i] + lambda_g * d[i] / nd;
            if d[i] != 0.0 {
                (gi + a[i] * d[i].signum()).abs()
            } else {
                (gi.abs() - a[i]).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimiser of `d'G d - 2 r'd + λ_G ||d|| + Σ a_i |d_i|` by accelerated
/// proximal gradient with adaptive restart, warm-started at `start`.
fn group_block(gsub: &DMatrix<f64>, r: &DVector<f64>, lambda_g: f64, a: &[f64], active: &[bool], start: &DVector<f64>, lip: f64) -> DVector<f64> {
    let m = r.len();
    let tau: Vec<f64> = a.iter().map(|v| v / lip).collect();
    let tol = 1e-13 * (2.0 * r.amax()).max(f64::MIN_POSITIVE);
    // the zero block is optimal iff the thresholded linear term is inside the ball
    let z = DVector::zeros(m);
    if block_kkt(gsub, r, lambda_g, a, active, &z) == 0.0 {
        return z;
    }
    let mut x = start.clone();
    let mut y = x.clone();
    let mut t = 1.0f64;
    for it in 0..100_000 {
        let grad = (gsub * &y - r) * 2.0;
        let next = sparse_group_prox(&(&y - grad / lip), lambda_g / lip, &tau, active);
        // restart when the step opposes the momentum direction
        let restart = (&y - &next).dot(&(&next - &x)) > 0.0;
        let t_next = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        y = if restart { next.clone() } else { &next + (&next - &x) * ((t - 1.0) / t_next) };
        x = next;
        t = t_next;
        if it % 8 == 7 && block_kkt(gsub, r, lambda_g, a, active, &x) <= tol {
            break;
        }
    }
    x
}

/// Largest violation of the optimality conditions, with gradient `2(q - c)`.
fn sgl_kkt_gram(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    group: usize,
    pen: &[f64],
    lambda_g: f64,
    b: &DVector<f64>,
    q: &DVector<f64>,
) -> f64 {
    let k = b.len();
    let grad = |j: usize| 2.0 * (q[j] - c[j]);
    let mut worst: f64 = 0.0;
    let usable = |j: usize| pen[j].is_finite() && g[(j, j)] > 0.0;
    let bnorm = b.rows(0, group).norm();
    if group > 0 && lambda_g > 0.0 && bnorm == 0.0 {
        let mut r2 = 0.0;
        for i in (0..group).filter(|&i| usable(i)) {
            let v = soft(grad(i), pen[i]);
            r2 += v * v;
        }
        worst = worst.max(r2.sqrt() - lambda_g);
    }
    for j in 0..k {
        if !usable(j) {
            continue;
        }
        let gj = grad(j) + if j < group && bnorm > 0.0 { lambda_g * b[j] / bnorm } else { 0.0 };
        let v = if b[j] != 0.0 {
            (gj + pen[j] * b[j].signum()).abs()
        } else if j < group && bnorm == 0.0 && lambda_g > 0.0 {
            0.0
        } else {
            (gj.abs() - pen[j]).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}

/// Relative KKT residual of `b` for the problem solved by [`sgl_solve_raw`].
pub fn sgl_kkt(x: &DMatrix<f64>, y: &DVector<f64>, group: usize, pen: &[f64], lambda_g: f64, intercept: bool, b: &DVector<f64>) -> f64 {
    let gram = Gram::new(x, y, intercept);
    let q = &gram.g * b;
    let scale = (2.0 * gram.c.amax()).max(f64::MIN_POSITIVE);
    sgl_kkt_gram(&gram.g, &gram.c, group, pen, lambda_g, b, &q) / scale
}

/// Initial estimates for the adaptive weights.
pub fn initial_estimates(x: &DMatrix<f64>, y: &DVector<f64>, init: Initializer, intercept: bool) -> Result<DVector<f64>> {
    let (n, k) = x.shape();
    let gram = Gram::new(x, y, intercept);
    let df = k + usize::from(intercept);
    let ridge = match init {
        Initializer::Ridge => true,
        Initializer::Auto => n <= df + 1,
        Initializer::Ols => {
            if n <= df + 1 {
                return Err(Error::insufficient(format!("OLS initial estimates need more than {} rows, got {n}", df + 1)));
            }
            false
        }
    };
    let mut a = gram.g.clone();
    if ridge {
        let tr = a.trace() / k.max(1) as f64;
        let pen = 1e-2 * tr.max(f64::MIN_POSITIVE);
        for j in 0..k {
            a[(j, j)] += pen;
        }
    }
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&gram.c)),
        None if !ridge => Err(Error::numerical("OLS initial estimates: singular design; use the ridge initializer")),
        None => Err(Error::numerical("ridge initial estimates failed")),
    }
}

/// Adaptive penalty `λ / |init|^k` (infinite for an exactly zero initial estimate
/// when `k > 0`).
pub fn adaptive_weights(init: &DVector<f64>, group: usize, cfg: &PenaltyConfig) -> Vec<f64> {
    init.iter()
        .enumerate()
        .map(|(j, v)| {
            let (lam, k) = if j < group { (cfg.lambda_delta, cfg.k_delta) } else { (cfg.lambda_pi, cfg.k_pi) };
            if lam == 0.0 {
                0.0
            } else if k == 0.0 {
                lam
            } else if *v == 0.0 {
                f64::INFINITY
            } else {
                lam / v.abs().powf(k)
            }
        })
        .collect()
}

/// Fit of a single-equation design at fixed penalties.
pub fn sgl_solve(design: &SingleEqDesign, cfg: &PenaltyConfig) -> Result<SglFit> {
    sgl_solve_rows(design, cfg, 0..design.rows())
}

pub(crate) fn sgl_solve_rows(design: &SingleEqDesign, cfg: &PenaltyConfig, rows: std::ops::Range<usize>) -> Result<SglFit> {
    cfg.validate()?;
    let (x, y) = design.regression(rows);
    let group = design.levels.ncols();
    let init = initial_estimates(&x, &y, cfg.initializer, cfg.intercept)?;
    let pen = adaptive_weights(&init, group, cfg);
    sgl_solve_raw(&x, &y, group, &pen, cfg.lambda_g, cfg.intercept)
}
