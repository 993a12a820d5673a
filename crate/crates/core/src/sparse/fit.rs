use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::design::{padl_design, specs_design, specs_design_ordered, SingleEqDesign};
use super::{adaptive_weights, initial_estimates, sgl_solve_rows, PenaltyConfig};
use crate::cv::{expanding_folds, geometric_grid, tscv_select, DEFAULT_FOLDS};
use crate::error::{Error, Result};
use crate::factors::extract_factors_diff;
use crate::panel::{Integration, Panel};

/// Tuning grid. Individual penalties share one value `λ`; the group penalty is
/// `ratio * λ_G,max` for every ratio, where `λ_G,max` zeroes the levels block
/// at `λ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    /// Explicit individual penalties; empty means an automatic geometric grid.
    pub lambda: Vec<f64>,
    pub len: usize,
    /// Smallest over largest automatic `λ`.
    pub min_ratio: f64,
    pub group_ratio: Vec<f64>,
    pub folds: usize,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid { lambda: Vec::new(), len: 10, min_ratio: 1e-3, group_ratio: vec![0.0, 0.1, 0.3], folds: DEFAULT_FOLDS }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleEqMethod {
    Specs,
    Padl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleEqModel {
    pub method: SingleEqMethod,
    pub target: String,
    pub h: usize,
    pub p: usize,
    pub lambda_g: f64,
    pub lambda_delta: f64,
    pub lambda_pi: f64,
    /// Centring intercept (zero when the intercept is disabled).
    pub intercept: f64,
    pub intercept_handling: String,
    pub classification: Integration,
    pub nonzero: BTreeMap<String, f64>,
    pub level_labels: Vec<String>,
    pub delta: Vec<f64>,
    pub w_labels: Vec<String>,
    pub pi: Vec<f64>,
    pub forecast: f64,
    pub kkt: f64,
    pub cv_loss: Vec<f64>,
}

impl SingleEqModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// True when the lagged-levels block was removed entirely.
    pub fn levels_removed(&self) -> bool {
        self.delta.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOutcome {
    pub index: usize,
    pub losses: Vec<f64>,
}

/// Expanding-window CV over `candidates` on the design rows. Training rows
/// whose direct response would be realised inside the validation block are
/// dropped.
pub fn tscv_tune(design: &SingleEqDesign, candidates: &[PenaltyConfig], folds: usize) -> Result<TuneOutcome> {
    if candidates.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    if candidates.len() == 1 {
        return Ok(TuneOutcome { index: 0, losses: vec![f64::NAN] });
    }
    let splits = expanding_folds(design.rows(), folds)?;
    let gap = design.h.saturating_sub(1);
    let (index, losses) = tscv_select(
        candidates,
        &splits,
        |c| c.lambda_g + c.lambda_delta + c.lambda_pi,
        |cfg, fold| {
            let end = fold.train.end.saturating_sub(gap);
            if end < 3 {
                return Err(Error::insufficient("training block too short"));
            }
            let fit = sgl_solve_rows(design, cfg, 0..end)?;
            let mut sse = 0.0;
            for r in fold.valid.clone() {
                let e = design.response[r] - fit.intercept - design.row(r).dot(&fit.coef);
                sse += e * e;
            }
            Ok(sse / fold.valid.len() as f64)
        },
    )?;
    Ok(TuneOutcome { index, losses })
}

fn candidates(design: &SingleEqDesign, grid: &LambdaGrid, base: &PenaltyConfig, with_group: bool) -> Result<Vec<PenaltyConfig>> {
    base.validate()?;
    let (x, y) = design.regression(0..design.rows());
    let group = design.levels.ncols();
    let unit = PenaltyConfig { lambda_g: 0.0, lambda_delta: 1.0, lambda_pi: 1.0, ..base.clone() };
    let init = initial_estimates(&x, &y, base.initializer, base.intercept)?;
    let weights = adaptive_weights(&init, group, &unit);
    let mean = |v: &[f64]| if base.intercept { v.iter().sum::<f64>() / v.len() as f64 } else { 0.0 };
    let ym = mean(y.as_slice());
    let mut grad = vec![0.0; x.ncols()];
    for j in 0..x.ncols() {
        let col: Vec<f64> = x.column(j).iter().copied().collect();
        let xm = mean(&col);
        grad[j] = 2.0 * (0..x.nrows()).map(|r| (x[(r, j)] - xm) * (y[r] - ym)).sum::<f64>();
    }
    let lambdas = if grid.lambda.is_empty() {
        let lmax = (0..x.ncols())
            .filter(|&j| weights[j].is_finite() && weights[j] > 0.0)
            .map(|j| grad[j].abs() / weights[j])
            .fold(0.0, f64::max);
        if lmax == 0.0 {
            vec![0.0]
        } else {
            geometric_grid(lmax, grid.min_ratio, grid.len)
        }
    } else {
        grid.lambda.clone()
    };
    let gmax = grad[..group].iter().map(|g| g * g).sum::<f64>().sqrt();
    let ratios: Vec<f64> = if with_group && group > 0 { grid.group_ratio.clone() } else { vec![0.0] };
    let mut out = Vec::new();
    for &r in &ratios {
        for &l in &lambdas {
            out.push(PenaltyConfig { lambda_g: r * gmax, lambda_delta: l, lambda_pi: l, ..base.clone() });
        }
    }
    Ok(out)
}

fn finish(design: &SingleEqDesign, method: SingleEqMethod, cfg: &PenaltyConfig, cv_loss: Vec<f64>) -> Result<SingleEqModel> {
    let fit = sgl_solve_rows(design, cfg, 0..design.rows())?;
    let l = design.levels.ncols();
    let labels = design.labels();
    let nonzero = labels.iter().zip(fit.coef.iter()).filter(|(_, v)| **v != 0.0).map(|(k, v)| (k.clone(), *v)).collect();
    let forecast = design.base + fit.intercept + design.origin_row().dot(&fit.coef);
    Ok(SingleEqModel {
        method,
        target: design.target.clone(),
        h: design.h,
        p: design.p,
        lambda_g: cfg.lambda_g,
        lambda_delta: cfg.lambda_delta,
        lambda_pi: cfg.lambda_pi,
        intercept: fit.intercept,
        intercept_handling: if cfg.intercept { "centred, unpenalised".into() } else { "none".into() },
        classification: design.target_order,
        nonzero,
        level_labels: design.level_labels.clone(),
        delta: fit.coef.rows(0, l).iter().copied().collect(),
        w_labels: design.w_labels.clone(),
        pi: fit.coef.rows(l, design.w.ncols()).iter().copied().collect(),
        forecast,
        kkt: fit.kkt,
        cv_loss,
    })
}

/// SPECS direct forecast (or nowcast for `h = 0`) of `target`, every series
/// entering in levels, penalties tuned by time-series CV.
pub fn specs_fit(panel: &Panel, target: usize, p: usize, h: usize, grid: &LambdaGrid, cfg: &PenaltyConfig) -> Result<SingleEqModel> {
    let design = specs_design(panel, target, p, h)?;
    fit_design(&design, SingleEqMethod::Specs, grid, cfg, true)
}

/// [`specs_fit`] for a target of the given integration order.
pub fn specs_fit_ordered(
    panel: &Panel,
    target: usize,
    order: Integration,
    p: usize,
    h: usize,
    grid: &LambdaGrid,
    cfg: &PenaltyConfig,
) -> Result<SingleEqModel> {
    let design = specs_design_ordered(panel, target, order, p, h)?;
    fit_design(&design, SingleEqMethod::Specs, grid, cfg, true)
}

/// PADL: adaptive lasso on the stationarity-transformed panel (no levels block).
pub fn padl_fit(
    panel: &Panel,
    target: usize,
    orders: &[Integration],
    p: usize,
    h: usize,
    grid: &LambdaGrid,
    cfg: &PenaltyConfig,
) -> Result<SingleEqModel> {
    let design = padl_design(panel, target, orders, p, h)?;
    fit_design(&design, SingleEqMethod::Padl, grid, cfg, false)
}

pub(crate) fn fit_design(
    design: &SingleEqDesign,
    method: SingleEqMethod,
    grid: &LambdaGrid,
    cfg: &PenaltyConfig,
    with_group: bool,
) -> Result<SingleEqModel> {
    let cands = candidates(design, grid, cfg, with_group)?;
    let tuned = tscv_tune(design, &cands, grid.folds)?;
    finish(design, method, &cands[tuned.index], tuned.losses)
}

/// Target columns followed by `k` factors extracted from the whole panel.
pub fn factor_augment(panel: &Panel, targets: &[usize], k: usize) -> Result<Panel> {
    if let Some(&bad) = targets.iter().find(|&&i| i >= panel.nseries()) {
        return Err(Error::param(format!("target index {bad} out of range")));
    }
    let base = panel.select_columns(targets);
    if k == 0 {
        return Ok(base);
    }
    let fm = extract_factors_diff(panel, k)?;
    let taken: Vec<&String> = base.names().iter().collect();
    let names = (1..=k)
        .map(|j| {
            let mut name = format!("factor{j}");
            while taken.contains(&&name) {
                name.push_str("_f");
            }
            name
        })
        .collect();
    let fp = Panel::new(fm.factors, names, panel.dates().to_vec())?;
    base.hstack(&fp)
}
