//! Forecasting methods evaluated by the rolling-window harness.
//!
//! Every method receives a detrended window and returns forecasts of the
//! detrended target levels; the harness adds the deterministic extrapolation.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::ar::fit_ar_bic;
use crate::error::{Error, Result};
use crate::factors::{extract_factors_diff, extract_factors_levels, fecm_system, ndfm_forecast};
use crate::panel::{DetCoef, DeterministicSpec, Integration, Panel};
use crate::sparse::{factor_augment, padl_fit, specs_fit_ordered, LambdaGrid, PenaltyConfig};
use crate::var::{fit_var_bic, select_var_lag_bic};
use crate::vecm::{johansen_ml, pml_vecm, qr_vecm, select_rank_ic, vecm_iterated_forecast, PmlConfig, VecmModel};

/// Inputs available to a method at one forecast origin.
pub struct WindowContext<'a> {
    /// Detrended window; for nowcasts the targets' final value is masked.
    pub levels: &'a Panel,
    pub orders: &'a [Integration],
    pub targets: &'a [usize],
    /// Either all positive or exactly `[0]`.
    pub horizons: &'a [usize],
    /// Absolute panel row of the window's last observation.
    pub origin: usize,
    /// Window detrending coefficients on the window's own time axis `1..=W`.
    pub det: &'a [DetCoef],
    pub seed: u64,
}

impl WindowContext<'_> {
    pub fn is_nowcast(&self) -> bool {
        self.horizons == [0]
    }

    fn max_h(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(0)
    }
}

pub trait ForecastMethod: Sync {
    fn id(&self) -> String;
    /// Whether `h = 0` (contemporaneous regressors known, target unknown) is supported.
    fn supports_nowcast(&self) -> bool;
    /// Forecasts indexed `[horizon][target]`, in the order of `ctx.horizons` and `ctx.targets`.
    fn forecast(&self, ctx: &WindowContext) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    /// Univariate autoregression on the stationarity-transformed target.
    Ar { p_max: usize },
    /// VAR on transformed targets (plus `factors` principal components: FAVAR).
    Var { p_max: usize, factors: usize },
    /// Adaptive-lasso ADL on transformed series (targets plus factors: FAPADL).
    Padl { p: usize, factors: usize },
    /// Johansen VECM on the targets.
    Ml { p_max: usize },
    Fecm { factors: usize, p_max: usize },
    Ndfm { factors: usize, p_max: usize, idio_ar: bool },
    /// Systems for the penalised VECMs; `None` uses every series, targets first.
    QrVecm { p: usize, system: Option<Vec<usize>> },
    Pml { p: usize, lambda_b: f64, lambda_phi: f64, lambda_omega: f64, system: Option<Vec<usize>> },
    Specs { p: usize, factors: usize },
}

impl MethodSpec {
    /// Default settings for a method name.
    pub fn from_name(name: &str, factors: Option<usize>, max_lags: Option<usize>) -> Result<Self> {
        let p_max = max_lags.unwrap_or(3);
        let lags = max_lags.unwrap_or(3);
        Ok(match name {
            "ar" => MethodSpec::Ar { p_max },
            "var" => MethodSpec::Var { p_max, factors: 0 },
            "favar" => MethodSpec::Var { p_max, factors: factors.unwrap_or(4) },
            "padl" => MethodSpec::Padl { p: lags, factors: 0 },
            "fapadl" => MethodSpec::Padl { p: lags, factors: factors.unwrap_or(8) },
            "ml" => MethodSpec::Ml { p_max },
            "fecm" => MethodSpec::Fecm { factors: factors.unwrap_or(4), p_max },
            "ndfm" => MethodSpec::Ndfm { factors: factors.unwrap_or(4), p_max, idio_ar: true },
            "qr_vecm" => MethodSpec::QrVecm { p: 1, system: None },
            "pml" => MethodSpec::Pml { p: 1, lambda_b: 0.05, lambda_phi: 0.05, lambda_omega: 0.05, system: None },
            "specs" => MethodSpec::Specs { p: lags, factors: 0 },
            "fa_specs" => MethodSpec::Specs { p: lags, factors: factors.unwrap_or(8) },
            other => return Err(Error::Config(format!("unknown method '{other}'"))),
        })
    }

    pub fn is_single_equation(&self) -> bool {
        matches!(self, MethodSpec::Ar { .. } | MethodSpec::Padl { .. } | MethodSpec::Specs { .. })
    }
}

impl ForecastMethod for MethodSpec {
    fn id(&self) -> String {
        match self {
            MethodSpec::Ar { .. } => "ar".into(),
            MethodSpec::Var { factors: 0, .. } => "var".into(),
            MethodSpec::Var { .. } => "favar".into(),
            MethodSpec::Padl { factors: 0, .. } => "padl".into(),
            MethodSpec::Padl { .. } => "fapadl".into(),
            MethodSpec::Ml { .. } => "ml".into(),
            MethodSpec::Fecm { .. } => "fecm".into(),
            MethodSpec::Ndfm { .. } => "ndfm".into(),
            MethodSpec::QrVecm { .. } => "qr_vecm".into(),
            MethodSpec::Pml { .. } => "pml".into(),
            MethodSpec::Specs { factors: 0, .. } => "specs".into(),
            MethodSpec::Specs { .. } => "fa_specs".into(),
        }
    }

    fn supports_nowcast(&self) -> bool {
        self.is_single_equation()
    }

    fn forecast(&self, ctx: &WindowContext) -> Result<Vec<Vec<f64>>> {
        if ctx.is_nowcast() && !self.supports_nowcast() {
            return Err(Error::Config(format!("method '{}' cannot nowcast", self.id())));
        }
        match self {
            MethodSpec::Ar { p_max } => ar_method(ctx, *p_max),
            MethodSpec::Var { p_max, factors } => var_method(ctx, *p_max, *factors),
            MethodSpec::Padl { p, factors } => padl_method(ctx, *p, *factors),
            MethodSpec::Ml { p_max } => {
                let (sys, d) = levels_system(ctx.levels, ctx.orders, ctx.targets);
                vecm_system(ctx, &sys, &d, ctx.targets.len(), |pn| johansen_auto(pn, *p_max, DeterministicSpec::None))
            }
            MethodSpec::Fecm { factors, p_max } => {
                let all: Vec<usize> = (0..ctx.levels.nseries()).collect();
                let (lv, d) = levels_system(ctx.levels, ctx.orders, &all);
                // one system per target: the factors span the panel, so stacking
                // several targets with them can be exactly collinear
                let mut paths = Vec::with_capacity(ctx.targets.len());
                for &i in ctx.targets {
                    let stacked = fecm_system(&lv, &[i], *factors, 0)?;
                    let mut dd = vec![0; stacked.nseries()];
                    dd[0] = d[i];
                    let fit = |pn: &Panel| johansen_auto(pn, *p_max, DeterministicSpec::None);
                    paths.extend(vecm_paths(ctx, &stacked, &dd, &[i], fit)?);
                }
                Ok(pick(ctx, &paths))
            }
            MethodSpec::Ndfm { factors, p_max, idio_ar } => ndfm_method(ctx, *factors, *p_max, *idio_ar),
            MethodSpec::QrVecm { p, system } => {
                let cols = system_columns(ctx, system.as_deref())?;
                let (sys, d) = levels_system(ctx.levels, ctx.orders, &cols);
                vecm_system(ctx, &sys, &d, ctx.targets.len(), |pn| Ok(qr_vecm(pn, *p, &[])?.model))
            }
            MethodSpec::Pml { p, lambda_b, lambda_phi, lambda_omega, system } => {
                let cols = system_columns(ctx, system.as_deref())?;
                let (sys, d) = levels_system(ctx.levels, ctx.orders, &cols);
                let cfg = PmlConfig::new(*lambda_b, *lambda_phi, *lambda_omega);
                vecm_system(ctx, &sys, &d, ctx.targets.len(), |pn| {
                    let r = select_rank_ic(pn, *p, pn.nseries(), DeterministicSpec::None)?;
                    Ok(pml_vecm(pn, r, *p, &cfg)?.model)
                })
            }
            MethodSpec::Specs { p, factors } => specs_method(ctx, *p, *factors),
        }
    }
}

/// Targets first, then the remaining requested series.
fn system_columns(ctx: &WindowContext, system: Option<&[usize]>) -> Result<Vec<usize>> {
    let n = ctx.levels.nseries();
    let mut cols: Vec<usize> = ctx.targets.to_vec();
    let extra: Vec<usize> = match system {
        Some(s) => s.to_vec(),
        None => (0..n).collect(),
    };
    for i in extra {
        if i >= n {
            return Err(Error::Config(format!("system series index {i} out of range")));
        }
        if !cols.contains(&i) {
            cols.push(i);
        }
    }
    Ok(cols)
}

fn diff(x: &[f64], d: usize) -> Vec<f64> {
    let mut v = x.to_vec();
    for _ in 0..d {
        v = v.windows(2).map(|w| w[1] - w[0]).collect();
    }
    v
}

/// Level path from a forecast path of the `d`-th difference, anchored at the
/// end of `history`.
fn integrate_path(history: &[f64], path: &[f64], d: usize) -> Vec<f64> {
    match d {
        0 => path.to_vec(),
        1 => {
            let mut level = *history.last().expect("non-empty history");
            path.iter().map(|x| {
                level += x;
                level
            }).collect()
        }
        _ => {
            let n = history.len();
            let mut level = history[n - 1];
            let mut slope = history[n - 1] - history[n - 2];
            path.iter().map(|x| {
                slope += x;
                level += slope;
                level
            }).collect()
        }
    }
}

fn pick(ctx: &WindowContext, paths: &[Vec<f64>]) -> Vec<Vec<f64>> {
    ctx.horizons.iter().map(|&h| paths.iter().map(|p| p[h - 1]).collect()).collect()
}

/// Direct AR benchmark for one series: BIC-selected AR (order ≤ `p_max`,
/// with intercept) on the `order`-differenced series, iterated and
/// integrated back to levels. `h = 0` forecasts the last observation from the
/// ones before it.
pub fn ar_benchmark(series: &[f64], order: Integration, p_max: usize, h: usize) -> Result<f64> {
    let (hist, steps) = if h == 0 { (&series[..series.len().saturating_sub(1)], 1) } else { (series, h) };
    let d = order.order();
    if hist.len() <= d {
        return Err(Error::insufficient("series too short for the AR benchmark"));
    }
    let x = diff(hist, d);
    let fit = fit_ar_bic(&x, p_max, true)?;
    let path = fit.forecast(&x, steps);
    Ok(*integrate_path(hist, &path, d).last().expect("positive horizon"))
}

fn ar_method(ctx: &WindowContext, p_max: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::with_capacity(ctx.targets.len()); ctx.horizons.len()];
    for &i in ctx.targets {
        let col = ctx.levels.column(i);
        for (k, &h) in ctx.horizons.iter().enumerate() {
            out[k].push(ar_benchmark(col, ctx.orders[i], p_max, h)?);
        }
    }
    Ok(out)
}

/// Columns differenced to stationarity, trimmed to a common start.
fn stationary_matrix(panel: &Panel, orders: &[Integration], cols: &[usize]) -> DMatrix<f64> {
    let dmax = cols.iter().map(|&i| orders[i].order()).max().unwrap_or(0);
    let rows = panel.nobs() - dmax;
    let mut m = DMatrix::zeros(rows, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let x = diff(panel.column(i), orders[i].order());
        let off = x.len() - rows;
        for r in 0..rows {
            m[(r, c)] = x[off + r];
        }
    }
    m
}

fn var_method(ctx: &WindowContext, p_max: usize, factors: usize) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..ctx.levels.nseries()).collect();
    let mut data = stationary_matrix(ctx.levels, ctx.orders, ctx.targets);
    if factors > 0 {
        let full = stationary_matrix(ctx.levels, ctx.orders, &all);
        let fm = extract_factors_levels(&Panel::from_matrix(full)?, 0, factors)?;
        let rows = data.nrows().min(fm.factors.nrows());
        let (a, b) = (data.nrows() - rows, fm.factors.nrows() - rows);
        let mut stacked = DMatrix::zeros(rows, data.ncols() + factors);
        stacked.columns_mut(0, data.ncols()).copy_from(&data.rows(a, rows));
        stacked.columns_mut(data.ncols(), factors).copy_from(&fm.factors.rows(b, rows));
        data = stacked;
    }
    let fit = fit_var_bic(&data, p_max, true)?;
    let f = fit.forecast(&data, ctx.max_h());
    let paths: Vec<Vec<f64>> = ctx
        .targets
        .iter()
        .enumerate()
        .map(|(c, &i)| integrate_path(ctx.levels.column(i), &f.column(c).iter().copied().collect::<Vec<_>>(), ctx.orders[i].order()))
        .collect();
    Ok(pick(ctx, &paths))
}

/// Levels system: series of order two differenced once, the rest in levels.
/// Returns the panel (trimmed to a common start) and the differencing applied.
fn levels_system(panel: &Panel, orders: &[Integration], cols: &[usize]) -> (Panel, Vec<usize>) {
    let d: Vec<usize> = cols.iter().map(|&i| orders[i].order().saturating_sub(1)).collect();
    let dmax = d.iter().copied().max().unwrap_or(0);
    let rows = panel.nobs() - dmax;
    let mut m = DMatrix::zeros(rows, cols.len());
    for (c, &i) in cols.iter().enumerate() {
        let x = diff(panel.column(i), d[c]);
        let off = x.len() - rows;
        for r in 0..rows {
            m[(r, c)] = x[off + r];
        }
    }
    let names = cols.iter().map(|&i| panel.names()[i].clone()).collect();
    let dates = panel.dates()[dmax..].to_vec();
    let sys = Panel::new(m, names, dates).expect("columns of a valid panel");
    (sys, d)
}

/// Johansen VECM with the levels-VAR lag chosen by BIC (`p_max` levels lags)
/// and the rank by the information criterion.
fn johansen_auto(panel: &Panel, p_max: usize, det: DeterministicSpec) -> Result<VecmModel> {
    let lag = select_var_lag_bic(panel.values(), 1, p_max.max(1), det != DeterministicSpec::None)?;
    let p = lag - 1;
    let r = select_rank_ic(panel, p, panel.nseries(), det)?;
    johansen_ml(panel, r, p, det)
}

/// Fit a VECM to `sys` and return integrated forecasts of its first `k` columns.
fn vecm_system(
    ctx: &WindowContext,
    sys: &Panel,
    d: &[usize],
    k: usize,
    fit: impl Fn(&Panel) -> Result<VecmModel>,
) -> Result<Vec<Vec<f64>>> {
    Ok(pick(ctx, &vecm_paths(ctx, sys, d, &ctx.targets[..k], fit)?))
}

/// Integrated level paths (horizons `1..=max_h`) of the first `cols.len()`
/// columns of `sys`, which hold the window series `cols`.
fn vecm_paths(
    ctx: &WindowContext,
    sys: &Panel,
    d: &[usize],
    cols: &[usize],
    fit: impl Fn(&Panel) -> Result<VecmModel>,
) -> Result<Vec<Vec<f64>>> {
    let model = fit(sys)?;
    let f = vecm_iterated_forecast(&model, sys.values(), ctx.max_h())?;
    Ok(cols
        .iter()
        .enumerate()
        .map(|(c, &i)| {
            let path: Vec<f64> = f.column(c).iter().copied().collect();
            if d[c] == 0 {
                path
            } else {
                // the system holds Δy: integrate once from the last level
                integrate_path(ctx.levels.column(i), &path, 1)
            }
        })
        .collect())
}

fn ndfm_method(ctx: &WindowContext, k: usize, p_max: usize, idio_ar: bool) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..ctx.levels.nseries()).collect();
    let (lv, d) = levels_system(ctx.levels, ctx.orders, &all);
    let fm = extract_factors_diff(&lv, k)?;
    let fp = Panel::from_matrix(fm.factors.clone())?;
    let lag = select_var_lag_bic(fp.values(), 1, p_max.max(1), true)?;
    let p = lag - 1;
    let rank = select_rank_ic(&fp, p, k, DeterministicSpec::Mean)?;
    let mut out = Vec::with_capacity(ctx.horizons.len());
    let mut cum: Vec<Vec<f64>> = vec![Vec::new(); ctx.targets.len()];
    let hmax = ctx.max_h();
    for h in 1..=hmax {
        let f = ndfm_forecast(&lv, k, rank, p, h, idio_ar)?;
        for (c, &i) in ctx.targets.iter().enumerate() {
            cum[c].push(f.levels[i]);
        }
    }
    for &h in ctx.horizons {
        let row = ctx
            .targets
            .iter()
            .enumerate()
            .map(|(c, &i)| {
                if d[i] == 0 {
                    cum[c][h - 1]
                } else {
                    *ctx.levels.column(i).last().unwrap() + cum[c][..h].iter().sum::<f64>()
                }
            })
            .collect();
        out.push(row);
    }
    Ok(out)
}

fn padl_method(ctx: &WindowContext, p: usize, factors: usize) -> Result<Vec<Vec<f64>>> {
    let grid = LambdaGrid::default();
    let cfg = PenaltyConfig::default();
    let (panel, orders, tidx): (Panel, Vec<Integration>, Vec<usize>) = if factors == 0 {
        (ctx.levels.clone(), ctx.orders.to_vec(), ctx.targets.to_vec())
    } else {
        let fa = factor_augment(ctx.levels, ctx.targets, factors)?;
        let mut o: Vec<Integration> = ctx.targets.iter().map(|&i| ctx.orders[i]).collect();
        o.resize(fa.nseries(), Integration::I1);
        (fa, o, (0..ctx.targets.len()).collect())
    };
    let mut out = vec![Vec::with_capacity(ctx.targets.len()); ctx.horizons.len()];
    for &j in &tidx {
        for (k, &h) in ctx.horizons.iter().enumerate() {
            out[k].push(padl_fit(&panel, j, &orders, p, h, &grid, &cfg)?.forecast);
        }
    }
    Ok(out)
}

fn specs_method(ctx: &WindowContext, p: usize, factors: usize) -> Result<Vec<Vec<f64>>> {
    let grid = LambdaGrid::default();
    let cfg = PenaltyConfig::default();
    let n = ctx.levels.nseries();
    let mut out = vec![Vec::with_capacity(ctx.targets.len()); ctx.horizons.len()];
    for &i in ctx.targets {
        let order = if ctx.orders[i] == Integration::I2 { Integration::I2 } else { Integration::I1 };
        // regressors of order two enter differenced once; the target stays in levels
        let mut orders = ctx.orders.to_vec();
        orders[i] = Integration::I1;
        let all: Vec<usize> = (0..n).collect();
        let (mut lv, _) = levels_system(ctx.levels, &orders, &all);
        let off = ctx.levels.nobs() - lv.nobs();
        let mut values = lv.values().clone();
        for r in 0..lv.nobs() {
            values[(r, i)] = ctx.levels.values()[(r + off, i)];
        }
        lv = lv.with_values(values)?;
        let (panel, j) = if factors == 0 {
            (lv, i)
        } else {
            (factor_augment(&lv, &[i], factors)?, 0)
        };
        for (k, &h) in ctx.horizons.iter().enumerate() {
            out[k].push(specs_fit_ordered(&panel, j, order, p, h, &grid, &cfg)?.forecast);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrate_path_orders() {
        assert_eq!(integrate_path(&[1.0, 2.0], &[1.0, 1.0], 1), vec![3.0, 4.0]);
        // slope 1 plus accelerations
        assert_eq!(integrate_path(&[1.0, 2.0], &[1.0, 0.0], 2), vec![4.0, 6.0]);
        assert_eq!(integrate_path(&[1.0], &[5.0], 0), vec![5.0]);
    }

    #[test]
    fn ar_benchmark_closed_form_and_mean() {
        let x: Vec<f64> = (0..200).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        // perfectly alternating series: AR(1) with coefficient -1
        let f = ar_benchmark(&x, Integration::I0, 2, 1).unwrap();
        assert!((f - 1.0).abs() < 1e-8);
        let walk: Vec<f64> = (0..100).map(|t| t as f64).collect();
        let g = ar_benchmark(&walk, Integration::I1, 2, 5).unwrap();
        assert!((g - 104.0).abs() < 1e-8);
        let now = ar_benchmark(&walk, Integration::I1, 2, 0).unwrap();
        assert!((now - 99.0).abs() < 1e-8);
    }
}
