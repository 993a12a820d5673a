//! Rolling-window forecast evaluation: per-window detrending, method
//! forecasts, relative MSFE against a benchmark and model confidence sets.

mod mcs;
mod methods;

pub use mcs::{mcs, McsResult, MIN_LOSS_OBS};
pub use methods::{ar_benchmark, ForecastMethod, MethodSpec, WindowContext};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{detrend_series, DetCoef, DeterministicSpec, Integration, Panel};
use crate::rng;

pub const MIN_WINDOW: usize = 60;
pub const MAX_HORIZON: usize = 24;
const MAX_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub window: usize,
    /// Distance between consecutive forecast origins.
    pub step: usize,
    pub horizons: Vec<usize>,
    /// Target series names.
    pub targets: Vec<String>,
    pub methods: Vec<MethodSpec>,
    /// Method id of the benchmark.
    pub benchmark: String,
    /// Integration order per series (empty: every series I(1)).
    pub orders: Vec<Integration>,
    /// Series modelled in logs (empty: none); errors are measured after exponentiating.
    pub log: Vec<bool>,
    pub mcs_alpha: f64,
    pub mcs_gamma: f64,
    pub mcs_reps: usize,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            window: 120,
            step: 1,
            horizons: vec![1, 6, 12],
            targets: Vec::new(),
            methods: vec![MethodSpec::Ar { p_max: 3 }],
            benchmark: "ar".into(),
            orders: Vec::new(),
            log: Vec::new(),
            mcs_alpha: 0.10,
            mcs_gamma: 0.85,
            mcs_reps: 999,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub target: String,
    pub horizon: usize,
    /// `windows x methods` level forecasts (`None` where the method failed).
    pub forecasts: Vec<Vec<Option<f64>>>,
    pub actuals: Vec<f64>,
    pub losses: Vec<Vec<Option<f64>>>,
    /// Windows on which every method with at least one forecast succeeded.
    pub complete_windows: usize,
    pub msfe: Vec<Option<f64>>,
    pub rel_msfe: Vec<Option<f64>>,
    pub in_mcs: Vec<bool>,
    pub mcs_pvalue: Vec<Option<f64>>,
    /// Methods missing at least one window.
    pub incomplete: Vec<bool>,
    pub failures: usize,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub window: usize,
    pub step: usize,
    pub fits: usize,
    pub failures: usize,
    pub mcs_alpha: f64,
    pub mcs_gamma: f64,
    pub mcs_reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub targets: Vec<String>,
    pub horizons: Vec<usize>,
    pub methods: Vec<String>,
    pub benchmark: String,
    /// Absolute row of the last observation of every window.
    pub origins: Vec<usize>,
    pub cells: Vec<ReportCell>,
    pub metadata: RunMetadata,
}

impl ForecastReport {
    pub fn cell(&self, target: &str, horizon: usize) -> Option<&ReportCell> {
        self.cells.iter().find(|c| c.target == target && c.horizon == horizon)
    }

    pub fn method_index(&self, id: &str) -> Option<usize> {
        self.methods.iter().position(|m| m == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat table `target,horizon,method,rel_msfe,in_mcs`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["target", "horizon", "method", "rel_msfe", "in_mcs"])?;
        for c in &self.cells {
            for (m, id) in self.methods.iter().enumerate() {
                let rel = c.rel_msfe[m].map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
                w.write_record([c.target.as_str(), &c.horizon.to_string(), id, &rel, &c.in_mcs[m].to_string()])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn validate(panel: &Panel, cfg: &HarnessConfig, methods: &[&dyn ForecastMethod]) -> Result<(Vec<usize>, Vec<Integration>, Vec<bool>)> {
    if cfg.window < MIN_WINDOW {
        return Err(Error::Config(format!("window {} is below the minimum of {MIN_WINDOW}", cfg.window)));
    }
    if cfg.step == 0 {
        return Err(Error::Config("window step must be positive".into()));
    }
    if cfg.horizons.is_empty() || cfg.horizons.iter().any(|&h| h > MAX_HORIZON) {
        return Err(Error::Config(format!("horizons must be a non-empty subset of 0..={MAX_HORIZON}")));
    }
    let mut hs = cfg.horizons.clone();
    hs.sort_unstable();
    hs.dedup();
    if hs.len() != cfg.horizons.len() {
        return Err(Error::Config("duplicate horizons".into()));
    }
    if cfg.targets.is_empty() {
        return Err(Error::Config("no targets given".into()));
    }
    let targets = cfg
        .targets
        .iter()
        .map(|name| panel.index_of(name).ok_or_else(|| Error::Config(format!("unknown target series '{name}'"))))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = methods.iter().map(|m| m.id()).collect();
    for (k, id) in ids.iter().enumerate() {
        if ids[..k].contains(id) {
            return Err(Error::Config(format!("method '{id}' listed twice")));
        }
    }
    if !ids.contains(&cfg.benchmark) {
        return Err(Error::Config(format!("benchmark '{}' is not among the methods", cfg.benchmark)));
    }
    if cfg.horizons.contains(&0) {
        if let Some(m) = methods.iter().find(|m| !m.supports_nowcast()) {
            return Err(Error::Config(format!("method '{}' does not support nowcasting (h = 0)", m.id())));
        }
    }
    let n = panel.nseries();
    let orders = if cfg.orders.is_empty() { vec![Integration::I1; n] } else { cfg.orders.clone() };
    let log = if cfg.log.is_empty() { vec![false; n] } else { cfg.log.clone() };
    if orders.len() != n || log.len() != n {
        return Err(Error::Config(format!("orders/log flags must have one entry per series ({n})")));
    }
    let hmax = *hs.last().unwrap();
    if panel.nobs() < cfg.window + hmax + 1 {
        return Err(Error::insufficient(format!(
            "{} observations; the design needs at least window + max horizon + 1 = {}",
            panel.nobs(),
            cfg.window + hmax + 1
        )));
    }
    if !panel.is_balanced() {
        return Err(Error::InvalidPanel("the forecast harness needs a balanced panel".into()));
    }
    if !(cfg.mcs_alpha > 0.0 && cfg.mcs_alpha < 1.0) {
        return Err(Error::Config(format!("MCS level {} outside (0, 1)", cfg.mcs_alpha)));
    }
    for (i, &l) in log.iter().enumerate() {
        if l && panel.column(i).iter().any(|v| *v <= 0.0) {
            return Err(Error::Domain { series: panel.names()[i].clone(), reason: "log of a non-positive value".into() });
        }
    }
    Ok((targets, orders, log))
}

/// Detrended copy of rows `start..=origin`. Nowcast windows fit the targets'
/// trend without their final value, which is then masked by the previous one.
fn window_panel(panel: &Panel, log: &[bool], start: usize, origin: usize, mask: &[usize]) -> Result<(Panel, Vec<DetCoef>)> {
    let raw = panel.slice_rows(start, origin + 1);
    let (w, n) = (raw.nobs(), raw.nseries());
    let mut values = raw.values().clone();
    let mut det = Vec::with_capacity(n);
    for i in 0..n {
        let mut x: Vec<f64> = raw.column(i).to_vec();
        if log[i] {
            x.iter_mut().for_each(|v| *v = v.ln());
        }
        let masked = mask.contains(&i);
        let fit_on = if masked { &x[..w - 1] } else { &x[..] };
        let (_, c) = detrend_series(fit_on, DeterministicSpec::Trend)?;
        for s in 0..w {
            values[(s, i)] = x[s] - c.at((s + 1) as f64);
        }
        if masked {
            values[(w - 1, i)] = values[(w - 2, i)];
        }
        det.push(c);
    }
    Ok((raw.with_values(values)?, det))
}

struct WindowResult {
    /// `[horizon][method][target]`
    forecasts: Vec<Vec<Option<Vec<f64>>>>,
    errors: Vec<(usize, String)>,
}

/// Rolling evaluation with the configured methods.
pub fn run_rolling(panel: &Panel, cfg: &HarnessConfig) -> Result<ForecastReport> {
    let methods: Vec<&dyn ForecastMethod> = cfg.methods.iter().map(|m| m as &dyn ForecastMethod).collect();
    run_rolling_with(panel, cfg, &methods)
}

/// Rolling evaluation with caller-supplied methods (`cfg.methods` is ignored).
///
/// Origins run from `window - 1` to `T - 1 - max(h)` in steps of `cfg.step`,
/// identical for every horizon. Each window is an isolated slice of the panel.
pub fn run_rolling_with(panel: &Panel, cfg: &HarnessConfig, methods: &[&dyn ForecastMethod]) -> Result<ForecastReport> {
    let (targets, orders, log) = validate(panel, cfg, methods)?;
    let hmax = *cfg.horizons.iter().max().unwrap();
    let t = panel.nobs();
    let origins: Vec<usize> = (cfg.window - 1..=t - 1 - hmax).step_by(cfg.step).collect();
    let positive: Vec<usize> = cfg.horizons.iter().copied().filter(|&h| h > 0).collect();
    let has_now = cfg.horizons.contains(&0);
    let m = methods.len();
    let w = cfg.window;

    let results: Vec<Result<WindowResult>> = origins
        .par_iter()
        .map(|&origin| -> Result<WindowResult> {
            let start = origin + 1 - w;
            let seed = rng::derive(cfg.seed, &[rng::stream::HARNESS, origin as u64]);
            let mut forecasts = vec![vec![None; m]; cfg.horizons.len()];
            let mut errors = Vec::new();
            let mut run = |hs: &[usize], mask: &[usize]| -> Result<()> {
                let (levels, det) = window_panel(panel, &log, start, origin, mask)?;
                let ctx = WindowContext { levels: &levels, orders: &orders, targets: &targets, horizons: hs, origin, det: &det, seed };
                for (k, method) in methods.iter().enumerate() {
                    match method.forecast(&ctx) {
                        Ok(f) if f.len() == hs.len() && f.iter().all(|r| r.len() == targets.len()) => {
                            for (j, &h) in hs.iter().enumerate() {
                                let hpos = cfg.horizons.iter().position(|&x| x == h).unwrap();
                                let level: Vec<f64> = targets
                                    .iter()
                                    .zip(&f[j])
                                    .map(|(&i, v)| {
                                        let x = v + det[i].at((w + h) as f64);
                                        if log[i] { x.exp() } else { x }
                                    })
                                    .collect();
                                if level.iter().all(|v| v.is_finite()) {
                                    forecasts[hpos][k] = Some(level);
                                } else {
                                    errors.push((k, format!("origin {origin}: '{}' produced a non-finite forecast", method.id())));
                                }
                            }
                        }
                        Ok(_) => errors.push((k, format!("origin {origin}: '{}' returned a malformed forecast", method.id()))),
                        Err(e) => errors.push((k, format!("origin {origin}: '{}' failed: {e}", method.id()))),
                    }
                }
                Ok(())
            };
            if !positive.is_empty() {
                run(&positive, &[])?;
            }
            if has_now {
                run(&[0], &targets)?;
            }
            Ok(WindowResult { forecasts, errors })
        })
        .collect();
    let results: Vec<WindowResult> = results.into_iter().collect::<Result<_>>()?;

    let ids: Vec<String> = methods.iter().map(|m| m.id()).collect();
    let bench = ids.iter().position(|id| *id == cfg.benchmark).unwrap();
    let mut cells = Vec::new();
    let mut total_failures = 0;
    for (tk, &ti) in targets.iter().enumerate() {
        for (hk, &h) in cfg.horizons.iter().enumerate() {
            let mut forecasts = Vec::with_capacity(origins.len());
            let mut losses = Vec::with_capacity(origins.len());
            let mut actuals = Vec::with_capacity(origins.len());
            let mut failures = 0;
            let mut diagnostics = Vec::new();
            for (wk, &o) in origins.iter().enumerate() {
                let actual = panel.values()[(o + h, ti)];
                actuals.push(actual);
                let row: Vec<Option<f64>> = (0..m).map(|k| results[wk].forecasts[hk][k].as_ref().map(|v| v[tk])).collect();
                losses.push(row.iter().map(|f| f.map(|v| (actual - v).powi(2))).collect::<Vec<_>>());
                for (k, f) in row.iter().enumerate() {
                    if f.is_none() {
                        failures += 1;
                        if diagnostics.len() < MAX_DIAGNOSTICS {
                            if let Some((_, msg)) = results[wk].errors.iter().find(|(km, _)| *km == k) {
                                diagnostics.push(msg.clone());
                            }
                        }
                    }
                }
                forecasts.push(row);
            }
            total_failures += failures;
            let usable: Vec<bool> = (0..m).map(|k| losses.iter().any(|r: &Vec<Option<f64>>| r[k].is_some())).collect();
            let incomplete: Vec<bool> = (0..m).map(|k| losses.iter().any(|r| r[k].is_none())).collect();
            let complete: Vec<usize> = (0..losses.len())
                .filter(|&wk| (0..m).all(|k| !usable[k] || losses[wk][k].is_some()))
                .collect();
            let msfe: Vec<Option<f64>> = (0..m)
                .map(|k| {
                    (usable[k] && !complete.is_empty())
                        .then(|| complete.iter().map(|&wk| losses[wk][k].unwrap()).sum::<f64>() / complete.len() as f64)
                })
                .collect();
            let rel_msfe: Vec<Option<f64>> = (0..m)
                .map(|k| match (msfe[k], msfe[bench]) {
                    (Some(a), Some(b)) if k == bench => Some(if b > 0.0 { 1.0 } else { a / a.max(f64::MIN_POSITIVE) }),
                    (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                    _ => None,
                })
                .collect();
            let cols: Vec<usize> = (0..m).filter(|&k| usable[k]).collect();
            let mut in_mcs = vec![false; m];
            let mut mcs_pvalue = vec![None; m];
            if cols.len() >= 2 && complete.len() >= MIN_LOSS_OBS {
                let lm = DMatrix::from_fn(complete.len(), cols.len(), |r, c| losses[complete[r]][cols[c]].unwrap());
                let seed = rng::derive(cfg.seed, &[rng::stream::MCS, tk as u64, h as u64]);
                let res = mcs(&lm, cfg.mcs_alpha, cfg.mcs_gamma, cfg.mcs_reps, seed)?;
                for (c, &k) in cols.iter().enumerate() {
                    in_mcs[k] = res.members[c];
                    mcs_pvalue[k] = Some(res.pvalues[c]);
                }
            } else {
                for &k in &cols {
                    in_mcs[k] = true;
                }
                if cols.len() >= 2 {
                    diagnostics.push(format!("only {} complete windows; MCS not computed, all methods retained", complete.len()));
                }
            }
            cells.push(ReportCell {
                target: panel.names()[ti].clone(),
                horizon: h,
                forecasts,
                actuals,
                losses,
                complete_windows: complete.len(),
                msfe,
                rel_msfe,
                in_mcs,
                mcs_pvalue,
                incomplete,
                failures,
                diagnostics,
            });
        }
    }
    let fits = origins.len() * m * (usize::from(!positive.is_empty()) + usize::from(has_now));
    Ok(ForecastReport {
        targets: cfg.targets.clone(),
        horizons: cfg.horizons.clone(),
        methods: ids,
        benchmark: cfg.benchmark.clone(),
        origins,
        cells,
        metadata: RunMetadata {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            window: cfg.window,
            step: cfg.step,
            fits,
            failures: total_failures,
            mcs_alpha: cfg.mcs_alpha,
            mcs_gamma: cfg.mcs_gamma,
            mcs_reps: cfg.mcs_reps,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_vecm, VecmParams};

    fn rw_panel(n: usize, t: usize, seed: u64) -> Panel {
        simulate_vecm(&VecmParams::random_walks(n), t, 0, seed).unwrap().panel
    }

    struct Foresight(Panel);

    impl ForecastMethod for Foresight {
        fn id(&self) -> String {
            "oracle".into()
        }
        fn supports_nowcast(&self) -> bool {
            true
        }
        fn forecast(&self, ctx: &WindowContext) -> Result<Vec<Vec<f64>>> {
            let w = ctx.levels.nobs();
            Ok(ctx
                .horizons
                .iter()
                .map(|&h| ctx.targets.iter().map(|&i| self.0.values()[(ctx.origin + h, i)] - ctx.det[i].at((w + h) as f64)).collect())
                .collect())
        }
    }

    fn cfg(targets: &[&str], horizons: Vec<usize>) -> HarnessConfig {
        HarnessConfig {
            window: 60,
            horizons,
            targets: targets.iter().map(|s| s.to_string()).collect(),
            mcs_reps: 199,
            ..HarnessConfig::default()
        }
    }

    #[test]
    fn benchmark_only_gives_unit_ratios_and_foresight_zero_loss() {
        let pn = rw_panel(3, 110, 1);
        let c = cfg(&["s1", "s2"], vec![1, 3]);
        let oracle = Foresight(pn.clone());
        let ar = MethodSpec::Ar { p_max: 2 };
        let rep = run_rolling_with(&pn, &c, &[&ar, &oracle]).unwrap();
        assert_eq!(rep.origins.len(), 110 - 60 - 3 + 1);
        for cell in &rep.cells {
            assert_eq!(cell.rel_msfe[0], Some(1.0));
            assert!(cell.rel_msfe[1].unwrap() < 1e-20);
            assert!(cell.in_mcs[1]);
        }
        let only = run_rolling(&pn, &c).unwrap();
        assert!(only.cells.iter().all(|c| c.rel_msfe == vec![Some(1.0)]));
        assert!(only.to_csv().unwrap().starts_with("target,horizon,method,rel_msfe,in_mcs"));
    }

    #[test]
    fn future_outlier_leaves_earlier_forecasts_bit_identical() {
        let pn = rw_panel(4, 100, 2);
        let mut v = pn.values().clone();
        v[(90, 0)] += 1e6;
        v[(95, 2)] -= 1e6;
        let planted = pn.with_values(v).unwrap();
        let mut c = cfg(&["s1", "s3"], vec![0, 1, 2]);
        c.methods = vec![MethodSpec::Ar { p_max: 2 }, MethodSpec::Specs { p: 1, factors: 0 }];
        let a = run_rolling(&pn, &c).unwrap();
        let b = run_rolling(&planted, &c).unwrap();
        for (ca, cb) in a.cells.iter().zip(&b.cells) {
            for (wk, &o) in a.origins.iter().enumerate() {
                if o < 90 {
                    assert_eq!(ca.forecasts[wk], cb.forecasts[wk], "origin {o}");
                }
            }
        }
    }

    #[test]
    fn config_errors() {
        let pn = rw_panel(3, 90, 3);
        let mut c = cfg(&["s1"], vec![1]);
        c.window = 59;
        assert!(matches!(run_rolling(&pn, &c), Err(Error::Config(_))));
        let mut c = cfg(&["s1"], vec![0]);
        c.methods = vec![MethodSpec::Ar { p_max: 2 }, MethodSpec::Ml { p_max: 2 }];
        assert!(matches!(run_rolling(&pn, &c), Err(Error::Config(_))));
        let mut c = cfg(&["s1"], vec![1]);
        c.benchmark = "var".into();
        assert!(matches!(run_rolling(&pn, &c), Err(Error::Config(_))));
        let c = cfg(&["s1"], vec![40]);
        assert!(run_rolling(&pn, &c).is_err());
    }

    #[test]
    fn report_is_reproducible() {
        let pn = rw_panel(4, 100, 4);
        let mut c = cfg(&["s1", "s2"], vec![1, 4]);
        c.methods = vec![MethodSpec::Ar { p_max: 2 }, MethodSpec::Var { p_max: 2, factors: 0 }, MethodSpec::Ml { p_max: 2 }];
        let a = run_rolling(&pn, &c).unwrap().to_json().unwrap();
        let b = run_rolling(&pn, &c).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_method_runs() {
        let pn = simulate_vecm(&VecmParams::random_walks(6), 90, 0, 5).unwrap().panel;
        let mut c = cfg(&["s1", "s2"], vec![1, 2]);
        c.step = 15;
        c.methods = ["ar", "var", "favar", "padl", "fapadl", "ml", "fecm", "ndfm", "qr_vecm", "pml", "specs", "fa_specs"]
            .iter()
            .map(|n| MethodSpec::from_name(n, Some(2), Some(1)).unwrap())
            .collect();
        let rep = run_rolling(&pn, &c).unwrap();
        for cell in &rep.cells {
            for (k, id) in rep.methods.iter().enumerate() {
                assert!(cell.msfe[k].is_some(), "{id}: {:?}", cell.diagnostics);
            }
        }
    }
}
