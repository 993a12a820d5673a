//! Autoregressive wild bootstrap for panels of unit-root statistics.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::{self, DeterministicSpec, Panel};
use crate::rng::{self, Rng};
use crate::unitroot::{self, CriticalValueSet, FastUnion, UnitRootStat, Variant, UNION_SCALE};

/// How the autoregressive root of the detrended data is filtered out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    Unity,
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AwbConfig {
    pub gamma: f64,
    pub reps: usize,
    pub rho_mode: RhoMode,
    pub seed: u64,
    pub alpha: f64,
    /// Upper bound for lag selection; `None` uses the sample-size rule.
    pub max_lags: Option<usize>,
}

impl Default for AwbConfig {
    fn default() -> Self {
        AwbConfig {
            gamma: 0.85,
            reps: 999,
            rho_mode: RhoMode::Estimated,
            seed: 0,
            alpha: 0.05,
            max_lags: None,
        }
    }
}

impl AwbConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        if self.reps < 199 {
            return Err(Error::Config(format!(
                "{} bootstrap replications requested, at least 199 required",
                self.reps
            )));
        }
        if (self.reps as f64) * self.alpha < 5.0 {
            return Err(Error::Config(format!(
                "B = {} too small for an alpha = {} quantile",
                self.reps, self.alpha
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::param(format!("gamma = {gamma} outside [0, 1)")));
    }
    Ok(())
}

/// Fill `out` with a unit-variance Gaussian AR(1) multiplier sequence.
pub fn awb_fill(rng: &mut Rng, gamma: f64, out: &mut [f64]) {
    let scale = (1.0 - gamma * gamma).sqrt();
    let mut prev = 0.0;
    for (t, slot) in out.iter_mut().enumerate() {
        let e: f64 = rng.sample(StandardNormal);
        prev = if t == 0 { e } else { gamma * prev + scale * e };
        *slot = prev;
    }
}

/// Multiplier sequence `ξ*_1..ξ*_T` for seed `seed`.
pub fn awb_draw(t: usize, gamma: f64, seed: u64) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    if t == 0 {
        return Err(Error::param("T must be at least 1"));
    }
    let mut rng = rng::substream(seed, &[rng::stream::BOOTSTRAP, u64::MAX]);
    let mut out = vec![0.0; t];
    awb_fill(&mut rng, gamma, &mut out);
    Ok(out)
}

/// Residuals `û_t = ζ̂_t - ρ̂ ζ̂_{t-1}` of the OLS-detrended panel, together with `ρ̂`.
///
/// `lags` gives the augmentation used when `ρ̂` is estimated. The first
/// observation of each series has no predecessor and is set to zero.
pub fn residual_panel(panel: &Panel, rho_mode: RhoMode, lags: &[usize]) -> Result<(Panel, Vec<f64>)> {
    let (zeta, _) = panel::ols_detrend(panel, DeterministicSpec::Trend)?;
    let (t, n) = (panel.nobs(), panel.nseries());
    let mut out = DMatrix::from_element(t, n, f64::NAN);
    let mut rhos = Vec::with_capacity(n);
    for j in 0..n {
        let col = zeta.column(j);
        let f = zeta.first_valid(j);
        let rho = match rho_mode {
            RhoMode::Unity => 1.0,
            RhoMode::Estimated => estimate_rho(&col[f..], lags.get(j).copied().unwrap_or(0))?,
        };
        if f < t {
            out[(f, j)] = 0.0;
        }
        for s in f + 1..t {
            out[(s, j)] = col[s] - rho * col[s - 1];
        }
        rhos.push(rho);
    }
    Ok((panel.with_values(out)?, rhos))
}

fn estimate_rho(zeta: &[f64], lags: usize) -> Result<f64> {
    let t = zeta.len();
    let start = lags + 1;
    if t <= start + lags + 2 {
        return Err(Error::insufficient("series too short to estimate its autoregressive root"));
    }
    let n = t - start;
    let mut x = DMatrix::zeros(n, 1 + lags);
    let mut y = nalgebra::DVector::zeros(n);
    for (r, s) in (start..t).enumerate() {
        x[(r, 0)] = zeta[s - 1];
        for j in 1..=lags {
            x[(r, j)] = zeta[s - j] - zeta[s - j - 1];
        }
        y[r] = zeta[s] - zeta[s - 1];
    }
    let fit = linalg::ols(&x, &y)?;
    Ok(1.0 + fit.coef[0])
}

/// Joint bootstrap distribution of the union statistics of every series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapUnion {
    pub series: Vec<String>,
    /// Lag order selected per series (shared by all variants and replications).
    pub lags: Vec<usize>,
    /// Original-sample statistics and union values.
    pub original: Vec<UnitRootStat>,
    /// Individual bootstrap statistics, replication-major: `stats[b * N + i]`.
    pub boot_stats: Vec<[f64; 4]>,
    /// `B x N` bootstrap union statistics.
    pub union_boot: DMatrix<f64>,
    pub critical_values: Vec<CriticalValueSet>,
    /// Common scaling target `x` of the union statistics.
    pub scale: f64,
    pub alpha: f64,
}

impl BootstrapUnion {
    pub fn reps(&self) -> usize {
        self.union_boot.nrows()
    }

    pub fn nseries(&self) -> usize {
        self.series.len()
    }

    pub fn union_stats(&self) -> Vec<f64> {
        self.original.iter().map(|s| s.union).collect()
    }

    /// Bootstrap union draws of series `i`.
    pub fn boot_column(&self, i: usize) -> Vec<f64> {
        self.union_boot.column(i).iter().copied().collect()
    }
}

fn stats_for_replication(
    b: usize,
    cfg: &AwbConfig,
    resid: &Panel,
    firsts: &[usize],
    lags: &[usize],
    fast: &mut FastUnion,
    xi: &mut Vec<f64>,
    zbuf: &mut Vec<f64>,
) -> Result<Vec<[f64; 4]>> {
    let t = resid.nobs();
    xi.resize(t, 0.0);
    let mut rng = rng::substream(cfg.seed, &[rng::stream::BOOTSTRAP, b as u64]);
    awb_fill(&mut rng, cfg.gamma, xi);
    let mut out = Vec::with_capacity(resid.nseries());
    for (i, (&f, &k)) in firsts.iter().zip(lags).enumerate() {
        let u = resid.column(i);
        zbuf.clear();
        let mut acc = 0.0;
        for s in f..t {
            acc += xi[s] * u[s];
            zbuf.push(acc);
        }
        out.push(fast.stats(zbuf, k)?);
    }
    Ok(out)
}

/// Bootstrap panel `z*` of replication `b` (for inspection and tests).
pub fn bootstrap_panel(resid: &Panel, cfg: &AwbConfig, b: usize) -> Result<Panel> {
    let t = resid.nobs();
    let mut xi = vec![0.0; t];
    let mut rng = rng::substream(cfg.seed, &[rng::stream::BOOTSTRAP, b as u64]);
    awb_fill(&mut rng, cfg.gamma, &mut xi);
    let mut out = DMatrix::from_element(t, resid.nseries(), f64::NAN);
    for i in 0..resid.nseries() {
        let u = resid.column(i);
        let f = resid.first_valid(i);
        let mut acc = 0.0;
        for s in f..t {
            acc += xi[s] * u[s];
            out[(s, i)] = acc;
        }
    }
    resid.with_values(out)
}

/// Run the bootstrap: original statistics, per-variant critical values from the
/// replication set, and the union statistic of every replication.
pub fn bootstrap_union_distribution(panel: &Panel, cfg: &AwbConfig) -> Result<BootstrapUnion> {
    cfg.validate()?;
    let n = panel.nseries();
    let firsts: Vec<usize> = (0..n).map(|i| panel.first_valid(i)).collect();
    let lags: Vec<usize> = (0..n)
        .map(|i| {
            let len = panel.nobs() - firsts[i];
            let kmax = cfg.max_lags.unwrap_or_else(|| unitroot::default_max_lags(len));
            unitroot::select_lags(panel.column(i), DeterministicSpec::Trend, kmax)
        })
        .collect();
    let original: Vec<[f64; 4]> = (0..n)
        .map(|i| {
            unitroot::four_stats(panel.column(i), lags[i]).map_err(|e| match e {
                Error::Numerical(m) => Error::Numerical(format!("series '{}': {m}", panel.names()[i])),
                Error::InsufficientData(m) => {
                    Error::InsufficientData(format!("series '{}': {m}", panel.names()[i]))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let (resid, _) = residual_panel(panel, cfg.rho_mode, &lags)?;

    let reps: Vec<Vec<[f64; 4]>> = (0..cfg.reps)
        .into_par_iter()
        .map_init(
            || (FastUnion::new(), Vec::new(), Vec::new()),
            |(fast, xi, zbuf), b| stats_for_replication(b, cfg, &resid, &firsts, &lags, fast, xi, zbuf),
        )
        .collect::<Result<_>>()?;

    let mut critical_values = Vec::with_capacity(n);
    let mut col = vec![0.0; cfg.reps];
    for i in 0..n {
        let mut values = [0.0; 4];
        for v in Variant::ALL {
            for (b, rep) in reps.iter().enumerate() {
                col[b] = rep[i][v.index()];
            }
            values[v.index()] = linalg::lower_quantile(&col, cfg.alpha);
        }
        if values.iter().any(|&c| c == 0.0 || !c.is_finite()) {
            return Err(Error::numerical(format!(
                "degenerate bootstrap critical value for series '{}'",
                panel.names()[i]
            )));
        }
        critical_values.push(CriticalValueSet {
            alpha: cfg.alpha,
            values,
        });
    }
    let union_boot = DMatrix::from_fn(cfg.reps, n, |b, i| {
        unitroot::union_unchecked(&reps[b][i], &critical_values[i].values, UNION_SCALE)
    });
    let original = (0..n)
        .map(|i| {
            let union = unitroot::union_stat(&original[i], &critical_values[i], UNION_SCALE)?;
            Ok(UnitRootStat {
                series: panel.names()[i].clone(),
                stats: original[i],
                lags: [lags[i]; 4],
                union,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BootstrapUnion {
        series: panel.names().to_vec(),
        lags,
        original,
        boot_stats: reps.into_iter().flatten().collect(),
        union_boot,
        critical_values,
        scale: UNION_SCALE,
        alpha: cfg.alpha,
    })
}
