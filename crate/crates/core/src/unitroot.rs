//! ADF and DF-GLS statistics, rescaled-MAIC lag selection and the union statistic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::panel::{first_valid, DeterministicSpec};

/// Local-to-unity noncentrality for GLS demeaning.
pub const CBAR_MEAN: f64 = -7.0;
/// Local-to-unity noncentrality for GLS detrending.
pub const CBAR_TREND: f64 = -13.5;
/// Common scaling target of the union statistic.
pub const UNION_SCALE: f64 = -1.0;

/// The four members of the union, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    AdfMean,
    AdfTrend,
    GlsMean,
    GlsTrend,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::AdfMean,
        Variant::AdfTrend,
        Variant::GlsMean,
        Variant::GlsTrend,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::AdfMean => "adf_mu",
            Variant::AdfTrend => "adf_tau",
            Variant::GlsMean => "gls_mu",
            Variant::GlsTrend => "gls_tau",
        }
    }
}

/// Per-variant lower-tail critical values at level `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValueSet {
    pub alpha: f64,
    /// Indexed by [`Variant::index`].
    pub values: [f64; 4],
}

/// Unit-root statistics of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootStat {
    pub series: String,
    /// Indexed by [`Variant::index`].
    pub stats: [f64; 4],
    pub lags: [usize; 4],
    pub union: f64,
}

/// `floor(12 (T/100)^{1/4})`.
pub fn default_max_lags(t: usize) -> usize {
    (12.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize
}

fn trimmed(series: &[f64]) -> Result<&[f64]> {
    let y = &series[first_valid(series)..];
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("series has missing values after its first observation"));
    }
    Ok(y)
}

fn check_sample(t: usize, lags: usize) -> Result<()> {
    // effective sample T - lags - 1 must be at least lags + 3
    if t < 2 * lags + 4 {
        return Err(Error::insufficient(format!(
            "{lags} lags need at least {} observations, got {t}",
            2 * lags + 4
        )));
    }
    Ok(())
}

/// ADF regression design for `y` (already trimmed): returns `(X, Δy)` where the
/// column of `y_{t-1}` sits at index `spec.regressor_count()`.
fn adf_design(y: &[f64], spec: DeterministicSpec, lags: usize, start: usize) -> (DMatrix<f64>, DVector<f64>) {
    let t = y.len();
    let n = t - start;
    let d = spec.regressor_count();
    let k = d + 1 + lags;
    let mut x = DMatrix::zeros(n, k);
    let mut dy = DVector::zeros(n);
    for (row, s) in (start..t).enumerate() {
        if d >= 1 {
            x[(row, 0)] = 1.0;
        }
        if d == 2 {
            x[(row, 1)] = (s + 1) as f64;
        }
        x[(row, d)] = y[s - 1];
        for j in 1..=lags {
            x[(row, d + j)] = y[s - j] - y[s - j - 1];
        }
        dy[row] = y[s] - y[s - 1];
    }
    (x, dy)
}

/// t-statistic on `y_{t-1}` in the regression of `Δy_t` on deterministics,
/// `y_{t-1}` and `lags` lagged differences. Leading missing values are skipped.
pub fn adf_stat(series: &[f64], spec: DeterministicSpec, lags: usize) -> Result<f64> {
    let y = trimmed(series)?;
    check_sample(y.len(), lags)?;
    let (x, dy) = adf_design(y, spec, lags, lags + 1);
    let fit = linalg::ols(&x, &dy)?;
    Ok(fit.t_stat(spec.regressor_count()))
}

/// GLS-demeaned or -detrended series with noncentrality `cbar`.
pub fn gls_detrend(y: &[f64], spec: DeterministicSpec, cbar: f64) -> Result<Vec<f64>> {
    let t = y.len();
    let rho = 1.0 + cbar / t as f64;
    match spec {
        DeterministicSpec::None => Ok(y.to_vec()),
        DeterministicSpec::Mean => {
            let mut szz = 1.0;
            let mut szy = y[0];
            for s in 1..t {
                let z = 1.0 - rho;
                szz += z * z;
                szy += z * (y[s] - rho * y[s - 1]);
            }
            if szz <= 0.0 || !szz.is_finite() {
                return Err(Error::numerical("degenerate GLS demeaning"));
            }
            let b = szy / szz;
            Ok(y.iter().map(|v| v - b).collect())
        }
        DeterministicSpec::Trend => {
            let mut zz = DMatrix::<f64>::zeros(2, 2);
            let mut zy = DVector::<f64>::zeros(2);
            for s in 0..t {
                let (z0, z1, yq) = if s == 0 {
                    (1.0, 1.0, y[0])
                } else {
                    let tt = (s + 1) as f64;
                    (1.0 - rho, tt - rho * (tt - 1.0), y[s] - rho * y[s - 1])
                };
                zz[(0, 0)] += z0 * z0;
                zz[(0, 1)] += z0 * z1;
                zz[(1, 1)] += z1 * z1;
                zy[0] += z0 * yq;
                zy[1] += z1 * yq;
            }
            zz[(1, 0)] = zz[(0, 1)];
            let b = linalg::well_conditioned_inverse(&zz)? * zy;
            Ok(y
                .iter()
                .enumerate()
                .map(|(s, v)| v - b[0] - b[1] * (s + 1) as f64)
                .collect())
        }
    }
}

/// DF-GLS statistic with the conventional noncentrality for `spec`.
pub fn dfgls_stat(series: &[f64], spec: DeterministicSpec, lags: usize) -> Result<f64> {
    let cbar = match spec {
        DeterministicSpec::Trend => CBAR_TREND,
        _ => CBAR_MEAN,
    };
    dfgls_stat_with_cbar(series, spec, lags, cbar)
}

/// DF-GLS statistic: ADF without deterministics on GLS-detrended data.
pub fn dfgls_stat_with_cbar(series: &[f64], spec: DeterministicSpec, lags: usize, cbar: f64) -> Result<f64> {
    let y = trimmed(series)?;
    check_sample(y.len(), lags)?;
    let yd = gls_detrend(y, spec, cbar)?;
    adf_stat(&yd, DeterministicSpec::None, lags)
}

/// Rolling standard deviation of the demeaned increments `Δy_s`, `s = 1..T-1`,
/// over a window of `round(sqrt(T))` observations (entry 0 is unused).
fn rolling_increment_sd(y: &[f64]) -> Vec<f64> {
    let t = y.len();
    let dy: Vec<f64> = (1..t).map(|s| y[s] - y[s - 1]).collect();
    let m = linalg::mean(&dy);
    let mut prefix = vec![0.0; dy.len() + 1];
    for (i, v) in dy.iter().enumerate() {
        prefix[i + 1] = prefix[i] + (v - m) * (v - m);
    }
    let overall = (prefix[dy.len()] / dy.len() as f64).sqrt();
    let w = ((t as f64).sqrt().round() as usize).clamp(1, dy.len());
    let mut out = vec![overall; t];
    for i in 0..dy.len() {
        let hi = (i.saturating_sub(w / 2) + w).min(dy.len());
        let lo = hi - w;
        let sd = ((prefix[hi] - prefix[lo]) / w as f64).sqrt();
        out[i + 1] = if sd > 1e-6 * overall { sd } else { overall };
    }
    out
}

fn maic_value(x: &DMatrix<f64>, dy: &DVector<f64>, ycol: usize, k: usize) -> Option<f64> {
    let fit = linalg::ols(x, dy).ok()?;
    let n = dy.len() as f64;
    let s2 = fit.rss / n;
    if !(s2 > 0.0) {
        return None;
    }
    // sum of squares of the lagged level net of deterministics only
    let ylag = x.column(ycol).into_owned();
    let level_ss = if ycol == 0 {
        ylag.norm_squared()
    } else {
        let det = x.columns(0, ycol).into_owned();
        linalg::ols(&det, &ylag).ok()?.rss
    };
    let b = fit.coef[ycol];
    let tau = b * b * level_ss / s2;
    Some(s2.ln() + 2.0 * (tau + k as f64) / n)
}

/// Lag order minimising the modified AIC of the ADF regression with rows
/// standardised by a rolling volatility estimate.
/// All candidate lags use the common sample implied by `max_lags`.
pub fn select_lags(series: &[f64], spec: DeterministicSpec, max_lags: usize) -> usize {
    let y = match trimmed(series) {
        Ok(y) => y,
        Err(_) => return 0,
    };
    let t = y.len();
    let mut kmax = max_lags;
    while kmax > 0 && t < 2 * kmax + 4 + spec.regressor_count() + 2 {
        kmax -= 1;
    }
    if kmax == 0 || t < 6 {
        return 0;
    }
    let sd = rolling_increment_sd(y);
    if !(sd[1] > 0.0) || sd.iter().any(|v| !v.is_finite()) {
        return 0;
    }
    let d = spec.regressor_count();
    let start = kmax + 1;
    let mut best = (0usize, f64::INFINITY);
    for k in 0..=kmax {
        // rows weighted by the inverse local volatility
        let (mut x, mut dy) = adf_design(y, spec, k, start);
        for (row, s) in (start..t).enumerate() {
            let w = 1.0 / sd[s];
            x.row_mut(row).scale_mut(w);
            dy[row] *= w;
        }
        if let Some(v) = maic_value(&x, &dy, d, k) {
            if v < best.1 {
                best = (k, v);
            }
        }
    }
    best.0
}

/// `min_v (x / c_v) * stat_v`.
pub fn union_stat(stats: &[f64; 4], critvals: &CriticalValueSet, x: f64) -> Result<f64> {
    if !(x < 0.0) {
        return Err(Error::param("union scaling x must be negative"));
    }
    if critvals.values.iter().any(|&c| c == 0.0 || !c.is_finite()) {
        return Err(Error::param("critical values must be finite and nonzero"));
    }
    Ok(union_unchecked(stats, &critvals.values, x))
}

pub(crate) fn union_unchecked(stats: &[f64; 4], cv: &[f64; 4], x: f64) -> f64 {
    (0..4)
        .map(|v| x / cv[v] * stats[v])
        .fold(f64::INFINITY, f64::min)
}

/// All four statistics from the direct regressions, with one common lag.
pub fn four_stats(series: &[f64], lags: usize) -> Result<[f64; 4]> {
    Ok([
        adf_stat(series, DeterministicSpec::Mean, lags)?,
        adf_stat(series, DeterministicSpec::Trend, lags)?,
        dfgls_stat(series, DeterministicSpec::Mean, lags)?,
        dfgls_stat(series, DeterministicSpec::Trend, lags)?,
    ])
}

/// Evaluates the four statistics from one cross-product matrix.
///
/// Every regression in the union is a linear transform of the vector
/// `v_s = [1, t_s, y_{s-1}, Δy_{s-1}, .., Δy_{s-k}, Δy_s]`, so a single
/// `M = Σ v_s v_s'` suffices. Used on the bootstrap hot path.
#[derive(Debug, Default)]
pub struct FastUnion {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl FastUnion {
    pub fn new() -> Self {
        Self::default()
    }

    /// Four statistics of `y` (no missing values) with `k` lagged differences.
    pub fn stats(&mut self, y: &[f64], k: usize) -> Result<[f64; 4]> {
        let t = y.len();
        check_sample(t, k)?;
        let start = k + 1;
        let n = t - start;
        let dim = k + 4;
        self.m.clear();
        self.m.resize(dim * dim, 0.0);
        self.v.resize(dim, 0.0);
        let sbar = (start + t - 1) as f64 / 2.0;
        let tscale = n as f64;
        for s in start..t {
            let v = &mut self.v;
            v[0] = 1.0;
            v[1] = (s as f64 - sbar) / tscale;
            v[2] = y[s - 1];
            for j in 1..=k {
                v[2 + j] = y[s - j] - y[s - j - 1];
            }
            v[dim - 1] = y[s] - y[s - 1];
            for a in 0..dim {
                let va = v[a];
                let row = &mut self.m[a * dim..a * dim + a + 1];
                for (b, slot) in row.iter_mut().enumerate() {
                    *slot += va * v[b];
                }
            }
        }
        for a in 0..dim {
            for b in a + 1..dim {
                self.m[a * dim + b] = self.m[b * dim + a];
            }
        }
        let m = DMatrix::from_row_slice(dim, dim, &self.m);

        let mut out = [0.0; 4];
        // ADF with intercept / with trend: regressor selections of v
        let resp = unit(dim, dim - 1);
        let mut sel_mu = vec![unit(dim, 0), unit(dim, 2)];
        let mut sel_tau = vec![unit(dim, 0), unit(dim, 1), unit(dim, 2)];
        for j in 1..=k {
            sel_mu.push(unit(dim, 2 + j));
            sel_tau.push(unit(dim, 2 + j));
        }
        out[0] = t_from_moments(&m, &sel_mu, &resp, 1, n)?;
        out[1] = t_from_moments(&m, &sel_tau, &resp, 2, n)?;

        // GLS demeaned: subtract a constant from the lagged level only
        let yd = gls_detrend(y, DeterministicSpec::Mean, CBAR_MEAN)?;
        let b0 = y[0] - yd[0];
        let mut sel = vec![combo(dim, &[(0, -b0), (2, 1.0)])];
        for j in 1..=k {
            sel.push(unit(dim, 2 + j));
        }
        out[2] = t_from_moments(&m, &sel, &resp, 0, n)?;

        // GLS detrended: level and differences shift by the fitted trend
        let yd = gls_detrend(y, DeterministicSpec::Trend, CBAR_TREND)?;
        let g1 = (y[1] - yd[1]) - (y[0] - yd[0]);
        let g0 = (y[0] - yd[0]) - g1;
        // y^d_{s-1} = y_{s-1} - g0 - g1 * s, with s = sbar + tscale * v1
        let mut sel = vec![combo(dim, &[(0, -(g0 + g1 * sbar)), (1, -g1 * tscale), (2, 1.0)])];
        for j in 1..=k {
            sel.push(combo(dim, &[(0, -g1), (2 + j, 1.0)]));
        }
        let resp_d = combo(dim, &[(0, -g1), (dim - 1, 1.0)]);
        out[3] = t_from_moments(&m, &sel, &resp_d, 0, n)?;
        Ok(out)
    }
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

fn combo(dim: usize, terms: &[(usize, f64)]) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    for &(i, w) in terms {
        e[i] += w;
    }
    e
}

fn t_from_moments(m: &DMatrix<f64>, sel: &[DVector<f64>], resp: &DVector<f64>, target: usize, n: usize) -> Result<f64> {
    let p = sel.len();
    if n <= p {
        return Err(Error::insufficient("too few observations for regression"));
    }
    let dim = m.nrows();
    let mut l = DMatrix::zeros(p, dim);
    for (i, s) in sel.iter().enumerate() {
        l.set_row(i, &s.transpose());
    }
    let lm = &l * m;
    let xtx = &lm * l.transpose();
    let xty = &lm * resp;
    let yty = (resp.transpose() * m * resp)[(0, 0)];
    let inv = linalg::well_conditioned_inverse(&xtx)?;
    let b = &inv * &xty;
    let rss = (yty - b.dot(&xty)).max(0.0);
    let s2 = rss / (n - p) as f64;
    let se = (s2 * inv[(target, target)]).sqrt();
    if !(se > 0.0) {
        return Err(Error::numerical("zero residual variance in unit-root regression"));
    }
    Ok(b[target] / se)
}
