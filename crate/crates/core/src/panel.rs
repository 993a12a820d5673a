//! Panel container and the elementary transforms applied to it: differencing,
//! integration, transformation codes and OLS detrending.
//!
//! Values are stored as a `T x N` matrix. The only admissible missing-value
//! pattern is a leading block of `NaN` per column (unbalanced starts).

use chrono::{Months, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `T x N` panel with series names and a monthly date index.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    names: Vec<String>,
    dates: Vec<NaiveDate>,
}

/// Deterministic component included in a regression or removed by detrending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeterministicSpec {
    None,
    Mean,
    Trend,
}

impl DeterministicSpec {
    pub fn regressor_count(self) -> usize {
        match self {
            DeterministicSpec::None => 0,
            DeterministicSpec::Mean => 1,
            DeterministicSpec::Trend => 2,
        }
    }
}

/// Order of integration of a single series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Integration {
    I0,
    I1,
    I2,
}

impl Integration {
    pub fn order(self) -> usize {
        self as usize
    }

    pub fn from_order(d: usize) -> Result<Self> {
        match d {
            0 => Ok(Integration::I0),
            1 => Ok(Integration::I1),
            2 => Ok(Integration::I2),
            _ => Err(Error::UnsupportedOrder(d)),
        }
    }
}

impl From<Integration> for u8 {
    fn from(v: Integration) -> u8 {
        v as u8
    }
}

impl TryFrom<u8> for Integration {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Integration::from_order(v as usize)
    }
}

/// FRED-MD style transformation code.
///
/// | code | transform |
/// |------|-----------|
/// | 1 | level |
/// | 2 | first difference |
/// | 3 | second difference |
/// | 4 | log |
/// | 5 | first difference of log |
/// | 6 | second difference of log |
/// | 7 | first difference of the percent change |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub struct TransformCode(u8);

impl TransformCode {
    pub fn new(code: u8) -> Result<Self> {
        if (1..=7).contains(&code) {
            Ok(TransformCode(code))
        } else {
            Err(Error::param(format!("transform code {code} outside 1..=7")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn takes_log(self) -> bool {
        self.0 >= 4
    }

    /// Number of differences applied by the code.
    pub fn differences(self) -> usize {
        match self.0 {
            1 | 4 => 0,
            2 | 5 => 1,
            3 | 6 => 2,
            // percent change is a first difference of the ratio, then differenced again
            _ => 2,
        }
    }

    /// Codes whose official classification corresponds to an I(2) series.
    pub fn implies_i2(self) -> bool {
        self.differences() == 2
    }
}

impl From<TransformCode> for u8 {
    fn from(c: TransformCode) -> u8 {
        c.0
    }
}

impl TryFrom<u8> for TransformCode {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        TransformCode::new(v)
    }
}

/// Least-squares deterministic coefficients of one series: `mu + tau * t`, `t = 1..T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetCoef {
    pub mu: f64,
    pub tau: f64,
}

impl DetCoef {
    pub fn at(&self, t: f64) -> f64 {
        self.mu + self.tau * t
    }
}

/// Monthly dates starting January 2000.
pub fn default_dates(t: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    (0..t)
        .map(|k| start + Months::new(k as u32))
        .collect()
}

impl Panel {
    /// Build a panel, validating every invariant.
    pub fn new(values: DMatrix<f64>, names: Vec<String>, dates: Vec<NaiveDate>) -> Result<Self> {
        let (t, n) = values.shape();
        if names.len() != n {
            return Err(Error::InvalidPanel(format!(
                "{} names for {} columns",
                names.len(),
                n
            )));
        }
        if dates.len() != t {
            return Err(Error::InvalidPanel(format!("{} dates for {} rows", dates.len(), t)));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidPanel(format!("duplicate series name '{name}'")));
            }
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPanel("dates are not strictly increasing".into()));
        }
        for (j, col) in values.column_iter().enumerate() {
            let mut started = false;
            for (i, &v) in col.iter().enumerate() {
                if v.is_nan() {
                    if started {
                        return Err(Error::InvalidPanel(format!(
                            "interior missing value in '{}' at row {}",
                            names[j], i
                        )));
                    }
                } else if !v.is_finite() {
                    return Err(Error::InvalidPanel(format!(
                        "non-finite value in '{}' at row {}",
                        names[j], i
                    )));
                } else {
                    started = true;
                }
            }
        }
        Ok(Panel {
            values,
            names,
            dates,
        })
    }

    /// Panel with generated names `s1..sN` and default monthly dates.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let (t, n) = values.shape();
        let names = (1..=n).map(|i| format!("s{i}")).collect();
        Panel::new(values, names, default_dates(t))
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let n = columns.len();
        let t = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != t) {
            return Err(Error::InvalidPanel("columns of unequal length".into()));
        }
        Panel::from_matrix(DMatrix::from_fn(t, n, |i, j| columns[j][i]))
    }

    pub fn nobs(&self) -> usize {
        self.values.nrows()
    }

    pub fn nseries(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let t = self.nobs();
        &self.values.as_slice()[j * t..(j + 1) * t]
    }

    /// Index of the first non-missing observation of column `j` (`T` if empty).
    pub fn first_valid(&self, j: usize) -> usize {
        first_valid(self.column(j))
    }

    pub fn is_balanced(&self) -> bool {
        !self.values.iter().any(|v| v.is_nan())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Same names and dates, new values (re-validated).
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Panel> {
        Panel::new(values, self.names.clone(), self.dates.clone())
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Panel {
        let values = self.values.rows(start, end - start).into_owned();
        Panel {
            values,
            names: self.names.clone(),
            dates: self.dates[start..end].to_vec(),
        }
    }

    /// Sub-panel of the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Panel {
        let t = self.nobs();
        let values = DMatrix::from_fn(t, cols.len(), |i, j| self.values[(i, cols[j])]);
        Panel {
            values,
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            dates: self.dates.clone(),
        }
    }

    /// Append columns (names must stay unique).
    pub fn hstack(&self, other: &Panel) -> Result<Panel> {
        if other.nobs() != self.nobs() {
            return Err(Error::InvalidPanel("row count mismatch in hstack".into()));
        }
        let t = self.nobs();
        let n1 = self.nseries();
        let values = DMatrix::from_fn(t, n1 + other.nseries(), |i, j| {
            if j < n1 {
                self.values[(i, j)]
            } else {
                other.values[(i, j - n1)]
            }
        });
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        Panel::new(values, names, self.dates.clone())
    }

    /// Drop the first `k` rows.
    pub fn trim_front(&self, k: usize) -> Panel {
        self.slice_rows(k, self.nobs())
    }
}

pub(crate) fn first_valid(col: &[f64]) -> usize {
    col.iter().position(|v| !v.is_nan()).unwrap_or(col.len())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `d`-th difference of a series; the first `d` entries become `NaN`.
pub fn difference_series(x: &[f64], d: usize) -> Result<Vec<f64>> {
    if d > 2 {
        return Err(Error::UnsupportedOrder(d));
    }
    let weights: Vec<f64> = (0..=d)
        .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * binomial(d, k))
        .collect();
    Ok((0..x.len())
        .map(|t| {
            if t < d {
                f64::NAN
            } else {
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * x[t - k])
                    .sum()
            }
        })
        .collect())
}

/// Undo `d`-fold differencing: returns `anchors` followed by the integrated path,
/// so the output is `d` elements longer than `diffs`.
pub fn integrate_series(diffs: &[f64], anchors: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 || d > 2 {
        return Err(Error::UnsupportedOrder(d));
    }
    if anchors.len() != d {
        return Err(Error::MissingAnchors {
            expected: d,
            got: anchors.len(),
        });
    }
    let mut out = anchors.to_vec();
    for &dx in diffs {
        let t = out.len();
        let next = match d {
            1 => dx + out[t - 1],
            _ => dx + 2.0 * out[t - 1] - out[t - 2],
        };
        out.push(next);
    }
    Ok(out)
}

/// `d`-th difference of every column. Output has `d` more leading `NaN`s per column.
pub fn difference(panel: &Panel, d: usize) -> Result<Panel> {
    if d > 2 {
        return Err(Error::UnsupportedOrder(d));
    }
    if panel.nobs() <= d {
        return Err(Error::insufficient(format!(
            "cannot difference {} observations {} times",
            panel.nobs(),
            d
        )));
    }
    let (t, n) = panel.values.shape();
    let mut out = DMatrix::from_element(t, n, f64::NAN);
    for j in 0..n {
        let dx = difference_series(panel.column(j), d)?;
        out.set_column(j, &nalgebra::DVector::from_vec(dx));
    }
    panel.with_values(out)
}

/// Invert `difference(·, d)`.
///
/// `initial_levels` holds `d` anchors per series (series-major: the anchors of
/// series `j` are `initial_levels[j*d..(j+1)*d]`). They are placed in the `d`
/// rows immediately preceding each column's first non-missing difference.
pub fn integrate(diff_panel: &Panel, initial_levels: &[f64], d: usize) -> Result<Panel> {
    if d == 0 || d > 2 {
        return Err(Error::UnsupportedOrder(d));
    }
    let (t, n) = diff_panel.values.shape();
    if initial_levels.len() != n * d {
        return Err(Error::MissingAnchors {
            expected: n * d,
            got: initial_levels.len(),
        });
    }
    let mut out = DMatrix::from_element(t, n, f64::NAN);
    for j in 0..n {
        let col = diff_panel.column(j);
        let f = first_valid(col);
        if f < d {
            return Err(Error::MissingAnchors {
                expected: d,
                got: f,
            });
        }
        let path = integrate_series(&col[f..], &initial_levels[j * d..(j + 1) * d], d)?;
        for (k, v) in path.into_iter().enumerate() {
            out[(f - d + k, j)] = v;
        }
    }
    diff_panel.with_values(out)
}

fn transform_series(name: &str, x: &[f64], code: TransformCode) -> Result<Vec<f64>> {
    let base: Vec<f64> = if code.takes_log() {
        if let Some(v) = x.iter().find(|v| !v.is_nan() && **v <= 0.0) {
            return Err(Error::Domain {
                series: name.to_string(),
                reason: format!("code {} requires positive values, found {v}", code.code()),
            });
        }
        if code.code() == 7 {
            x.to_vec()
        } else {
            x.iter().map(|v| v.ln()).collect()
        }
    } else {
        x.to_vec()
    };
    match code.code() {
        1 | 4 => Ok(base),
        2 | 5 => difference_series(&base, 1),
        3 | 6 => difference_series(&base, 2),
        _ => {
            let pct: Vec<f64> = (0..base.len())
                .map(|t| {
                    if t == 0 {
                        f64::NAN
                    } else {
                        base[t] / base[t - 1] - 1.0
                    }
                })
                .collect();
            difference_series(&pct, 1)
        }
    }
}

/// Apply one transformation code per series.
pub fn apply_transform(panel: &Panel, codes: &[TransformCode]) -> Result<Panel> {
    let (t, n) = panel.values.shape();
    if codes.len() != n {
        return Err(Error::param(format!("{} codes for {} series", codes.len(), n)));
    }
    let mut out = DMatrix::from_element(t, n, f64::NAN);
    for j in 0..n {
        let col = transform_series(&panel.names[j], panel.column(j), codes[j])?;
        out.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    panel.with_values(out)
}

/// OLS fit of `mu + tau * t` to one series (missing values skipped).
/// `t` runs over `1..=len` on the row index, so coefficients refer to the
/// panel's own time axis.
pub fn detrend_series(x: &[f64], spec: DeterministicSpec) -> Result<(Vec<f64>, DetCoef)> {
    let f = first_valid(x);
    let m = x.len() - f;
    match spec {
        DeterministicSpec::None => Ok((x.to_vec(), DetCoef { mu: 0.0, tau: 0.0 })),
        DeterministicSpec::Mean => {
            if m < 2 {
                return Err(Error::insufficient(format!(
                    "demeaning needs 2 observations, got {m}"
                )));
            }
            let mu = x[f..].iter().sum::<f64>() / m as f64;
            let resid = x.iter().map(|v| v - mu).collect();
            Ok((resid, DetCoef { mu, tau: 0.0 }))
        }
        DeterministicSpec::Trend => {
            if m < 3 {
                return Err(Error::insufficient(format!(
                    "detrending needs 3 observations, got {m}"
                )));
            }
            let ts: Vec<f64> = (f..x.len()).map(|i| (i + 1) as f64).collect();
            let tbar = ts.iter().sum::<f64>() / m as f64;
            let ybar = x[f..].iter().sum::<f64>() / m as f64;
            let mut sxy = 0.0;
            let mut sxx = 0.0;
            for (k, &t) in ts.iter().enumerate() {
                let dt = t - tbar;
                sxy += dt * (x[f + k] - ybar);
                sxx += dt * dt;
            }
            let tau = sxy / sxx;
            let mu = ybar - tau * tbar;
            let resid = x
                .iter()
                .enumerate()
                .map(|(i, v)| v - mu - tau * (i + 1) as f64)
                .collect();
            Ok((resid, DetCoef { mu, tau }))
        }
    }
}

/// Per-series OLS detrending. Returns residuals and `(mu, tau)` per series.
pub fn ols_detrend(panel: &Panel, spec: DeterministicSpec) -> Result<(Panel, Vec<DetCoef>)> {
    let (t, n) = panel.values.shape();
    let mut out = DMatrix::from_element(t, n, f64::NAN);
    let mut coefs = Vec::with_capacity(n);
    for j in 0..n {
        let (r, c) = detrend_series(panel.column(j), spec).map_err(|e| match e {
            Error::InsufficientData(msg) => {
                Error::InsufficientData(format!("series '{}': {msg}", panel.names[j]))
            }
            other => other,
        })?;
        out.set_column(j, &nalgebra::DVector::from_vec(r));
        coefs.push(c);
    }
    Ok((panel.with_values(out)?, coefs))
}
