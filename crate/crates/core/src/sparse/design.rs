use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::{Integration, Panel};

/// Regression of a (direct) response on lagged levels and stationary regressors,
/// together with the regressor row at the forecast origin.
///
/// With horizon `h ≥ 1` row `t` explains `y_{t+h} - y_t` and the forecast adds
/// the fitted value to `y_T`. With `h = 0` (nowcast) row `t` explains
/// `y_t - y_{t-1}` given contemporaneous `Δx_t`, and the nowcast adds the fitted
/// value to `y_{T-1}`; the final target observation is never read.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleEqDesign {
    pub target: String,
    pub target_index: usize,
    pub h: usize,
    pub p: usize,
    pub target_order: Integration,
    pub response: DVector<f64>,
    /// Lagged levels `z_{t-1}`; empty for PADL.
    pub levels: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub level_labels: Vec<String>,
    pub w_labels: Vec<String>,
    pub origin_levels: DVector<f64>,
    pub origin_w: DVector<f64>,
    /// Level the fitted response is added to at the origin.
    pub base: f64,
}

impl SingleEqDesign {
    pub fn rows(&self) -> usize {
        self.response.len()
    }

    pub fn ncols(&self) -> usize {
        self.levels.ncols() + self.w.ncols()
    }

    pub fn labels(&self) -> Vec<String> {
        self.level_labels.iter().chain(&self.w_labels).cloned().collect()
    }

    /// `[levels | w]` and the response restricted to `rows`.
    pub fn regression(&self, rows: Range<usize>) -> (DMatrix<f64>, DVector<f64>) {
        let n = rows.len();
        let (l, m) = (self.levels.ncols(), self.w.ncols());
        let mut x = DMatrix::zeros(n, l + m);
        x.view_mut((0, 0), (n, l)).copy_from(&self.levels.rows(rows.start, n));
        x.view_mut((0, l), (n, m)).copy_from(&self.w.rows(rows.start, n));
        (x, self.response.rows(rows.start, n).into_owned())
    }

    /// Regressor row at `row` (design coordinates).
    pub fn row(&self, row: usize) -> DVector<f64> {
        let l = self.levels.ncols();
        DVector::from_fn(self.ncols(), |j, _| if j < l { self.levels[(row, j)] } else { self.w[(row, j - l)] })
    }

    pub fn origin_row(&self) -> DVector<f64> {
        let l = self.levels.ncols();
        DVector::from_fn(self.ncols(), |j, _| if j < l { self.origin_levels[j] } else { self.origin_w[j - l] })
    }

    /// Same design without the levels block.
    pub fn without_levels(&self) -> SingleEqDesign {
        SingleEqDesign {
            levels: DMatrix::zeros(self.rows(), 0),
            level_labels: Vec::new(),
            origin_levels: DVector::zeros(0),
            ..self.clone()
        }
    }
}

fn check(panel: &Panel, target: usize) -> Result<()> {
    if target >= panel.nseries() {
        return Err(Error::param(format!("target index {target} out of range for {} series", panel.nseries())));
    }
    if !panel.is_balanced() {
        return Err(Error::InvalidPanel("single-equation designs need a balanced window".into()));
    }
    Ok(())
}

/// Estimation rows `start..=end` (0-based panel rows) for horizon `h`.
fn row_span(t: usize, start: usize, h: usize) -> Result<(usize, usize)> {
    let lead = h.max(1);
    if t < start + lead + 3 {
        return Err(Error::insufficient(format!("{t} observations are too few for h = {h} with this lag depth")));
    }
    let end = t - 1 - lead;
    Ok((start, end))
}

fn response_at(y: &[f64], s: usize, h: usize, order: Integration) -> f64 {
    let o = if h == 0 { s - 1 } else { s };
    let lead = h.max(1);
    match order {
        Integration::I0 => y[o + lead],
        Integration::I1 => y[o + lead] - y[o],
        Integration::I2 => y[o + lead] - y[o] - (y[o] - y[o - 1]),
    }
}

fn base_at(y: &[f64], t: usize, h: usize, order: Integration) -> f64 {
    let o = if h == 0 { t - 2 } else { t - 1 };
    match order {
        Integration::I0 => 0.0,
        Integration::I1 => y[o],
        Integration::I2 => 2.0 * y[o] - y[o - 1],
    }
}

/// SPECS design: response `y_{t+h} - y_t`, levels `z_{t-1}` of every series,
/// `w_t = (Δx_t, Δz_{t-1}, .., Δz_{t-p})`.
pub fn specs_design(panel: &Panel, target: usize, p: usize, h: usize) -> Result<SingleEqDesign> {
    specs_design_ordered(panel, target, Integration::I1, p, h)
}

/// [`specs_design`] with the direct response built for a target of the given
/// order (I(2): `y_{t+h} - y_t - Δy_t`; I(0): `y_{t+h}`).
pub fn specs_design_ordered(panel: &Panel, target: usize, order: Integration, p: usize, h: usize) -> Result<SingleEqDesign> {
    check(panel, target)?;
    let (t, n) = (panel.nobs(), panel.nseries());
    let z = panel.values();
    let names = panel.names();
    let (start, end) = row_span(t, (p + 1).max(order.order() + usize::from(h == 0)), h)?;
    let y = panel.column(target);
    let rows = end - start + 1;
    let dz = |s: usize, i: usize| z[(s, i)] - z[(s - 1, i)];
    let w_at = |s: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).filter(|&i| i != target).map(|i| dz(s, i)).collect();
        for j in 1..=p {
            v.extend((0..n).map(|i| dz(s - j, i)));
        }
        v
    };
    let m = n * (p + 1) - 1;
    let mut levels = DMatrix::zeros(rows, n);
    let mut w = DMatrix::zeros(rows, m);
    let mut response = DVector::zeros(rows);
    for (r, s) in (start..=end).enumerate() {
        levels.set_row(r, &z.row(s - 1));
        w.set_row(r, &DVector::from_vec(w_at(s)).transpose());
        response[r] = response_at(y, s, h, order);
    }
    let mut w_labels: Vec<String> = (0..n).filter(|&i| i != target).map(|i| format!("d.{}", names[i])).collect();
    for j in 1..=p {
        w_labels.extend((0..n).map(|i| format!("d.{}.l{j}", names[i])));
    }
    Ok(SingleEqDesign {
        target: names[target].clone(),
        target_index: target,
        h,
        p,
        target_order: order,
        response,
        levels,
        w,
        level_labels: names.iter().map(|s| format!("{s}.l1")).collect(),
        w_labels,
        origin_levels: z.row(t - 2).transpose(),
        origin_w: DVector::from_vec(w_at(t - 1)),
        base: base_at(y, t, h, order),
    })
}

/// PADL design: every series differenced to stationarity per `orders`; the
/// response follows the target's order; `w_t` holds contemporaneous
/// transformed values of the other series and `p` lags of all of them.
pub fn padl_design(panel: &Panel, target: usize, orders: &[Integration], p: usize, h: usize) -> Result<SingleEqDesign> {
    check(panel, target)?;
    let (t, n) = (panel.nobs(), panel.nseries());
    if orders.len() != n {
        return Err(Error::param(format!("{} integration orders for {n} series", orders.len())));
    }
    let names = panel.names();
    let z = panel.values();
    let d: Vec<usize> = orders.iter().map(|o| o.order()).collect();
    let dmax = d.iter().copied().max().unwrap_or(0);
    let tx = |s: usize, i: usize| match d[i] {
        0 => z[(s, i)],
        1 => z[(s, i)] - z[(s - 1, i)],
        _ => z[(s, i)] - 2.0 * z[(s - 1, i)] + z[(s - 2, i)],
    };
    let order_y = orders[target];
    let start = (p + dmax).max(order_y.order() + usize::from(h == 0));
    let (start, end) = row_span(t, start, h)?;
    let y = panel.column(target);
    let w_at = |s: usize| -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).filter(|&i| i != target).map(|i| tx(s, i)).collect();
        for j in 1..=p {
            v.extend((0..n).map(|i| tx(s - j, i)));
        }
        v
    };
    let rows = end - start + 1;
    let m = n * (p + 1) - 1;
    let mut w = DMatrix::zeros(rows, m);
    let mut response = DVector::zeros(rows);
    for (r, s) in (start..=end).enumerate() {
        w.set_row(r, &DVector::from_vec(w_at(s)).transpose());
        response[r] = response_at(y, s, h, order_y);
    }
    let label = |i: usize| match d[i] {
        0 => names[i].clone(),
        1 => format!("d.{}", names[i]),
        _ => format!("d2.{}", names[i]),
    };
    let mut w_labels: Vec<String> = (0..n).filter(|&i| i != target).map(label).collect();
    for j in 1..=p {
        w_labels.extend((0..n).map(|i| format!("{}.l{j}", label(i))));
    }
    Ok(SingleEqDesign {
        target: names[target].clone(),
        target_index: target,
        h,
        p,
        target_order: order_y,
        response,
        levels: DMatrix::zeros(rows, 0),
        w,
        level_labels: Vec::new(),
        w_labels,
        origin_levels: DVector::zeros(0),
        origin_w: DVector::from_vec(w_at(t - 1)),
        base: base_at(y, t, h, order_y),
    })
}
