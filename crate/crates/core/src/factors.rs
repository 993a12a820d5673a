//! Principal-component factor extraction in differences and in levels, factor
//! counting, and the factor-based forecasters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ar::fit_ar_bic;
use crate::error::{Error, Result};
use crate::linalg::{canonical_signs, row_major, sym_eigen_desc};
use crate::panel::{detrend_series, DetCoef, DeterministicSpec, Panel};
use crate::vecm::{johansen_ml, vecm_iterated_forecast};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Λ'Λ/N = I` with loadings from differenced data.
    Differences,
    /// First `r_ns` factors scaled by `T^-2`, the next `r_s` by `T^-1`.
    Levels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    /// `N x k`.
    #[serde(with = "row_major")]
    pub lambda: DMatrix<f64>,
    /// `T x k`.
    #[serde(with = "row_major")]
    pub factors: DMatrix<f64>,
    pub normalization: Normalization,
    pub r_ns: usize,
    pub r_s: usize,
    /// Eigenvalues of the second-moment matrix used, non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Deterministic terms of `z_i - λ_i' f_t` (differences normalisation only).
    pub deterministics: Vec<DetCoef>,
}

impl FactorModel {
    pub fn k(&self) -> usize {
        self.lambda.ncols()
    }

    /// `T x N` common component `f_t' Λ'`.
    pub fn common_component(&self) -> DMatrix<f64> {
        &self.factors * self.lambda.transpose()
    }
}

fn balanced(panel: &Panel, what: &str) -> Result<()> {
    if !panel.is_balanced() {
        return Err(Error::InvalidPanel(format!("{what} needs a balanced estimation window")));
    }
    Ok(())
}

/// Leading `k` eigenpairs of `X'X` (`X` is `rows x cols`) returned as
/// (eigenvalues, `cols x k` unit eigenvectors), computed on the smaller Gram matrix.
fn leading_right(x: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = x.shape();
    if cols <= rows {
        let (vals, vecs) = sym_eigen_desc(&(x.transpose() * x));
        let mut v = vecs.columns(0, k).into_owned();
        canonical_signs(&mut v);
        (vals.iter().copied().collect(), v)
    } else {
        let (vals, u) = sym_eigen_desc(&(x * x.transpose()));
        let mut v = DMatrix::zeros(cols, k);
        for j in 0..k {
            let l = vals[j].max(0.0);
            if l > 0.0 {
                v.set_column(j, &(x.transpose() * u.column(j) / l.sqrt()));
            }
        }
        canonical_signs(&mut v);
        let mut all: Vec<f64> = vals.iter().copied().collect();
        all.resize(cols, 0.0);
        (all, v)
    }
}

/// Factors from differenced data: detrend each series by its OLS trend slope,
/// take loadings `√N W` from the eigenvectors of the covariance of the
/// differences and factors `f_t = Λ' z̃_t / N` from the detrended levels.
pub fn extract_factors_diff(panel: &Panel, k: usize) -> Result<FactorModel> {
    balanced(panel, "factor extraction")?;
    let (t, n) = (panel.nobs(), panel.nseries());
    if t < 3 || k > n.min(t - 2) {
        return Err(Error::param(format!("cannot extract {k} factors from N = {n}, T = {t}")));
    }
    let mut ztil = DMatrix::zeros(t, n);
    for i in 0..n {
        let (_, c) = detrend_series(panel.column(i), DeterministicSpec::Trend)?;
        for s in 0..t {
            ztil[(s, i)] = panel.values()[(s, i)] - c.tau * (s + 1) as f64;
        }
    }
    let dz = DMatrix::from_fn(t - 1, n, |s, i| ztil[(s + 1, i)] - ztil[(s, i)]);
    let (vals, w) = leading_right(&dz, k);
    let scale = 1.0 / (t - 1) as f64;
    let eigenvalues: Vec<f64> = vals.iter().take(n).map(|v| v * scale).collect();
    let lambda = w * (n as f64).sqrt();
    let factors = &ztil * &lambda / n as f64;
    let common = &factors * lambda.transpose();
    let mut deterministics = Vec::with_capacity(n);
    for i in 0..n {
        let resid: Vec<f64> = (0..t).map(|s| panel.values()[(s, i)] - common[(s, i)]).collect();
        let (_, c) = detrend_series(&resid, DeterministicSpec::Trend)?;
        deterministics.push(c);
    }
    Ok(FactorModel {
        lambda,
        factors,
        normalization: Normalization::Differences,
        r_ns: k,
        r_s: 0,
        eigenvalues,
        deterministics,
    })
}

/// Factors from levels: eigenvectors of `Z'Z` (`T x T`), the leading `r_ns`
/// scaled so that `T^-2 Σ f f' = I`, the next `r_s` so that `T^-1 Σ f f' = I`.
/// Loadings are the least-squares coefficients of the data on the factors.
pub fn extract_factors_levels(panel: &Panel, r_ns: usize, r_s: usize) -> Result<FactorModel> {
    balanced(panel, "factor extraction")?;
    let (t, n) = (panel.nobs(), panel.nseries());
    let k = r_ns + r_s;
    if k > n.min(t) {
        return Err(Error::param(format!("cannot extract {k} factors from N = {n}, T = {t}")));
    }
    let z = panel.values();
    // right singular directions of Z' are the T-dimensional eigenvectors of Z Z'
    let (vals, v) = leading_right(&z.transpose(), k);
    let tf = t as f64;
    let mut factors = DMatrix::zeros(t, k);
    for j in 0..k {
        let s = if j < r_ns { tf } else { tf.sqrt() };
        factors.set_column(j, &(v.column(j) * s));
    }
    let mut lambda = DMatrix::zeros(n, k);
    for j in 0..k {
        let f = factors.column(j);
        let ff = f.norm_squared();
        if ff > 0.0 {
            lambda.set_column(j, &(z.transpose() * f / ff));
        }
    }
    Ok(FactorModel {
        lambda,
        factors,
        normalization: Normalization::Levels,
        r_ns,
        r_s,
        eigenvalues: vals.into_iter().take(n.min(t)).collect(),
        deterministics: vec![DetCoef { mu: 0.0, tau: 0.0 }; n],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// `IC_p2` on standardised first differences.
    DiffIc,
    /// `IPC_2` on demeaned levels (number of non-stationary factors).
    LevelsIpc,
}

/// Mean squared residual after removing `k` principal components, for `k = 0..=kmax`.
fn residual_variances(x: &DMatrix<f64>, kmax: usize) -> Vec<f64> {
    let (rows, cols) = x.shape();
    let total = x.norm_squared();
    let gram = if cols <= rows { x.transpose() * x } else { x * x.transpose() };
    let (vals, _) = sym_eigen_desc(&gram);
    let nt = (rows * cols) as f64;
    let mut out = Vec::with_capacity(kmax + 1);
    let mut removed = 0.0;
    for k in 0..=kmax {
        if k > 0 {
            removed += vals[k - 1].max(0.0);
        }
        out.push(((total - removed) / nt).max(0.0));
    }
    out
}

/// Number of factors minimising the chosen criterion over `0..=kmax`.
pub fn count_factors(panel: &Panel, mode: CountMode, kmax: usize) -> Result<usize> {
    balanced(panel, "factor counting")?;
    let (t, n) = (panel.nobs(), panel.nseries());
    if kmax > n.min(t) / 2 {
        return Err(Error::param(format!("kmax = {kmax} exceeds min(N, T)/2 = {}", n.min(t) / 2)));
    }
    if kmax == 0 {
        return Ok(0);
    }
    let z = panel.values();
    match mode {
        CountMode::DiffIc => {
            let mut x = DMatrix::from_fn(t - 1, n, |s, i| z[(s + 1, i)] - z[(s, i)]);
            standardise(&mut x);
            let (tt, nn) = ((t - 1) as f64, n as f64);
            let v = residual_variances(&x, kmax);
            let pen = (nn + tt) / (nn * tt) * nn.min(tt).ln();
            Ok(argmin((0..=kmax).map(|k| v[k].max(1e-300).ln() + k as f64 * pen)))
        }
        CountMode::LevelsIpc => {
            let mut x = z.clone();
            for mut col in x.column_iter_mut() {
                let m = col.mean();
                col.add_scalar_mut(-m);
            }
            let (tt, nn) = (t as f64, n as f64);
            let v = residual_variances(&x, kmax);
            let alpha = tt / (4.0 * tt.ln().ln());
            let pen = v[kmax] * alpha * (nn + tt) / (nn * tt) * nn.min(tt).ln();
            Ok(argmin((0..=kmax).map(|k| v[k] + k as f64 * pen)))
        }
    }
}

/// Total count from differences, non-stationary count from levels; returns `(r_ns, r_s)`.
pub fn count_factors_split(panel: &Panel, kmax: usize) -> Result<(usize, usize)> {
    let total = count_factors(panel, CountMode::DiffIc, kmax)?;
    let r_ns = count_factors(panel, CountMode::LevelsIpc, kmax)?.min(total);
    Ok((r_ns, total - r_ns))
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (k, v) in values.enumerate() {
        if v < best.1 {
            best = (k, v);
        }
    }
    best.0
}

fn standardise(x: &mut DMatrix<f64>) {
    let rows = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        let sd = (col.norm_squared() / rows).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
}

/// Forecast of the non-stationary dynamic factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct NdfmForecast {
    /// Level forecast `z_{i,T+h|T}` for every series.
    pub levels: Vec<f64>,
    /// `μ_i + τ_i (T + h)`.
    pub deterministic: Vec<f64>,
    /// `λ_i' f_{T+h|T}`.
    pub common: Vec<f64>,
    /// Idiosyncratic AR forecasts (zero when disabled).
    pub idiosyncratic: Vec<f64>,
}

/// Non-stationary dynamic factor forecast. Factors come from
/// [`extract_factors_diff`]; a Johansen VECM of rank `rank` with `p` lags is
/// fitted to them and iterated `h` steps. With `idio_ar` each idiosyncratic
/// component gets a BIC-selected AR(≤3) forecast added.
pub fn ndfm_forecast(panel: &Panel, k: usize, rank: usize, p: usize, h: usize, idio_ar: bool) -> Result<NdfmForecast> {
    let fm = extract_factors_diff(panel, k)?;
    let (t, n) = (panel.nobs(), panel.nseries());
    let f_h: DVector<f64> = if h == 0 || k == 0 {
        fm.factors.row(t - 1).transpose()
    } else {
        if rank > k {
            return Err(Error::param(format!("factor VECM rank {rank} exceeds the number of factors {k}")));
        }
        let fpanel = Panel::from_matrix(fm.factors.clone())?;
        let model = johansen_ml(&fpanel, rank, p, DeterministicSpec::Mean)?;
        vecm_iterated_forecast(&model, &fm.factors, h)?.row(h - 1).transpose()
    };
    let horizon = (t + h) as f64;
    let common_now = fm.common_component();
    let mut out = NdfmForecast {
        levels: vec![0.0; n],
        deterministic: vec![0.0; n],
        common: vec![0.0; n],
        idiosyncratic: vec![0.0; n],
    };
    for i in 0..n {
        let d = fm.deterministics[i];
        out.deterministic[i] = d.at(horizon);
        out.common[i] = (fm.lambda.row(i) * &f_h)[0];
        if idio_ar {
            let u: Vec<f64> = (0..t)
                .map(|s| panel.values()[(s, i)] - d.at((s + 1) as f64) - common_now[(s, i)])
                .collect();
            out.idiosyncratic[i] = if h == 0 {
                u[t - 1]
            } else {
                let ar = fit_ar_bic(&u, 3, false)?;
                ar.forecast(&u, h)[h - 1]
            };
        }
        out.levels[i] = out.deterministic[i] + out.common[i] + out.idiosyncratic[i];
    }
    Ok(out)
}

/// Factor-augmented error-correction forecast for `targets`: levels factors
/// (`r_ns` non-stationary, `r_s` stationary) are stacked with the targets and
/// a Johansen VECM of rank `rank` is iterated `h` steps.
pub fn fecm_forecast(panel: &Panel, targets: &[usize], r_ns: usize, r_s: usize, rank: usize, p: usize, h: usize) -> Result<Vec<f64>> {
    if targets.is_empty() {
        return Err(Error::param("FECM needs at least one target"));
    }
    if let Some(&bad) = targets.iter().find(|&&i| i >= panel.nseries()) {
        return Err(Error::param(format!("target index {bad} out of range")));
    }
    let stacked = fecm_system(panel, targets, r_ns, r_s)?;
    let model = johansen_ml(&stacked, rank, p, DeterministicSpec::Mean)?;
    let f = vecm_iterated_forecast(&model, stacked.values(), h)?;
    Ok((0..targets.len()).map(|j| f[(h - 1, j)]).collect())
}

/// Targets followed by levels factors, as one panel.
pub fn fecm_system(panel: &Panel, targets: &[usize], r_ns: usize, r_s: usize) -> Result<Panel> {
    let za = panel.select_columns(targets);
    if r_ns + r_s == 0 {
        return Ok(za);
    }
    let fm = extract_factors_levels(panel, r_ns, r_s)?;
    let names = (0..r_ns + r_s).map(|j| format!("factor{}", j + 1)).collect();
    let fp = Panel::new(fm.factors, names, panel.dates().to_vec())?;
    za.hstack(&fp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{simulate_factor_dgp, FactorDgpParams};
    use crate::linalg::canonical_correlations;

    fn params(n: usize, k: usize, idio_sd: f64, seed: u64) -> FactorDgpParams {
        use rand::{Rng, SeedableRng};
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        FactorDgpParams {
            lambda: DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() * 2.0 - 1.0 + 0.5),
            factor_i1: vec![true; k],
            factor_ar: vec![0.0; k],
            idio_i1: vec![false; n],
            idio_ar: vec![0.3; n],
            idio_sd: vec![idio_sd; n],
            mu: DVector::zeros(n),
            tau: DVector::zeros(n),
        }
    }

    #[test]
    fn exact_one_factor_reproduces_detrended_data() {
        let sim = simulate_factor_dgp(&params(10, 1, 0.0, 1), 80, 2).unwrap();
        let fm = extract_factors_diff(&sim.panel, 1).unwrap();
        let cc = fm.common_component();
        let mut ztil = sim.panel.values().clone();
        for i in 0..10 {
            let (_, c) = detrend_series(sim.panel.column(i), DeterministicSpec::Trend).unwrap();
            for s in 0..80 {
                ztil[(s, i)] -= c.tau * (s + 1) as f64;
            }
        }
        assert!((cc - ztil).amax() < 1e-6);
    }

    #[test]
    fn loadings_normalisation_and_rotation_invariance() {
        let sim = simulate_factor_dgp(&params(20, 3, 1.0, 3), 100, 4).unwrap();
        let fm = extract_factors_diff(&sim.panel, 3).unwrap();
        let g = fm.lambda.transpose() * &fm.lambda / 20.0;
        assert!((g - DMatrix::<f64>::identity(3, 3)).amax() < 1e-8);
        assert!(fm.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let rotated = (&fm.factors * &rot) * (&fm.lambda * &rot).transpose();
        assert!((rotated - fm.common_component()).amax() < 1e-8);
        let mut flipped = fm.clone();
        flipped.lambda.column_mut(1).neg_mut();
        flipped.factors.column_mut(1).neg_mut();
        assert!((flipped.common_component() - fm.common_component()).amax() < 1e-12);
    }

    #[test]
    fn differences_factors_span_true_factors() {
        let sim = simulate_factor_dgp(&params(50, 2, 0.5, 5), 200, 6).unwrap();
        let fm = extract_factors_diff(&sim.panel, 2).unwrap();
        // estimated factors carry no linear trend, so compare with detrended truth
        let mut truth = sim.factors.clone();
        for j in 0..2 {
            let col: Vec<f64> = truth.column(j).iter().copied().collect();
            let (_, c) = detrend_series(&col, DeterministicSpec::Trend).unwrap();
            for s in 0..200 {
                truth[(s, j)] -= c.tau * (s + 1) as f64;
            }
        }
        let cc = canonical_correlations(&fm.factors, &truth);
        assert!(cc[1] >= 0.95, "{cc:?}");
    }

    #[test]
    fn levels_normalisations_hold() {
        use rand::{Rng, SeedableRng};
        let mut rng = crate::rng::Rng::seed_from_u64(9);
        let z = DMatrix::from_fn(60, 15, |_, _| rng.random::<f64>());
        let panel = Panel::from_matrix(z).unwrap();
        let fm = extract_factors_levels(&panel, 2, 2).unwrap();
        let t = 60.0f64;
        let f = &fm.factors;
        let ns = f.columns(0, 2).transpose() * f.columns(0, 2) / (t * t);
        let st = f.columns(2, 2).transpose() * f.columns(2, 2) / t;
        assert!((ns - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        assert!((st - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        // without non-stationary factors: ordinary PCA on levels
        let pca = extract_factors_levels(&panel, 0, 3).unwrap();
        let (vals, _) = sym_eigen_desc(&(panel.values() * panel.values().transpose()));
        for j in 0..3 {
            assert!((pca.eigenvalues[j] - vals[j]).abs() < 1e-8 * vals[0]);
        }
        assert!(fm.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn levels_factor_tracks_random_walk() {
        let sim = simulate_factor_dgp(&params(30, 1, 0.0, 7), 150, 8).unwrap();
        let fm = extract_factors_levels(&sim.panel, 1, 0).unwrap();
        let cc = canonical_correlations(&fm.factors, &sim.factors);
        assert!(cc[0] > 0.999);
    }

    #[test]
    fn counting_edge_cases() {
        let sim = simulate_factor_dgp(&params(20, 2, 0.5, 1), 100, 2).unwrap();
        assert_eq!(count_factors(&sim.panel, CountMode::DiffIc, 0).unwrap(), 0);
        assert!(count_factors(&sim.panel, CountMode::DiffIc, 11).is_err());
        assert_eq!(count_factors(&sim.panel, CountMode::DiffIc, 6).unwrap(), 2);
        let noise = simulate_factor_dgp(&params(20, 0, 1.0, 3), 100, 4).unwrap();
        assert_eq!(count_factors(&noise.panel, CountMode::DiffIc, 6).unwrap(), 0);
    }

    #[test]
    fn ndfm_assembly_identities() {
        let sim = simulate_factor_dgp(&params(12, 2, 0.5, 11), 120, 12).unwrap();
        let f0 = ndfm_forecast(&sim.panel, 2, 1, 1, 0, false).unwrap();
        let fm = extract_factors_diff(&sim.panel, 2).unwrap();
        let last = fm.common_component().row(119).into_owned();
        for i in 0..12 {
            assert_eq!(f0.levels[i] - f0.deterministic[i], f0.common[i]);
            assert!((f0.common[i] - last[i]).abs() < 1e-12);
        }
        // idiosyncratic forecast at h = 0 restores the observation
        let f0i = ndfm_forecast(&sim.panel, 2, 1, 1, 0, true).unwrap();
        for i in 0..12 {
            assert!((f0i.levels[i] - sim.panel.values()[(119, i)]).abs() < 1e-9);
        }
        let f6 = ndfm_forecast(&sim.panel, 2, 1, 1, 6, true).unwrap();
        assert!(f6.levels.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn deterministic_only_panel() {
        let t = 50;
        let z = DMatrix::from_fn(t, 3, |s, i| 1.0 + i as f64 + 0.1 * (i + 1) as f64 * (s + 1) as f64);
        let panel = Panel::from_matrix(z).unwrap();
        let f = ndfm_forecast(&panel, 0, 0, 1, 5, false).unwrap();
        for i in 0..3 {
            let exact = 1.0 + i as f64 + 0.1 * (i + 1) as f64 * (t + 5) as f64;
            assert!((f.levels[i] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn fecm_without_factors_is_johansen() {
        let sim = simulate_factor_dgp(&params(4, 1, 0.5, 13), 150, 14).unwrap();
        let all: Vec<usize> = (0..4).collect();
        let f = fecm_forecast(&sim.panel, &all, 0, 0, 1, 1, 3).unwrap();
        let m = johansen_ml(&sim.panel, 1, 1, DeterministicSpec::Mean).unwrap();
        let g = vecm_iterated_forecast(&m, sim.panel.values(), 3).unwrap();
        for i in 0..4 {
            assert_eq!(f[i], g[(2, i)]);
        }
        let one = fecm_forecast(&sim.panel, &[0], 1, 0, 1, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
    }
}
