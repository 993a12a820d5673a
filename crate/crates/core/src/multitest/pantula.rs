use serde::{Deserialize, Serialize};

use super::{
    classify_bfdr, classify_bsqt, classify_iadf, BsqtConfig, IntegrationReport, Method, RoundOutcome, RoundRecord,
    Strategy,
};
use crate::bootstrap::{bootstrap_union_distribution, AwbConfig};
use crate::error::{Error, Result};
use crate::panel::{self, DeterministicSpec, Integration, Panel};
use crate::rng;
use crate::unitroot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub awb: AwbConfig,
    pub bsqt: BsqtConfig,
    /// Series known a priori to be I(2); used by strategy one only.
    pub a_priori_i2: Vec<bool>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            awb: AwbConfig::default(),
            bsqt: BsqtConfig::default(),
            a_priori_i2: Vec::new(),
        }
    }
}

/// Fixed lag of the naive procedure: `floor((T - 1)^{1/3})`.
pub fn naive_lag(t: usize) -> usize {
    ((t.saturating_sub(1)) as f64).cbrt().floor() as usize
}

/// Response-surface critical value of the ADF test with constant and trend.
pub fn mackinnon_ct_critical(alpha: f64, t: usize) -> Result<f64> {
    let t = t as f64;
    let (b0, b1, b2) = if (alpha - 0.01).abs() < 1e-12 {
        (-3.95877, -9.0531, -28.428)
    } else if (alpha - 0.05).abs() < 1e-12 {
        (-3.41049, -4.3904, -9.036)
    } else if (alpha - 0.10).abs() < 1e-12 {
        (-3.12705, -2.5856, -3.925)
    } else {
        return Err(Error::Config(format!(
            "the naive method supports alpha in {{0.01, 0.05, 0.10}}, got {alpha}"
        )));
    };
    Ok(b0 + b1 / t + b2 / (t * t))
}

fn naive_round(panel: &Panel, alpha: f64) -> Result<RoundOutcome> {
    let mut rejected = Vec::new();
    let mut records = Vec::new();
    for i in 0..panel.nseries() {
        let len = panel.nobs() - panel.first_valid(i);
        let stat = unitroot::adf_stat(panel.column(i), DeterministicSpec::Trend, naive_lag(len))?;
        let cutoff = mackinnon_ct_critical(alpha, len)?;
        let rej = stat < cutoff;
        rejected.push(rej);
        records.push(RoundRecord {
            hypothesis: format!("{}: unit root", panel.names()[i]),
            statistic: stat,
            cutoff,
            rejected: rej,
        });
    }
    Ok(RoundOutcome { rejected, records })
}

fn test_round(panel: &Panel, method: Method, cfg: &ClassifyConfig, round: u64, label: &str) -> Result<RoundOutcome> {
    let mut out = if method == Method::Naive {
        naive_round(panel, cfg.awb.alpha)?
    } else {
        let awb = AwbConfig {
            seed: rng::derive(cfg.awb.seed, &[rng::stream::PANTULA, round]),
            ..cfg.awb.clone()
        };
        let bu = bootstrap_union_distribution(panel, &awb)?;
        match method {
            Method::Iadf => classify_iadf(&bu, awb.alpha)?,
            Method::Bfdr => classify_bfdr(&bu, awb.alpha)?,
            Method::Bsqt => {
                let bsqt = BsqtConfig {
                    alpha: awb.alpha,
                    ..cfg.bsqt.clone()
                };
                classify_bsqt(&bu, &bsqt)?.round
            }
            Method::Naive => unreachable!(),
        }
    };
    for r in &mut out.records {
        r.hypothesis = format!("{label}: {}", r.hypothesis);
    }
    Ok(out)
}

/// Classify every series as I(0), I(1) or I(2).
///
/// Strategy two tests first differences (non-rejection: I(2)) and then the
/// levels of the remaining series. Strategy one runs a single round on levels,
/// entering the a-priori I(2) series in first differences.
pub fn pantula_classify(panel: &Panel, method: Method, strategy: Strategy, cfg: &ClassifyConfig) -> Result<IntegrationReport> {
    let n = panel.nseries();
    let mut order = vec![Integration::I1; n];
    let mut rounds = Vec::new();
    match strategy {
        Strategy::Two => {
            let diffs = panel::difference(panel, 1)?;
            let r1 = test_round(&diffs, method, cfg, 1, "differences")?;
            rounds.extend(r1.records);
            let survivors: Vec<usize> = (0..n).filter(|&i| r1.rejected[i]).collect();
            for i in 0..n {
                if !r1.rejected[i] {
                    order[i] = Integration::I2;
                }
            }
            if !survivors.is_empty() {
                let levels = panel.select_columns(&survivors);
                let r2 = test_round(&levels, method, cfg, 2, "levels")?;
                rounds.extend(r2.records);
                for (k, &i) in survivors.iter().enumerate() {
                    order[i] = if r2.rejected[k] { Integration::I0 } else { Integration::I1 };
                }
            }
        }
        Strategy::One => {
            let prior = if cfg.a_priori_i2.is_empty() {
                vec![false; n]
            } else if cfg.a_priori_i2.len() == n {
                cfg.a_priori_i2.clone()
            } else {
                return Err(Error::Config(format!(
                    "a-priori I(2) list has {} entries for {} series",
                    cfg.a_priori_i2.len(),
                    n
                )));
            };
            let diffs = panel::difference(panel, 1)?;
            let mut values = panel.values().clone();
            for i in (0..n).filter(|&i| prior[i]) {
                values.set_column(i, &diffs.values().column(i));
            }
            let mixed = panel.with_values(values)?;
            let r = test_round(&mixed, method, cfg, 1, "levels")?;
            rounds.extend(r.records);
            for i in 0..n {
                order[i] = match (prior[i], r.rejected[i]) {
                    (false, true) => Integration::I0,
                    (false, false) => Integration::I1,
                    (true, true) => Integration::I1,
                    (true, false) => Integration::I2,
                };
            }
        }
    }
    Ok(IntegrationReport {
        series: panel.names().to_vec(),
        order,
        method,
        strategy,
        rounds,
    })
}
