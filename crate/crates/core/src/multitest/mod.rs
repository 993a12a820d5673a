//! Multiple unit-root testing on bootstrap union statistics and
//! Pantula-style classification into orders of integration.

mod bfdr;
mod bsqt;
mod iadf;
mod pantula;

pub use bfdr::{bfdr_critical_values, classify_bfdr, classify_bfdr_raw};
pub use bsqt::{classify_bsqt, classify_bsqt_raw, BsqtConfig, BsqtOutcome};
pub use iadf::{classify_bonferroni, classify_iadf, classify_iadf_raw};
pub use pantula::{mackinnon_ct_critical, naive_lag, pantula_classify, ClassifyConfig};

use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapUnion;
use crate::error::{Error, Result};
use crate::panel::Integration;
use crate::unitroot::UNION_SCALE;

/// Multiple-testing control applied within a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Iadf,
    Bsqt,
    Bfdr,
    Naive,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iadf" => Ok(Method::Iadf),
            "bsqt" => Ok(Method::Bsqt),
            "bfdr" => Ok(Method::Bfdr),
            "naive" => Ok(Method::Naive),
            other => Err(Error::Config(format!("unknown classification method '{other}'"))),
        }
    }
}

/// Round structure of the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    One,
    Two,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one" | "1" => Ok(Strategy::One),
            "two" | "2" => Ok(Strategy::Two),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// Statistics sorted from most to least significant.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedStats {
    pub stats: Vec<f64>,
    /// `order[k]` is the series holding the `k`-th smallest statistic.
    pub order: Vec<usize>,
}

impl RankedStats {
    pub fn new(stats: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..stats.len()).collect();
        order.sort_by(|&a, &b| stats[a].total_cmp(&stats[b]).then(a.cmp(&b)));
        RankedStats {
            stats: stats.to_vec(),
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    /// `k`-th order statistic (0-based).
    pub fn ordered(&self, k: usize) -> f64 {
        self.stats[self.order[k]]
    }

    /// Rejection mask for the `count` most significant series.
    pub fn prefix_mask(&self, count: usize) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        for &i in &self.order[..count] {
            mask[i] = true;
        }
        mask
    }
}

/// One test decision in the classification trail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub hypothesis: String,
    pub statistic: f64,
    pub cutoff: f64,
    pub rejected: bool,
}

/// Outcome of a classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub series: Vec<String>,
    pub order: Vec<Integration>,
    pub method: Method,
    pub strategy: Strategy,
    pub rounds: Vec<RoundRecord>,
}

impl IntegrationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rejections of one round together with its decision trail.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub rejected: Vec<bool>,
    pub records: Vec<RoundRecord>,
}

pub(crate) fn ensure_comparable(bu: &BootstrapUnion) -> Result<()> {
    if bu.scale != UNION_SCALE {
        return Err(Error::param(format!(
            "union statistics scaled to {} instead of the common target {}",
            bu.scale, UNION_SCALE
        )));
    }
    if bu.union_boot.ncols() != bu.nseries() {
        return Err(Error::param("bootstrap matrix does not match the series count"));
    }
    Ok(())
}
