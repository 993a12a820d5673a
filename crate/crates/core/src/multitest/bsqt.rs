use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ensure_comparable, RankedStats, RoundOutcome, RoundRecord};
use crate::bootstrap::BootstrapUnion;
use crate::error::{Error, Result};
use crate::linalg::lower_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsqtConfig {
    /// Increasing quantiles starting at zero.
    pub quantiles: Vec<f64>,
    pub alpha: f64,
    /// Refine the count inside `[p_{J-1}, p_{J+1}]` with unit steps.
    pub iterate: bool,
}

impl BsqtConfig {
    /// Evenly spaced quantiles `0, step, 2 step, ..` below one.
    pub fn evenly_spaced(step: f64, alpha: f64) -> Result<Self> {
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::Config(format!("quantile step {step} outside (0, 1]")));
        }
        let k = ((1.0 - 1e-12) / step).floor() as usize;
        Ok(BsqtConfig {
            quantiles: (0..=k).map(|i| i as f64 * step).filter(|q| *q < 1.0).collect(),
            alpha,
            iterate: false,
        })
    }

    /// Tested counts `p_1 = 0 < p_2 < .. < p_K = N`.
    pub fn counts(&self, n: usize) -> Result<Vec<usize>> {
        if self.quantiles.first() != Some(&0.0) {
            return Err(Error::Config("BSQT quantiles must start at 0".into()));
        }
        if self.quantiles.windows(2).any(|w| w[1] <= w[0]) || self.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Config("BSQT quantiles must be increasing within [0, 1]".into()));
        }
        let mut p: Vec<usize> = self
            .quantiles
            .iter()
            .map(|q| ((q * n as f64).round() as usize).min(n))
            .collect();
        p.dedup();
        if p.last() != Some(&n) {
            p.push(n);
        }
        Ok(p)
    }
}

impl Default for BsqtConfig {
    fn default() -> Self {
        BsqtConfig::evenly_spaced(0.05, 0.05).expect("valid default")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsqtOutcome {
    /// Number of series classified I(0).
    pub count: usize,
    /// Uncertainty interval `[p_{J-1}, p_{J+1}]` of the first-stage grid.
    pub interval: (usize, usize),
    pub round: RoundOutcome,
}

pub fn classify_bsqt(bu: &BootstrapUnion, cfg: &BsqtConfig) -> Result<BsqtOutcome> {
    ensure_comparable(bu)?;
    classify_bsqt_raw(&bu.union_stats(), &bu.union_boot, cfg)
}

/// `m`-th smallest (1-based) bootstrap union value over `members`, per replication.
fn order_stat_quantile(boot: &DMatrix<f64>, members: &[usize], m: usize, alpha: f64, buf: &mut Vec<f64>) -> f64 {
    let reps = boot.nrows();
    let mut draws = Vec::with_capacity(reps);
    for b in 0..reps {
        buf.clear();
        buf.extend(members.iter().map(|&i| boot[(b, i)]));
        let (_, kth, _) = buf.select_nth_unstable_by(m - 1, f64::total_cmp);
        draws.push(*kth);
    }
    lower_quantile(&draws, alpha)
}

fn run_grid(ranked: &RankedStats, boot: &DMatrix<f64>, grid: &[usize], alpha: f64, records: &mut Vec<RoundRecord>) -> usize {
    let mut buf = Vec::new();
    let mut accepted = grid[0];
    for w in grid.windows(2) {
        let (pk, pnext) = (w[0], w[1]);
        let remaining = &ranked.order[pk..];
        let m = pnext - pk;
        let stat = ranked.ordered(pnext - 1);
        let cutoff = order_stat_quantile(boot, remaining, m, alpha, &mut buf);
        let rejected = stat < cutoff;
        records.push(RoundRecord {
            hypothesis: format!("{pk} of {} I(0) against at least {pnext}", ranked.len()),
            statistic: stat,
            cutoff,
            rejected,
        });
        if !rejected {
            return accepted;
        }
        accepted = pnext;
    }
    accepted
}

/// Sequential quantile test on raw inputs (`boot` is `B x N`, columns aligned with `stats`).
pub fn classify_bsqt_raw(stats: &[f64], boot: &DMatrix<f64>, cfg: &BsqtConfig) -> Result<BsqtOutcome> {
    let n = stats.len();
    let ranked = RankedStats::new(stats);
    let grid = cfg.counts(n)?;
    let mut records = Vec::new();
    if n == 0 {
        return Ok(BsqtOutcome {
            count: 0,
            interval: (0, 0),
            round: RoundOutcome { rejected: vec![], records },
        });
    }
    let count = run_grid(&ranked, boot, &grid, cfg.alpha, &mut records);
    let j = grid.iter().position(|&p| p == count).expect("count lies on the grid");
    let lo = if j > 0 { grid[j - 1] } else { grid[0] };
    let hi = grid.get(j + 1).copied().unwrap_or(n);
    let mut final_count = count;
    if cfg.iterate && hi > lo + 1 {
        let fine: Vec<usize> = (lo..=hi).collect();
        final_count = run_grid(&ranked, boot, &fine, cfg.alpha, &mut records);
    }
    Ok(BsqtOutcome {
        count: final_count,
        interval: (lo, hi),
        round: RoundOutcome {
            rejected: ranked.prefix_mask(final_count),
            records,
        },
    })
}
