use nalgebra::DMatrix;

use super::{ensure_comparable, RoundOutcome, RoundRecord};
use crate::bootstrap::BootstrapUnion;
use crate::error::Result;
use crate::linalg::lower_quantile;

/// Individual union tests, each at level `alpha` against its own bootstrap distribution.
pub fn classify_iadf(bu: &BootstrapUnion, alpha: f64) -> Result<RoundOutcome> {
    ensure_comparable(bu)?;
    Ok(classify_iadf_raw(&bu.union_stats(), &bu.union_boot, alpha, &bu.series))
}

/// [`classify_iadf`] on raw inputs: `boot` is `B x N`.
pub fn classify_iadf_raw(stats: &[f64], boot: &DMatrix<f64>, alpha: f64, names: &[String]) -> RoundOutcome {
    let mut rejected = Vec::with_capacity(stats.len());
    let mut records = Vec::with_capacity(stats.len());
    for (i, &s) in stats.iter().enumerate() {
        let col: Vec<f64> = boot.column(i).iter().copied().collect();
        let cutoff = lower_quantile(&col, alpha);
        let rej = s < cutoff;
        rejected.push(rej);
        records.push(RoundRecord {
            hypothesis: format!("{}: unit root", names.get(i).map_or("?", String::as_str)),
            statistic: s,
            cutoff,
            rejected: rej,
        });
    }
    RoundOutcome { rejected, records }
}

/// Individual tests at level `alpha / N` (familywise reference procedure).
pub fn classify_bonferroni(bu: &BootstrapUnion, alpha: f64) -> Result<RoundOutcome> {
    ensure_comparable(bu)?;
    let n = bu.nseries().max(1) as f64;
    Ok(classify_iadf_raw(&bu.union_stats(), &bu.union_boot, alpha / n, &bu.series))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_rejection_when_all_above_cutoffs() {
        let boot = DMatrix::from_fn(200, 3, |b, _| -3.0 + b as f64 * 0.01);
        let out = classify_iadf_raw(&[0.0, 1.0, 2.0], &boot, 0.05, &[]);
        assert!(out.rejected.iter().all(|r| !r));
        let out = classify_iadf_raw(&[-5.0, 1.0, 2.0], &boot, 0.05, &[]);
        assert_eq!(out.rejected, vec![true, false, false]);
    }
}
