use nalgebra::DMatrix;

use super::{ensure_comparable, RankedStats, RoundOutcome, RoundRecord};
use crate::bootstrap::BootstrapUnion;
use crate::error::Result;

pub fn classify_bfdr(bu: &BootstrapUnion, alpha: f64) -> Result<RoundOutcome> {
    ensure_comparable(bu)?;
    Ok(classify_bfdr_raw(&bu.union_stats(), &bu.union_boot, alpha))
}

/// Bootstrap step-down constants `c_1..c_N` on the sign-flipped scale `T = -UR`
/// (`c[j-1]` applies when `j` hypotheses remain untested).
///
/// `c_j` assumes the `j` least significant series are true nulls and the rest
/// are already (correctly) rejected; it is the smallest value keeping the
/// bootstrap estimate of `E[F / (N - j + F)]` at or below `alpha`, given the
/// constants `c_1..c_{j-1}` used in later steps.
pub fn bfdr_critical_values(stats: &[f64], boot: &DMatrix<f64>, alpha: f64) -> Vec<f64> {
    let n = stats.len();
    let reps = boot.nrows();
    let ranked = RankedStats::new(stats);
    // least significant first
    let nulls: Vec<usize> = ranked.order.iter().rev().copied().collect();
    // per replication: sign-flipped null statistics, sorted descending
    let mut sorted: Vec<Vec<f64>> = vec![Vec::with_capacity(n); reps];
    let mut c: Vec<f64> = Vec::with_capacity(n);
    let mut tops: Vec<(f64, f64)> = Vec::with_capacity(reps);
    for j in 1..=n {
        let series = nulls[j - 1];
        for (b, s) in sorted.iter_mut().enumerate() {
            let v = -boot[(b, series)];
            let pos = s.partition_point(|&x| x > v);
            s.insert(pos, v);
        }
        let rejected_before = (n - j) as f64;
        tops.clear();
        for s in &sorted {
            // false rejections if the first null passes: continue while the
            // next largest null exceeds the constant of the following step
            let mut f = 1;
            while f < j && s[f] > c[j - f - 1] {
                f += 1;
            }
            tops.push((s[0], f as f64 / (rejected_before + f as f64)));
        }
        tops.sort_by(|a, b| b.0.total_cmp(&a.0));
        let budget = alpha * reps as f64;
        let mut acc = 0.0;
        let mut cj = f64::NEG_INFINITY;
        let mut k = 0;
        while k < reps {
            // group ties: a cutoff can only sit between distinct values
            let v = tops[k].0;
            let mut group = 0.0;
            let mut e = k;
            while e < reps && tops[e].0 == v {
                group += tops[e].1;
                e += 1;
            }
            if acc + group > budget + 1e-12 {
                cj = v;
                break;
            }
            acc += group;
            k = e;
        }
        c.push(cj);
    }
    c
}

/// Step-down FDR control on raw inputs.
pub fn classify_bfdr_raw(stats: &[f64], boot: &DMatrix<f64>, alpha: f64) -> RoundOutcome {
    let n = stats.len();
    let ranked = RankedStats::new(stats);
    let c = bfdr_critical_values(stats, boot, alpha);
    let mut records = Vec::new();
    let mut count = 0;
    for k in 0..n {
        let j = n - k;
        let stat = ranked.ordered(k);
        let cutoff = -c[j - 1];
        let rejected = stat < cutoff;
        records.push(RoundRecord {
            hypothesis: format!("step {}: {} remaining under the unit-root null", k + 1, j),
            statistic: stat,
            cutoff,
            rejected,
        });
        if !rejected {
            break;
        }
        count += 1;
    }
    RoundOutcome {
        rejected: ranked.prefix_mask(count),
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_series_matches_individual_test() {
        let boot = DMatrix::from_fn(199, 1, |b, _| -3.0 + 0.02 * b as f64);
        for s in [-4.0, -2.85, -2.0] {
            let out = classify_bfdr_raw(&[s], &boot, 0.05);
            let ind = crate::multitest::iadf::classify_iadf_raw(&[s], &boot, 0.05, &[]);
            assert_eq!(out.rejected, ind.rejected, "stat {s}");
        }
    }

    proptest! {
        #[test]
        fn rejections_form_a_prefix(seed in 0u64..500, n in 2usize..8) {
            use rand::{Rng, SeedableRng};
            let mut rng = crate::rng::Rng::seed_from_u64(seed);
            let boot = DMatrix::from_fn(200, n, |_, _| rng.random::<f64>() * -3.0);
            let stats: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * -5.0).collect();
            let out = classify_bfdr_raw(&stats, &boot, 0.1);
            let ranked = RankedStats::new(&stats);
            let count = out.rejected.iter().filter(|r| **r).count();
            prop_assert_eq!(out.rejected, ranked.prefix_mask(count));
        }
    }
}
