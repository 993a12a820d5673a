//! Expanding-window time-series cross-validation.

use std::ops::Range;

use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 5;

/// One split: fit on `train`, score on the block that immediately follows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Range<usize>,
    pub valid: Range<usize>,
}

/// `folds` consecutive validation blocks covering the second half of `n` rows,
/// each preceded by all earlier rows as training data.
pub fn expanding_folds(n: usize, folds: usize) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Config(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    let start = n / 2;
    let rest = n - start;
    if rest < folds || start == 0 {
        return Err(Error::insufficient(format!("{n} rows cannot be split into {folds} validation folds")));
    }
    let size = rest / folds;
    Ok((0..folds)
        .map(|k| {
            let a = start + k * size;
            let b = if k + 1 == folds { n } else { a + size };
            Fold { train: 0..a, valid: a..b }
        })
        .collect())
}

/// Index of the candidate with the smallest mean validation loss.
///
/// `shrinkage` orders candidates for tie-breaking: among equal losses the one
/// with more shrinkage wins. Candidates whose fit fails on some fold score
/// infinity; a single candidate is returned without scoring.
pub fn tscv_select<T>(
    candidates: &[T],
    folds: &[Fold],
    shrinkage: impl Fn(&T) -> f64,
    score: impl Fn(&T, &Fold) -> Result<f64>,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    if candidates.len() == 1 {
        return Ok((0, vec![f64::NAN]));
    }
    let losses: Vec<f64> = candidates
        .iter()
        .map(|c| {
            let mut total = 0.0;
            for f in folds {
                match score(c, f) {
                    Ok(v) if v.is_finite() => total += v,
                    _ => return f64::INFINITY,
                }
            }
            total / folds.len() as f64
        })
        .collect();
    let mut best = 0;
    for i in 1..candidates.len() {
        let (li, lb) = (losses[i], losses[best]);
        let tie = (li - lb).abs() <= 1e-12 * lb.abs().max(1e-300) || (li.is_infinite() && lb.is_infinite());
        if (li < lb && !tie) || (tie && shrinkage(&candidates[i]) > shrinkage(&candidates[best])) {
            best = i;
        }
    }
    Ok((best, losses))
}

/// Geometric grid from `max` down to `max * ratio`, `len` points, largest first.
pub fn geometric_grid(max: f64, ratio: f64, len: usize) -> Vec<f64> {
    if len <= 1 || max <= 0.0 {
        return vec![max.max(0.0)];
    }
    (0..len)
        .map(|k| max * ratio.powf(k as f64 / (len - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_never_precedes_training() {
        for n in [10, 37, 200] {
            let folds = expanding_folds(n, 5).unwrap();
            assert_eq!(folds.last().unwrap().valid.end, n);
            for f in &folds {
                assert_eq!(f.train.start, 0);
                assert_eq!(f.train.end, f.valid.start);
                assert!(!f.valid.is_empty());
            }
        }
        assert!(expanding_folds(6, 5).is_err());
        assert!(expanding_folds(100, 1).is_err());
    }

    #[test]
    fn single_candidate_and_ties() {
        let folds = expanding_folds(20, 2).unwrap();
        let (i, _) = tscv_select(&[3.0], &folds, |l| *l, |_, _| Err(Error::param("x"))).unwrap();
        assert_eq!(i, 0);
        let (i, _) = tscv_select(&[0.1, 5.0, 1.0], &folds, |l| *l, |_, _| Ok(2.0)).unwrap();
        assert_eq!(i, 1);
        let (i, _) = tscv_select(&[0.1, 5.0, 1.0], &folds, |l| *l, |l, _| Ok((l - 1.0).abs())).unwrap();
        assert_eq!(i, 2);
        assert!(tscv_select::<f64>(&[], &folds, |l| *l, |_, _| Ok(0.0)).is_err());
    }
}
