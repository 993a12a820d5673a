//! Bootstrap model confidence sets on loss differentials.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{awb_fill, check_gamma};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_LOSS_OBS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    /// Membership at the requested level.
    pub members: Vec<bool>,
    /// MCS p-value of every model (1 for the last survivor).
    pub pvalues: Vec<f64>,
    /// Models in elimination order.
    pub eliminated: Vec<usize>,
}

/// Model confidence set of the columns of `losses` (`n x m`).
///
/// Elimination uses the range statistic `max_{i,j} |d̄_ij| / se_ij`; the
/// bootstrap draws centred differential means with autoregressive wild
/// multipliers (parameter `gamma`), which also provide `se_ij`. The worst model
/// `argmax_i max_j d̄_ij / se_ij` is removed at each step; MCS p-values are
/// running maxima, so membership is monotone in `alpha`.
pub fn mcs(losses: &DMatrix<f64>, alpha: f64, gamma: f64, reps: usize, seed: u64) -> Result<McsResult> {
    let (n, m) = losses.shape();
    if m < 2 {
        return Err(Error::param("a model confidence set needs at least two methods"));
    }
    if n < MIN_LOSS_OBS {
        return Err(Error::insufficient(format!("MCS needs at least {MIN_LOSS_OBS} loss observations, got {n}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("alpha = {alpha} outside (0, 1)")));
    }
    check_gamma(gamma)?;
    if reps == 0 {
        return Err(Error::param("bootstrap replications must be positive"));
    }
    if losses.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("loss matrix contains missing values"));
    }
    let means: Vec<f64> = (0..m).map(|j| losses.column(j).mean()).collect();
    // bootstrap means of the centred losses, reps x m
    let mut boot = DMatrix::zeros(reps, m);
    let mut rng = rng::substream(seed, &[rng::stream::MCS]);
    let mut xi = vec![0.0; n];
    for b in 0..reps {
        awb_fill(&mut rng, gamma, &mut xi);
        for j in 0..m {
            let mut acc = 0.0;
            for t in 0..n {
                acc += (losses[(t, j)] - means[j]) * xi[t];
            }
            boot[(b, j)] = acc / n as f64;
        }
    }
    let mut var = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            let v = (0..reps).map(|b| (boot[(b, i)] - boot[(b, j)]).powi(2)).sum::<f64>() / reps as f64;
            var[(i, j)] = v;
            var[(j, i)] = v;
        }
    }
    let t_stat = |i: usize, j: usize| {
        let d = means[i] - means[j];
        let v = var[(i, j)];
        if v > 0.0 {
            d / v.sqrt()
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    };
    let mut alive: Vec<usize> = (0..m).collect();
    let mut pvalues = vec![1.0; m];
    let mut eliminated = Vec::new();
    let mut running: f64 = 0.0;
    while alive.len() > 1 {
        let mut stat: f64 = 0.0;
        let mut worst = (alive[0], f64::NEG_INFINITY);
        for &i in &alive {
            let mut row_max = f64::NEG_INFINITY;
            for &j in &alive {
                if i != j {
                    let t = t_stat(i, j);
                    stat = stat.max(t.abs());
                    row_max = row_max.max(t);
                }
            }
            if row_max > worst.1 || (row_max == worst.1 && means[i] > means[worst.0]) {
                worst = (i, row_max);
            }
        }
        if stat == 0.0 {
            break;
        }
        let mut exceed = 0usize;
        for b in 0..reps {
            let mut tb: f64 = 0.0;
            for (a, &i) in alive.iter().enumerate() {
                for &j in &alive[..a] {
                    let v = var[(i, j)];
                    if v > 0.0 {
                        tb = tb.max((boot[(b, i)] - boot[(b, j)]).abs() / v.sqrt());
                    }
                }
            }
            if tb >= stat {
                exceed += 1;
            }
        }
        let p = exceed as f64 / reps as f64;
        running = running.max(p);
        pvalues[worst.0] = running;
        eliminated.push(worst.0);
        alive.retain(|&i| i != worst.0);
    }
    let members = (0..m).map(|i| !eliminated.contains(&i) || pvalues[i] >= alpha).collect();
    Ok(McsResult { members, pvalues, eliminated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn losses(n: usize, shifts: &[f64], seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, shifts.len(), |_, j| {
            let e: f64 = rng.sample(StandardNormal);
            e * e + shifts[j]
        })
    }

    #[test]
    fn clearly_worse_model_is_removed() {
        let l = losses(200, &[0.0, 5.0], 1);
        let out = mcs(&l, 0.1, 0.5, 499, 2).unwrap();
        assert_eq!(out.members, vec![true, false]);
    }

    #[test]
    fn identical_losses_keep_everything() {
        let l = losses(50, &[0.0], 3);
        let dup = DMatrix::from_fn(50, 3, |t, _| l[(t, 0)]);
        let out = mcs(&dup, 0.1, 0.5, 99, 4).unwrap();
        assert_eq!(out.members, vec![true; 3]);
    }

    #[test]
    fn preconditions() {
        assert!(mcs(&DMatrix::zeros(29, 2), 0.1, 0.5, 10, 0).is_err());
        assert!(mcs(&DMatrix::zeros(40, 1), 0.1, 0.5, 10, 0).is_err());
    }

    #[test]
    fn best_model_survives_and_alpha_monotone() {
        for seed in 0..20 {
            let l = losses(80, &[0.0, 0.2, 0.4, 0.6], seed);
            let best = (0..4).min_by(|&a, &b| l.column(a).mean().total_cmp(&l.column(b).mean())).unwrap();
            let lo = mcs(&l, 0.05, 0.5, 199, seed).unwrap();
            let hi = mcs(&l, 0.25, 0.5, 199, seed).unwrap();
            assert!(lo.members[best] && hi.members[best]);
            for i in 0..4 {
                assert!(!hi.members[i] || lo.members[i]);
            }
        }
    }
}
