//! Vote aggregation over base-classifier predictions.
//!
//! Static voting picks the most frequent label per sample (smallest label
//! on ties). Stochastic voting draws the label with probability equal to
//! its vote share whenever a sample's votes are not unanimous.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BendError, Result};

/// `m × n` class predictions; row `i` holds classifier `i`'s labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMatrix {
    m: usize,
    n: usize,
    preds: Vec<usize>,
}

impl PredictionMatrix {
    pub fn new(m: usize, n: usize, preds: Vec<usize>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(BendError::input("prediction matrix needs m ≥ 1 and n ≥ 1"));
        }
        if preds.len() != m * n {
            return Err(BendError::input(format!(
                "{} predictions for a {m}×{n} matrix",
                preds.len()
            )));
        }
        Ok(PredictionMatrix { m, n, preds })
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(BendError::input("ragged prediction rows"));
        }
        PredictionMatrix::new(rows.len(), n, rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.preds[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.preds.chunks(self.n)
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> usize {
        self.preds[i * self.n + k]
    }

    pub fn column(&self, k: usize) -> Vec<usize> {
        (0..self.m).map(|i| self.get(i, k)).collect()
    }

    /// Label → vote count for sample `k`, in ascending label order.
    pub fn column_counts(&self, k: usize) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for i in 0..self.m {
            *counts.entry(self.get(i, k)).or_insert(0) += 1;
        }
        counts
    }

    fn check_target(&self, target: &[usize]) -> Result<()> {
        if target.len() != self.n {
            return Err(BendError::input(format!(
                "target has {} labels but the matrix has {} samples",
                target.len(),
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoteMethod {
    Sbend,
    Abend,
}

impl std::str::FromStr for VoteMethod {
    type Err = BendError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sbend" => Ok(VoteMethod::Sbend),
            "abend" => Ok(VoteMethod::Abend),
            other => Err(BendError::input(format!("unknown vote method '{other}' (sbend|abend)"))),
        }
    }
}

impl std::fmt::Display for VoteMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VoteMethod::Sbend => "sbend",
            VoteMethod::Abend => "abend",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub inferred: Vec<usize>,
    pub accuracy: f64,
    pub method: VoteMethod,
    pub seed: Option<u64>,
}

fn matching_accuracy(inferred: &[usize], target: &[usize]) -> f64 {
    let hits = inferred.iter().zip(target).filter(|(a, b)| a == b).count();
    hits as f64 / target.len() as f64
}

/// Majority label of one sample's votes; ascending enumeration, first max.
pub fn majority_label(counts: &BTreeMap<usize, usize>) -> usize {
    let mut best = None;
    for (&label, &c) in counts {
        match best {
            Some((_, bc)) if bc >= c => {}
            _ => best = Some((label, c)),
        }
    }
    best.expect("non-empty column").0
}

pub fn sbend(preds: &PredictionMatrix, target: &[usize]) -> Result<EnsembleResult> {
    preds.check_target(target)?;
    let inferred: Vec<usize> = (0..preds.n())
        .map(|k| majority_label(&preds.column_counts(k)))
        .collect();
    Ok(EnsembleResult {
        accuracy: matching_accuracy(&inferred, target),
        inferred,
        method: VoteMethod::Sbend,
        seed: None,
    })
}

/// Draws a label with probability `count / m` using the stream reserved for
/// sample `k`.
fn draw_label(counts: &BTreeMap<usize, usize>, m: usize, seed: u64, k: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let mut ticket = rng.random_range(0..m);
    for (&label, &c) in counts {
        if ticket < c {
            return label;
        }
        ticket -= c;
    }
    unreachable!("vote counts sum to m")
}

pub fn abend(preds: &PredictionMatrix, target: &[usize], seed: u64) -> Result<EnsembleResult> {
    preds.check_target(target)?;
    let inferred: Vec<usize> = (0..preds.n())
        .map(|k| {
            let counts = preds.column_counts(k);
            if counts.len() > 1 {
                draw_label(&counts, preds.m(), seed, k)
            } else {
                *counts.keys().next().expect("non-empty column")
            }
        })
        .collect();
    Ok(EnsembleResult {
        accuracy: matching_accuracy(&inferred, target),
        inferred,
        method: VoteMethod::Abend,
        seed: Some(seed),
    })
}

/// Expected stochastic-vote accuracy: the mean over samples of the true
/// label's vote share.
pub fn abend_expected_accuracy(preds: &PredictionMatrix, target: &[usize]) -> Result<f64> {
    preds.check_target(target)?;
    let share: f64 = (0..preds.n())
        .map(|k| {
            let hits = (0..preds.m()).filter(|&i| preds.get(i, k) == target[k]).count();
            hits as f64 / preds.m() as f64
        })
        .sum();
    Ok(share / preds.n() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbendTrials {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Runs stochastic voting with seeds `seed, seed+1, …, seed+trials−1`.
pub fn abend_trials(preds: &PredictionMatrix, target: &[usize], seed: u64, trials: usize) -> Result<AbendTrials> {
    if trials == 0 {
        return Err(BendError::input("trials must be ≥ 1"));
    }
    let n = preds.n();
    let correct = (0..trials as u64)
        .map(|i| {
            abend(preds, target, seed.wrapping_add(i))
                .map(|r| r.inferred.iter().zip(target).filter(|(a, b)| a == b).count() as u128)
        })
        .collect::<Result<Vec<_>>>()?;
    // Integer moments keep the mean exact and within [min, max].
    let t = trials as u128;
    let sum: u128 = correct.iter().sum();
    let sum_sq: u128 = correct.iter().map(|c| c * c).sum();
    let mean = sum as f64 / (t as f64 * n as f64);
    let var = (t * sum_sq - sum * sum) as f64 / (t * t) as f64;
    let accuracies = correct.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(AbendTrials {
        accuracies,
        mean,
        std: var.sqrt() / n as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStats {
    pub per_classifier: Vec<f64>,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    /// Fraction of samples at least one classifier gets right.
    pub potential: f64,
}

pub fn baseline_stats(preds: &PredictionMatrix, target: &[usize]) -> Result<BaselineStats> {
    preds.check_target(target)?;
    let per_classifier: Vec<f64> = preds.rows().map(|r| matching_accuracy(r, target)).collect();
    let max = per_classifier.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // From integer counts, so the mean never rounds above the max.
    let correct: usize = preds
        .rows()
        .map(|r| r.iter().zip(target).filter(|(a, b)| a == b).count())
        .sum();
    let mean = correct as f64 / (preds.m() * preds.n()) as f64;
    let mut sorted = per_classifier.clone();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    let covered = (0..preds.n())
        .filter(|&k| (0..preds.m()).any(|i| preds.get(i, k) == target[k]))
        .count();
    Ok(BaselineStats {
        per_classifier,
        max,
        mean,
        median,
        potential: covered as f64 / preds.n() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iou0() -> (PredictionMatrix, Vec<usize>) {
        let p = PredictionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        (p, vec![0, 0, 0])
    }

    #[test]
    fn unanimous_correct() {
        let t = vec![2, 0, 1, 1];
        let p = PredictionMatrix::from_rows(&[t.clone(), t.clone(), t.clone()]).unwrap();
        let s = sbend(&p, &t).unwrap();
        assert_eq!(s.inferred, t);
        assert_eq!(s.accuracy, 1.0);
        for seed in 0..20 {
            assert_eq!(abend(&p, &t, seed).unwrap().inferred, t);
        }
    }

    #[test]
    fn disjoint_errors_fixed_by_majority() {
        let (p, t) = iou0();
        assert_eq!(sbend(&p, &t).unwrap().accuracy, 1.0);
    }

    #[test]
    fn tie_breaks_to_smallest_label() {
        let p = PredictionMatrix::from_rows(&[vec![2], vec![1]]).unwrap();
        assert_eq!(sbend(&p, &[1]).unwrap().inferred, vec![1]);
        let p = PredictionMatrix::from_rows(&[vec![5], vec![3], vec![5], vec![3], vec![4]]).unwrap();
        assert_eq!(sbend(&p, &[0]).unwrap().inferred, vec![3]);
    }

    #[test]
    fn dimension_mismatch() {
        let (p, _) = iou0();
        assert!(matches!(sbend(&p, &[0, 0]), Err(BendError::Input(_))));
        assert!(abend(&p, &[0], 1).is_err());
        assert!(baseline_stats(&p, &[0; 4]).is_err());
        assert!(PredictionMatrix::new(0, 3, vec![]).is_err());
    }

    #[test]
    fn minority_vote_rate_matches_two_thirds() {
        let p = PredictionMatrix::from_rows(&[vec![0], vec![0], vec![1]]).unwrap();
        let trials = 30_000u64;
        let hits = (0..trials)
            .filter(|&s| abend(&p, &[0], s).unwrap().accuracy == 1.0)
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 2.0 / 3.0).abs() < 0.01, "{rate}");
    }

    #[test]
    fn single_classifier_baselines() {
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 1, 0]]).unwrap();
        let b = baseline_stats(&p, &[0, 1, 0, 0]).unwrap();
        assert_eq!((b.max, b.mean, b.median, b.potential), (0.75, 0.75, 0.75, 0.75));
    }

    #[test]
    fn iou_scenario_baselines() {
        let (p, t) = iou0();
        let b = baseline_stats(&p, &t).unwrap();
        assert!(b.per_classifier.iter().all(|&a| (a - 2.0 / 3.0).abs() < 1e-15));
        assert_eq!(b.potential, 1.0);
        let same = PredictionMatrix::from_rows(&[vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0]]).unwrap();
        assert!((baseline_stats(&same, &t).unwrap().potential - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn even_median_is_midpoint() {
        let p = PredictionMatrix::from_rows(&[vec![0, 0], vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        let b = baseline_stats(&p, &[0, 0]).unwrap();
        // accuracies 1, 0.5, 0, 1
        assert_eq!(b.median, 0.75);
    }

    fn matrix_strategy() -> impl Strategy<Value = (PredictionMatrix, Vec<usize>)> {
        (1usize..6, 1usize..8).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0usize..3, m * n),
                proptest::collection::vec(0usize..3, n),
            )
                .prop_map(move |(p, t)| (PredictionMatrix::new(m, n, p).unwrap(), t))
        })
    }

    proptest! {
        #[test]
        fn baseline_ordering((p, t) in matrix_strategy()) {
            let b = baseline_stats(&p, &t).unwrap();
            prop_assert!(b.potential >= b.max);
            prop_assert!(b.max >= b.mean);
            prop_assert!(sbend(&p, &t).unwrap().accuracy <= b.potential);
        }

        #[test]
        fn sbend_row_permutation_invariant((p, t) in matrix_strategy(), rot in 0usize..6) {
            let mut rows: Vec<Vec<usize>> = p.rows().map(<[usize]>::to_vec).collect();
            let len = rows.len();
            rows.rotate_left(rot % len);
            rows.reverse();
            let q = PredictionMatrix::from_rows(&rows).unwrap();
            prop_assert_eq!(sbend(&p, &t).unwrap(), sbend(&q, &t).unwrap());
        }

        #[test]
        fn single_row_abend_is_identity(row in proptest::collection::vec(0usize..4, 1..10), seed: u64) {
            let t = vec![0; row.len()];
            let p = PredictionMatrix::from_rows(std::slice::from_ref(&row)).unwrap();
            prop_assert_eq!(abend(&p, &t, seed).unwrap().inferred, row);
        }
    }

    #[test]
    fn abend_mean_converges_to_vote_share() {
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 2, 0], vec![1, 1, 0, 0], vec![0, 2, 2, 1], vec![2, 1, 2, 0]])
            .unwrap();
        let t = vec![0, 1, 2, 1];
        let expected = abend_expected_accuracy(&p, &t).unwrap();
        let trials = abend_trials(&p, &t, 0, 100_000).unwrap();
        assert!((trials.mean - expected).abs() < 0.01, "{} vs {expected}", trials.mean);
    }
}
