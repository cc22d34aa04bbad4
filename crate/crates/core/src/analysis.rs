//! Prediction diversity, wrong-set overlap, exact vote-scenario
//! enumeration, and the generation-vs-training cost model.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::ensemble::{abend, majority_label, PredictionMatrix};
use crate::error::{BendError, Result};

pub type Rational = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WithinDiversity {
    /// Ordered-pair disagreement count divided by `m − 1`.
    pub raw: f64,
    /// Same count divided by `m(m − 1)n`, in `[0, 1]`.
    pub rate: f64,
    /// Number of `(i, j, k)` with `i ≠ j` and `p_i[k] ≠ p_j[k]`.
    pub disagreements: u64,
}

/// Within-set diversity of one prediction matrix.
///
/// Counts disagreements per sample as `m² − Σ_c count_c²` rather than
/// looping over pairs.
pub fn diversity_within(p: &PredictionMatrix) -> Result<WithinDiversity> {
    let m = p.m();
    if m < 2 {
        return Err(BendError::input("within-set diversity needs m ≥ 2"));
    }
    let m2 = (m * m) as u64;
    let disagreements: u64 = (0..p.n())
        .map(|k| {
            let same: u64 = p.column_counts(k).values().map(|&c| (c * c) as u64).sum();
            m2 - same
        })
        .sum();
    let pairs = (m * (m - 1)) as f64;
    Ok(WithinDiversity {
        raw: disagreements as f64 / (m - 1) as f64,
        rate: disagreements as f64 / (pairs * p.n() as f64),
        disagreements,
    })
}

/// Between-set diversity: row-paired disagreements divided by `m`.
pub fn diversity_between(p: &PredictionMatrix, q: &PredictionMatrix) -> Result<f64> {
    if p.m() != q.m() || p.n() != q.n() {
        return Err(BendError::shape(format!(
            "cannot pair a {}×{} matrix with a {}×{} matrix",
            p.m(),
            p.n(),
            q.m(),
            q.n()
        )));
    }
    let diff = p
        .rows()
        .zip(q.rows())
        .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
        .sum::<usize>();
    Ok(diff as f64 / p.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WrongSetIou {
    /// `|∩ W_i| / |∪ W_i|` over all classifiers.
    pub allway: f64,
    /// Mean of `|W_i ∩ W_j| / |W_i ∪ W_j|` over unordered pairs.
    pub pairwise_mean: f64,
}

pub fn wrong_set_iou(p: &PredictionMatrix, target: &[usize]) -> Result<WrongSetIou> {
    if p.m() < 2 {
        return Err(BendError::input("wrong-set IoU needs m ≥ 2"));
    }
    if target.len() != p.n() {
        return Err(BendError::input("target length differs from sample count"));
    }
    let wrong: Vec<Vec<bool>> = p
        .rows()
        .map(|r| r.iter().zip(target).map(|(a, b)| a != b).collect())
        .collect();
    let ratio = |inter: usize, union: usize| {
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    };
    let all_inter = (0..p.n()).filter(|&k| wrong.iter().all(|w| w[k])).count();
    let all_union = (0..p.n()).filter(|&k| wrong.iter().any(|w| w[k])).count();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..p.m() {
        for j in (i + 1)..p.m() {
            let inter = (0..p.n()).filter(|&k| wrong[i][k] && wrong[j][k]).count();
            let union = (0..p.n()).filter(|&k| wrong[i][k] || wrong[j][k]).count();
            total += ratio(inter, union);
            pairs += 1;
        }
    }
    Ok(WrongSetIou {
        allway: ratio(all_inter, all_union),
        pairwise_mean: total / pairs as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiversityReport {
    pub d_i_raw: f64,
    pub d_i_rate: f64,
    pub d_o: Option<f64>,
    pub m: usize,
    pub n: usize,
}

pub fn diversity_report(p: &PredictionMatrix, q: Option<&PredictionMatrix>) -> Result<DiversityReport> {
    let w = diversity_within(p)?;
    let d_o = q.map(|q| diversity_between(p, q)).transpose()?;
    Ok(DiversityReport {
        d_i_raw: w.raw,
        d_i_rate: w.rate,
        d_o,
        m: p.m(),
        n: p.n(),
    })
}

/// Votes received by one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleVotes {
    pub counts: BTreeMap<usize, usize>,
    pub truth: usize,
}

impl SampleVotes {
    pub fn new(counts: impl IntoIterator<Item = (usize, usize)>, truth: usize) -> Self {
        let mut map = BTreeMap::new();
        for (label, c) in counts {
            if c > 0 {
                *map.entry(label).or_insert(0) += c;
            }
        }
        SampleVotes { counts: map, truth }
    }

    fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Per-sample vote profiles of `m` classifiers over `n` samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteScenario {
    samples: Vec<SampleVotes>,
    m: usize,
}

impl VoteScenario {
    pub fn new(samples: Vec<SampleVotes>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| BendError::input("scenario has no samples"))?;
        let m = first.total();
        if m == 0 {
            return Err(BendError::input("scenario has no votes"));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.total() != m {
                return Err(BendError::input(format!(
                    "sample {k} has {} votes, expected {m}",
                    s.total()
                )));
            }
        }
        Ok(VoteScenario { samples, m })
    }

    pub fn from_predictions(p: &PredictionMatrix, target: &[usize]) -> Result<Self> {
        if target.len() != p.n() {
            return Err(BendError::input("target length differs from sample count"));
        }
        let samples = (0..p.n())
            .map(|k| SampleVotes {
                counts: p.column_counts(k),
                truth: target[k],
            })
            .collect();
        VoteScenario::new(samples)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[SampleVotes] {
        &self.samples
    }

    /// One prediction matrix realising the profiles (votes dealt to
    /// classifiers in ascending label order) and its target vector.
    pub fn to_predictions(&self) -> (PredictionMatrix, Vec<usize>) {
        let mut data = vec![0; self.m * self.n()];
        for (k, s) in self.samples.iter().enumerate() {
            let mut i = 0;
            for (&label, &c) in &s.counts {
                for _ in 0..c {
                    data[i * self.n() + k] = label;
                    i += 1;
                }
            }
        }
        let target = self.samples.iter().map(|s| s.truth).collect();
        (
            PredictionMatrix::new(self.m, self.n(), data).expect("validated"),
            target,
        )
    }
}

/// Distribution of the number of correctly labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyDistribution {
    pub n: usize,
    /// correct count → probability
    pub probabilities: BTreeMap<usize, Rational>,
    /// `false` when estimated by Monte Carlo (probabilities are frequencies).
    pub exact: bool,
}

impl AccuracyDistribution {
    pub fn accuracy(&self, correct: usize) -> Rational {
        Rational::new(correct as u64, self.n as u64)
    }

    pub fn total(&self) -> Rational {
        self.probabilities
            .values()
            .fold(Rational::from_integer(0), |a, &b| a + b)
    }

    pub fn expected_accuracy(&self) -> f64 {
        self.probabilities
            .iter()
            .map(|(&c, p)| ratio_f64(self.accuracy(c)) * ratio_f64(*p))
            .sum()
    }

    /// Total-variation distance to an empirical histogram of correct counts.
    pub fn tv_distance(&self, histogram: &BTreeMap<usize, u64>) -> f64 {
        let trials: u64 = histogram.values().sum();
        let keys: std::collections::BTreeSet<usize> =
            self.probabilities.keys().chain(histogram.keys()).copied().collect();
        0.5 * keys
            .into_iter()
            .map(|c| {
                let p = self.probabilities.get(&c).map_or(0.0, |r| ratio_f64(*r));
                let q = histogram.get(&c).map_or(0.0, |&h| h as f64 / trials as f64);
                (p - q).abs()
            })
            .sum::<f64>()
    }
}

pub fn ratio_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub sbend_accuracy: Rational,
    pub abend: AccuracyDistribution,
}

/// Largest `mⁿ` enumerated exactly; bigger scenarios fall back to sampling.
pub const MAX_ENUMERATION: u64 = 1_000_000;
const FALLBACK_TRIALS: u64 = 100_000;

/// Exact stochastic-vote accuracy distribution by walking every combination
/// of per-sample draws, plus the static-vote accuracy.
pub fn enumerate_scenario(s: &VoteScenario) -> Result<ScenarioOutcome> {
    let n = s.n();
    let m = s.m() as u64;
    let sbend_correct = s
        .samples
        .iter()
        .filter(|v| majority_label(&v.counts) == v.truth)
        .count();
    let sbend_accuracy = Rational::new(sbend_correct as u64, n as u64);

    let space = u32::try_from(n).ok().and_then(|n| m.checked_pow(n));
    let abend = match space {
        Some(size) if size <= MAX_ENUMERATION => enumerate_exact(s),
        _ => {
            log::warn!(
                "vote scenario with m={m}, n={n} exceeds {MAX_ENUMERATION} combinations; using {FALLBACK_TRIALS} Monte Carlo trials"
            );
            monte_carlo(s, FALLBACK_TRIALS)?
        }
    };
    Ok(ScenarioOutcome { sbend_accuracy, abend })
}

fn enumerate_exact(s: &VoteScenario) -> AccuracyDistribution {
    let m = s.m() as u64;
    // per sample: (is_correct, probability) for each distinct label
    let options: Vec<Vec<(bool, Rational)>> = s
        .samples
        .iter()
        .map(|v| {
            v.counts
                .iter()
                .map(|(&label, &c)| (label == v.truth, Rational::new(c as u64, m)))
                .collect()
        })
        .collect();
    let mut probabilities = BTreeMap::new();
    let mut idx = vec![0usize; options.len()];
    loop {
        let mut p = Rational::from_integer(1);
        let mut correct = 0;
        for (opts, &i) in options.iter().zip(&idx) {
            let (hit, q) = opts[i];
            p *= q;
            correct += usize::from(hit);
        }
        *probabilities
            .entry(correct)
            .or_insert_with(|| Rational::from_integer(0)) += p;

        // odometer increment
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return AccuracyDistribution {
                    n: s.n(),
                    probabilities,
                    exact: true,
                };
            }
            idx[pos] += 1;
            if idx[pos] < options[pos].len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Empirical histogram of correct counts from `trials` stochastic votes
/// with seeds `0..trials`.
pub fn abend_histogram(s: &VoteScenario, trials: u64) -> Result<BTreeMap<usize, u64>> {
    let (p, t) = s.to_predictions();
    let mut hist = BTreeMap::new();
    for seed in 0..trials {
        let r = abend(&p, &t, seed)?;
        let correct = r.inferred.iter().zip(&t).filter(|(a, b)| a == b).count();
        *hist.entry(correct).or_insert(0) += 1;
    }
    Ok(hist)
}

fn monte_carlo(s: &VoteScenario, trials: u64) -> Result<AccuracyDistribution> {
    let hist = abend_histogram(s, trials)?;
    Ok(AccuracyDistribution {
        n: s.n(),
        probabilities: hist.into_iter().map(|(c, h)| (c, Rational::new(h, trials))).collect(),
        exact: false,
    })
}

/// One illustrative three-classifier, three-sample configuration.
#[derive(Debug, Clone)]
pub struct IouScenario {
    pub label: &'static str,
    pub scenario: VoteScenario,
    pub reported_sbend: f64,
    /// Rounded (accuracy, probability) pairs as published.
    pub reported_abend: &'static [(f64, f64)],
}

/// The three canonical configurations in which every classifier scores 2/3:
/// disjoint errors, partially shared errors with a wrong majority on one
/// sample, and fully shared errors. Truth is label 0; errors vote label 1.
pub fn iou_scenarios() -> Vec<IouScenario> {
    let correct = |c: usize| SampleVotes::new([(0, c), (1, 3 - c)], 0);
    vec![
        IouScenario {
            label: "0",
            scenario: VoteScenario::new(vec![correct(2), correct(2), correct(2)]).expect("valid"),
            reported_sbend: 1.0,
            reported_abend: &[(1.0, 0.3), (2.0 / 3.0, 0.44), (1.0 / 3.0, 0.22), (0.0, 0.04)],
        },
        IouScenario {
            label: "0.667",
            scenario: VoteScenario::new(vec![correct(1), correct(2), correct(3)]).expect("valid"),
            reported_sbend: 2.0 / 3.0,
            reported_abend: &[(1.0, 0.22), (2.0 / 3.0, 0.56), (1.0 / 3.0, 0.22)],
        },
        IouScenario {
            label: "1",
            scenario: VoteScenario::new(vec![correct(0), correct(3), correct(3)]).expect("valid"),
            reported_sbend: 2.0 / 3.0,
            reported_abend: &[(2.0 / 3.0, 1.0)],
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModelInputs {
    /// Epochs to train one model to convergence.
    pub k_pre: u64,
    /// Fine-tuning epochs (snapshots).
    pub k: u64,
    /// Seconds per training epoch.
    pub t_orge: f64,
    /// Autoencoder training time.
    pub t_ate: f64,
    /// Diffusion model training time.
    pub t_ddpm: f64,
    /// Seconds to generate one classifier.
    pub t_sgen: f64,
}

impl CostModelInputs {
    /// Measured values for a ResNet-50 / CIFAR-10 run.
    pub const REFERENCE: CostModelInputs = CostModelInputs {
        k_pre: 100,
        k: 200,
        t_orge: 28.0,
        t_ate: 931.39,
        t_ddpm: 857.14,
        t_sgen: 2.35,
    };

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_orge", self.t_orge),
            ("t_ate", self.t_ate),
            ("t_ddpm", self.t_ddpm),
            ("t_sgen", self.t_sgen),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BendError::input(format!("{name} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    /// Diffusion route: train once, fine-tune, fit both models, then
    /// generate `m` classifiers.
    pub fn t_diff(&self, m: f64) -> f64 {
        (self.k_pre + self.k) as f64 * self.t_orge + self.t_ate + self.t_ddpm + m * self.t_sgen
    }

    /// Conventional route: train `m` classifiers from scratch.
    pub fn t_trad(&self, m: f64) -> f64 {
        m * self.k_pre as f64 * self.t_orge
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub t_diff: f64,
    pub t_trad: f64,
    pub breakeven_m: f64,
}

pub fn cost_model(c: &CostModelInputs, m: u64) -> Result<CostEstimate> {
    c.validate()?;
    let denom = c.k_pre as f64 * c.t_orge - c.t_sgen;
    if denom <= 0.0 {
        return Err(BendError::UndefinedBreakEven(format!(
            "k_pre·t_orge ({}) must exceed t_sgen ({})",
            c.k_pre as f64 * c.t_orge,
            c.t_sgen
        )));
    }
    let fixed = (c.k_pre + c.k) as f64 * c.t_orge + c.t_ate + c.t_ddpm;
    Ok(CostEstimate {
        t_diff: c.t_diff(m as f64),
        t_trad: c.t_trad(m as f64),
        breakeven_m: fixed / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_within(p: &PredictionMatrix) -> u64 {
        let mut count = 0;
        for i in 0..p.m() {
            for j in 0..p.m() {
                for k in 0..p.n() {
                    if i != j && p.get(i, k) != p.get(j, k) {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn identical_rows_have_no_diversity() {
        let p = PredictionMatrix::from_rows(&[vec![1, 2, 0], vec![1, 2, 0]]).unwrap();
        let d = diversity_within(&p).unwrap();
        assert_eq!((d.raw, d.rate), (0.0, 0.0));
        assert_eq!(diversity_between(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn one_disagreement_hand_count() {
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 2], vec![0, 1, 1]]).unwrap();
        let d = diversity_within(&p).unwrap();
        assert_eq!(d.raw, 2.0);
        assert!((d.rate - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn between_hand_count() {
        let p = PredictionMatrix::from_rows(&[vec![0, 1, 2], vec![0, 0, 0]]).unwrap();
        let q = PredictionMatrix::from_rows(&[vec![0, 1, 1], vec![1, 0, 0]]).unwrap();
        assert_eq!(diversity_between(&p, &q).unwrap(), 1.0);
        let r = PredictionMatrix::from_rows(&[vec![0, 1, 1]]).unwrap();
        assert!(diversity_between(&p, &r).is_err());
    }

    #[test]
    fn small_m_rejected() {
        let p = PredictionMatrix::from_rows(&[vec![0, 1]]).unwrap();
        assert!(diversity_within(&p).is_err());
        assert!(wrong_set_iou(&p, &[0, 1]).is_err());
    }

    #[test]
    fn iou_hand_cases() {
        let t = [0, 0, 0];
        let disjoint = PredictionMatrix::from_rows(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(wrong_set_iou(&disjoint, &t).unwrap().allway, 0.0);
        let same = PredictionMatrix::from_rows(&[vec![1, 0, 0], vec![1, 0, 0], vec![1, 0, 0]]).unwrap();
        let s = wrong_set_iou(&same, &t).unwrap();
        assert_eq!((s.allway, s.pairwise_mean), (1.0, 1.0));
        let mixed = PredictionMatrix::from_rows(&[vec![1, 0, 0], vec![1, 0, 0], vec![0, 1, 0]]).unwrap();
        let x = wrong_set_iou(&mixed, &t).unwrap();
        assert_eq!(x.allway, 0.0);
        assert!((x.pairwise_mean - 1.0 / 3.0).abs() < 1e-15);
        let perfect = PredictionMatrix::from_rows(&[vec![0, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(wrong_set_iou(&perfect, &t).unwrap().allway, 0.0);
    }

    fn r(a: u64, b: u64) -> Rational {
        Rational::new(a, b)
    }

    #[test]
    fn enumeration_of_iou_scenarios() {
        let sc = iou_scenarios();
        let o0 = enumerate_scenario(&sc[0].scenario).unwrap();
        assert_eq!(o0.sbend_accuracy, r(1, 1));
        let want: BTreeMap<usize, Rational> = [(3, r(8, 27)), (2, r(12, 27)), (1, r(6, 27)), (0, r(1, 27))].into();
        assert_eq!(o0.abend.probabilities, want);
        assert!(o0.abend.exact);

        let o1 = enumerate_scenario(&sc[1].scenario).unwrap();
        assert_eq!(o1.sbend_accuracy, r(2, 3));
        let want: BTreeMap<usize, Rational> = [(3, r(2, 9)), (2, r(5, 9)), (1, r(2, 9))].into();
        assert_eq!(o1.abend.probabilities, want);

        let o2 = enumerate_scenario(&sc[2].scenario).unwrap();
        assert_eq!(o2.sbend_accuracy, r(2, 3));
        let want: BTreeMap<usize, Rational> = [(2, r(1, 1))].into();
        assert_eq!(o2.abend.probabilities, want);
    }

    #[test]
    fn unanimous_correct_scenario() {
        let s = VoteScenario::new(vec![SampleVotes::new([(2, 4)], 2); 3]).unwrap();
        let o = enumerate_scenario(&s).unwrap();
        assert_eq!(o.sbend_accuracy, r(1, 1));
        assert_eq!(o.abend.probabilities, [(3, r(1, 1))].into());
    }

    #[test]
    fn bad_profile_sums_rejected() {
        let s = VoteScenario::new(vec![SampleVotes::new([(0, 2)], 0), SampleVotes::new([(0, 3)], 0)]);
        assert!(matches!(s, Err(BendError::Input(_))));
    }

    #[test]
    fn oversized_scenario_falls_back_to_sampling() {
        let s = VoteScenario::new(vec![SampleVotes::new([(0, 6), (1, 4)], 0); 7]).unwrap();
        let o = enumerate_scenario(&s).unwrap();
        assert!(!o.abend.exact);
        assert!((o.abend.expected_accuracy() - 0.6).abs() < 0.01);
    }

    #[test]
    fn reference_breakeven() {
        let e = cost_model(&CostModelInputs::REFERENCE, 1).unwrap();
        assert!((e.breakeven_m - 3.6418).abs() < 1e-3, "{}", e.breakeven_m);
        assert_eq!(e.t_trad, 2800.0);
        assert!((e.t_diff - 10190.88).abs() < 1e-9);
    }

    #[test]
    fn degenerate_breakeven_is_one() {
        let c = CostModelInputs {
            k_pre: 10,
            k: 0,
            t_orge: 3.0,
            t_ate: 0.0,
            t_ddpm: 0.0,
            t_sgen: 0.0,
        };
        assert_eq!(cost_model(&c, 1).unwrap().breakeven_m, 1.0);
    }

    #[test]
    fn undefined_breakeven() {
        let c = CostModelInputs {
            t_sgen: 5000.0,
            ..CostModelInputs::REFERENCE
        };
        assert!(matches!(cost_model(&c, 3), Err(BendError::UndefinedBreakEven(_))));
    }

    fn matrix(max_m: usize) -> impl Strategy<Value = (PredictionMatrix, Vec<usize>)> {
        (2usize..max_m, 1usize..9).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0usize..4, m * n),
                proptest::collection::vec(0usize..4, n),
            )
                .prop_map(move |(p, t)| (PredictionMatrix::new(m, n, p).unwrap(), t))
        })
    }

    proptest! {
        #[test]
        fn within_count_matches_triple_loop((p, _t) in matrix(7)) {
            let d = diversity_within(&p).unwrap();
            let count = naive_within(&p);
            prop_assert_eq!(d.disagreements, count);
            let mm1 = (p.m() - 1) as f64;
            prop_assert_eq!(d.raw * mm1, count as f64);
        }

        #[test]
        fn enumeration_sums_to_one((p, t) in matrix(5)) {
            let s = VoteScenario::from_predictions(&p, &t).unwrap();
            let o = enumerate_scenario(&s).unwrap();
            prop_assert_eq!(o.abend.total(), Rational::from_integer(1));
        }

        #[test]
        fn breakeven_balances_costs(
            k_pre in 1u64..500, k in 0u64..500, t_orge in 0.5f64..100.0,
            t_ate in 0.0f64..5000.0, t_ddpm in 0.0f64..5000.0, frac in 0.0f64..0.9,
        ) {
            let c = CostModelInputs { k_pre, k, t_orge, t_ate, t_ddpm, t_sgen: frac * k_pre as f64 * t_orge };
            let b = cost_model(&c, 1).unwrap().breakeven_m;
            let (d, tr) = (c.t_diff(b), c.t_trad(b));
            prop_assert!((d - tr).abs() <= 1e-9 * d.abs().max(1.0));
        }
    }

    #[test]
    fn cost_is_affine_in_m() {
        let c = CostModelInputs::REFERENCE;
        let a = cost_model(&c, 2).unwrap();
        let b = cost_model(&c, 7).unwrap();
        let slope_diff = (b.t_diff - a.t_diff) / 5.0;
        let slope_trad = (b.t_trad - a.t_trad) / 5.0;
        assert!((slope_diff - c.t_sgen).abs() < 1e-9);
        assert!((slope_trad - 2800.0).abs() < 1e-9);
        assert!((a.t_trad - 2.0 * 2800.0).abs() < 1e-9);
    }
}
