//! Walk-forward partitioning, warm-start scheduling, error metrics and the
//! multi-seed stability protocol.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{warm_start_epochs, Model, ModelSpec, Prediction};
use crate::nn::Seed;
use crate::segmentation::Instance;
use crate::series::mean_std;

/// One train / validation / test window over the instance sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub n_instances: usize,
    pub train_len: usize,
    pub val_len: usize,
    pub test_len: usize,
    pub splits: Vec<Split>,
}

/// Successive, overlapping splits whose test windows tile the last
/// `n_splits * test` instances.
pub fn make_partitions(
    n_instances: usize,
    n_splits: usize,
    test: usize,
    val: usize,
    train: usize,
) -> Result<PartitionPlan> {
    if n_splits == 0 || test == 0 || train == 0 {
        return Err(Error::InvalidPartition(format!(
            "splits ({n_splits}), test size ({test}) and train size ({train}) must be >= 1"
        )));
    }
    let required = train + val + n_splits * test;
    if required > n_instances {
        return Err(Error::InsufficientData {
            required,
            available: n_instances,
        });
    }
    let splits = (0..n_splits)
        .map(|i| {
            let t = n_instances - (n_splits - i) * test;
            Split {
                train: t - val - train..t - val,
                val: t - val..t,
                test: t..t + test,
            }
        })
        .collect();
    Ok(PartitionPlan {
        n_instances,
        train_len: train,
        val_len: val,
        test_len: test,
        splits,
    })
}

impl PartitionPlan {
    /// Union of all test ranges.
    pub fn test_range(&self) -> Range<usize> {
        let first = self.splits.first().map_or(0, |s| s.test.start);
        first..self.n_instances
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartSchedule {
    /// Epochs over all splits: `E * (1 + (S - 1) * w)`.
    pub total_epochs: f64,
    /// Against cold training on every split: `S / (1 + (S - 1) * w)`.
    pub speedup: f64,
    /// Epochs actually run per split: `E`, then `ceil(w * E)` for each update.
    pub per_split: Vec<usize>,
}

pub fn warm_start_schedule(epochs: usize, n_splits: usize, fraction: f64) -> WarmStartSchedule {
    let e = epochs as f64;
    let updates = n_splits.saturating_sub(1);
    let mut per_split = vec![epochs];
    per_split.resize(n_splits.max(1), warm_start_epochs(epochs, fraction));
    WarmStartSchedule {
        total_epochs: e + e * updates as f64 * fraction,
        speedup: n_splits as f64 / (1.0 + updates as f64 * fraction),
        per_split,
    }
}

pub fn rmse(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sq: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / preds.len() as f64).sqrt())
}

/// `100 * (baseline - model) / baseline`.
pub fn percent_improvement(model_rmse: f64, baseline_rmse: f64) -> Result<f64> {
    if baseline_rmse == 0.0 {
        return Err(Error::UndefinedImprovement);
    }
    Ok(100.0 * (baseline_rmse - model_rmse) / baseline_rmse)
}

/// Slope, duration and average RMSE (or any per-metric triple).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub slope: f64,
    pub duration: f64,
    pub average: f64,
}

impl Metrics {
    pub fn of(preds: &[Prediction], instances: &[Instance]) -> Result<Self> {
        let col = |k: usize| -> (Vec<f64>, Vec<f64>) {
            (
                preds.iter().map(|p| p.pair()[k]).collect(),
                instances.iter().map(|i| i.target_pair()[k]).collect(),
            )
        };
        let (ps, ts) = col(0);
        let (pd, td) = col(1);
        let slope = rmse(&ps, &ts)?;
        let duration = rmse(&pd, &td)?;
        Ok(Self {
            slope,
            duration,
            average: (slope + duration) / 2.0,
        })
    }

    /// Per-metric improvement of `self` over `baseline`.
    pub fn improvement_over(&self, baseline: &Metrics) -> Result<Metrics> {
        Ok(Metrics {
            slope: percent_improvement(self.slope, baseline.slope)?,
            duration: percent_improvement(self.duration, baseline.duration)?,
            average: percent_improvement(self.average, baseline.average)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub predictions: Vec<Prediction>,
    /// Metrics on the validation window, from the model trained on this
    /// split's training window; `None` when the window is empty.
    pub validation: Option<Metrics>,
    pub test: Metrics,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkForward {
    pub splits: Vec<SplitOutcome>,
    /// RMSE over the concatenation of every split's test predictions.
    pub metrics: Metrics,
    pub epochs: usize,
}

impl WalkForward {
    pub fn predictions(&self) -> impl Iterator<Item = &Prediction> {
        self.splits.iter().flat_map(|s| s.predictions.iter())
    }
}

/// Train cold on the first split, then warm-start from the previous
/// split's model for every later one, predicting each test window.
pub fn walk_forward_evaluate(
    spec: &ModelSpec,
    instances: &[Instance],
    plan: &PartitionPlan,
    seed: Seed,
) -> Result<WalkForward> {
    if plan.n_instances != instances.len() {
        return Err(Error::InvalidPartition(format!(
            "plan covers {} instances, got {}",
            plan.n_instances,
            instances.len()
        )));
    }
    let mut outcomes = Vec::with_capacity(plan.splits.len());
    let mut model: Option<Model> = None;
    for (i, split) in plan.splits.iter().enumerate() {
        let train = &instances[split.train.clone()];
        let split_seed = seed.derive(i as u64);
        let (next, trace) = match &model {
            None => Model::fit(spec, train, split_seed)?,
            Some(prev) => prev.warm_start_fit(train, split_seed)?,
        };
        let validation = if split.val.is_empty() {
            None
        } else {
            let val = &instances[split.val.clone()];
            Some(Metrics::of(&next.predict_batch(val)?, val)?)
        };
        let test = &instances[split.test.clone()];
        let predictions = next.predict_batch(test)?;
        outcomes.push(SplitOutcome {
            test: Metrics::of(&predictions, test)?,
            predictions,
            validation,
            epochs: trace.len(),
        });
        model = Some(next);
    }
    let all: Vec<Prediction> = outcomes.iter().flat_map(|o| o.predictions.iter().copied()).collect();
    let metrics = Metrics::of(&all, &instances[plan.test_range()])?;
    Ok(WalkForward {
        epochs: outcomes.iter().map(|o| o.epochs).sum(),
        splits: outcomes,
        metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    pub metrics: Metrics,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub runs: Vec<RunMetrics>,
    pub mean: Metrics,
    /// Population standard deviation across runs.
    pub std: Metrics,
}

impl RunReport {
    pub fn from_runs(runs: Vec<RunMetrics>) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let stat = |f: fn(&Metrics) -> f64| mean_std(runs.iter().map(|r| f(&r.metrics)));
        let (s, d, a) = (stat(|m| m.slope), stat(|m| m.duration), stat(|m| m.average));
        Ok(Self {
            mean: Metrics {
                slope: s.0,
                duration: d.0,
                average: a.0,
            },
            std: Metrics {
                slope: s.1,
                duration: d.1,
                average: a.1,
            },
            runs,
        })
    }

    pub fn improvement_over(&self, baseline: &RunReport) -> Result<Metrics> {
        self.mean.improvement_over(&baseline.mean)
    }
}

/// Walk forward once per seed `seed_base..seed_base + n_runs`.
pub fn multi_run(
    spec: &ModelSpec,
    instances: &[Instance],
    plan: &PartitionPlan,
    n_runs: usize,
    seed_base: u64,
) -> Result<RunReport> {
    if n_runs == 0 {
        return Err(Error::InvalidPartition("n_runs must be >= 1".into()));
    }
    let runs = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = seed_base.wrapping_add(i);
            let wf = walk_forward_evaluate(spec, instances, plan, Seed(seed))?;
            Ok(RunMetrics {
                seed,
                metrics: wf.metrics,
                epochs: wf.epochs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RunReport::from_runs(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Architecture, TrainConfig};
    use crate::segmentation::FeatureMode;
    use crate::series::Trend;
    use proptest::prelude::*;

    #[test]
    fn single_split_layout() {
        let p = make_partitions(10, 1, 2, 2, 6).unwrap();
        assert_eq!(
            p.splits,
            vec![Split {
                train: 0..6,
                val: 6..8,
                test: 8..10
            }]
        );
    }

    #[test]
    fn paper_layouts() {
        let v = make_partitions(42279, 8, 4227, 4227, 4227).unwrap();
        assert_eq!(v.splits.len(), 8);
        assert_eq!(v.test_range(), 42279 - 33816..42279);
        let j = make_partitions(1001, 101, 1, 1, 899).unwrap();
        assert_eq!(j.splits.len(), 101);
        assert_eq!(j.splits[0].train, 0..899);
        assert_eq!(j.splits[100].test, 1000..1001);
    }

    #[test]
    fn too_few_instances_reports_the_minimum() {
        assert_eq!(
            make_partitions(9, 1, 2, 2, 6),
            Err(Error::InsufficientData {
                required: 10,
                available: 9
            })
        );
    }

    #[test]
    fn schedule_examples() {
        let s = warm_start_schedule(100, 8, 0.2);
        assert_eq!(s.total_epochs, 240.0);
        assert!((s.speedup - 8.0 / 2.4).abs() < 1e-12);
        assert_eq!(s.per_split, [vec![100], vec![20; 7]].concat());
        assert_eq!(warm_start_schedule(10, 5, 1.0).speedup, 1.0);
        assert_eq!(warm_start_schedule(10, 5, 1.0).total_epochs, 50.0);
        assert_eq!(warm_start_schedule(10, 5, 0.0).speedup, 5.0);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.0], &[4.0]).unwrap(), 3.0);
        assert_eq!(rmse(&[], &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn improvement_examples() {
        for (m, b, want) in [(9.25, 17.09, 45.87), (23.06, 90.70, 74.58), (1.23, 0.33, -272.73)] {
            assert!((percent_improvement(m, b).unwrap() - want).abs() <= 0.01);
        }
        assert_eq!(percent_improvement(1.0, 0.0), Err(Error::UndefinedImprovement));
    }

    fn instances(n: usize) -> Vec<Instance> {
        (0..n)
            .map(|k| {
                let s = if k % 2 == 0 { 30.0 } else { -30.0 };
                let cur = Trend::new(s, 3 + k % 3).unwrap();
                Instance {
                    local_points: vec![s / 30.0, (k % 3) as f64],
                    current_trend: cur,
                    trend_history: vec![cur],
                    target: Trend::new(-s, 3 + (k + 1) % 3).unwrap(),
                    mode: FeatureMode::RawOnly,
                }
            })
            .collect()
    }

    #[test]
    fn lvm_is_stable_across_seeds() {
        let data = instances(40);
        let plan = make_partitions(40, 4, 5, 2, 10).unwrap();
        let r = multi_run(&ModelSpec::lvm(), &data, &plan, 5, 7).unwrap();
        assert_eq!(r.std, Metrics { slope: 0.0, duration: 0.0, average: 0.0 });
        assert_eq!(r.mean.slope, 60.0);
        assert_eq!(r.runs.iter().map(|x| x.seed).collect::<Vec<_>>(), vec![7, 8, 9, 10, 11]);
    }

    #[test]
    fn single_run_has_zero_std() {
        let data = instances(20);
        let plan = make_partitions(20, 1, 5, 0, 15).unwrap();
        let spec = ModelSpec::new(
            Architecture::Mlp { layers: vec![4], dropout: 0.0 },
            TrainConfig { epochs: 3, ..TrainConfig::default() },
        )
        .unwrap();
        let r = multi_run(&spec, &data, &plan, 1, 0).unwrap();
        assert_eq!(r.mean, r.runs[0].metrics);
        assert_eq!(r.std.average, 0.0);
    }

    #[test]
    fn warm_started_splits_use_the_fraction() {
        let data = instances(40);
        let plan = make_partitions(40, 4, 5, 2, 10).unwrap();
        let spec = ModelSpec::new(
            Architecture::Mlp { layers: vec![4], dropout: 0.0 },
            TrainConfig { epochs: 10, warm_start: 0.3, ..TrainConfig::default() },
        )
        .unwrap();
        let wf = walk_forward_evaluate(&spec, &data, &plan, Seed(1)).unwrap();
        let epochs: Vec<usize> = wf.splits.iter().map(|s| s.epochs).collect();
        assert_eq!(epochs, warm_start_schedule(10, 4, 0.3).per_split);
        assert_eq!(wf.predictions().count(), 20);
    }

    proptest! {
        #[test]
        fn plans_hold_their_invariants(
            s in 1usize..12, tau in 1usize..20, tv in 0usize..10, rho in 1usize..30, extra in 0usize..15,
        ) {
            let n = rho + tv + s * tau + extra;
            let p = make_partitions(n, s, tau, tv, rho).unwrap();
            prop_assert_eq!(p.splits.len(), s);
            prop_assert_eq!(p.splits.last().unwrap().test.end, n);
            for (i, sp) in p.splits.iter().enumerate() {
                prop_assert_eq!(sp.train.end, sp.val.start);
                prop_assert_eq!(sp.val.end, sp.test.start);
                prop_assert_eq!((sp.train.len(), sp.val.len(), sp.test.len()), (rho, tv, tau));
                prop_assert!(sp.train.end.max(sp.val.end) <= sp.test.start);
                if i > 0 {
                    let prev = &p.splits[i - 1];
                    prop_assert_eq!(sp.test.start, prev.test.end);
                    prop_assert_eq!(sp.train.start, prev.train.start + tau);
                }
            }
            prop_assert!(make_partitions(n - extra - 1, s, tau, tv, rho).is_err());
        }

        #[test]
        fn schedule_matches_per_split_sum(e in 1usize..200, s in 1usize..20, w in 0.0f64..=1.0) {
            let sch = warm_start_schedule(e, s, w);
            let sum: usize = sch.per_split.iter().sum();
            prop_assert!(sum as f64 >= sch.total_epochs - 1e-9 * sch.total_epochs);
            prop_assert!(sum as f64 - sch.total_epochs <= (s - 1) as f64 + 1e-9);
        }

        #[test]
        fn rmse_is_scale_equivariant(
            v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30), c in -10.0f64..10.0,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let scaled = |x: &[f64]| x.iter().map(|a| a * c).collect::<Vec<_>>();
            let lhs = rmse(&scaled(&p), &scaled(&t)).unwrap();
            let rhs = c.abs() * rmse(&p, &t).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        }

        #[test]
        fn improvement_is_monotone(b in 0.01f64..100.0, m1 in 0.0f64..100.0, m2 in 0.0f64..100.0) {
            prop_assert_eq!(percent_improvement(b, b).unwrap(), 0.0);
            if m1 < m2 {
                prop_assert!(percent_improvement(m1, b).unwrap() > percent_improvement(m2, b).unwrap());
            }
        }
    }
}
