//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use trendline::evaluation::{
    make_partitions, multi_run, percent_improvement, walk_forward_evaluate, warm_start_schedule, RunReport,
};
use trendline::models::{
    build_network, gbm_fit, rf_fit, Architecture, BoostParams, ForestParams, InputDims, ModelSpec, Node,
    Pooling, RegressionTree, TrainConfig, TIE_TOLERANCE,
};
use trendline::nn::{grad_check_report, LayerSpec, NetInput, Network, Seed, Sequential, Tensor};
use trendline::segmentation::{
    build_instances, fit_segment, segment_bottom_up, slope_to_degrees, CostKind, FeatureMode, Instance,
    SegmentationConfig,
};
use trendline::series::{TimeSeries, Trend};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. Improvement percentages from the published RMSE pairs.
fn metric_reproduction() -> Outcome {
    const TOL: f64 = 0.01;
    let cases = [(9.25, 17.09, 45.87), (23.06, 90.70, 74.58), (1.23, 0.33, -272.73)];
    let mut got = Vec::new();
    for (model, baseline, want) in cases {
        let p = percent_improvement(model, baseline).map_err(|e| e.to_string())?;
        ensure((p - want).abs() <= TOL, || format!("({model}, {baseline}) gave {p:.4}, want {want}"))?;
        got.push(format!("{p:.2}"));
    }
    Ok(got.join(", "))
}

// 2. Warm-start epoch arithmetic.
fn warm_start_arithmetic() -> Outcome {
    let s = warm_start_schedule(100, 8, 0.2);
    ensure(s.total_epochs == 240.0, || format!("E' = {}", s.total_epochs))?;
    ensure((s.speedup - 10.0 / 3.0).abs() <= 1e-9, || format!("speed-up {}", s.speedup))?;
    for n in 1..=20 {
        let zero = warm_start_schedule(100, n, 0.0).speedup;
        let one = warm_start_schedule(100, n, 1.0).speedup;
        ensure(zero == n as f64 && one == 1.0, || format!("S={n}: w=0 -> {zero}, w=1 -> {one}"))?;
    }
    Ok(format!("E' = {}, speed-up = {:.4}", s.total_epochs, s.speedup))
}

// 3. Partition plans for the four published layouts.
fn partition_plans() -> Outcome {
    let layouts = [
        ("voltage", 42279, 8, 4227, 4227, 4227),
        ("methane", 4418, 44, 10, 10, 3967),
        ("nyse", 10014, 5, 1001, 1001, 4008),
        ("jse", 1001, 101, 1, 1, 899),
    ];
    for (name, n, s, tau, tv, rho) in layouts {
        let p = make_partitions(n, s, tau, tv, rho).map_err(|e| format!("{name}: {e}"))?;
        let fail = |what: &str| format!("{name}: {what}");
        ensure(p.splits.len() == s, || fail("split count"))?;
        ensure(p.splits.last().unwrap().test.end == n, || fail("tests do not end at the last instance"))?;
        ensure(p.test_range().len() == s * tau, || fail("test coverage"))?;
        for (i, sp) in p.splits.iter().enumerate() {
            ensure(sp.train.len() == rho && sp.val.len() == tv && sp.test.len() == tau, || fail("sizes"))?;
            ensure(sp.train.end == sp.val.start && sp.val.end == sp.test.start, || fail("not successive"))?;
            ensure(sp.val.end.max(sp.train.end) <= sp.test.start, || fail("look-ahead"))?;
            if i > 0 {
                let prev = &p.splits[i - 1];
                ensure(sp.test.start == prev.test.end, || fail("tests not contiguous and disjoint"))?;
                ensure(sp.train.start == prev.train.start + tau, || fail("windows do not advance by the test size"))?;
            }
        }
    }
    Ok("voltage 8x4227, methane 44x10, nyse 5x1001, jse 101x1".into())
}

// 4. Finite-difference gradient checks.
fn gradient_exactness() -> Outcome {
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tensor = |shape: &[usize]| {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
    };
    let mut cases: Vec<(&str, Network, NetInput, bool)> = Vec::new();
    let seq = |specs: &[LayerSpec], shape: &[usize], seed| {
        Network::Sequential(Sequential::build(specs, shape, Seed(seed)).unwrap())
    };
    cases.push((
        "dense+relu",
        seq(&[LayerSpec::Dense { out_dim: 4 }, LayerSpec::Relu, LayerSpec::Dense { out_dim: 2 }], &[3], 1),
        NetInput::Single(tensor(&[3])),
        false,
    ));
    cases.push((
        "conv1d+relu+maxpool",
        seq(
            &[
                LayerSpec::Conv1d { filters: 3, kernel: 2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool { size: 2 },
                LayerSpec::Conv1d { filters: 2, kernel: 3 },
                LayerSpec::IdentityPool,
                LayerSpec::Dense { out_dim: 2 },
            ],
            &[2, 11],
            2,
        ),
        NetInput::Single(tensor(&[2, 11])),
        false,
    ));
    cases.push((
        "lstm stack",
        seq(
            &[LayerSpec::Lstm { cells: 3 }, LayerSpec::Lstm { cells: 2 }, LayerSpec::Dense { out_dim: 2 }],
            &[5, 2],
            3,
        ),
        NetInput::Single(tensor(&[5, 2])),
        false,
    ));

    let dims = InputDims { features: 7, window: 7, history: 4 };
    let train = TrainConfig::default();
    let heads = [
        ("mlp head", Architecture::Mlp { layers: vec![5, 4, 3], dropout: 0.3 }),
        ("lstm head", Architecture::Lstm { cells: vec![3, 2], dropout: 0.3 }),
        (
            "cnn head",
            Architecture::Cnn {
                filters: vec![3, 2],
                kernels: vec![2, 2],
                pool: Pooling::Max { size: 2 },
                dropout: 0.3,
            },
        ),
        ("trenet", Architecture::Trenet { lstm_cells: 4, filters: [3, 2], kernel: 2, fusion: 5, dropout: 0.3 }),
    ];
    for (i, (name, arch)) in heads.into_iter().enumerate() {
        let kind = ModelSpec { arch: arch.clone(), train: train.clone() }.kind();
        let spec = ModelSpec { arch, train: train.clone() };
        let net = build_network(&spec, dims, Seed(10 + i as u64)).map_err(|e| e.to_string())?;
        let input = match kind {
            trendline::models::ModelKind::Mlp => NetInput::Single(tensor(&[7])),
            trendline::models::ModelKind::Lstm => NetInput::Single(tensor(&[7, 1])),
            trendline::models::ModelKind::Cnn => NetInput::Single(tensor(&[1, 7])),
            _ => NetInput::Pair { local: tensor(&[1, 7]), history: tensor(&[4, 2]) },
        };
        cases.push((name, net, input, true));
    }

    // Move off the zero biases so no ReLU sits exactly on its kink.
    let mut jitter = ChaCha8Rng::seed_from_u64(44);
    for (_, net, _, _) in cases.iter_mut() {
        for p in net.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v += jitter.random_range(-0.1..0.1));
        }
    }

    let mut worst = 0.0f64;
    for (i, (name, net, input, train)) in cases.iter().enumerate() {
        let r = grad_check_report(net, input, Seed(100 + i as u64), *train).map_err(|e| format!("{name}: {e}"))?;
        let e = r.params.max(r.input);
        ensure(e < TOL, || format!("{name}: relative error {e:.3e}"))?;
        worst = worst.max(e);
    }
    Ok(format!("{} networks, worst relative error {worst:.2e}", cases.len()))
}

// 5. Segmentation properties on random series.
fn segmentation_properties() -> Outcome {
    const SLACK: f64 = 1e-9;
    let thresholds = [0.0, 0.01, 0.1, 0.5, 2.0, 10.0];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..1000 {
        let n = rng.random_range(2..=64);
        let cost = if case % 2 == 0 { CostKind::MeanSquaredResidual } else { CostKind::SumSquaredResidual };
        let mut level = 0.0;
        let values: Vec<f64> = (0..n)
            .map(|_| {
                level += rng.random_range(-1.0..1.0);
                level
            })
            .collect();
        let series = TimeSeries::new(values.clone()).unwrap();
        let mut last_count = usize::MAX;
        for &max_error in &thresholds {
            let cfg = SegmentationConfig::new(max_error, cost).unwrap();
            let trends = segment_bottom_up(&series, &cfg).map_err(|e| format!("case {case}: {e}"))?;
            let fail = |what: String| format!("case {case}, n={n}, max_error={max_error}: {what}");
            let total: usize = trends.trends().iter().map(|t| t.duration).sum();
            ensure(total == n, || fail(format!("durations sum to {total}")))?;
            for (k, t) in trends.trends().iter().enumerate() {
                ensure(t.slope > -90.0 && t.slope < 90.0, || fail(format!("slope {}", t.slope)))?;
                let fit = fit_segment(&values[trends.range(k)], cost).unwrap();
                let initial = t.duration == 2 || (t.duration == 3 && n % 2 == 1 && k + 1 == trends.len());
                ensure(initial || fit.cost <= max_error + SLACK * (1.0 + max_error), || {
                    fail(format!("segment {k} cost {} exceeds the threshold", fit.cost))
                })?;
            }
            ensure(trends.len() <= last_count, || fail("segment count grew".into()))?;
            last_count = trends.len();
        }
    }
    for case in 0..200 {
        let n = rng.random_range(2..=64);
        let (a, b) = (rng.random_range(-10.0..10.0), rng.random_range(-5.0..5.0));
        let series = TimeSeries::new((0..n).map(|i| a + b * i as f64).collect()).unwrap();
        let cfg = SegmentationConfig::new(0.0, CostKind::MeanSquaredResidual).unwrap();
        let trends = segment_bottom_up(&series, &cfg).unwrap();
        ensure(trends.len() == 1, || format!("ramp {case} split into {} trends", trends.len()))?;
        let want = slope_to_degrees(b);
        let got = trends.trends()[0].slope;
        ensure((got - want).abs() <= 1e-9, || format!("ramp {case}: angle {got}, want {want}"))?;
    }
    Ok("1000 random series x 6 thresholds, 200 ramps".into())
}

/// Exhaustive-split CART used as an oracle.
#[derive(Debug)]
enum Oracle {
    Leaf(Vec<f64>),
    Split { feature: usize, threshold: f64, left: Box<Oracle>, right: Box<Oracle> },
}

fn mean_of(y: &[Vec<f64>], rows: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; y[rows[0]].len()];
    for &r in rows {
        for (a, b) in m.iter_mut().zip(&y[r]) {
            *a += b;
        }
    }
    m.iter().map(|v| v / rows.len() as f64).collect()
}

fn sse(y: &[Vec<f64>], rows: &[usize]) -> f64 {
    let m = mean_of(y, rows);
    rows.iter().map(|&r| y[r].iter().zip(&m).map(|(v, mu)| (v - mu).powi(2)).sum::<f64>()).sum()
}

fn oracle(x: &[Vec<f64>], y: &[Vec<f64>], rows: &[usize], depth: usize, max_depth: Option<usize>) -> Oracle {
    let pure = rows.iter().all(|&r| y[r] == y[rows[0]]);
    if pure || rows.len() < 2 || max_depth.is_some_and(|d| depth >= d) {
        return Oracle::Leaf(mean_of(y, rows));
    }
    let total_sq: f64 = rows.iter().flat_map(|&r| y[r].iter()).map(|v| v * v).sum();
    let margin = TIE_TOLERANCE * (1.0 + total_sq);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x[rows[0]].len() {
        let mut vals: Vec<f64> = rows.iter().map(|&r| x[r][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            let score = sse(y, &l) + sse(y, &r);
            if best.is_none_or(|(s, _, _)| score < s - margin) {
                best = Some((score, f, t));
            }
        }
    }
    match best {
        None => Oracle::Leaf(mean_of(y, rows)),
        Some((_, feature, threshold)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][feature] <= threshold);
            Oracle::Split {
                feature,
                threshold,
                left: Box::new(oracle(x, y, &l, depth + 1, max_depth)),
                right: Box::new(oracle(x, y, &r, depth + 1, max_depth)),
            }
        }
    }
}

fn same_tree(tree: &RegressionTree, id: usize, o: &Oracle) -> bool {
    match (&tree.nodes()[id], o) {
        (Node::Leaf { value }, Oracle::Leaf(v)) => value.iter().zip(v).all(|(a, b)| (a - b).abs() <= 1e-12),
        (
            Node::Split { feature, threshold, left, right },
            Oracle::Split { feature: f, threshold: t, left: l, right: r },
        ) => feature == f && threshold == t && same_tree(tree, *left, l) && same_tree(tree, *right, r),
        _ => false,
    }
}

fn instance(features: Vec<f64>, slope: f64, duration: usize) -> Instance {
    let cur = Trend::new(0.0, 2).unwrap();
    Instance {
        local_points: features,
        current_trend: cur,
        trend_history: vec![cur],
        target: Trend::new(slope, duration).unwrap(),
        mode: FeatureMode::RawOnly,
    }
}

// 6. Tree models against the brute-force reference.
fn tree_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let suite = 500;
    for case in 0..suite {
        let n = rng.random_range(1..=20);
        let d = rng.random_range(1..=3);
        let data: Vec<Instance> = (0..n)
            .map(|_| {
                let f = (0..d).map(|_| rng.random_range(0..5) as f64).collect();
                instance(f, rng.random_range(-5..=5) as f64, rng.random_range(2..=5))
            })
            .collect();
        let max_depth = match rng.random_range(0..5) {
            0 => None,
            k => Some(k - 1),
        };
        let forest = rf_fit(&data, &ForestParams { n_estimators: 1, max_depth, bootstrap: None }, Seed(case))
            .map_err(|e| e.to_string())?;
        let x: Vec<Vec<f64>> = data.iter().map(Instance::features).collect();
        let y: Vec<Vec<f64>> = data.iter().map(|i| i.target_pair().to_vec()).collect();
        let rows: Vec<usize> = (0..n).collect();
        let want = oracle(&x, &y, &rows, 0, max_depth);
        ensure(same_tree(&forest.trees()[0], 0, &want), || {
            format!("dataset {case} (n={n}, d={d}, depth={max_depth:?}): forest tree differs from the reference")
        })?;

        let params = BoostParams {
            n_estimators: rng.random_range(1..=10),
            learning_rate: rng.random_range(0.01..=1.0),
            max_depth: Some(rng.random_range(1..=3)),
        };
        let g = gbm_fit(&data, &params).map_err(|e| e.to_string())?;
        let trace = g.loss_trace();
        ensure(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12 * (1.0 + w[0])), || {
            format!("dataset {case}: boosting loss rose: {trace:?}")
        })?;
    }
    Ok(format!("{suite} datasets, single-tree forest identical to the reference, boosting loss non-increasing"))
}

/// Triangle wave with period 12 (six points up, six down) plus noise.
fn sawtooth(points: usize, noise: f64, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).unwrap();
    let values = (0..points)
        .map(|i| {
            let p = i % 12;
            let v = if p < 6 { p as f64 } else { (11 - p) as f64 };
            v + normal.sample(&mut rng)
        })
        .collect();
    TimeSeries::new(values).unwrap()
}

fn sawtooth_instances() -> Result<Vec<Instance>, String> {
    let series = sawtooth(2004, 0.05, 7);
    let cfg = SegmentationConfig::new(0.05, CostKind::MeanSquaredResidual).unwrap();
    let trends = segment_bottom_up(&series, &cfg).map_err(|e| e.to_string())?;
    build_instances(&series, &trends, FeatureMode::RawOnly, 8).map_err(|e| e.to_string())
}

const E2E_SPLITS: usize = 5;
const E2E_EPOCHS: usize = 200;
const E2E_WARM: f64 = 0.25;

fn e2e_mlp() -> ModelSpec {
    ModelSpec::new(
        Architecture::Mlp { layers: vec![16], dropout: 0.0 },
        TrainConfig {
            batch_size: 16,
            epochs: E2E_EPOCHS,
            learning_rate: 0.01,
            weight_decay: 0.0,
            warm_start: E2E_WARM,
            standardize: false,
        },
    )
    .unwrap()
}

// 7. End-to-end walk-forward on the sawtooth.
fn end_to_end() -> Outcome {
    let data = sawtooth_instances()?;
    let plan = make_partitions(data.len(), E2E_SPLITS, 30, 10, 150).map_err(|e| e.to_string())?;
    let lvm = walk_forward_evaluate(&ModelSpec::lvm(), &data, &plan, Seed(0)).map_err(|e| e.to_string())?;
    let mlp = walk_forward_evaluate(&e2e_mlp(), &data, &plan, Seed(0)).map_err(|e| e.to_string())?;
    let gain = percent_improvement(mlp.metrics.average, lvm.metrics.average).map_err(|e| e.to_string())?;
    ensure(gain >= 20.0, || {
        format!("MLP average RMSE {:.3} vs LVM {:.3} ({gain:.1}% better)", mlp.metrics.average, lvm.metrics.average)
    })?;
    let cold = (E2E_EPOCHS * E2E_SPLITS) as f64;
    let bound = (1.0 + (E2E_SPLITS - 1) as f64 * E2E_WARM) / E2E_SPLITS as f64;
    let used = mlp.epochs as f64 / cold;
    ensure(used <= bound + 1e-12, || format!("used {used:.4} of the cold budget, bound {bound:.4}"))?;
    Ok(format!(
        "{} instances, MLP avg RMSE {:.3} vs LVM {:.3} ({gain:.1}% better), epochs {}/{} = {used:.2} <= {bound:.2}",
        data.len(),
        mlp.metrics.average,
        lvm.metrics.average,
        mlp.epochs,
        cold
    ))
}

fn population(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// 8. Ten-seed stability protocol.
fn stability() -> Outcome {
    let data = sawtooth_instances()?;
    let plan = make_partitions(data.len(), E2E_SPLITS, 30, 10, 150).map_err(|e| e.to_string())?;
    let lvm = multi_run(&ModelSpec::lvm(), &data, &plan, 10, 0).map_err(|e| e.to_string())?;
    ensure(lvm.std.slope == 0.0 && lvm.std.duration == 0.0 && lvm.std.average == 0.0, || {
        format!("LVM std {:?}", lvm.std)
    })?;
    let mut spec = e2e_mlp();
    spec.train.epochs = 40;
    let a = multi_run(&spec, &data, &plan, 10, 100).map_err(|e| e.to_string())?;
    let b = multi_run(&spec, &data, &plan, 10, 100).map_err(|e| e.to_string())?;
    let json = |r: &RunReport| serde_json::to_string(r).unwrap();
    ensure(json(&a) == json(&b), || "re-running the same config changed the report".into())?;
    let columns: [(&str, fn(&trendline::evaluation::Metrics) -> f64, f64, f64); 3] = [
        ("slope", |m| m.slope, a.mean.slope, a.std.slope),
        ("duration", |m| m.duration, a.mean.duration, a.std.duration),
        ("average", |m| m.average, a.mean.average, a.std.average),
    ];
    for (name, get, mean, std) in columns {
        let vals: Vec<f64> = a.runs.iter().map(|r| get(&r.metrics)).collect();
        let (m, s) = population(&vals);
        ensure((m - mean).abs() <= 1e-12 * m.abs().max(1.0) && (s - std).abs() <= 1e-12 * m.abs().max(1.0), || {
            format!("{name}: report {mean} ± {std}, recomputed {m} ± {s}")
        })?;
    }
    for r in &a.runs {
        let avg = (r.metrics.slope + r.metrics.duration) / 2.0;
        ensure(r.metrics.average == avg, || format!("seed {}: average is not the mean of slope and duration", r.seed))?;
    }
    Ok(format!(
        "LVM std 0, MLP 10 seeds avg {:.3} ± {:.3}, bit-identical on re-run",
        a.mean.average, a.std.average
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("metric reproduction", metric_reproduction),
        ("warm-start arithmetic", warm_start_arithmetic),
        ("partition-plan oracle", partition_plans),
        ("gradient exactness", gradient_exactness),
        ("segmentation properties", segmentation_properties),
        ("tree-model oracles", tree_oracles),
        ("end-to-end desk-scale experiment", end_to_end),
        ("stability protocol", stability),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
