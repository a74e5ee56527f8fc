//! Worked examples and Monte-Carlo checks for individual operations.

mod common;

use rand::Rng;
use rayon::prelude::*;

use adviser::advisee::{generate_dataset, SyntheticAdviseeParams, MAX_ERROR_DEG};
use adviser::harness::{load_dataset, run_full_experiment, ExperimentConfig};
use adviser::labels::{ErrorUnits, LabelConfig};
use adviser::model::{
    batch_loss, examples_from_records, train, train_from, AdviserNet, Example, LossKind, Mode,
    Objective, Target, TrainConfig,
};
use adviser::selection::{select_keypoint, Policy};
use adviser::so3::{geodesic_distance, random_rotation, RotationMatrix};
use adviser::taxonomy::{ObjectClass, KEYPOINT_COUNT};
use adviser::FEATURE_DIM;

use common::{matrix_log_angle, random_example, rng, tax};

#[test]
fn sixth_turn_matches_matrix_log() {
    let r = RotationMatrix::about_z(std::f64::consts::FRAC_PI_6);
    let oracle = matrix_log_angle(r.rows());
    assert!((oracle - 0.5235987755982988).abs() < 1e-12);
    assert!((geodesic_distance(&RotationMatrix::identity(), &r) - oracle).abs() < 1e-9);
}

#[test]
fn haar_trace_moments() {
    // For Haar measure on SO(3), E[tr R] = 0 and E[(tr R)²] = 1.
    let mut r = rng(7);
    let n = 10_000;
    let traces: Vec<f64> = (0..n).map(|_| random_rotation(&mut r).trace()).collect();
    let mean = traces.iter().sum::<f64>() / n as f64;
    let second = traces.iter().map(|t| t * t).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.05, "mean trace {mean}");
    assert!((second - 1.0).abs() < 0.05, "mean squared trace {second}");
    // Mean rotation angle is π/2 + 2/π under the same measure.
    let mut r = rng(8);
    let id = RotationMatrix::identity();
    let angle = (0..n)
        .map(|_| geodesic_distance(&id, &random_rotation(&mut r)))
        .sum::<f64>()
        / n as f64;
    let want = std::f64::consts::FRAC_PI_2 + std::f64::consts::FRAC_2_PI;
    assert!((angle - want).abs() < 0.02, "mean angle {angle}");
}

#[test]
fn marginal_flip_frequency() {
    let params = SyntheticAdviseeParams {
        instance_perturbation: 0.0,
        ..Default::default()
    };
    let data = generate_dataset(&params, 6000, 11, tax()).unwrap();
    let mean_difficulty = 0.75;
    for k in 0..KEYPOINT_COUNT {
        let class = tax().class_of(k).unwrap();
        let ids: Vec<&str> = data
            .instances
            .iter()
            .filter(|i| i.class == class)
            .map(|i| i.id.as_str())
            .collect();
        let flips = ids
            .iter()
            .filter(|id| data.advisee.is_flipped(id, k).unwrap())
            .count();
        let n = ids.len() as f64;
        let p = mean_difficulty * (1.0 - params.informativeness[k]);
        let sigma = (p * (1.0 - p) / n).sqrt();
        let freq = flips as f64 / n;
        assert!(
            (freq - p).abs() <= 3.0 * sigma,
            "keypoint {k}: {freq} vs {p} ± {sigma}"
        );
    }
}

#[test]
fn noise_free_features_expose_effective_informativeness() {
    let params = SyntheticAdviseeParams {
        feature_noise: 0.0,
        ..Default::default()
    };
    let data = generate_dataset(&params, 400, 3, tax()).unwrap();
    for inst in &data.instances {
        let state = data.advisee.hidden_state(&inst.id).unwrap();
        let block = &inst.features[3 + KEYPOINT_COUNT..];
        assert_eq!(block, state.informativeness.as_slice());
        assert_eq!(inst.features.len(), FEATURE_DIM);
        // Brute force over the visible set: the most informative keypoint
        // has the lowest flip probability.
        let visible: Vec<usize> = inst.visible.iter().map(|a| a.keypoint).collect();
        let by_feature = visible
            .iter()
            .copied()
            .max_by(|a, b| block[*a].total_cmp(&block[*b]))
            .unwrap();
        let best = visible
            .iter()
            .map(|k| state.flip_probability(*k))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(state.flip_probability(by_feature), best);
    }
}

#[test]
fn noise_free_unflipped_advisee_is_exact() {
    let params = SyntheticAdviseeParams {
        base_noise_deg: 0.0,
        informativeness: vec![1.0; KEYPOINT_COUNT],
        instance_perturbation: 0.0,
        ..Default::default()
    };
    let records = generate_dataset(&params, 200, 5, tax())
        .unwrap()
        .records()
        .unwrap();
    for r in &records {
        assert!(
            r.errors.values().all(|e| e.abs() < 1e-9),
            "{}",
            r.instance_id
        );
    }
}

#[test]
fn default_generator_separates_the_oracles() {
    let records = generate_dataset(&SyntheticAdviseeParams::default(), 800, 0, tax())
        .unwrap()
        .records()
        .unwrap();
    let mean = |f: &dyn Fn(&adviser::advisee::AdviseeRecord) -> f64| {
        records.iter().map(f).sum::<f64>() / records.len() as f64
    };
    let best = mean(&|r| r.min_error().unwrap());
    let worst = mean(&|r| r.max_error().unwrap());
    assert!(best < 0.25 * worst, "upper {best}, lower {worst}");
    assert!(records
        .iter()
        .flat_map(|r| r.errors.values())
        .all(|e| (0.0..=MAX_ERROR_DEG).contains(e)));
}

/// Forward pass and loss written out directly from the layer parameters.
fn reference_loss(net: &AdviserNet, batch: &[Example], objective: Objective) -> f64 {
    let mut total = 0.0;
    for ex in batch {
        let mut x = ex.features.clone();
        let layers = net.layers();
        for (i, layer) in layers.iter().enumerate() {
            let mut z = vec![0.0; layer.outputs];
            for (o, zo) in z.iter_mut().enumerate() {
                *zo = layer.bias[o];
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, v) in row.iter().zip(&x) {
                    *zo += w * v;
                }
                if i + 1 < layers.len() && *zo < 0.0 {
                    *zo = 0.0;
                }
            }
            x = z;
        }
        let slice = tax().class_slice(ex.class);
        let denom: f64 = slice.clone().map(|k| x[k].exp()).sum();
        total += match (&ex.target, objective) {
            (Target::Soft(y), Objective::ClassificationMse) => {
                slice
                    .clone()
                    .map(|k| (x[k].exp() / denom - y[k]).powi(2))
                    .sum::<f64>()
                    / slice.len() as f64
            }
            (Target::Soft(y), Objective::ClassificationCrossEntropy) => slice
                .filter(|k| ex.visible[*k])
                .map(|k| -y[k] * (x[k].exp() / denom).ln())
                .sum(),
            (Target::Errors(t), Objective::Regression) => {
                let vis: Vec<usize> = slice.filter(|k| ex.visible[*k]).collect();
                vis.iter().map(|k| (x[*k] - t[*k]).powi(2)).sum::<f64>() / vis.len() as f64
            }
            _ => unreachable!(),
        };
    }
    total / batch.len() as f64
}

#[test]
fn batch_loss_matches_reference_implementation() {
    let cls = |loss| Objective::new(Mode::Classification, loss).unwrap();
    let reg = Objective::new(Mode::RegressionRadians, LossKind::MaskedMse).unwrap();
    for seed in 0..30 {
        let mut r = rng(seed);
        let widths = [
            9,
            r.random_range(1..20),
            r.random_range(1..20),
            KEYPOINT_COUNT,
        ];
        let net = AdviserNet::new(&widths, seed).unwrap();
        for (objective, mode) in [
            (cls(LossKind::MaskedMse), Mode::Classification),
            (cls(LossKind::MaskedCrossEntropy), Mode::Classification),
            (reg, Mode::RegressionRadians),
            (reg, Mode::RegressionDegrees),
        ] {
            let batch: Vec<Example> = (0..r.random_range(1..10))
                .map(|_| random_example(&mut r, 9, mode))
                .collect();
            let refs: Vec<&Example> = batch.iter().collect();
            let got = batch_loss(&net, &refs, objective, tax()).unwrap();
            let want = reference_loss(&net, &batch, objective);
            assert!(
                (got - want).abs() <= 1e-10,
                "{objective:?}: {got} vs {want}"
            );
        }
    }
}

/// Two visible keypoints; the first feature says which one is good.
fn separable_examples(seed: u64) -> Vec<Example> {
    let mut r = rng(seed);
    let slice = tax().class_slice(ObjectClass::Car);
    let (a, b) = (slice.start, slice.start + 1);
    (0..400)
        .map(|_| {
            let first_good = r.random_bool(0.5);
            let side = if first_good { 1.0 } else { -1.0 };
            let features = vec![
                side + 0.1 * r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            ];
            let (ea, eb) = if first_good { (5.0, 60.0) } else { (60.0, 5.0) };
            let label = adviser::labels::soft_label_from_errors(&[(a, ea), (b, eb)], 10.0)
                .unwrap()
                .into_inner();
            let mut visible = vec![false; KEYPOINT_COUNT];
            visible[a] = true;
            visible[b] = true;
            Example {
                features,
                class: ObjectClass::Car,
                visible,
                target: Target::Soft(label),
            }
        })
        .collect()
}

#[test]
fn training_lowers_loss_on_a_separable_task() {
    let (mut first, mut last) = (0.0, 0.0);
    for seed in 0..5 {
        let config = TrainConfig {
            seed,
            ..Default::default()
        };
        let outcome = train(&separable_examples(seed), &config, tax()).unwrap();
        assert_eq!(outcome.loss_trace.len(), 100);
        first += outcome.loss_trace[0] / 5.0;
        last += outcome.loss_trace[99] / 5.0;
    }
    assert!(
        last < first,
        "epoch 100 loss {last} not below epoch 1 loss {first}"
    );
}

#[test]
fn training_is_bitwise_deterministic() {
    let records = generate_dataset(&SyntheticAdviseeParams::default(), 300, 2, tax())
        .unwrap()
        .records()
        .unwrap();
    let examples =
        examples_from_records(&records, Mode::Classification, &LabelConfig::default()).unwrap();
    let config = TrainConfig {
        epochs: 5,
        seed: 9,
        ..Default::default()
    };
    let a = train(&examples, &config, tax()).unwrap();
    let b = train(&examples, &config, tax()).unwrap();
    let bits = |net: &AdviserNet| {
        net.parameters()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(bits(&a.net), bits(&b.net));
    assert_eq!(a.loss_trace, b.loss_trace);
}

#[test]
fn linear_regression_selections_agree_across_units() {
    let records = generate_dataset(&SyntheticAdviseeParams::default(), 600, 4, tax())
        .unwrap()
        .records()
        .unwrap();
    let (train_set, test_set) = records.split_at(400);
    let select = |mode: Mode| {
        let examples = examples_from_records(train_set, mode, &LabelConfig::default()).unwrap();
        let config = TrainConfig {
            mode,
            hidden: Vec::new(),
            epochs: 20,
            ..Default::default()
        };
        let net = AdviserNet::zeros(&config.widths(FEATURE_DIM)).unwrap();
        let net = train_from(net, &examples, &config, tax()).unwrap().net;
        test_set
            .iter()
            .map(|r| {
                let scores = net.forward(&r.features).unwrap();
                select_keypoint(&Policy::AdviserRegression, r, Some(&scores)).unwrap()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(
        select(Mode::RegressionDegrees),
        select(Mode::RegressionRadians)
    );
    assert_eq!(
        ErrorUnits::Radians.convert_degrees(180.0),
        std::f64::consts::PI
    );
}

#[test]
fn adviser_beats_expected_baseline_on_defaults() {
    let gains: Vec<f64> = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let cfg = ExperimentConfig {
                seed,
                ..Default::default()
            };
            let data = load_dataset(&cfg, tax()).unwrap();
            let table = run_full_experiment(&data, &cfg, tax()).unwrap().table;
            let mean = |label: &str| table.row(label).unwrap().accuracy.mean.unwrap();
            mean("Adviser") - mean("Advisee (expected)")
        })
        .collect();
    let average = gains.iter().sum::<f64>() / gains.len() as f64;
    assert!(average > 0.0, "gains {gains:?}");
}
