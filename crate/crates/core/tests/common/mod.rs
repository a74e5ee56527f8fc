#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use adviser::labels::soft_label_from_errors;
use adviser::model::{batch_loss, gradients, AdviserNet, Example, Mode, Objective, Target};
use adviser::taxonomy::{KeypointTaxonomy, ObjectClass, KEYPOINT_COUNT};

pub fn tax() -> &'static KeypointTaxonomy {
    KeypointTaxonomy::pascal_vehicles()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random example with a nonempty visible subset of its class slice.
pub fn random_example(rng: &mut impl Rng, features: usize, mode: Mode) -> Example {
    let class = ObjectClass::ALL[rng.random_range(0..3)];
    let slice = tax().class_slice(class);
    let mut visible = vec![false; KEYPOINT_COUNT];
    for k in slice.clone() {
        visible[k] = rng.random_bool(0.6);
    }
    if !visible.iter().any(|v| *v) {
        visible[slice.start] = true;
    }
    let errors: Vec<(usize, f64)> = slice
        .filter(|k| visible[*k])
        .map(|k| (k, rng.random_range(0.0..180.0)))
        .collect();
    let target = match mode {
        Mode::Classification => {
            Target::Soft(soft_label_from_errors(&errors, 30.0).unwrap().into_inner())
        }
        Mode::RegressionDegrees | Mode::RegressionRadians => {
            let scale = if mode == Mode::RegressionRadians {
                1f64.to_radians()
            } else {
                // Keep degree targets near the logit scale of a small random net.
                0.01
            };
            let mut t = vec![0.0; KEYPOINT_COUNT];
            for (k, e) in &errors {
                t[*k] = e * scale;
            }
            Target::Errors(t)
        }
    };
    Example {
        features: (0..features).map(|_| rng.random_range(-1.0..1.0)).collect(),
        class,
        visible,
        target,
    }
}

const STEP: f64 = 1e-6;
/// Central differences carry rounding noise of order `ulp(loss) / STEP`, so
/// entries smaller than `FLOOR_PER_LOSS · max(1, loss)` are compared on that
/// absolute scale instead of relative to themselves.
const FLOOR_PER_LOSS: f64 = 1e-4;

/// Largest relative error between analytic gradients and central finite
/// differences over every parameter of a random net (widths up to
/// `[16, 12, 12, 34]`) and a random batch.
pub fn gradient_check(seed: u64, objective: Objective, mode: Mode) -> f64 {
    let mut r = rng(seed);
    let input = r.random_range(2..=16);
    let mut widths = vec![input];
    for _ in 0..r.random_range(0..=2) {
        widths.push(r.random_range(1..=12));
    }
    widths.push(KEYPOINT_COUNT);
    // Random biases too: with zero biases a dead layer puts the next
    // pre-activation exactly on the rectifier kink.
    let mut net = AdviserNet::zeros(&widths).unwrap();
    let params: Vec<f64> = (0..net.num_parameters())
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    net.set_parameters(&params).unwrap();
    let batch_size = r.random_range(1..=5);
    let examples: Vec<Example> = (0..batch_size)
        .map(|_| random_example(&mut r, input, mode))
        .collect();
    let batch: Vec<&Example> = examples.iter().collect();

    let (loss, grads) = gradients(&net, &batch, objective, tax()).unwrap();
    let floor = FLOOR_PER_LOSS * loss.abs().max(1.0);
    let params = net.parameters();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, a) in grads.flatten().iter().enumerate() {
        let mut shifted = params.clone();
        shifted[i] = params[i] + STEP;
        probe.set_parameters(&shifted).unwrap();
        let plus = batch_loss(&probe, &batch, objective, tax()).unwrap();
        shifted[i] = params[i] - STEP;
        probe.set_parameters(&shifted).unwrap();
        let minus = batch_loss(&probe, &batch, objective, tax()).unwrap();
        let numeric = (plus - minus) / (2.0 * STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}

type Mat3 = [[f64; 3]; 3];

const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn combine(a: &Mat3, b: &Mat3, wa: f64, wb: f64) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = wa * a[i][j] + wb * b[i][j];
        }
    }
    out
}

fn frobenius(a: &Mat3) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn inverse(m: &Mat3) -> Mat3 {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    // Adjugate: inv[i][j] is the cofactor of m[j][i] over the determinant.
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det
        })
    })
}

/// Principal square root by the Denman-Beavers iteration.
fn sqrtm(a: &Mat3) -> Mat3 {
    let (mut y, mut z) = (*a, IDENTITY);
    for _ in 0..100 {
        let next_y = combine(&y, &inverse(&z), 0.5, 0.5);
        let next_z = combine(&z, &inverse(&y), 0.5, 0.5);
        let delta = frobenius(&combine(&next_y, &y, 1.0, -1.0));
        y = next_y;
        z = next_z;
        if delta < 1e-15 {
            break;
        }
    }
    y
}

/// `‖log(m)‖_F / √2` by inverse scaling and squaring: repeated square roots
/// until `m` is near the identity, then the series of `log(I + X)`.
pub fn matrix_log_angle(m: &Mat3) -> f64 {
    let mut a = *m;
    let mut halvings = 0;
    while frobenius(&combine(&a, &IDENTITY, 1.0, -1.0)) > 0.05 {
        a = sqrtm(&a);
        halvings += 1;
        assert!(halvings < 60, "square roots did not converge");
    }
    let x = combine(&a, &IDENTITY, 1.0, -1.0);
    let mut power = x;
    let mut log = [[0.0; 3]; 3];
    for n in 1..=40 {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        log = combine(&log, &power, 1.0, sign / n as f64);
        power = mat_mul(&power, &x);
    }
    frobenius(&log) * 2f64.powi(halvings) / 2f64.sqrt()
}
