//! Deterministic synthetic advisee and dataset generator.
//!
//! Error model: the estimate equals the ground truth, except that the azimuth
//! is flipped by π with probability `d · (1 − ι')`, where `d` is the instance
//! difficulty and `ι'` the instance-specific informativeness of the queried
//! keypoint. Independent Gaussian noise of `base_noise_deg` is then added to
//! every angle. Symmetric keypoints (low ι) cannot resolve the front/back
//! ambiguity; lateral ones (high ι) can.
//!
//! Feature layout (dimension [`FEATURE_DIM`]):
//! `[class one-hot (3) ‖ visibility mask (34) ‖ ι' + feature_noise · N(0,1) (34)]`.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{build_record, Advisee, AdviseeError, AdviseeRecord, Instance, KeypointAnnotation};
use crate::rng::{substream, KeyPart};
use crate::so3::EulerPose;
use crate::taxonomy::{KeypointTaxonomy, ObjectClass, KEYPOINT_COUNT};

pub const FEATURE_DIM: usize = 3 + 2 * KEYPOINT_COUNT;

const IMAGE_SIZE: f64 = 224.0;
const TRUTH_PITCH_MEAN_DEG: f64 = 10.0;
const TRUTH_PITCH_STD_DEG: f64 = 8.0;
const TRUTH_ROLL_STD_DEG: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticAdviseeParams {
    /// Standard deviation of the per-angle estimation noise, degrees.
    pub base_noise_deg: f64,
    /// Per-keypoint informativeness ι in `[0, 1]`, indexed globally.
    pub informativeness: Vec<f64>,
    /// Instance difficulty is drawn uniformly from this interval within `[0, 1]`.
    pub difficulty_range: (f64, f64),
    /// Standard deviation of the per-instance perturbation of ι.
    pub instance_perturbation: f64,
    /// Standard deviation of the noise on the informativeness features.
    pub feature_noise: f64,
    /// Independent per-keypoint visibility probability.
    pub visibility_prob: f64,
}

impl Default for SyntheticAdviseeParams {
    fn default() -> Self {
        Self {
            base_noise_deg: 5.0,
            informativeness: default_informativeness(KeypointTaxonomy::pascal_vehicles()),
            difficulty_range: (0.5, 1.0),
            instance_perturbation: 0.2,
            feature_noise: 0.1,
            visibility_prob: 0.7,
        }
    }
}

impl SyntheticAdviseeParams {
    pub fn validate(&self) -> Result<(), AdviseeError> {
        let bad = |m: &str| Err(AdviseeError::Config(m.to_string()));
        if !(self.base_noise_deg.is_finite() && self.base_noise_deg >= 0.0) {
            return bad("base_noise_deg must be finite and >= 0");
        }
        if self.informativeness.len() != KEYPOINT_COUNT {
            return bad("informativeness must have one entry per keypoint");
        }
        if self
            .informativeness
            .iter()
            .any(|v| !(0.0..=1.0).contains(v))
        {
            return bad("informativeness entries must lie in [0, 1]");
        }
        let (lo, hi) = self.difficulty_range;
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return bad("difficulty_range must satisfy 0 <= lo <= hi <= 1");
        }
        if !(self.instance_perturbation.is_finite() && self.instance_perturbation >= 0.0) {
            return bad("instance_perturbation must be finite and >= 0");
        }
        if !(self.feature_noise.is_finite() && self.feature_noise >= 0.0) {
            return bad("feature_noise must be finite and >= 0");
        }
        if !(self.visibility_prob > 0.0 && self.visibility_prob <= 1.0) {
            return bad("visibility_prob must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Wheels and handles break the front/back symmetry, other lateral keypoints
/// partially, and centre-line keypoints (seat, headlight, …) hardly at all.
pub fn default_informativeness(taxonomy: &KeypointTaxonomy) -> Vec<f64> {
    taxonomy
        .keypoints()
        .iter()
        .map(|k| {
            let name = k.name.as_str();
            if name.contains("wheel") || name.contains("handle") {
                0.85
            } else if name.contains("left") || name.contains("right") {
                0.55
            } else {
                0.15
            }
        })
        .collect()
}

/// Hidden per-instance state of the synthetic advisee.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub difficulty: f64,
    /// Effective informativeness ι'(i, ·), indexed globally; zero outside the class slice.
    pub informativeness: Vec<f64>,
}

impl HiddenState {
    pub fn flip_probability(&self, keypoint: usize) -> f64 {
        self.difficulty * (1.0 - self.informativeness[keypoint])
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticAdvisee {
    base_noise_deg: f64,
    seed: u64,
    hidden: HashMap<String, HiddenState>,
}

impl SyntheticAdvisee {
    pub fn new(base_noise_deg: f64, seed: u64) -> Self {
        Self {
            base_noise_deg,
            seed,
            hidden: HashMap::new(),
        }
    }

    pub fn insert(&mut self, instance_id: impl Into<String>, state: HiddenState) {
        self.hidden.insert(instance_id.into(), state);
    }

    pub fn hidden_state(&self, instance_id: &str) -> Option<&HiddenState> {
        self.hidden.get(instance_id)
    }

    /// Whether the estimate for `(instance, keypoint)` has its azimuth flipped.
    pub fn is_flipped(&self, instance_id: &str, keypoint: usize) -> Result<bool, AdviseeError> {
        let state = self
            .hidden
            .get(instance_id)
            .ok_or_else(|| AdviseeError::UnknownInstance(instance_id.to_string()))?;
        let mut rng = self.estimate_stream(instance_id, keypoint);
        Ok(rng.random::<f64>() < state.flip_probability(keypoint))
    }

    fn estimate_stream(&self, instance_id: &str, keypoint: usize) -> crate::rng::StreamRng {
        substream(
            self.seed,
            "estimate",
            &[KeyPart::Text(instance_id), keypoint.into()],
        )
    }
}

impl Advisee for SyntheticAdvisee {
    fn estimate(
        &self,
        instance: &Instance,
        query: &KeypointAnnotation,
    ) -> Result<EulerPose, AdviseeError> {
        if instance.annotation(query.keypoint).is_none() {
            return Err(AdviseeError::InvalidQuery {
                instance: instance.id.clone(),
                keypoint: query.keypoint,
            });
        }
        let state = self
            .hidden
            .get(&instance.id)
            .ok_or_else(|| AdviseeError::UnknownInstance(instance.id.clone()))?;

        let mut rng = self.estimate_stream(&instance.id, query.keypoint);
        let flipped = rng.random::<f64>() < state.flip_probability(query.keypoint);
        let sigma = self.base_noise_deg.to_radians();
        let mut noise = || sigma * rng.sample::<f64, _>(StandardNormal);

        let truth = instance.truth;
        let azimuth = truth.azimuth() + if flipped { PI } else { 0.0 } + noise();
        let pitch = truth.pitch() + noise();
        let roll = truth.roll() + noise();
        Ok(EulerPose::new(azimuth, pitch, roll)?)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub instances: Vec<Instance>,
    pub advisee: SyntheticAdvisee,
}

impl SyntheticDataset {
    /// One record per instance, in instance order.
    pub fn records(&self) -> Result<Vec<AdviseeRecord>, AdviseeError> {
        self.instances
            .iter()
            .map(|inst| build_record(&self.advisee, inst))
            .collect()
    }
}

/// Generates `n` instances and the synthetic advisee bound to them.
///
/// Instance `i` draws from its own substream, so the output is a pure
/// function of `(params, n, seed)`.
pub fn generate_dataset(
    params: &SyntheticAdviseeParams,
    n: usize,
    seed: u64,
    taxonomy: &KeypointTaxonomy,
) -> Result<SyntheticDataset, AdviseeError> {
    if n < 1 {
        return Err(AdviseeError::Config(
            "dataset size must be at least 1".into(),
        ));
    }
    params.validate()?;

    let mut advisee = SyntheticAdvisee::new(params.base_noise_deg, seed);
    let mut instances = Vec::with_capacity(n);
    for i in 0..n {
        let (instance, state) = generate_instance(params, seed, i, taxonomy)?;
        advisee.insert(instance.id.clone(), state);
        instances.push(instance);
    }
    Ok(SyntheticDataset { instances, advisee })
}

fn generate_instance(
    params: &SyntheticAdviseeParams,
    seed: u64,
    index: usize,
    taxonomy: &KeypointTaxonomy,
) -> Result<(Instance, HiddenState), AdviseeError> {
    let mut rng = substream(seed, "instance", &[index.into()]);
    let class = ObjectClass::ALL[rng.random_range(0..ObjectClass::ALL.len())];
    let slice = taxonomy.class_slice(class);

    let pitch_dist = Normal::new(TRUTH_PITCH_MEAN_DEG, TRUTH_PITCH_STD_DEG).expect("valid std");
    let roll_dist = Normal::new(0.0, TRUTH_ROLL_STD_DEG).expect("valid std");
    let azimuth = rng.random_range(0.0..TAU);
    let pitch = pitch_dist.sample(&mut rng).clamp(-89.0, 89.0).to_radians();
    let roll = roll_dist.sample(&mut rng).to_radians();
    let truth = EulerPose::new(azimuth, pitch, roll)?;

    let (lo, hi) = params.difficulty_range;
    let difficulty = if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    };

    let mut informativeness = vec![0.0; KEYPOINT_COUNT];
    for k in slice.clone() {
        let jitter: f64 = rng.sample(StandardNormal);
        informativeness[k] =
            (params.informativeness[k] + params.instance_perturbation * jitter).clamp(0.0, 1.0);
    }

    let visible: Vec<usize> = loop {
        let draw: Vec<usize> = slice
            .clone()
            .filter(|_| rng.random::<f64>() < params.visibility_prob)
            .collect();
        if !draw.is_empty() {
            break draw;
        }
    };
    let visible: Vec<KeypointAnnotation> = visible
        .into_iter()
        .map(|keypoint| KeypointAnnotation {
            keypoint,
            u: rng.random_range(0.0..IMAGE_SIZE),
            v: rng.random_range(0.0..IMAGE_SIZE),
        })
        .collect();

    let mut features = Vec::with_capacity(FEATURE_DIM);
    features.extend(
        ObjectClass::ALL
            .iter()
            .map(|c| if *c == class { 1.0 } else { 0.0 }),
    );
    let mut mask = vec![0.0; KEYPOINT_COUNT];
    for a in &visible {
        mask[a.keypoint] = 1.0;
    }
    features.extend(mask);
    for iota in &informativeness {
        let noise: f64 = rng.sample(StandardNormal);
        features.push(iota + params.feature_noise * noise);
    }

    let instance = Instance {
        id: format!("syn-{index:06}"),
        class,
        features,
        visible,
        truth,
    };
    Ok((
        instance,
        HiddenState {
            difficulty,
            informativeness,
        },
    ))
}
