//! Learned query selection for a human-in-the-loop viewpoint estimator.
//!
//! The estimator (the *advisee*) accepts one keypoint hint per object. The
//! adviser network predicts which hint yields the most accurate viewpoint,
//! and the harness compares it against oracles, priors and the advisee's
//! expected performance.

pub mod advisee;
pub mod harness;
pub mod labels;
pub mod model;
pub mod rng;
pub mod selection;
pub mod so3;
pub mod taxonomy;

pub use advisee::FEATURE_DIM;
