//! Motion/orientation sensor side-channel pipeline.
//!
//! Browser pages stream device-motion and device-orientation readings to
//! [`ingest`], which cuts them into labeled traces. [`features`] turns each
//! trace into a fixed-layout vector, [`knn`] classifies touch actions with a
//! two-stage nearest-neighbour scheme, [`ann`] classifies PIN digits with a
//! one-hidden-layer network trained by scaled conjugate gradient, and
//! [`eval`] produces confusion matrices and guess-rank curves. [`synth`]
//! generates labeled traces for testing without human subjects.

pub mod ann;
pub mod error;
pub mod eval;
pub mod features;
pub mod files;
pub mod ingest;
pub mod knn;
pub mod model;
pub mod synth;

pub use error::{Error, Result};
pub use features::{extract, FeatureLayout, FeatureVector, Phase};
pub use model::{
    ChannelGroup, ChannelName, Digit, HandMode, Label, LabeledTrace, SensorChannel, SensorEvent,
    Sequence, TouchAction, TraceMeta,
};
