use std::io;

use thiserror::Error;

use crate::model::{ChannelGroup, Label, SensorChannel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown channel name {0:?}")]
    UnknownChannel(String),
    #[error("unrecognized label {0:?}")]
    BadLabel(String),
    #[error("unrecognized hand mode {0:?}")]
    BadHandMode(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("channel {0} has no readings")]
    EmptyChannel(SensorChannel),
    #[error("axes of the {} group differ in length", .0.as_str())]
    RaggedGroup(ChannelGroup),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("non-finite value on channel {0}")]
    NonFiniteValue(String),
    #[error("data record before hello")]
    MissingHello,
    #[error("end marker with no open segment")]
    NoOpenSegment,
    #[error("start marker while a segment is already open")]
    SegmentAlreadyOpen,
    #[error("end marker label {end} does not match open segment {start}")]
    LabelMismatch { start: Label, end: Label },
    #[error("segment has no {} readings", .0.as_str())]
    EmptySegment(ChannelGroup),
    #[error("segment is invalid: {0}")]
    InvalidSegment(#[from] ModelError),
    #[error("storage failure: {0}")]
    StorageFailure(#[source] io::Error),
    #[error("corrupt dataset record at line {line}: {reason}")]
    CorruptRecord { line: usize, reason: String },
    #[error("could not bind listener: {0}")]
    BindFailure(#[source] io::Error),
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("label {0} is not in the generator's class set")]
    LabelNotInSpec(Label),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unknown device profile {0:?}")]
    UnknownProfile(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("empty sequence")]
    EmptySequence,
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sequence too short for a spectrum ({0} samples, need 2)")]
    TooShort(usize),
    #[error("sequence has zero energy")]
    ZeroEnergy,
    #[error("energy fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("channel {channel} has {len} samples, need at least 2")]
    SequenceTooShort { channel: SensorChannel, len: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum KnnError {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training vectors have inconsistent dimensions")]
    InconsistentDimensions,
    #[error("k = {k} is invalid for {n} training points")]
    KTooLarge { k: usize, n: usize },
    #[error("two-stage model needs training data for {0}")]
    MissingClass(&'static str),
    #[error("two-stage classifier accepts touch-action labels only, got {0}")]
    NotAnAction(Label),
}

#[derive(Debug, Error, PartialEq)]
pub enum AnnError {
    #[error("bad network dimensions: {0}")]
    BadDimensions(String),
    #[error("input length mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("class index {0} out of range")]
    ClassOutOfRange(usize),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("loss or gradient became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot split {n} samples into {k} folds")]
    KTooLarge { k: usize, n: usize },
    #[error("need at least two folds, got {0}")]
    TooFewFolds(usize),
    #[error("need at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("evaluation set is empty")]
    EmptySet,
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Ann(#[from] AnnError),
}

/// Errors reading or writing the pipeline's file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path} line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

/// Umbrella error for callers that drive the whole pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Knn(#[from] KnnError),
    #[error(transparent)]
    Ann(#[from] AnnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
