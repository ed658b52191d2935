use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::IngestError;

macro_rules! counters {
    ($($variant:ident => $name:literal),* $(,)?) => {
        /// Everything the ingest path counts instead of failing on.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Counter { $($variant),* }

        impl Counter {
            pub const ALL: &'static [Counter] = &[$(Counter::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(Counter::$variant => $name),* }
            }
        }
    };
}

counters! {
    Connections => "connections",
    Lines => "lines",
    Malformed => "malformed_record",
    UnknownChannel => "unknown_channel",
    NonFinite => "non_finite_value",
    MissingHello => "missing_hello",
    OutOfOrder => "out_of_order_timestamp",
    NoOpenSegment => "no_open_segment",
    SegmentAlreadyOpen => "segment_already_open",
    LabelMismatch => "label_mismatch",
    EmptySegment => "empty_segment",
    InvalidSegment => "invalid_segment",
    DisconnectMidSegment => "disconnect_mid_segment",
    ShutdownDiscarded => "shutdown_discarded_segment",
    TracesAssembled => "traces_assembled",
    TracesPersisted => "traces_persisted",
    StorageFailure => "storage_failure",
}

impl Counter {
    pub fn for_error(e: &IngestError) -> Counter {
        match e {
            IngestError::MalformedRecord(_) | IngestError::CorruptRecord { .. } => Counter::Malformed,
            IngestError::UnknownChannel(_) => Counter::UnknownChannel,
            IngestError::NonFiniteValue(_) => Counter::NonFinite,
            IngestError::MissingHello => Counter::MissingHello,
            IngestError::NoOpenSegment => Counter::NoOpenSegment,
            IngestError::SegmentAlreadyOpen => Counter::SegmentAlreadyOpen,
            IngestError::LabelMismatch { .. } => Counter::LabelMismatch,
            IngestError::EmptySegment(_) => Counter::EmptySegment,
            IngestError::InvalidSegment(_) => Counter::InvalidSegment,
            IngestError::StorageFailure(_) | IngestError::BindFailure(_) => Counter::StorageFailure,
        }
    }
}

/// Thread-safe counters shared by all connection handlers.
#[derive(Debug)]
pub struct IngestStats {
    counts: Vec<AtomicU64>,
}

impl Default for IngestStats {
    fn default() -> Self {
        IngestStats {
            counts: Counter::ALL.iter().map(|_| AtomicU64::new(0)).collect(),
        }
    }
}

impl IngestStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn incr(&self, c: Counter) {
        self.counts[c as usize].fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self, c: Counter) -> u64 {
        self.counts[c as usize].load(Ordering::Relaxed)
    }

    pub fn snapshot(&self) -> BTreeMap<&'static str, u64> {
        Counter::ALL.iter().map(|c| (c.as_str(), self.get(*c))).collect()
    }
}
