//! Streaming ingest: wire records from collector clients are segmented into
//! labeled traces and appended to a dataset file.

mod replay;
mod server;
mod session;
mod stats;
mod store;
mod wire;

pub use replay::{encode_session, replay};
pub use server::{serve, ServerConfig, ServerHandle};
pub use session::{assemble_lines, assemble_trace, LineAssembler, SessionState};
pub use stats::{Counter, IngestStats};
pub use store::{load_all, write_all, DatasetStore};
pub use wire::{
    encode_data, encode_hello, encode_marker, parse_event, parse_record, Hello, MarkerKind,
    SegmentMarker, WireEvent, WireRecord,
};
