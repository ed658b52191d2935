use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, TcpStream, ToSocketAddrs};

use super::wire::{encode_data, encode_hello, encode_marker, Hello, MarkerKind, SegmentMarker};
use crate::model::{ChannelGroup, ChannelName, LabeledTrace};

/// Spacing of synthetic timestamps, in ms.
const STEP_MS: f64 = 10.0;
/// Quiet time between consecutive segments, in ms.
const GAP_MS: f64 = 250.0;

/// Renders traces as the wire lines a collector would send in one session.
///
/// Each trace becomes a start marker, its readings (the three axes of a group
/// share a timestamp), one `interval` reading carrying the trace's interval,
/// and an end marker. A few readings are placed between segments; they must
/// not end up in any trace. Assembling the output gives back `traces` with
/// the hello's metadata.
pub fn encode_session(hello: &Hello, traces: &[LabeledTrace]) -> Vec<String> {
    let mut lines = vec![encode_hello(hello)];
    let mut t = 0.0;
    for trace in traces {
        // stray reading before the segment
        for ch in ChannelName::ALL {
            lines.push(encode_data(t, ch, -1.0));
        }
        t += GAP_MS;
        let start = t;
        lines.push(encode_marker(&SegmentMarker {
            kind: MarkerKind::Start,
            label: trace.label(),
            timestamp_ms: start,
        }));
        let longest = ChannelGroup::ALL
            .iter()
            .map(|g| trace.sequence(g.channels()[0]).len())
            .max()
            .unwrap_or(0);
        for i in 0..longest {
            let ts = start + STEP_MS * (i + 1) as f64;
            for g in ChannelGroup::ALL {
                for ch in g.channels() {
                    if let Some(v) = trace.sequence(ch).values().get(i) {
                        lines.push(encode_data(ts, ChannelName::Sensor(ch), *v));
                    }
                }
            }
            if i == 0 {
                lines.push(encode_data(ts, ChannelName::Interval, trace.interval_ms()));
            }
        }
        let end = start + STEP_MS * (longest + 1) as f64;
        lines.push(encode_marker(&SegmentMarker {
            kind: MarkerKind::End,
            label: trace.label(),
            timestamp_ms: end,
        }));
        t = end + GAP_MS;
    }
    lines
}

/// Streams `lines` to an ingest server as one client connection, then
/// closes the write side.
pub fn replay<A: ToSocketAddrs>(addr: A, lines: &[String]) -> io::Result<()> {
    let stream = TcpStream::connect(addr)?;
    let mut w = BufWriter::new(&stream);
    for line in lines {
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);
    stream.shutdown(Shutdown::Write)
}
