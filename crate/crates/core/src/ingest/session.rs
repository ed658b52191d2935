use log::warn;

use super::stats::{Counter, IngestStats};
use super::wire::{parse_record, Hello, MarkerKind, SegmentMarker, WireEvent, WireRecord};
use crate::error::IngestError;
use crate::model::{
    ChannelGroup, ChannelName, Label, LabeledTrace, Sequence, SensorChannel, SensorEvent, TraceMeta,
};

/// Readings kept per channel while no segment is open.
const IDLE_BUFFER_CAP: usize = 1 << 16;

/// Buffered readings and segmentation state of one client session.
#[derive(Debug, Clone)]
pub struct SessionState {
    session_id: String,
    meta: TraceMeta,
    /// (timestamp, value) per wire channel, in arrival order.
    buffers: Vec<Vec<(f64, f64)>>,
    last_t: Vec<f64>,
    last_interval: Option<f64>,
    open: Option<(Label, f64)>,
    out_of_order: u64,
}

fn slot(ch: ChannelName) -> usize {
    match ch {
        ChannelName::Sensor(s) => s.index(),
        ChannelName::Interval => 12,
    }
}

impl SessionState {
    pub fn new(session_id: impl Into<String>, meta: TraceMeta) -> Self {
        SessionState {
            session_id: session_id.into(),
            meta,
            buffers: vec![Vec::new(); 13],
            last_t: vec![f64::NEG_INFINITY; 13],
            last_interval: None,
            open: None,
            out_of_order: 0,
        }
    }

    pub fn from_hello(hello: &Hello) -> Self {
        Self::new(hello.session.clone(), hello.meta())
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    pub fn open_segment(&self) -> Option<(Label, f64)> {
        self.open
    }

    /// Readings that arrived with a timestamp below their channel's previous one.
    pub fn out_of_order(&self) -> u64 {
        self.out_of_order
    }

    /// Buffers one reading. Returns false when its timestamp went backwards.
    pub fn push(&mut self, ev: &SensorEvent) -> bool {
        let i = slot(ev.channel);
        let in_order = ev.timestamp_ms >= self.last_t[i];
        if !in_order {
            self.out_of_order += 1;
        } else {
            self.last_t[i] = ev.timestamp_ms;
        }
        if ev.channel == ChannelName::Interval {
            self.last_interval = Some(ev.value);
        }
        let buf = &mut self.buffers[i];
        if self.open.is_none() && buf.len() >= IDLE_BUFFER_CAP {
            buf.drain(..IDLE_BUFFER_CAP / 2);
        }
        buf.push((ev.timestamp_ms, ev.value));
        in_order
    }

    /// Opens a segment. If one is already open it is replaced and
    /// `SegmentAlreadyOpen` is returned for counting.
    pub fn start(&mut self, label: Label, t: f64) -> Result<(), IngestError> {
        let replaced = self.open.replace((label, t)).is_some();
        for buf in &mut self.buffers {
            buf.retain(|(ts, _)| *ts >= t);
        }
        if replaced {
            Err(IngestError::SegmentAlreadyOpen)
        } else {
            Ok(())
        }
    }

    /// Drops the open segment, if any. Returns whether one was open.
    pub fn discard_open(&mut self) -> bool {
        self.open.take().is_some()
    }

    /// Applies one decoded record; an end marker yields a trace.
    pub fn apply(&mut self, ev: WireEvent) -> Result<Option<LabeledTrace>, IngestError> {
        match ev {
            WireEvent::Data(e) => {
                self.push(&e);
                Ok(None)
            }
            WireEvent::Marker(m) => match m.kind {
                MarkerKind::Start => self.start(m.label, m.timestamp_ms).map(|_| None),
                MarkerKind::End => assemble_trace(self, &m).map(Some),
            },
        }
    }
}

/// Closes the open segment and builds its trace from buffered readings with
/// `start ≤ t ≤ end`, in arrival order.
///
/// The interval is the mean of in-window `interval` readings; without any it
/// falls back to the last one seen, then to 0. The segment is closed and
/// its readings dropped whether or not assembly succeeds.
pub fn assemble_trace(
    session: &mut SessionState,
    end: &SegmentMarker,
) -> Result<LabeledTrace, IngestError> {
    let (label, start) = session.open.take().ok_or(IngestError::NoOpenSegment)?;
    let stop = end.timestamp_ms;
    let window = |buf: &[(f64, f64)]| -> Vec<f64> {
        buf.iter()
            .filter(|(t, _)| *t >= start && *t <= stop)
            .map(|(_, v)| *v)
            .collect()
    };
    let seqs: Vec<Vec<f64>> = SensorChannel::ALL
        .iter()
        .map(|ch| window(&session.buffers[ch.index()]))
        .collect();
    let intervals = window(&session.buffers[12]);
    for buf in &mut session.buffers {
        buf.retain(|(t, _)| *t > stop);
    }
    if end.label != label {
        return Err(IngestError::LabelMismatch {
            start: label,
            end: end.label,
        });
    }
    for g in ChannelGroup::ALL {
        if g.channels().iter().all(|ch| seqs[ch.index()].is_empty()) {
            return Err(IngestError::EmptySegment(g));
        }
    }
    let interval = if intervals.is_empty() {
        session.last_interval.unwrap_or(0.0)
    } else {
        intervals.iter().sum::<f64>() / intervals.len() as f64
    };
    let mut it = seqs.into_iter();
    let sequences: [Sequence; 12] = std::array::from_fn(|_| {
        Sequence::new(it.next().expect("12 channels")).expect("wire values are finite")
    });
    Ok(LabeledTrace::new(sequences, interval, label, session.meta.clone())?)
}

/// Turns a connection's lines into traces: the first line must be a hello,
/// every later line is a data or marker record. Bad records are counted and
/// skipped; they never end the session.
#[derive(Debug, Default)]
pub struct LineAssembler {
    state: Option<SessionState>,
}

impl LineAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.state.as_ref()
    }

    pub fn session_mut(&mut self) -> Option<&mut SessionState> {
        self.state.as_mut()
    }

    pub fn feed(&mut self, line: &str, stats: &IngestStats) -> Option<LabeledTrace> {
        let line = line.trim_end_matches(['\r', '\n']);
        stats.incr(Counter::Lines);
        if line.trim().is_empty() {
            return None;
        }
        let sid = self.state.as_ref().map(|s| s.session_id.as_str()).unwrap_or("");
        let record = match parse_record(line, sid) {
            Ok(r) => r,
            Err(e) => {
                stats.incr(Counter::for_error(&e));
                return None;
            }
        };
        let result = match (record, self.state.as_mut()) {
            (WireRecord::Hello(h), None) => {
                self.state = Some(SessionState::from_hello(&h));
                return None;
            }
            (WireRecord::Hello(_), Some(_)) => {
                Err(IngestError::MalformedRecord("repeated hello".into()))
            }
            (WireRecord::Event(_), None) => Err(IngestError::MissingHello),
            (WireRecord::Event(WireEvent::Data(e)), Some(s)) => {
                if !s.push(&e) {
                    stats.incr(Counter::OutOfOrder);
                }
                Ok(None)
            }
            (WireRecord::Event(ev), Some(s)) => s.apply(ev),
        };
        match result {
            Ok(Some(trace)) => {
                stats.incr(Counter::TracesAssembled);
                Some(trace)
            }
            Ok(None) => None,
            Err(e) => {
                let sid = self.state.as_ref().map(|s| s.session_id.as_str()).unwrap_or("?");
                warn!("session {sid}: {e}");
                stats.incr(Counter::for_error(&e));
                None
            }
        }
    }

    /// Ends the session, discarding any open segment. Returns whether one
    /// was open.
    pub fn finish(&mut self) -> bool {
        self.state.as_mut().is_some_and(|s| s.discard_open())
    }
}

/// Assembles a recorded session offline, exactly as the server would.
pub fn assemble_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    stats: &IngestStats,
) -> Vec<LabeledTrace> {
    let mut asm = LineAssembler::new();
    let traces = lines.into_iter().filter_map(|l| asm.feed(l, stats)).collect();
    if asm.finish() {
        stats.incr(Counter::DisconnectMidSegment);
    }
    traces
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Digit;

    fn ev(t: f64, ch: ChannelName, v: f64) -> SensorEvent {
        SensorEvent {
            session_id: "s".into(),
            timestamp_ms: t,
            channel: ch,
            value: v,
        }
    }

    fn end(label: Label, t: f64) -> SegmentMarker {
        SegmentMarker {
            kind: MarkerKind::End,
            label,
            timestamp_ms: t,
        }
    }

    fn seven() -> Label {
        Label::Digit(Digit::new(7).unwrap())
    }

    fn filled() -> SessionState {
        let mut s = SessionState::new("s", TraceMeta::default());
        for t in 1..=10 {
            for ch in ChannelName::ALL {
                s.push(&ev(t as f64, ch, t as f64 * 10.0));
            }
        }
        s
    }

    #[test]
    fn window_is_inclusive() {
        let mut s = filled();
        s.start(seven(), 2.0).unwrap();
        let tr = assemble_trace(&mut s, &end(seven(), 8.0)).unwrap();
        for ch in SensorChannel::ALL {
            assert_eq!(tr.sequence(ch).values(), [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0]);
        }
        assert_eq!(tr.interval_ms(), 50.0);
        assert_eq!(tr.label(), seven());
        assert!(s.open_segment().is_none());
    }

    #[test]
    fn end_without_start() {
        let mut s = filled();
        assert!(matches!(
            assemble_trace(&mut s, &end(seven(), 8.0)),
            Err(IngestError::NoOpenSegment)
        ));
    }

    #[test]
    fn empty_group() {
        let mut s = SessionState::new("s", TraceMeta::default());
        s.start(seven(), 0.0).unwrap();
        for ch in ChannelName::ALL {
            if !matches!(ch, ChannelName::Sensor(c) if c.group() == ChannelGroup::Acceleration) {
                s.push(&ev(1.0, ch, 1.0));
            }
        }
        assert!(matches!(
            assemble_trace(&mut s, &end(seven(), 2.0)),
            Err(IngestError::EmptySegment(ChannelGroup::Acceleration))
        ));
    }

    #[test]
    fn ragged_group_is_invalid() {
        let mut s = filled();
        s.start(seven(), 2.0).unwrap();
        s.push(&ev(8.0, ChannelName::Sensor(SensorChannel::MX), 1.0));
        assert!(matches!(
            assemble_trace(&mut s, &end(seven(), 8.0)),
            Err(IngestError::InvalidSegment(_))
        ));
    }

    #[test]
    fn mismatched_end_label() {
        let mut s = filled();
        s.start(seven(), 2.0).unwrap();
        let other = Label::Digit(Digit::new(1).unwrap());
        assert!(matches!(
            assemble_trace(&mut s, &end(other, 8.0)),
            Err(IngestError::LabelMismatch { .. })
        ));
        assert!(s.open_segment().is_none());
    }

    #[test]
    fn interval_falls_back_to_last_seen() {
        let mut s = SessionState::new("s", TraceMeta::default());
        s.push(&ev(0.5, ChannelName::Interval, 16.0));
        s.start(seven(), 1.0).unwrap();
        for ch in SensorChannel::ALL {
            s.push(&ev(2.0, ChannelName::Sensor(ch), 1.0));
        }
        let tr = assemble_trace(&mut s, &end(seven(), 3.0)).unwrap();
        assert_eq!(tr.interval_ms(), 16.0);
    }

    #[test]
    fn restart_replaces_open_segment() {
        let mut s = filled();
        s.start(seven(), 2.0).unwrap();
        assert!(matches!(s.start(seven(), 5.0), Err(IngestError::SegmentAlreadyOpen)));
        let tr = assemble_trace(&mut s, &end(seven(), 8.0)).unwrap();
        assert_eq!(tr.sequence(SensorChannel::OX).len(), 4);
    }

    #[test]
    fn out_of_order_is_counted_and_kept() {
        let mut s = SessionState::new("s", TraceMeta::default());
        let mx = ChannelName::Sensor(SensorChannel::MX);
        assert!(s.push(&ev(5.0, mx, 1.0)));
        assert!(!s.push(&ev(4.0, mx, 2.0)));
        assert!(s.push(&ev(5.0, mx, 3.0)));
        assert_eq!(s.out_of_order(), 1);
        assert_eq!(s.buffers[slot(mx)].len(), 3);
    }

    #[test]
    fn line_assembler_counts_problems() {
        let stats = IngestStats::new();
        let lines = [
            r#"{"t":0,"ch":"MX","v":1}"#,
            r#"{"session":"a","device":"d","browser":"b","hand":"one"}"#,
            r#"{"t":0,"ch":"NOPE","v":1}"#,
            r#"{"t":1,"marker":"end","label":"digit:1"}"#,
            r#"{"t":2,"marker":"start","label":"digit:1"}"#,
        ];
        let traces = assemble_lines(lines, &stats);
        assert!(traces.is_empty());
        assert_eq!(stats.get(Counter::MissingHello), 1);
        assert_eq!(stats.get(Counter::UnknownChannel), 1);
        assert_eq!(stats.get(Counter::NoOpenSegment), 1);
        assert_eq!(stats.get(Counter::DisconnectMidSegment), 1);
        assert_eq!(stats.get(Counter::Lines), 5);
    }
}
