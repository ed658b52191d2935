//! Newline-delimited JSON records exchanged with collector clients.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::IngestError;
use crate::model::{ChannelName, HandMode, Label, SensorEvent, TraceMeta};

/// First record of every connection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hello {
    pub session: String,
    pub device: String,
    pub browser: String,
    pub hand: HandMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
}

impl Hello {
    pub fn from_meta(session: impl Into<String>, meta: &TraceMeta) -> Hello {
        Hello {
            session: session.into(),
            device: meta.device.clone(),
            browser: meta.browser.clone(),
            hand: meta.hand_mode,
            user: Some(meta.user_id.clone()),
            at: meta.collected_at.clone(),
        }
    }

    /// Metadata stamped on every trace of the session. Without an explicit
    /// user the session id stands in for it.
    pub fn meta(&self) -> TraceMeta {
        TraceMeta {
            user_id: self.user.clone().unwrap_or_else(|| self.session.clone()),
            device: self.device.clone(),
            browser: self.browser.clone(),
            hand_mode: self.hand,
            collected_at: self.at.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerKind {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMarker {
    pub kind: MarkerKind,
    pub label: Label,
    pub timestamp_ms: f64,
}

/// A decoded non-hello record.
#[derive(Debug, Clone, PartialEq)]
pub enum WireEvent {
    Data(SensorEvent),
    Marker(SegmentMarker),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WireRecord {
    Hello(Hello),
    Event(WireEvent),
}

fn malformed(msg: impl Into<String>) -> IngestError {
    IngestError::MalformedRecord(msg.into())
}

fn timestamp(obj: &Map<String, Value>) -> Result<f64, IngestError> {
    let t = obj
        .get("t")
        .and_then(Value::as_f64)
        .ok_or_else(|| malformed("missing numeric \"t\""))?;
    if !t.is_finite() || t < 0.0 {
        return Err(malformed(format!("bad timestamp {t}")));
    }
    Ok(t)
}

/// Decodes one line of any record kind.
pub fn parse_record(line: &str, session_id: &str) -> Result<WireRecord, IngestError> {
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed("record is not an object"));
    };
    if obj.contains_key("session") {
        let hello: Hello =
            serde_json::from_value(Value::Object(obj)).map_err(|e| malformed(e.to_string()))?;
        return Ok(WireRecord::Hello(hello));
    }
    if let Some(kind) = obj.get("marker") {
        let t = timestamp(&obj)?;
        let kind: MarkerKind =
            serde_json::from_value(kind.clone()).map_err(|e| malformed(e.to_string()))?;
        let label = obj
            .get("label")
            .and_then(Value::as_str)
            .ok_or_else(|| malformed("marker without \"label\""))?
            .parse::<Label>()
            .map_err(|e| malformed(e.to_string()))?;
        return Ok(WireRecord::Event(WireEvent::Marker(SegmentMarker {
            kind,
            label,
            timestamp_ms: t,
        })));
    }
    if let Some(ch) = obj.get("ch") {
        let t = timestamp(&obj)?;
        let name = ch.as_str().ok_or_else(|| malformed("\"ch\" is not a string"))?;
        let channel: ChannelName = name
            .parse()
            .map_err(|_| IngestError::UnknownChannel(name.to_string()))?;
        let value = match obj.get("v") {
            None => return Err(malformed("missing \"v\"")),
            Some(Value::Null) => return Err(IngestError::NonFiniteValue(name.to_string())),
            Some(v) => v.as_f64().ok_or_else(|| malformed("\"v\" is not a number"))?,
        };
        if !value.is_finite() {
            return Err(IngestError::NonFiniteValue(name.to_string()));
        }
        return Ok(WireRecord::Event(WireEvent::Data(SensorEvent {
            session_id: session_id.to_string(),
            timestamp_ms: t,
            channel,
            value,
        })));
    }
    Err(malformed("unrecognised record"))
}

/// Decodes a data or marker line. JSON has no NaN, so clients send `null`
/// for readings the browser reported as NaN; that is `NonFiniteValue`.
pub fn parse_event(line: &str, session_id: &str) -> Result<WireEvent, IngestError> {
    match parse_record(line, session_id)? {
        WireRecord::Event(e) => Ok(e),
        WireRecord::Hello(_) => Err(malformed("unexpected hello record")),
    }
}

pub fn encode_hello(hello: &Hello) -> String {
    serde_json::to_string(hello).expect("hello serializes")
}

pub fn encode_data(t: f64, channel: ChannelName, value: f64) -> String {
    serde_json::json!({"t": t, "ch": channel.as_str(), "v": value}).to_string()
}

pub fn encode_marker(marker: &SegmentMarker) -> String {
    serde_json::json!({
        "t": marker.timestamp_ms,
        "marker": marker.kind,
        "label": marker.label.to_string(),
    })
    .to_string()
}
