//! Domain types shared by every stage of the pipeline.
//!
//! A recording is twelve sensor sequences (four sensor groups of three axes)
//! plus the motion reading interval. Channel names follow the browser
//! listener's emit vocabulary exactly, including the orientation crossing:
//! `OX` carries orientation gamma and `OZ` carries orientation alpha.
//!
//! Units are W3C semantics (degrees, m/s², deg/s, ms) and are never converted.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ModelError;

/// One of the twelve sensor axes carried by a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorChannel {
    /// Orientation gamma (rotation around y).
    OX,
    /// Orientation beta (rotation around x).
    OY,
    /// Orientation alpha (rotation around z).
    OZ,
    MX,
    MY,
    MZ,
    MGX,
    MGY,
    MGZ,
    RAlpha,
    RBeta,
    RGama,
}

impl SensorChannel {
    /// Canonical order used for storage, features and serialization.
    pub const ALL: [SensorChannel; 12] = [
        SensorChannel::OX,
        SensorChannel::OY,
        SensorChannel::OZ,
        SensorChannel::MX,
        SensorChannel::MY,
        SensorChannel::MZ,
        SensorChannel::MGX,
        SensorChannel::MGY,
        SensorChannel::MGZ,
        SensorChannel::RAlpha,
        SensorChannel::RBeta,
        SensorChannel::RGama,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorChannel::OX => "OX",
            SensorChannel::OY => "OY",
            SensorChannel::OZ => "OZ",
            SensorChannel::MX => "MX",
            SensorChannel::MY => "MY",
            SensorChannel::MZ => "MZ",
            SensorChannel::MGX => "MGX",
            SensorChannel::MGY => "MGY",
            SensorChannel::MGZ => "MGZ",
            SensorChannel::RAlpha => "rAlpha",
            SensorChannel::RBeta => "rBeta",
            SensorChannel::RGama => "rGama",
        }
    }

    pub fn group(self) -> ChannelGroup {
        ChannelGroup::ALL[self.index() / 3]
    }
}

impl fmt::Display for SensorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The readings delivered together by one DOM event arrive as a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelGroup {
    Orientation,
    Acceleration,
    AccelerationWithGravity,
    RotationRate,
}

impl ChannelGroup {
    pub const ALL: [ChannelGroup; 4] = [
        ChannelGroup::Orientation,
        ChannelGroup::Acceleration,
        ChannelGroup::AccelerationWithGravity,
        ChannelGroup::RotationRate,
    ];

    pub fn channels(self) -> [SensorChannel; 3] {
        let base = self as usize * 3;
        [
            SensorChannel::ALL[base],
            SensorChannel::ALL[base + 1],
            SensorChannel::ALL[base + 2],
        ]
    }

    /// Orientation arrives on `deviceorientation`; the rest on `devicemotion`.
    pub fn is_motion(self) -> bool {
        !matches!(self, ChannelGroup::Orientation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelGroup::Orientation => "orientation",
            ChannelGroup::Acceleration => "acceleration",
            ChannelGroup::AccelerationWithGravity => "gravity",
            ChannelGroup::RotationRate => "rotation",
        }
    }
}

/// Wire-level channel vocabulary: the twelve sensor axes plus `interval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelName {
    Sensor(SensorChannel),
    Interval,
}

impl ChannelName {
    pub const ALL: [ChannelName; 13] = [
        ChannelName::Sensor(SensorChannel::OX),
        ChannelName::Sensor(SensorChannel::OY),
        ChannelName::Sensor(SensorChannel::OZ),
        ChannelName::Sensor(SensorChannel::MX),
        ChannelName::Sensor(SensorChannel::MY),
        ChannelName::Sensor(SensorChannel::MZ),
        ChannelName::Sensor(SensorChannel::MGX),
        ChannelName::Sensor(SensorChannel::MGY),
        ChannelName::Sensor(SensorChannel::MGZ),
        ChannelName::Sensor(SensorChannel::RAlpha),
        ChannelName::Sensor(SensorChannel::RBeta),
        ChannelName::Sensor(SensorChannel::RGama),
        ChannelName::Interval,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelName::Sensor(ch) => ch.as_str(),
            ChannelName::Interval => "interval",
        }
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChannelName::ALL
            .iter()
            .copied()
            .find(|ch| ch.as_str() == s)
            .ok_or_else(|| ModelError::UnknownChannel(s.to_string()))
    }
}

impl FromStr for SensorChannel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<ChannelName>()? {
            ChannelName::Sensor(ch) => Ok(ch),
            ChannelName::Interval => Err(ModelError::UnknownChannel(s.to_string())),
        }
    }
}

/// One timestamped reading on one channel of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub session_id: String,
    pub timestamp_ms: f64,
    pub channel: ChannelName,
    pub value: f64,
}

/// An ordered run of finite readings.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct Sequence(Vec<f64>);

impl Sequence {
    pub fn new(values: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite(pos));
        }
        Ok(Sequence(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl<'de> Deserialize<'de> for Sequence {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Sequence::new(values).map_err(serde::de::Error::custom)
    }
}

impl AsRef<[f64]> for Sequence {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TouchAction {
    Click,
    Hold,
    ScrollUp,
    ScrollDown,
    ScrollRight,
    ScrollLeft,
    ZoomIn,
    ZoomOut,
}

impl TouchAction {
    pub const ALL: [TouchAction; 8] = [
        TouchAction::Click,
        TouchAction::Hold,
        TouchAction::ScrollUp,
        TouchAction::ScrollDown,
        TouchAction::ScrollRight,
        TouchAction::ScrollLeft,
        TouchAction::ZoomIn,
        TouchAction::ZoomOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TouchAction::Click => "click",
            TouchAction::Hold => "hold",
            TouchAction::ScrollUp => "scroll_up",
            TouchAction::ScrollDown => "scroll_down",
            TouchAction::ScrollRight => "scroll_right",
            TouchAction::ScrollLeft => "scroll_left",
            TouchAction::ZoomIn => "zoom_in",
            TouchAction::ZoomOut => "zoom_out",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            TouchAction::Click => "Click",
            TouchAction::Hold => "Hold",
            TouchAction::ScrollUp => "Scroll up",
            TouchAction::ScrollDown => "Scroll down",
            TouchAction::ScrollRight => "Scroll right",
            TouchAction::ScrollLeft => "Scroll left",
            TouchAction::ZoomIn => "Zoom in",
            TouchAction::ZoomOut => "Zoom out",
        }
    }

    pub fn is_scroll(self) -> bool {
        matches!(
            self,
            TouchAction::ScrollUp
                | TouchAction::ScrollDown
                | TouchAction::ScrollRight
                | TouchAction::ScrollLeft
        )
    }
}

impl FromStr for TouchAction {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TouchAction::ALL
            .iter()
            .copied()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| ModelError::BadLabel(s.to_string()))
    }
}

impl Serialize for TouchAction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for TouchAction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A keypad digit, 0 through 9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digit(u8);

impl Digit {
    pub fn new(value: u8) -> Result<Self, ModelError> {
        if value <= 9 {
            Ok(Digit(value))
        } else {
            Err(ModelError::BadLabel(value.to_string()))
        }
    }

    pub fn all() -> impl Iterator<Item = Digit> {
        (0..10).map(Digit)
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Class of a trace: a touch action or a PIN digit.
///
/// The canonical string form is `action:<name>` or `digit:<0-9>`; it is used
/// on the wire, in dataset files and in feature matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Action(TouchAction),
    Digit(Digit),
}

impl Label {
    pub fn all_actions() -> Vec<Label> {
        TouchAction::ALL.iter().map(|a| Label::Action(*a)).collect()
    }

    pub fn all_digits() -> Vec<Label> {
        Digit::all().map(Label::Digit).collect()
    }

    pub fn as_action(self) -> Option<TouchAction> {
        match self {
            Label::Action(a) => Some(a),
            Label::Digit(_) => None,
        }
    }

    pub fn as_digit(self) -> Option<Digit> {
        match self {
            Label::Digit(d) => Some(d),
            Label::Action(_) => None,
        }
    }

    /// Human-readable name for report tables.
    pub fn display_name(self) -> String {
        match self {
            Label::Action(a) => a.display_name().to_string(),
            Label::Digit(d) => d.to_string(),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Action(a) => write!(f, "action:{}", a.as_str()),
            Label::Digit(d) => write!(f, "digit:{}", d),
        }
    }
}

impl FromStr for Label {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::BadLabel(s.to_string());
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "action" => value.parse().map(Label::Action).map_err(|_| bad()),
            "digit" => {
                let v: u8 = value.parse().map_err(|_| bad())?;
                Digit::new(v).map(Label::Digit).map_err(|_| bad())
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HandMode {
    #[serde(rename = "one")]
    OneHand,
    #[serde(rename = "two")]
    TwoHand,
    #[default]
    #[serde(rename = "unknown")]
    Unknown,
}

impl FromStr for HandMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "one" => Ok(HandMode::OneHand),
            "two" => Ok(HandMode::TwoHand),
            "unknown" => Ok(HandMode::Unknown),
            other => Err(ModelError::BadHandMode(other.to_string())),
        }
    }
}

/// Who recorded a trace, and on what.
///
/// `collected_at` is whatever timestamp string the client supplied in its
/// hello record; the server never stamps wall-clock time so that replays
/// reproduce identical files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    #[serde(rename = "user")]
    pub user_id: String,
    pub device: String,
    pub browser: String,
    #[serde(rename = "hand")]
    pub hand_mode: HandMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collected_at: Option<String>,
}

/// A segmented, labeled recording: the unit of classification.
///
/// Invariants enforced on construction: all twelve sensor sequences are
/// non-empty and the three axes of each group have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    sequences: [Sequence; 12],
    interval_ms: f64,
    label: Label,
    meta: TraceMeta,
}

impl LabeledTrace {
    pub fn new(
        sequences: [Sequence; 12],
        interval_ms: f64,
        label: Label,
        meta: TraceMeta,
    ) -> Result<Self, ModelError> {
        for ch in SensorChannel::ALL {
            if sequences[ch.index()].is_empty() {
                return Err(ModelError::EmptyChannel(ch));
            }
        }
        for group in ChannelGroup::ALL {
            let [a, b, c] = group.channels().map(|ch| sequences[ch.index()].len());
            if a != b || b != c {
                return Err(ModelError::RaggedGroup(group));
            }
        }
        if !interval_ms.is_finite() {
            return Err(ModelError::NonFinite(0));
        }
        Ok(LabeledTrace {
            sequences,
            interval_ms,
            label,
            meta,
        })
    }

    pub fn sequence(&self, ch: SensorChannel) -> &Sequence {
        &self.sequences[ch.index()]
    }

    pub fn sequences(&self) -> &[Sequence; 12] {
        &self.sequences
    }

    pub fn interval_ms(&self) -> f64 {
        self.interval_ms
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn meta(&self) -> &TraceMeta {
        &self.meta
    }

    /// Returns a copy with every sequence transformed by `f`.
    pub fn map_sequences<F>(&self, mut f: F) -> Result<Self, ModelError>
    where
        F: FnMut(SensorChannel, &[f64]) -> Vec<f64>,
    {
        let mut out: [Sequence; 12] = Default::default();
        for ch in SensorChannel::ALL {
            out[ch.index()] = Sequence::new(f(ch, self.sequence(ch).values()))?;
        }
        LabeledTrace::new(out, self.interval_ms, self.label, self.meta.clone())
    }
}

/// On-disk shape of a trace: `{"label":…,"meta":…,"interval":…,"seq":{…}}`.
#[derive(Serialize, Deserialize)]
struct TraceRecord {
    label: Label,
    meta: TraceMeta,
    interval: f64,
    seq: SeqMap,
}

/// Channel map serialized in canonical channel order.
struct SeqMap([Sequence; 12]);

impl Serialize for SeqMap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(12))?;
        for ch in SensorChannel::ALL {
            map.serialize_entry(ch.as_str(), &self.0[ch.index()])?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for SeqMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = BTreeMap::<String, Sequence>::deserialize(d)?;
        let mut out: [Option<Sequence>; 12] = Default::default();
        for (name, seq) in raw {
            let ch: SensorChannel = name.parse().map_err(D::Error::custom)?;
            out[ch.index()] = Some(seq);
        }
        let mut seqs: [Sequence; 12] = Default::default();
        for ch in SensorChannel::ALL {
            seqs[ch.index()] = out[ch.index()]
                .take()
                .ok_or_else(|| D::Error::custom(format!("missing channel {ch}")))?;
        }
        Ok(SeqMap(seqs))
    }
}

impl Serialize for LabeledTrace {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TraceRecord {
            label: self.label,
            meta: self.meta.clone(),
            interval: self.interval_ms,
            seq: SeqMap(self.sequences.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LabeledTrace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = TraceRecord::deserialize(d)?;
        LabeledTrace::new(rec.seq.0, rec.interval, rec.label, rec.meta)
            .map_err(serde::de::Error::custom)
    }
}
