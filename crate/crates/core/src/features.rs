//! Time- and frequency-domain feature extraction.
//!
//! Every sequence is first shifted so that its first reading is zero. The
//! phase-1 vector (164 values) is laid out in five sections:
//!
//! | section          | size | contents                                             |
//! |------------------|------|------------------------------------------------------|
//! | time-raw         | 48   | max/min/mean/energy of each of the 12 sequences      |
//! | time-derivative  | 48   | max/min/mean/energy of each first difference         |
//! | time-dac         | 6    | max/min/mean of the acceleration and gravity DACs    |
//! | frequency        | 48   | max/min/mean/energy of the DFT magnitudes            |
//! | energy-interval  | 14   | 70%-energy window length of the 6 acceleration axes, |
//! |                  |      | their 6 derivatives and the 2 DAC sequences          |
//!
//! Phase 2 drops the energy-interval section (150 values). Within a section
//! features are channel-major in canonical channel order. DAC energy is not
//! a feature: two DAC sequences with three statistics each is what brings the
//! time domain to exactly 102 and the energy-interval section to exactly 14.

use std::cell::RefCell;
use std::fmt;
use std::ops::Range;
use std::sync::{Arc, OnceLock};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::FeatureError;
use crate::model::{ChannelGroup, LabeledTrace, SensorChannel};

/// Fraction of total energy the energy-interval window must capture.
pub const ENERGY_FRACTION: f64 = 0.7;

/// Max, min, mean and energy (sum of squares) of a sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub energy: f64,
}

impl SeqStats {
    pub const ZERO: SeqStats = SeqStats {
        max: 0.0,
        min: 0.0,
        mean: 0.0,
        energy: 0.0,
    };

    fn to_array(self) -> [f64; 4] {
        [self.max, self.min, self.mean, self.energy]
    }
}

/// Subtracts the first reading from every reading.
pub fn baseline_shift(seq: &[f64]) -> Result<Vec<f64>, FeatureError> {
    let first = *seq.first().ok_or(FeatureError::EmptySequence)?;
    Ok(seq.iter().map(|v| v - first).collect())
}

/// First difference `d[i] = v[i+1] - v[i]`; one shorter than the input.
pub fn derivative(seq: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if seq.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    Ok(seq.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Device acceleration change: Euclidean norm of consecutive differences of
/// an (x, y, z) triple.
pub fn dac(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() != z.len() {
        return Err(FeatureError::LengthMismatch(x.len(), z.len()));
    }
    if x.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    Ok((1..x.len())
        .map(|i| {
            let dx = x[i] - x[i - 1];
            let dy = y[i] - y[i - 1];
            let dz = z[i] - z[i - 1];
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect())
}

pub fn stats(seq: &[f64]) -> Result<SeqStats, FeatureError> {
    if seq.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut energy = 0.0;
    for &v in seq {
        max = max.max(v);
        min = min.min(v);
        sum += v;
        energy += v * v;
    }
    // rounding in the sum can push the mean of a constant run past its bounds
    let mean = (sum / seq.len() as f64).clamp(min, max);
    Ok(SeqStats {
        max,
        min,
        mean,
        energy,
    })
}

/// Statistics of an empty run are all zero, which keeps the layout fixed.
fn stats_or_zero(seq: &[f64]) -> SeqStats {
    stats(seq).unwrap_or(SeqStats::ZERO)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitudes of all `n` DFT bins of `seq`, no padding.
pub fn dft_magnitudes(seq: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = seq.iter().map(|&v| Complex::new(v, 0.0)).collect();
    if buf.is_empty() {
        return Vec::new();
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// Max/min/mean/energy of the DFT magnitude spectrum.
pub fn fft_features(seq: &[f64]) -> Result<SeqStats, FeatureError> {
    if seq.len() < 2 {
        return Err(FeatureError::TooShort(seq.len()));
    }
    stats(&dft_magnitudes(seq))
}

/// Length `2h + 1` of the shortest window `[c - h, c + h]` centred on the
/// centre of energy that holds at least `fraction` of the total energy.
///
/// The centre of energy `sum(i * v_i^2) / E` uses 0-based indices and is
/// rounded to the nearest index with ties going to the lower one. Windows
/// are clipped to the sequence but keep their nominal odd length.
pub fn energy_interval_length(seq: &[f64], fraction: f64) -> Result<usize, FeatureError> {
    if seq.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(FeatureError::BadFraction(fraction));
    }
    let mut prefix = Vec::with_capacity(seq.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    let mut moment = 0.0;
    for (i, v) in seq.iter().enumerate() {
        let e = v * v;
        acc += e;
        moment += i as f64 * e;
        prefix.push(acc);
    }
    let total = acc;
    if total <= 0.0 {
        return Err(FeatureError::ZeroEnergy);
    }
    let last = seq.len() - 1;
    let centre = ((moment / total - 0.5).ceil().max(0.0) as usize).min(last);
    let target = fraction * total;
    for h in 0..=last {
        let lo = centre.saturating_sub(h);
        let hi = (centre + h).min(last);
        if prefix[hi + 1] - prefix[lo] >= target {
            return Ok(2 * h + 1);
        }
    }
    // the widest window covers every index, so its sum is exactly `total`
    unreachable!("full window holds all energy")
}

fn energy_interval_or_zero(seq: &[f64]) -> f64 {
    match energy_interval_length(seq, ENERGY_FRACTION) {
        Ok(len) => len as f64,
        Err(_) => 0.0,
    }
}

/// Which classification phase a vector feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Touch actions: 164 features.
    Phase1,
    /// PIN digits: 150 features.
    Phase2,
}

impl Phase {
    pub fn number(self) -> u8 {
        match self {
            Phase::Phase1 => 1,
            Phase::Phase2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Phase> {
        match n {
            1 => Some(Phase::Phase1),
            2 => Some(Phase::Phase2),
            _ => None,
        }
    }

    pub fn feature_count(self) -> usize {
        FeatureLayout::for_phase(self).len()
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let n = u8::deserialize(d)?;
        Phase::from_number(n).ok_or_else(|| serde::de::Error::custom(format!("bad phase {n}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    TimeRaw,
    TimeDerivative,
    TimeDac,
    Frequency,
    EnergyInterval,
}

impl Section {
    pub fn as_str(self) -> &'static str {
        match self {
            Section::TimeRaw => "time-raw",
            Section::TimeDerivative => "time-derivative",
            Section::TimeDac => "time-dac",
            Section::Frequency => "frequency",
            Section::EnergyInterval => "energy-interval",
        }
    }
}

/// Ordered feature names with section boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    phase: Phase,
    names: Vec<String>,
    sections: Vec<(Section, Range<usize>)>,
}

const STAT_NAMES: [&str; 4] = ["max", "min", "mean", "energy"];
const DAC_GROUPS: [ChannelGroup; 2] = [
    ChannelGroup::Acceleration,
    ChannelGroup::AccelerationWithGravity,
];

/// Acceleration and acceleration-including-gravity axes, in canonical order.
fn acceleration_axes() -> impl Iterator<Item = SensorChannel> {
    DAC_GROUPS.into_iter().flat_map(|g| g.channels())
}

impl FeatureLayout {
    fn build(phase: Phase) -> Self {
        let mut names = Vec::new();
        let mut sections = Vec::new();
        let mut section = |sec: Section, items: Vec<String>, names: &mut Vec<String>| {
            let start = names.len();
            names.extend(items);
            sections.push((sec, start..names.len()));
        };
        let per_channel = |prefix: &str| -> Vec<String> {
            SensorChannel::ALL
                .iter()
                .flat_map(|ch| STAT_NAMES.iter().map(move |s| format!("{prefix}.{ch}.{s}")))
                .collect()
        };
        section(Section::TimeRaw, per_channel("raw"), &mut names);
        section(Section::TimeDerivative, per_channel("deriv"), &mut names);
        section(
            Section::TimeDac,
            DAC_GROUPS
                .iter()
                .flat_map(|g| STAT_NAMES[..3].iter().map(move |s| format!("dac.{}.{s}", g.as_str())))
                .collect(),
            &mut names,
        );
        section(Section::Frequency, per_channel("fft"), &mut names);
        if phase == Phase::Phase1 {
            let mut eil: Vec<String> = acceleration_axes().map(|ch| format!("eil.raw.{ch}")).collect();
            eil.extend(acceleration_axes().map(|ch| format!("eil.deriv.{ch}")));
            eil.extend(DAC_GROUPS.iter().map(|g| format!("eil.dac.{}", g.as_str())));
            section(Section::EnergyInterval, eil, &mut names);
        }
        FeatureLayout {
            phase,
            names,
            sections,
        }
    }

    /// The shared layout for a phase.
    pub fn for_phase(phase: Phase) -> &'static FeatureLayout {
        static P1: OnceLock<FeatureLayout> = OnceLock::new();
        static P2: OnceLock<FeatureLayout> = OnceLock::new();
        match phase {
            Phase::Phase1 => P1.get_or_init(|| FeatureLayout::build(Phase::Phase1)),
            Phase::Phase2 => P2.get_or_init(|| FeatureLayout::build(Phase::Phase2)),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn sections(&self) -> &[(Section, Range<usize>)] {
        &self.sections
    }

    pub fn section_sizes(&self) -> Vec<usize> {
        self.sections.iter().map(|(_, r)| r.len()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Hex SHA-256 of the newline-joined names; stored in model files.
    pub fn fingerprint(&self) -> String {
        fingerprint_names(&self.names)
    }
}

pub fn fingerprint_names(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            hasher.update(b"\n");
        }
        hasher.update(n.as_bytes());
    }
    hex::encode(hasher.finalize())
}

/// A fixed-layout feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    phase: Phase,
    values: Arc<[f64]>,
}

impl FeatureVector {
    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &'static FeatureLayout {
        FeatureLayout::for_phase(self.phase)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.layout().index_of(name).map(|i| self.values[i])
    }

    pub fn section(&self, section: Section) -> Option<&[f64]> {
        self.layout()
            .sections()
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, r)| &self.values[r.clone()])
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "phase {} [{} features]", self.phase.number(), self.values.len())
    }
}

/// Turns a trace into its feature vector for `phase`.
pub fn extract(trace: &LabeledTrace, phase: Phase) -> Result<FeatureVector, FeatureError> {
    let mut shifted: Vec<Vec<f64>> = Vec::with_capacity(12);
    for ch in SensorChannel::ALL {
        let seq = trace.sequence(ch).values();
        if seq.len() < 2 {
            return Err(FeatureError::SequenceTooShort {
                channel: ch,
                len: seq.len(),
            });
        }
        shifted.push(baseline_shift(seq)?);
    }
    let derivs: Vec<Vec<f64>> = shifted
        .iter()
        .map(|s| derivative(s))
        .collect::<Result<_, _>>()?;
    let dacs: Vec<Vec<f64>> = DAC_GROUPS
        .iter()
        .map(|g| {
            let [x, y, z] = g.channels().map(|ch| shifted[ch.index()].as_slice());
            dac(x, y, z)
        })
        .collect::<Result<_, _>>()?;

    let layout = FeatureLayout::for_phase(phase);
    let mut values = Vec::with_capacity(layout.len());
    for s in &shifted {
        values.extend(stats(s)?.to_array());
    }
    for d in &derivs {
        values.extend(stats_or_zero(d).to_array());
    }
    for d in &dacs {
        let st = stats_or_zero(d);
        values.extend([st.max, st.min, st.mean]);
    }
    for s in &shifted {
        values.extend(fft_features(s)?.to_array());
    }
    if phase == Phase::Phase1 {
        for ch in acceleration_axes() {
            values.push(energy_interval_or_zero(&shifted[ch.index()]));
        }
        for ch in acceleration_axes() {
            values.push(energy_interval_or_zero(&derivs[ch.index()]));
        }
        for d in &dacs {
            values.push(energy_interval_or_zero(d));
        }
    }
    debug_assert_eq!(values.len(), layout.len());
    Ok(FeatureVector {
        phase,
        values: values.into(),
    })
}
