//! Synthetic labeled traces for every touch action and digit.
//!
//! Each class has a fixed signature: a handful of (channel, gain, waveform)
//! components. A signature is a family template shared by related classes
//! (presses, scrolls, zooms) plus a class-specific part; only the
//! class-specific part is multiplied by `separation`. Everything is scaled by
//! the per-group amplitude of the device profile, and i.i.d. Gaussian noise
//! and a random resting offset per channel (removed by baseline shifting)
//! are added.
//!
//! At low separation the classes of a family blur together, which is where
//! real users' confusions fall: click versus hold (a hold adds a sustained
//! plateau), zoom in versus zoom out (opposite-order bipolar twists), and the
//! scroll directions (signed tilt ramps along one axis). Digit presses share
//! the press template and tilt the phone toward the touched keypad cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::model::{
    ChannelGroup, Digit, HandMode, Label, LabeledTrace, SensorChannel, Sequence, TouchAction,
    TraceMeta,
};

/// Row/column placement of the digit keys, plus the number of key columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keypad {
    pub columns: usize,
    /// `cells[d]` is the (row, column) of digit `d`; rows 0..4.
    pub cells: [(usize, usize); 10],
}

impl Keypad {
    /// Telephone layout: 1-2-3 on top, 0 centred on the fourth row.
    pub fn phone(columns: usize) -> Keypad {
        let mut cells = [(0, 0); 10];
        for (d, cell) in cells.iter_mut().enumerate().skip(1) {
            *cell = ((d - 1) / 3, (d - 1) % 3);
        }
        cells[0] = (3, 1);
        Keypad { columns, cells }
    }

    pub fn position(&self, d: Digit) -> (usize, usize) {
        self.cells[d.value() as usize]
    }

    pub fn digit_at(&self, row: usize, col: usize) -> Option<Digit> {
        self.cells
            .iter()
            .position(|&c| c == (row, col))
            .map(|d| Digit::new(d as u8).expect("index below 10"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    pub motion_hz: f64,
    pub orientation_hz: f64,
    /// Noise standard deviation per channel group, in group units.
    pub noise_sigma: [f64; 4],
    /// Signal amplitude per unit gain at separation 1, per channel group.
    pub amplitude: [f64; 4],
    pub keypad: Keypad,
}

const DEFAULT_NOISE: [f64; 4] = [0.3, 0.03, 0.03, 0.6];

impl DeviceProfile {
    /// iPhone 5 / Safari: 20 Hz motion, 20 Hz orientation.
    pub fn iphone5() -> Self {
        DeviceProfile {
            name: "iphone5".into(),
            motion_hz: 20.0,
            orientation_hz: 20.0,
            noise_sigma: DEFAULT_NOISE,
            amplitude: DEFAULT_NOISE,
            keypad: Keypad::phone(3),
        }
    }

    /// Nexus 5 / Chrome: 60 Hz motion, 44 Hz orientation.
    pub fn nexus5() -> Self {
        DeviceProfile {
            name: "nexus5".into(),
            motion_hz: 60.0,
            orientation_hz: 44.0,
            noise_sigma: DEFAULT_NOISE,
            amplitude: DEFAULT_NOISE,
            keypad: Keypad::phone(4),
        }
    }

    pub fn by_name(name: &str) -> Result<Self, SynthError> {
        match name {
            "iphone5" => Ok(Self::iphone5()),
            "nexus5" => Ok(Self::nexus5()),
            other => Err(SynthError::UnknownProfile(other.to_string())),
        }
    }

    pub fn rate_hz(&self, group: ChannelGroup) -> f64 {
        if group.is_motion() {
            self.motion_hz
        } else {
            self.orientation_hz
        }
    }

    /// Samples recorded for a group over `duration_ms`.
    pub fn samples(&self, group: ChannelGroup, duration_ms: f64) -> usize {
        (self.rate_hz(group) * duration_ms / 1000.0).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSet {
    Actions,
    Digits,
}

impl ClassSet {
    pub fn labels(self) -> Vec<Label> {
        match self {
            ClassSet::Actions => Label::all_actions(),
            ClassSet::Digits => Label::all_digits(),
        }
    }

    pub fn contains(self, label: Label) -> bool {
        matches!(
            (self, label),
            (ClassSet::Actions, Label::Action(_)) | (ClassSet::Digits, Label::Digit(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub classes: ClassSet,
    pub per_class: usize,
    pub separation: f64,
    pub seed: u64,
    pub profile: DeviceProfile,
    pub action_duration_ms: f64,
    pub digit_duration_ms: f64,
}

impl GenSpec {
    pub fn new(classes: ClassSet, per_class: usize, separation: f64, seed: u64) -> Self {
        GenSpec {
            classes,
            per_class,
            separation,
            seed,
            profile: DeviceProfile::iphone5(),
            action_duration_ms: 1000.0,
            digit_duration_ms: 750.0,
        }
    }

    pub fn with_profile(mut self, profile: DeviceProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn duration_ms(&self, label: Label) -> f64 {
        match label {
            Label::Action(_) => self.action_duration_ms,
            Label::Digit(_) => self.digit_duration_ms,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.per_class == 0 {
            return bad("per-class count must be at least 1");
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return bad("separation must be positive and finite");
        }
        let p = &self.profile;
        if !(p.motion_hz > 0.0 && p.orientation_hz > 0.0) {
            return bad("sampling rates must be positive");
        }
        if p.noise_sigma.iter().chain(&p.amplitude).any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise and amplitude must be finite and non-negative");
        }
        for label in self.classes.labels() {
            for g in ChannelGroup::ALL {
                if p.samples(g, self.duration_ms(label)) < 2 {
                    return bad("duration too short for two samples per sequence");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    /// Gaussian bump centred at `c` with width `w`.
    Pulse { c: f64, w: f64 },
    /// Positive bump at `c1`, negative bump of relative size `ratio` at `c2`.
    Bipolar { c1: f64, c2: f64, w: f64, ratio: f64 },
    /// Smooth step from 0 to 1 between `a` and `b`, held afterwards.
    Ramp { a: f64, b: f64 },
    /// Smooth rise over `[a, a + edge]`, flat top, smooth fall over `[b - edge, b]`.
    Plateau { a: f64, b: f64, edge: f64 },
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

impl Shape {
    fn at(self, u: f64) -> f64 {
        let bump = |c: f64, w: f64| (-0.5 * ((u - c) / w).powi(2)).exp();
        match self {
            Shape::Pulse { c, w } => bump(c, w),
            Shape::Bipolar { c1, c2, w, ratio } => bump(c1, w) - ratio * bump(c2, w),
            Shape::Ramp { a, b } => smoothstep((u - a) / (b - a)),
            Shape::Plateau { a, b, edge } => {
                smoothstep((u - a) / edge) * (1.0 - smoothstep((u - (b - edge)) / edge))
            }
        }
    }
}

struct Component {
    channel: SensorChannel,
    gain: f64,
    shape: Shape,
    /// Class-specific components grow with separation; family templates don't.
    scaled: bool,
}

/// Class-specific component.
fn comp(channel: SensorChannel, gain: f64, shape: Shape) -> Component {
    Component {
        channel,
        gain,
        shape,
        scaled: true,
    }
}

/// Family-template component.
fn fixed(channel: SensorChannel, gain: f64, shape: Shape) -> Component {
    Component {
        channel,
        gain,
        shape,
        scaled: false,
    }
}

fn pulse(c: f64, w: f64) -> Shape {
    Shape::Pulse { c, w }
}

fn press_template() -> Vec<Component> {
    use SensorChannel::*;
    vec![
        fixed(OY, 4.0, pulse(0.5, 0.12)),
        fixed(MZ, -4.0, pulse(0.5, 0.1)),
        fixed(MGZ, -4.0, pulse(0.5, 0.1)),
        fixed(RBeta, 4.0, Shape::Bipolar { c1: 0.4, c2: 0.6, w: 0.07, ratio: 1.0 }),
    ]
}

fn signature(label: Label, keypad: &Keypad) -> Vec<Component> {
    use SensorChannel::*;
    match label {
        Label::Action(action) => action_signature(action),
        Label::Digit(d) => {
            let (row, col) = keypad.position(d);
            let dr = row as f64 - 1.5;
            let dc = col as f64 - 1.0;
            let twist = Shape::Bipolar {
                c1: 0.4,
                c2: 0.6,
                w: 0.08,
                ratio: 1.0,
            };
            let mut s = press_template();
            s.extend([
                comp(OY, 0.5 * dr, pulse(0.5, 0.15)),
                comp(OX, 0.75 * dc, pulse(0.5, 0.15)),
                comp(MY, 0.5 * dr, pulse(0.45, 0.1)),
                comp(MX, 0.5 * dc, pulse(0.45, 0.1)),
                comp(MGY, 0.5 * dr, pulse(0.45, 0.1)),
                comp(MGX, 0.5 * dc, pulse(0.45, 0.1)),
                comp(RBeta, 0.6 * dr, twist),
                comp(RGama, 0.6 * dc, twist),
            ]);
            s
        }
    }
}

fn action_signature(action: TouchAction) -> Vec<Component> {
    use SensorChannel::*;
    let plateau = Shape::Plateau {
        a: 0.2,
        b: 0.8,
        edge: 0.1,
    };
    // scrolls: sideways acceleration and a roll, then a signed tilt ramp
    let scroll = |tilt: SensorChannel, gain: f64| {
        vec![
            fixed(MX, 4.0, pulse(0.5, 0.12)),
            fixed(MY, 4.0, pulse(0.5, 0.12)),
            fixed(MGY, 4.0, pulse(0.5, 0.15)),
            fixed(RGama, 4.0, Shape::Bipolar { c1: 0.35, c2: 0.65, w: 0.08, ratio: 1.0 }),
            comp(tilt, gain, Shape::Ramp { a: 0.3, b: 0.7 }),
        ]
    };
    // zooms: a twist about z; the order of the twist's lobes gives direction
    let zoom = |gain: f64| {
        vec![
            fixed(OZ, 4.0, pulse(0.5, 0.15)),
            fixed(MGX, 4.0, pulse(0.5, 0.12)),
            fixed(RAlpha, 4.0, pulse(0.5, 0.1)),
            comp(RAlpha, gain, Shape::Bipolar { c1: 0.3, c2: 0.7, w: 0.08, ratio: 1.0 }),
        ]
    };
    match action {
        TouchAction::Click => press_template(),
        TouchAction::Hold => {
            let mut s = press_template();
            s.extend([
                comp(RBeta, 1.0, plateau),
                comp(MZ, -1.0, plateau),
                comp(MGZ, -1.0, plateau),
            ]);
            s
        }
        TouchAction::ScrollUp => scroll(OY, 1.0),
        TouchAction::ScrollDown => scroll(OY, -0.6),
        TouchAction::ScrollRight => scroll(OX, 1.0),
        TouchAction::ScrollLeft => scroll(OX, -0.6),
        TouchAction::ZoomIn => zoom(1.0),
        TouchAction::ZoomOut => zoom(-0.6),
    }
}

/// Resting value of a channel before the touch (removed by baseline shift).
fn resting_range(ch: SensorChannel) -> (f64, f64) {
    use SensorChannel::*;
    match ch {
        OZ => (0.0, 360.0),
        OY => (20.0, 70.0),
        OX => (-20.0, 20.0),
        MGY => (3.0, 9.0),
        MGZ => (3.0, 9.0),
        MGX => (-1.0, 1.0),
        _ => (0.0, 0.0),
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn label_code(label: Label) -> u64 {
    match label {
        Label::Action(a) => a as u64,
        Label::Digit(d) => 100 + d.value() as u64,
    }
}

fn trace_rng(seed: u64, label: Label, draw_index: u64) -> ChaCha8Rng {
    let s = splitmix(splitmix(splitmix(seed) ^ label_code(label)) ^ draw_index);
    ChaCha8Rng::seed_from_u64(s)
}

/// One synthetic trace; a pure function of (seed, label, draw index).
pub fn gen_trace(label: Label, spec: &GenSpec, draw_index: u64) -> Result<LabeledTrace, SynthError> {
    if !spec.classes.contains(label) {
        return Err(SynthError::LabelNotInSpec(label));
    }
    spec.validate()?;
    let profile = &spec.profile;
    let duration = spec.duration_ms(label);
    let comps = signature(label, &profile.keypad);
    let mut rng = trace_rng(spec.seed, label, draw_index);

    let mut seqs: [Sequence; 12] = Default::default();
    for ch in SensorChannel::ALL {
        let group = ch.group() as usize;
        let n = profile.samples(ch.group(), duration);
        let (lo, hi) = resting_range(ch);
        let rest = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let noise = Normal::new(0.0, profile.noise_sigma[group]).expect("validated sigma");
        let amplitude = profile.amplitude[group];
        let values: Vec<f64> = (0..n)
            .map(|j| {
                let u = j as f64 / (n - 1) as f64;
                let signal: f64 = comps
                    .iter()
                    .filter(|c| c.channel == ch)
                    .map(|c| {
                        let g = if c.scaled { c.gain * spec.separation } else { c.gain };
                        g * c.shape.at(u)
                    })
                    .sum();
                rest + amplitude * signal + noise.sample(&mut rng)
            })
            .collect();
        seqs[ch.index()] = Sequence::new(values)?;
    }
    let meta = TraceMeta {
        user_id: format!("synth-{}", spec.seed),
        device: profile.name.clone(),
        browser: "synthetic".into(),
        hand_mode: HandMode::Unknown,
        collected_at: None,
    };
    Ok(LabeledTrace::new(seqs, 1000.0 / profile.motion_hz, label, meta)?)
}

/// `per_class` traces of every class, shuffled deterministically by seed.
pub fn gen_dataset(spec: &GenSpec) -> Result<Vec<LabeledTrace>, SynthError> {
    spec.validate()?;
    let jobs: Vec<(Label, u64)> = spec
        .classes
        .labels()
        .into_iter()
        .flat_map(|l| (0..spec.per_class as u64).map(move |i| (l, i)))
        .collect();
    let mut traces: Vec<LabeledTrace> = jobs
        .par_iter()
        .map(|&(l, i)| gen_trace(l, spec, i))
        .collect::<Result<_, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(spec.seed ^ 0x5348_5546_464c_4521));
    rand::seq::SliceRandom::shuffle(traces.as_mut_slice(), &mut rng);
    Ok(traces)
}
