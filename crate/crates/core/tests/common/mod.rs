//! Brute-force reference implementations used by the integration tests.
//! They follow the definitions directly and share no code with the crate.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use touchsig_core::ingest::{Counter, IngestStats};
use touchsig_core::model::{ChannelGroup, HandMode, Label, LabeledTrace, SensorChannel, Sequence, TouchAction, TraceMeta};

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

pub fn derivative(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..v.len() {
        out.push(v[i] - v[i - 1]);
    }
    out
}

pub fn dac(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 1..x.len() {
        let d = [x[i] - x[i - 1], y[i] - y[i - 1], z[i] - z[i - 1]];
        out.push(d.iter().map(|c| c * c).sum::<f64>().sqrt());
    }
    out
}

/// [max, min, mean, energy]; zeros for an empty run.
pub fn stats(v: &[f64]) -> [f64; 4] {
    if v.is_empty() {
        return [0.0; 4];
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let energy = v.iter().map(|x| x * x).sum();
    [sorted[v.len() - 1], sorted[0], mean, energy]
}

/// Direct O(n^2) DFT magnitudes.
pub fn dft_magnitudes(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in v.iter().enumerate() {
                let a = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            (re * re + im * im).sqrt()
        })
        .collect()
}

/// Energy-interval length found by trying every half-width and summing the
/// window directly. None when the run carries no energy.
pub fn energy_interval(v: &[f64], fraction: f64) -> Option<usize> {
    let e: Vec<f64> = v.iter().map(|x| x * x).collect();
    let total: f64 = e.iter().sum();
    if v.is_empty() || total <= 0.0 {
        return None;
    }
    let coe = e.iter().enumerate().map(|(i, w)| i as f64 * w).sum::<f64>() / total;
    // nearest index, ties to the lower one
    let lo = coe.floor();
    let c = if coe - lo <= 0.5 { lo } else { lo + 1.0 } as i64;
    let c = c.clamp(0, v.len() as i64 - 1);
    for h in 0i64.. {
        let window: f64 = (c - h..=c + h)
            .filter(|i| *i >= 0 && (*i as usize) < v.len())
            .map(|i| e[i as usize])
            .sum();
        if window >= fraction * total || h as usize >= v.len() {
            return Some(2 * h as usize + 1);
        }
    }
    unreachable!()
}

const ACC_AXES: [SensorChannel; 6] = [
    SensorChannel::MX,
    SensorChannel::MY,
    SensorChannel::MZ,
    SensorChannel::MGX,
    SensorChannel::MGY,
    SensorChannel::MGZ,
];

/// The full feature vector assembled from the reference functions.
pub fn features(trace: &LabeledTrace, phase1: bool) -> Vec<f64> {
    let shifted: Vec<Vec<f64>> = SensorChannel::ALL
        .iter()
        .map(|ch| {
            let v = trace.sequence(*ch).values();
            v.iter().map(|x| x - v[0]).collect()
        })
        .collect();
    let derivs: Vec<Vec<f64>> = shifted.iter().map(|s| derivative(s)).collect();
    let dacs: Vec<Vec<f64>> = [ChannelGroup::Acceleration, ChannelGroup::AccelerationWithGravity]
        .iter()
        .map(|g| {
            let [x, y, z] = g.channels().map(|ch| shifted[ch.index()].as_slice());
            dac(x, y, z)
        })
        .collect();
    let mut out = Vec::new();
    shifted.iter().for_each(|s| out.extend(stats(s)));
    derivs.iter().for_each(|d| out.extend(stats(d)));
    dacs.iter().for_each(|d| out.extend(&stats(d)[..3]));
    shifted.iter().for_each(|s| out.extend(stats(&dft_magnitudes(s))));
    if phase1 {
        let eil = |v: &[f64]| energy_interval(v, 0.7).unwrap_or(0) as f64;
        out.extend(ACC_AXES.iter().map(|ch| eil(&shifted[ch.index()])));
        out.extend(ACC_AXES.iter().map(|ch| eil(&derivs[ch.index()])));
        out.extend(dacs.iter().map(|d| eil(d)));
    }
    out
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn city_block(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Majority vote over the `k` closest training points, found by a full sort
/// on (distance, index). A vote tie goes to the tied label met first in that
/// order.
pub fn knn_predict<L: Clone + PartialEq>(
    train: &[(Vec<f64>, L)],
    query: &[f64],
    k: usize,
    dist: fn(&[f64], &[f64]) -> f64,
) -> L {
    let mut order: Vec<(f64, usize)> = train.iter().enumerate().map(|(i, (x, _))| (dist(x, query), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nearest: Vec<&L> = order[..k].iter().map(|(_, i)| &train[*i].1).collect();
    let votes = |l: &L| nearest.iter().filter(|m| **m == l).count();
    let best = nearest.iter().map(|l| votes(l)).max().unwrap();
    (*nearest.iter().find(|l| votes(l) == best).unwrap()).clone()
}

/// Softmax posterior of a tanh network, from flat parameters laid out as
/// W1 (hidden x in, row-major), b1, W2 (out x hidden), b2.
pub fn mlp_posterior(params: &[f64], d: usize, h: usize, c: usize, x: &[f64]) -> Vec<f64> {
    let (w1, rest) = params.split_at(h * d);
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(c * h);
    let mut hidden = vec![0.0; h];
    for j in 0..h {
        let mut a = b1[j];
        for i in 0..d {
            a += w1[j * d + i] * x[i];
        }
        hidden[j] = a.tanh();
    }
    let mut z = vec![0.0; c];
    for k in 0..c {
        let mut a = b2[k];
        for j in 0..h {
            a += w2[k * h + j] * hidden[j];
        }
        z[k] = a;
    }
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = z.iter().map(|v| (v - m).exp()).sum();
    z.iter().map(|v| (v - m).exp() / s).collect()
}

pub fn random_meta() -> TraceMeta {
    TraceMeta {
        user_id: "u1".into(),
        device: "test".into(),
        browser: "none".into(),
        hand_mode: HandMode::OneHand,
        collected_at: None,
    }
}

/// A trace with random lengths per group and values drawn by `value`.
pub fn random_trace(
    rng: &mut ChaCha8Rng,
    len: std::ops::Range<usize>,
    mut value: impl FnMut(&mut ChaCha8Rng) -> f64,
) -> LabeledTrace {
    let mut seqs: [Sequence; 12] = Default::default();
    for g in ChannelGroup::ALL {
        let n = rng.random_range(len.clone());
        for ch in g.channels() {
            seqs[ch.index()] = Sequence::new((0..n).map(|_| value(rng)).collect()).unwrap();
        }
    }
    LabeledTrace::new(seqs, 16.0, Label::Action(TouchAction::Click), random_meta()).unwrap()
}

/// Polls until `counter` reaches `target` or the timeout expires.
pub fn wait_for(stats: &IngestStats, counter: Counter, target: u64, timeout: Duration) -> bool {
    let t0 = Instant::now();
    while stats.get(counter) < target {
        if t0.elapsed() > timeout {
            return false;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    true
}

pub fn write_lines(path: &std::path::Path, lines: &[String]) {
    let mut f = std::fs::File::create(path).unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
}
