mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;

use touchsig_core::features::{energy_interval_length, fft_features, stats};
use touchsig_core::{extract, Phase};

fn finite_seq(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 2..max_len)
}

proptest! {
    #[test]
    fn stats_match_reference(v in finite_seq(300)) {
        let s = stats(&v).unwrap();
        let o = common::stats(&v);
        for (a, b) in [s.max, s.min, s.mean, s.energy].iter().zip(&o) {
            prop_assert!(common::close(*a, *b, 1e-12), "{a} vs {b}");
        }
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
    }

    #[test]
    fn energy_interval_is_odd_and_bounded(v in finite_seq(300), f in 0.05f64..=1.0) {
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let len = energy_interval_length(&v, f).unwrap();
        prop_assert_eq!(len % 2, 1);
        prop_assert!(len < 2 * v.len());
        prop_assert_eq!(Some(len), common::energy_interval(&v, f));
    }

    #[test]
    fn energy_interval_grows_with_fraction(v in finite_seq(200), a in 0.05f64..1.0, b in 0.05f64..1.0) {
        prop_assume!(v.iter().any(|x| *x != 0.0));
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(energy_interval_length(&v, lo).unwrap() <= energy_interval_length(&v, hi).unwrap());
    }

    #[test]
    fn spectrum_energy_is_n_times_signal_energy(v in finite_seq(256)) {
        // Parseval for the unnormalised transform
        let f = fft_features(&v).unwrap();
        let e: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!(common::close(f.energy, v.len() as f64 * e, 1e-9));
    }

    #[test]
    fn extract_matches_reference(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_trace(&mut rng, 2..64, |r| r.random_range(-10.0..10.0));
        let got = extract(&t, Phase::Phase1).unwrap();
        let want = common::features(&t, true);
        prop_assert_eq!(got.values().len(), want.len());
        for (a, b) in got.values().iter().zip(&want) {
            prop_assert!(common::close(*a, *b, 1e-9), "{a} vs {b}");
        }
        let p2 = extract(&t, Phase::Phase2).unwrap();
        prop_assert_eq!(p2.values(), &got.values()[..150]);
    }
}

#[test]
fn constant_trace_has_zero_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = common::random_trace(&mut rng, 5..6, |_| 3.25);
    let v = extract(&t, Phase::Phase1).unwrap();
    assert!(v.values().iter().all(|x| *x == 0.0));
}
