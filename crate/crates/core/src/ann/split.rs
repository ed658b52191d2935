use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::AnnError;

/// Train / validation / test proportions, applied within each class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions sample indices by class label.
///
/// Each class is shuffled with the seeded generator; its first
/// `round(n·train)` members go to training and the members up to
/// `round(n·(train + validation))` to validation. The rest are test samples.
/// Fails when any class would have no training sample.
pub fn stratified_split<L: Ord + Clone>(labels: &[L], spec: &SplitSpec) -> Result<Split, AnnError> {
    let fr = [spec.train, spec.validation, spec.test];
    if fr.iter().any(|f| !f.is_finite() || *f < 0.0) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(AnnError::DegenerateSplit(format!(
            "fractions {fr:?} must be non-negative and sum to 1"
        )));
    }
    let mut by_class: std::collections::BTreeMap<&L, Vec<usize>> = Default::default();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if by_class.is_empty() {
        return Err(AnnError::DegenerateSplit("no samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (class_no, idx) in by_class.values_mut().enumerate() {
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let a = (n * spec.train).round() as usize;
        let b = ((n * (spec.train + spec.validation)).round() as usize).min(idx.len());
        if a == 0 {
            return Err(AnnError::DegenerateSplit(format!(
                "class #{class_no} has {} samples and none for training",
                idx.len()
            )));
        }
        out.train.extend_from_slice(&idx[..a]);
        out.validation.extend_from_slice(&idx[a..b]);
        out.test.extend_from_slice(&idx[b..]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thirty_per_class() {
        let labels: Vec<u8> = (0..300).map(|i| (i % 10) as u8).collect();
        let s = stratified_split(&labels, &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 210);
        assert_eq!(s.validation.len(), 50);
        assert_eq!(s.test.len(), 40);
        for c in 0..10u8 {
            assert_eq!(s.train.iter().filter(|i| labels[**i] == c).count(), 21);
        }
    }

    #[test]
    fn degenerate() {
        let spec = SplitSpec {
            train: 0.2,
            validation: 0.4,
            test: 0.4,
            seed: 1,
        };
        assert!(matches!(
            stratified_split(&[1, 1, 2], &spec),
            Err(AnnError::DegenerateSplit(_))
        ));
        assert!(stratified_split::<u8>(&[], &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train: 0.9,
            ..Default::default()
        };
        assert!(stratified_split(&[1, 2], &bad).is_err());
    }

    proptest! {
        #[test]
        fn split_is_a_partition(labels in prop::collection::vec(0u8..4, 1..120), seed in any::<u64>()) {
            let spec = SplitSpec { seed, ..Default::default() };
            if let Ok(s) = stratified_split(&labels, &spec) {
                let mut all: Vec<usize> = s.train.iter().chain(&s.validation).chain(&s.test).copied().collect();
                all.sort();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                prop_assert_eq!(stratified_split(&labels, &spec).unwrap(), s);
            }
        }
    }
}
