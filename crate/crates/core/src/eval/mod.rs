//! Cross-validation, confusion matrices, guess curves and report rendering.

mod confusion;
mod guess;
mod report;

pub use confusion::ConfusionMatrix;
pub use guess::{guess_curve, render_digit_grid, GuessCurve};
pub use report::{evaluate_actions, evaluate_actions_with, evaluate_digits, evaluate_digits_with, EvalReport, ReportRecord, Summary};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ann::{train_ann, AnnConfig, MlpModel};
use crate::error::EvalError;
use crate::knn::{knn_fit, KnnModel, Metric, TwoStageConfig, TwoStageModel, TwoStagePrediction};
use crate::model::{Label, TouchAction};

/// Something that predicts from a feature vector.
pub trait Classifier {
    type Output: Send;
    fn classify(&self, x: &[f64]) -> Result<Self::Output, EvalError>;
}

/// Something that fits a classifier to labeled feature vectors.
pub trait Learner<L>: Sync {
    type Model: Classifier;
    fn fit(&self, train: &[(&[f64], L)]) -> Result<Self::Model, EvalError>;
}

impl Classifier for TwoStageModel {
    type Output = TwoStagePrediction;
    fn classify(&self, x: &[f64]) -> Result<TwoStagePrediction, EvalError> {
        Ok(self.predict_detailed(x)?)
    }
}

impl Learner<TouchAction> for TwoStageConfig {
    type Model = TwoStageModel;
    fn fit(&self, train: &[(&[f64], TouchAction)]) -> Result<TwoStageModel, EvalError> {
        let owned: Vec<_> = train.iter().map(|(x, a)| (x.to_vec(), *a)).collect();
        Ok(TwoStageModel::fit(&owned, *self)?)
    }
}

impl<L: Clone + PartialEq + Send> Classifier for KnnModel<L> {
    type Output = L;
    fn classify(&self, x: &[f64]) -> Result<L, EvalError> {
        Ok(self.predict(x)?)
    }
}

/// Single-stage k-NN over arbitrary labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnSpec {
    pub k: usize,
    pub metric: Metric,
}

impl<L: Clone + PartialEq + Send + Sync> Learner<L> for KnnSpec {
    type Model = KnnModel<L>;
    fn fit(&self, train: &[(&[f64], L)]) -> Result<KnnModel<L>, EvalError> {
        Ok(knn_fit(
            train.iter().map(|(x, l)| (x.to_vec(), l.clone())),
            self.k,
            self.metric,
        )?)
    }
}

impl Classifier for MlpModel {
    type Output = Label;
    fn classify(&self, x: &[f64]) -> Result<Label, EvalError> {
        Ok(self.predict(x)?)
    }
}

impl Learner<Label> for AnnConfig {
    type Model = MlpModel;
    fn fit(&self, train: &[(&[f64], Label)]) -> Result<MlpModel, EvalError> {
        Ok(train_ann(train, self)?.model)
    }
}

/// Stratified fold assignment.
///
/// Indices of each class (classes in ascending order) are shuffled with the
/// seeded generator and concatenated; position `p` of the result goes to
/// fold `p mod k`. Fold sizes differ by at most one and each class is spread
/// as evenly as its size allows. Each fold is returned sorted.
pub fn kfold_split<L: Ord>(labels: &[L], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    let n = labels.len();
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    if k > n {
        return Err(EvalError::KTooLarge { k, n });
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::with_capacity(n / k + 1); k];
    let mut p = 0;
    for idx in by_class.values_mut() {
        idx.shuffle(&mut rng);
        for &i in idx.iter() {
            folds[p % k].push(i);
            p += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// k-fold cross-validation: for each fold, fits on the other folds and
/// classifies the held-out samples. Returns one output per sample, in
/// sample order. Folds run in parallel.
pub fn cross_validate<L, Lr>(
    samples: &[(&[f64], L)],
    learner: &Lr,
    k: usize,
    seed: u64,
) -> Result<Vec<<Lr::Model as Classifier>::Output>, EvalError>
where
    L: Ord + Clone + Send + Sync,
    Lr: Learner<L>,
{
    let labels: Vec<&L> = samples.iter().map(|(_, l)| l).collect();
    let distinct = {
        let mut d = labels.clone();
        d.sort();
        d.dedup();
        d.len()
    };
    if distinct < 2 {
        return Err(EvalError::TooFewClasses(distinct));
    }
    let folds = kfold_split(&labels, k, seed)?;
    let mut fold_of = vec![0; samples.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            fold_of[i] = f;
        }
    }
    let per_fold: Vec<Vec<(usize, _)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<(&[f64], L)> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| fold_of[*i] != f)
                .map(|(_, (x, l))| (*x, l.clone()))
                .collect();
            let model = learner.fit(&train)?;
            folds[f]
                .iter()
                .map(|&i| model.classify(samples[i].0).map(|o| (i, o)))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, EvalError>>()?;
    let mut out: Vec<(usize, _)> = per_fold.into_iter().flatten().collect();
    out.sort_by_key(|(i, _)| *i);
    Ok(out.into_iter().map(|(_, o)| o).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Always(u8);
    impl Classifier for Always {
        type Output = u8;
        fn classify(&self, _: &[f64]) -> Result<u8, EvalError> {
            Ok(self.0)
        }
    }
    impl Learner<u8> for Always {
        type Model = Always;
        fn fit(&self, _: &[(&[f64], u8)]) -> Result<Always, EvalError> {
            Ok(Always(self.0))
        }
    }

    #[test]
    fn eight_hundred_eighty_in_ten_folds() {
        let labels: Vec<u8> = (0..880).map(|i| (i % 8) as u8).collect();
        let folds = kfold_split(&labels, 10, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 88));
    }

    #[test]
    fn leave_one_out() {
        let labels: Vec<u8> = (0..10).collect();
        let folds = kfold_split(&labels, 10, 3).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn bad_k() {
        assert!(matches!(kfold_split(&[1, 2], 3, 0), Err(EvalError::KTooLarge { k: 3, n: 2 })));
        assert!(matches!(kfold_split(&[1, 2], 1, 0), Err(EvalError::TooFewFolds(1))));
    }

    #[test]
    fn constant_classifier_scores_prevalence() {
        let xs = [[0.0]; 10];
        let samples: Vec<(&[f64], u8)> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (x.as_slice(), u8::from(i < 3)))
            .collect();
        let out = cross_validate(&samples, &Always(1), 5, 0).unwrap();
        let hits = out.iter().zip(&samples).filter(|(p, s)| **p == s.1).count();
        assert_eq!(hits, 3);
    }

    #[test]
    fn leaked_label_is_perfect() {
        let xs: Vec<[f64; 1]> = (0..40).map(|i| [(i % 4) as f64]).collect();
        let samples: Vec<(&[f64], u8)> = xs.iter().map(|x| (x.as_slice(), x[0] as u8)).collect();
        let spec = KnnSpec {
            k: 1,
            metric: Metric::Euclidean,
        };
        let out = cross_validate(&samples, &spec, 10, 7).unwrap();
        assert!(out.iter().zip(&samples).all(|(p, s)| *p == s.1));
    }

    #[test]
    fn single_class_rejected() {
        let x = [0.0];
        let samples = vec![(x.as_slice(), 1u8); 4];
        assert!(matches!(
            cross_validate(&samples, &Always(1), 2, 0),
            Err(EvalError::TooFewClasses(1))
        ));
    }

    proptest! {
        #[test]
        fn folds_partition_and_balance(labels in prop::collection::vec(0u8..5, 2..200), k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= labels.len());
            let folds = kfold_split(&labels, k, seed).unwrap();
            let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
            all.sort();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            for c in 0..5u8 {
                let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|i| labels[**i] == c).count()).collect();
                prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
            }
            prop_assert_eq!(kfold_split(&labels, k, seed).unwrap(), folds);
        }
    }
}
