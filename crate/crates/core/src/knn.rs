//! k-nearest-neighbour classification and the two-stage touch-action scheme.
//!
//! Stage one is a 1-NN Euclidean classifier over {click, hold, scroll,
//! zoom in, zoom out} with every scroll direction collapsed into `Scroll`.
//! Queries voted `Scroll` go to stage two, a 1-NN city-block classifier
//! trained only on scroll samples with their directional labels.
//!
//! Tie rules: neighbours are ordered by (distance, training index). A vote
//! tie goes to the label whose first member appears earliest in that order,
//! which is the label with the closest member, then the lower index.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::KnnError;
use crate::model::TouchAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    CityBlock,
}

impl Metric {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            Metric::CityBlock => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::CityBlock => "city_block",
        })
    }
}

pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64, KnnError> {
    if a.len() != b.len() {
        return Err(KnnError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(metric.eval(a, b))
}

/// A lazy learner: the training set verbatim plus `k` and a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel<L> {
    k: usize,
    metric: Metric,
    dim: usize,
    labels: Vec<L>,
    /// Row-major, `labels.len() * dim` values.
    data: Vec<f64>,
}

pub fn knn_fit<L>(
    train: impl IntoIterator<Item = (Vec<f64>, L)>,
    k: usize,
    metric: Metric,
) -> Result<KnnModel<L>, KnnError> {
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (v, l) in train {
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => return Err(KnnError::InconsistentDimensions),
            Some(_) => {}
        }
        data.extend_from_slice(&v);
        labels.push(l);
    }
    let dim = dim.ok_or(KnnError::EmptyTrainingSet)?;
    if k == 0 || k > labels.len() {
        return Err(KnnError::KTooLarge { k, n: labels.len() });
    }
    Ok(KnnModel {
        k,
        metric,
        dim,
        labels,
        data,
    })
}

impl<L> KnnModel<L> {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// The `k` nearest training indices with distances, closest first.
    pub fn neighbours(&self, query: &[f64]) -> Result<Vec<(usize, f64)>, KnnError> {
        if query.len() != self.dim {
            return Err(KnnError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(self.k + 1);
        for i in 0..self.labels.len() {
            let d = self.metric.eval(self.vector(i), query);
            // strict comparison keeps the earlier index ahead on equal distance
            if best.len() == self.k && d.total_cmp(&best[self.k - 1].1).is_ge() {
                continue;
            }
            let pos = best.partition_point(|(_, bd)| bd.total_cmp(&d).is_le());
            best.insert(pos, (i, d));
            best.truncate(self.k);
        }
        Ok(best)
    }
}

impl<L: Clone + PartialEq> KnnModel<L> {
    pub fn predict(&self, query: &[f64]) -> Result<L, KnnError> {
        let nn = self.neighbours(query)?;
        // (label, votes) in order of first appearance
        let mut tally: Vec<(&L, usize)> = Vec::with_capacity(nn.len());
        for (i, _) in &nn {
            let label = &self.labels[*i];
            match tally.iter_mut().find(|(l, _)| *l == label) {
                Some(entry) => entry.1 += 1,
                None => tally.push((label, 1)),
            }
        }
        let mut winner = 0;
        for (j, (_, votes)) in tally.iter().enumerate() {
            if *votes > tally[winner].1 {
                winner = j;
            }
        }
        Ok(tally[winner].0.clone())
    }
}

impl<L: Clone + PartialEq + Send + Sync> KnnModel<L> {
    pub fn predict_many(&self, queries: &[Vec<f64>]) -> Result<Vec<L>, KnnError> {
        queries.par_iter().map(|q| self.predict(q)).collect()
    }
}

/// Stage-one classes: every scroll direction collapses into `Scroll`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionGroup {
    Click,
    Hold,
    Scroll,
    ZoomIn,
    ZoomOut,
}

impl ActionGroup {
    pub const ALL: [ActionGroup; 5] = [
        ActionGroup::Click,
        ActionGroup::Hold,
        ActionGroup::Scroll,
        ActionGroup::ZoomIn,
        ActionGroup::ZoomOut,
    ];

    pub fn display_name(self) -> &'static str {
        match self {
            ActionGroup::Click => "Click",
            ActionGroup::Hold => "Hold",
            ActionGroup::Scroll => "Scroll",
            ActionGroup::ZoomIn => "Zoom in",
            ActionGroup::ZoomOut => "Zoom out",
        }
    }
}

impl From<TouchAction> for ActionGroup {
    fn from(a: TouchAction) -> Self {
        match a {
            TouchAction::Click => ActionGroup::Click,
            TouchAction::Hold => ActionGroup::Hold,
            TouchAction::ZoomIn => ActionGroup::ZoomIn,
            TouchAction::ZoomOut => ActionGroup::ZoomOut,
            TouchAction::ScrollUp
            | TouchAction::ScrollDown
            | TouchAction::ScrollRight
            | TouchAction::ScrollLeft => ActionGroup::Scroll,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub stage1_k: usize,
    pub stage1_metric: Metric,
    pub stage2_k: usize,
    pub stage2_metric: Metric,
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig {
            stage1_k: 1,
            stage1_metric: Metric::Euclidean,
            stage2_k: 1,
            stage2_metric: Metric::CityBlock,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageModel {
    stage1: KnnModel<ActionGroup>,
    stage2: KnnModel<TouchAction>,
}

/// Outcome of a two-stage prediction, with the stage-one vote kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoStagePrediction {
    pub stage1: ActionGroup,
    pub action: TouchAction,
}

impl TwoStageModel {
    pub fn fit(train: &[(Vec<f64>, TouchAction)], config: TwoStageConfig) -> Result<Self, KnnError> {
        let stage1 = knn_fit(
            train.iter().map(|(v, a)| (v.clone(), ActionGroup::from(*a))),
            config.stage1_k,
            config.stage1_metric,
        )?;
        let scrolls: Vec<_> = train.iter().filter(|(_, a)| a.is_scroll()).cloned().collect();
        if scrolls.is_empty() {
            return Err(KnnError::MissingClass("scroll"));
        }
        let stage2 = knn_fit(scrolls, config.stage2_k, config.stage2_metric)?;
        Ok(TwoStageModel { stage1, stage2 })
    }

    pub fn stage1(&self) -> &KnnModel<ActionGroup> {
        &self.stage1
    }

    pub fn stage2(&self) -> &KnnModel<TouchAction> {
        &self.stage2
    }

    pub fn dim(&self) -> usize {
        self.stage1.dim()
    }

    pub fn predict_detailed(&self, query: &[f64]) -> Result<TwoStagePrediction, KnnError> {
        let stage1 = self.stage1.predict(query)?;
        let action = match stage1 {
            ActionGroup::Click => TouchAction::Click,
            ActionGroup::Hold => TouchAction::Hold,
            ActionGroup::ZoomIn => TouchAction::ZoomIn,
            ActionGroup::ZoomOut => TouchAction::ZoomOut,
            ActionGroup::Scroll => self.stage2.predict(query)?,
        };
        Ok(TwoStagePrediction { stage1, action })
    }

    pub fn predict(&self, query: &[f64]) -> Result<TouchAction, KnnError> {
        self.predict_detailed(query).map(|p| p.action)
    }
}
