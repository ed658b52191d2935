//! Digit classifier: a one-hidden-layer network trained by scaled conjugate
//! gradient with a stratified train/validation/test split.

mod mlp;
mod scg;
mod split;

pub use mlp::{mlp_init, InputScaling, MlpModel};
pub use scg::{scg_train, EpochRecord, ScgConfig, StopReason, TrainHistory};
pub use split::{stratified_split, Split, SplitSpec};

use serde::{Deserialize, Serialize};

use crate::error::AnnError;
use crate::model::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnConfig {
    pub hidden: usize,
    /// Map every input feature onto [-1, 1] using training-split extremes.
    pub scale_inputs: bool,
    pub scg: ScgConfig,
    pub split: SplitSpec,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            hidden: 100,
            scale_inputs: true,
            scg: ScgConfig::default(),
            split: SplitSpec::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedAnn {
    pub model: MlpModel,
    pub history: TrainHistory,
    pub split: Split,
}

/// Splits `samples`, trains on the training part and early-stops on the
/// validation part. The test indices are returned untouched.
///
/// Output classes are the distinct labels in ascending order; the network is
/// initialised from `config.scg.seed`.
pub fn train_ann(samples: &[(&[f64], Label)], config: &AnnConfig) -> Result<TrainedAnn, AnnError> {
    let first = samples.first().ok_or(AnnError::EmptyBatch)?;
    let dim = first.0.len();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.len() != dim) {
        return Err(AnnError::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let labels: Vec<Label> = samples.iter().map(|(_, l)| *l).collect();
    let mut classes = labels.clone();
    classes.sort();
    classes.dedup();
    let split = stratified_split(&labels, &config.split)?;

    let mut model = mlp_init(dim, config.hidden, classes, config.scg.seed)?;
    if config.scale_inputs {
        let scaling = InputScaling::fit(split.train.iter().map(|&i| samples[i].0))
            .ok_or(AnnError::EmptyBatch)?;
        model = model.with_scaling(scaling)?;
    }
    let pick = |idx: &[usize]| -> Vec<(Vec<f64>, usize)> {
        idx.iter()
            .map(|&i| {
                let (x, l) = samples[i];
                (x.to_vec(), model.class_index(l).expect("class from samples"))
            })
            .collect()
    };
    let train = pick(&split.train);
    let val = pick(&split.validation);
    let (model, history) = scg_train(&model, &train, Some(&val), &config.scg)?;
    Ok(TrainedAnn {
        model,
        history,
        split,
    })
}
