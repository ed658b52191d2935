use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use super::guess::{guess_curve, render_digit_grid, GuessCurve};
use super::cross_validate;
use crate::ann::{train_ann, AnnConfig, MlpModel, TrainedAnn};
use crate::error::EvalError;
use crate::knn::{ActionGroup, TwoStageConfig, TwoStageModel, TwoStagePrediction};
use crate::model::{Label, TouchAction};
use crate::synth::Keypad;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub protocol: String,
    pub model: String,
    pub seeds: BTreeMap<String, u64>,
    pub samples: usize,
    pub evaluated: usize,
    pub rates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypad: Option<Keypad>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ReportRecord {
    Summary(Summary),
    Confusion {
        name: String,
        title: String,
        corner: String,
        matrix: ConfusionMatrix,
    },
    GuessCurve(GuessCurve),
}

/// An evaluation outcome as a list of sections, stored one per line.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: Vec<ReportRecord>,
}

impl EvalReport {
    pub fn summary(&self) -> Option<&Summary> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::Summary(s) => Some(s),
            _ => None,
        })
    }

    pub fn confusion(&self, name: &str) -> Option<&ConfusionMatrix> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::Confusion { name: n, matrix, .. } if n == name => Some(matrix),
            _ => None,
        })
    }

    pub fn guess_curve(&self) -> Option<&GuessCurve> {
        self.records.iter().find_map(|r| match r {
            ReportRecord::GuessCurve(g) => Some(g),
            _ => None,
        })
    }

    pub fn to_ndjson(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("report records serialize") + "\n")
            .collect()
    }

    pub fn from_ndjson(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(EvalReport { records })
    }

    /// Guess-curve plot data, when the report has a curve.
    pub fn plot_data(&self) -> Option<String> {
        self.guess_curve().map(GuessCurve::plot_data)
    }

    /// Aligned plain-text rendering of every section.
    pub fn render_text(&self) -> String {
        let keypad = self.summary().and_then(|s| s.keypad.clone());
        let mut out = String::new();
        for r in &self.records {
            match r {
                ReportRecord::Summary(s) => {
                    out.push_str(&format!("Task:      {}\n", s.task));
                    out.push_str(&format!("Protocol:  {}\n", s.protocol));
                    out.push_str(&format!("Model:     {}\n", s.model));
                    let seeds: Vec<String> = s.seeds.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    out.push_str(&format!("Seeds:     {}\n", seeds.join(" ")));
                    out.push_str(&format!("Samples:   {} (evaluated {})\n", s.samples, s.evaluated));
                    for (name, v) in &s.rates {
                        out.push_str(&format!("Rate {name}: {:.2}%\n", v * 100.0));
                    }
                }
                ReportRecord::Confusion {
                    name,
                    title,
                    corner,
                    matrix,
                } => {
                    out.push_str(&format!("\n{title}\n"));
                    out.push_str("(rows: classified as; columns: actual)\n");
                    out.push_str(&matrix.render(corner));
                    if let (Some(kp), "digits") = (&keypad, name.as_str()) {
                        out.push_str("\nPer-digit classification on the keypad\n");
                        out.push_str(&render_digit_grid(matrix, kp));
                    }
                }
                ReportRecord::GuessCurve(g) => {
                    out.push_str("\nIdentification rate by number of guesses\n");
                    out.push_str(&g.render());
                }
            }
        }
        out
    }
}

/// Two-stage k-NN cross-validation over touch actions.
///
/// Produces the five-way first-stage matrix, the scroll-direction matrix over
/// actual scrolls that the first stage routed to the scroll classifier, and
/// the full eight-way matrix. Counts are pooled over folds.
pub fn evaluate_actions(
    samples: &[(&[f64], TouchAction)],
    config: TwoStageConfig,
    folds: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let preds = cross_validate(samples, &config, folds, seed)?;
    Ok(action_report(
        samples,
        &preds,
        format!("{folds}-fold stratified cross-validation, pooled counts"),
        config,
        BTreeMap::from([("folds".to_string(), seed)]),
    ))
}

/// Applies an already fitted two-stage model to labeled samples.
pub fn evaluate_actions_with(
    model: &TwoStageModel,
    config: TwoStageConfig,
    samples: &[(&[f64], TouchAction)],
    protocol: &str,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let preds = samples
        .iter()
        .map(|(x, _)| model.predict_detailed(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(action_report(samples, &preds, protocol.to_string(), config, BTreeMap::new()))
}

fn action_report(
    samples: &[(&[f64], TouchAction)],
    preds: &[TwoStagePrediction],
    protocol: String,
    config: TwoStageConfig,
    seeds: BTreeMap<String, u64>,
) -> EvalReport {
    let group_names = ActionGroup::ALL.iter().map(|g| g.display_name().to_string()).collect();
    let mut stage1 = ConfusionMatrix::new(group_names);
    let scrolls: Vec<TouchAction> = TouchAction::ALL.into_iter().filter(|a| a.is_scroll()).collect();
    let mut scroll = ConfusionMatrix::new(scrolls.iter().map(|a| a.display_name().to_string()).collect());
    let mut full = ConfusionMatrix::new(TouchAction::ALL.iter().map(|a| a.display_name().to_string()).collect());
    for ((_, actual), p) in samples.iter().zip(preds) {
        let g = ActionGroup::from(*actual);
        stage1.record(g.display_name(), p.stage1.display_name());
        full.record(actual.display_name(), p.action.display_name());
        if actual.is_scroll() && p.stage1 == ActionGroup::Scroll {
            scroll.record(actual.display_name(), p.action.display_name());
        }
    }
    let mut rates = BTreeMap::new();
    rates.insert("overall".to_string(), full.rate());
    rates.insert("stage1".to_string(), stage1.rate());
    rates.insert("scroll_direction".to_string(), scroll.rate());
    let summary = Summary {
        task: "touch actions".into(),
        protocol,
        model: format!(
            "two-stage k-NN: stage 1 k={} {}, stage 2 k={} {}",
            config.stage1_k, config.stage1_metric, config.stage2_k, config.stage2_metric
        ),
        seeds,
        samples: samples.len(),
        evaluated: preds.len(),
        rates,
        keypad: None,
        training: None,
    };
    EvalReport {
        records: vec![
            ReportRecord::Summary(summary),
            ReportRecord::Confusion {
                name: "stage1".into(),
                title: "Confusion matrix, first classifier".into(),
                corner: "Touch action".into(),
                matrix: stage1,
            },
            ReportRecord::Confusion {
                name: "scroll".into(),
                title: "Confusion matrix, second classifier (scrolls routed to it)".into(),
                corner: "Touch action".into(),
                matrix: scroll,
            },
            ReportRecord::Confusion {
                name: "actions".into(),
                title: "Confusion matrix, all touch actions".into(),
                corner: "Touch action".into(),
                matrix: full,
            },
        ],
    }
}

/// Evaluates a trained digit network on a test set.
pub fn evaluate_digits_with(
    model: &MlpModel,
    test: &[(&[f64], Label)],
    protocol: &str,
    seeds: BTreeMap<String, u64>,
    samples: usize,
    keypad: Option<Keypad>,
) -> Result<EvalReport, EvalError> {
    let (curve, confusion) = guess_curve(model, test)?;
    let mut rates = BTreeMap::new();
    rates.insert("top1".to_string(), curve.average[0]);
    if curve.ranks() >= 3 {
        rates.insert("top3".to_string(), curve.average[2]);
    }
    let summary = Summary {
        task: "digits".into(),
        protocol: protocol.to_string(),
        model: format!(
            "MLP {}-{}-{} tanh/softmax",
            model.in_dim(),
            model.hidden(),
            model.out_dim()
        ),
        seeds,
        samples,
        evaluated: confusion.total() as usize,
        rates,
        keypad,
        training: None,
    };
    Ok(EvalReport {
        records: vec![
            ReportRecord::Summary(summary),
            ReportRecord::Confusion {
                name: "digits".into(),
                title: "Confusion matrix, digits".into(),
                corner: "Digit".into(),
                matrix: confusion,
            },
            ReportRecord::GuessCurve(curve),
        ],
    })
}

/// Trains a digit network on the training part of a stratified split and
/// evaluates it on the held-out test part.
pub fn evaluate_digits(
    samples: &[(&[f64], Label)],
    config: &AnnConfig,
    keypad: Option<Keypad>,
) -> Result<(EvalReport, TrainedAnn), EvalError> {
    let trained = train_ann(samples, config)?;
    let test: Vec<(&[f64], Label)> = trained.split.test.iter().map(|&i| samples[i]).collect();
    let sp = &config.split;
    let protocol = format!(
        "stratified holdout {:.0}/{:.0}/{:.0} (train/validation/test)",
        sp.train * 100.0,
        sp.validation * 100.0,
        sp.test * 100.0
    );
    let seeds = BTreeMap::from([("init".to_string(), config.scg.seed), ("split".to_string(), sp.seed)]);
    let mut report = evaluate_digits_with(&trained.model, &test, &protocol, seeds, samples.len(), keypad)?;
    if let Some(ReportRecord::Summary(s)) = report.records.first_mut() {
        s.training = Some(serde_json::json!({
            "epochs": trained.history.epochs.len() - 1,
            "best_epoch": trained.history.best_epoch,
            "stop": trained.history.stop,
            "hidden": config.hidden,
        }));
    }
    Ok((report, trained))
}
