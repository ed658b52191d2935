//! Feature-matrix and model files.
//!
//! A matrix file is newline-delimited JSON: a header
//! `{"phase":1,"fingerprint":"…","layout":[…]}` followed by one
//! `{"label":"action:click","features":[…]}` row per sample.
//! A model file is a single JSON document tagged by `kind`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ann::{AnnConfig, MlpModel, TrainHistory};
use crate::error::{FeatureError, FormatError};
use crate::features::{extract, FeatureLayout, Phase};
use crate::knn::{TwoStageConfig, TwoStageModel};
use crate::model::{Label, LabeledTrace, TouchAction};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, reason: impl ToString) -> FormatError {
    FormatError::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.to_string(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixHeader {
    phase: Phase,
    fingerprint: String,
    layout: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixRow {
    label: Label,
    features: Vec<f64>,
}

/// Labeled feature vectors of one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub phase: Phase,
    pub rows: Vec<(Label, Vec<f64>)>,
}

impl FeatureMatrix {
    /// Extracts features from every trace, in parallel, keeping trace order.
    pub fn from_traces(traces: &[LabeledTrace], phase: Phase) -> Result<Self, FeatureError> {
        let rows = traces
            .par_iter()
            .map(|t| extract(t, phase).map(|f| (t.label(), f.values().to_vec())))
            .collect::<Result<_, _>>()?;
        Ok(FeatureMatrix { phase, rows })
    }

    pub fn layout(&self) -> &'static FeatureLayout {
        FeatureLayout::for_phase(self.phase)
    }

    pub fn samples(&self) -> Vec<(&[f64], Label)> {
        self.rows.iter().map(|(l, x)| (x.as_slice(), *l)).collect()
    }

    /// Rows whose label is a touch action.
    pub fn action_samples(&self) -> Vec<(&[f64], TouchAction)> {
        self.rows
            .iter()
            .filter_map(|(l, x)| l.as_action().map(|a| (x.as_slice(), a)))
            .collect()
    }

    /// Rows whose label is a digit.
    pub fn digit_samples(&self) -> Vec<(&[f64], Label)> {
        self.rows
            .iter()
            .filter(|(l, _)| l.as_digit().is_some())
            .map(|(l, x)| (x.as_slice(), *l))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        let layout = self.layout();
        let header = MatrixHeader {
            phase: self.phase,
            fingerprint: layout.fingerprint(),
            layout: layout.names().to_vec(),
        };
        write_line(&mut out, path, &header)?;
        for (label, features) in &self.rows {
            write_line(
                &mut out,
                path,
                &MatrixRow {
                    label: *label,
                    features: features.clone(),
                },
            )?;
        }
        out.flush().map_err(io_err(path))
    }

    /// Reads a matrix file, checking its layout against this build's.
    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| parse_err(path, 1, "empty matrix file"))?;
        let header: MatrixHeader =
            serde_json::from_str(&first.map_err(io_err(path))?).map_err(|e| parse_err(path, 1, e))?;
        let layout = FeatureLayout::for_phase(header.phase);
        if header.layout != layout.names() || header.fingerprint != layout.fingerprint() {
            return Err(parse_err(path, 1, "feature layout differs from this build's"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: MatrixRow = serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e))?;
            if row.features.len() != layout.len() {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("{} features, expected {}", row.features.len(), layout.len()),
                ));
            }
            rows.push((row.label, row.features));
        }
        Ok(FeatureMatrix {
            phase: header.phase,
            rows,
        })
    }
}

fn write_line<T: Serialize>(out: &mut impl Write, path: &Path, v: &T) -> Result<(), FormatError> {
    serde_json::to_writer(&mut *out, v)
        .map_err(std::io::Error::from)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(io_err(path))
}

/// A trained model with what is needed to apply it to new matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    TwoStageKnn {
        phase: Phase,
        layout_fingerprint: String,
        config: TwoStageConfig,
        model: TwoStageModel,
    },
    Mlp {
        phase: Phase,
        layout_fingerprint: String,
        hidden_activation: String,
        output_activation: String,
        config: AnnConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        history: Option<TrainHistory>,
        model: MlpModel,
    },
}

impl ModelFile {
    pub fn knn(phase: Phase, config: TwoStageConfig, model: TwoStageModel) -> Self {
        ModelFile::TwoStageKnn {
            phase,
            layout_fingerprint: FeatureLayout::for_phase(phase).fingerprint(),
            config,
            model,
        }
    }

    pub fn mlp(phase: Phase, config: AnnConfig, history: Option<TrainHistory>, model: MlpModel) -> Self {
        ModelFile::Mlp {
            phase,
            layout_fingerprint: FeatureLayout::for_phase(phase).fingerprint(),
            hidden_activation: "tanh".into(),
            output_activation: "softmax".into(),
            config,
            history,
            model,
        }
    }

    pub fn phase(&self) -> Phase {
        match self {
            ModelFile::TwoStageKnn { phase, .. } | ModelFile::Mlp { phase, .. } => *phase,
        }
    }

    pub fn fingerprint(&self) -> &str {
        match self {
            ModelFile::TwoStageKnn { layout_fingerprint, .. } | ModelFile::Mlp { layout_fingerprint, .. } => {
                layout_fingerprint
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self)
            .map_err(std::io::Error::from)
            .and_then(|_| out.write_all(b"\n"))
            .and_then(|_| out.flush())
            .map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        let file = File::open(path).map_err(io_err(path))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| parse_err(path, e.line(), e))
    }
}
