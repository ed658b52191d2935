use serde::{Deserialize, Serialize};

use crate::ann::MlpModel;
use crate::error::EvalError;
use crate::model::Label;
use crate::synth::Keypad;

use super::confusion::ConfusionMatrix;

const ORDINALS: [&str; 10] = [
    "First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth", "Tenth",
];

/// Cumulative hit rate by number of guesses.
///
/// `per_class[c][r]` is the fraction of class-`c` test samples whose true
/// class is among the top `r + 1` ranked outputs; `average[r]` pools all
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessCurve {
    pub classes: Vec<String>,
    pub samples: Vec<u64>,
    pub per_class: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

/// Builds the guess curve and the rank-1 confusion matrix of `model` on
/// `test`.
pub fn guess_curve(
    model: &MlpModel,
    test: &[(&[f64], Label)],
) -> Result<(GuessCurve, ConfusionMatrix), EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let classes = model.classes();
    let c = classes.len();
    let names: Vec<String> = classes.iter().map(|l| l.display_name()).collect();
    let mut hits = vec![vec![0u64; c]; c];
    let mut samples = vec![0u64; c];
    let mut confusion = ConfusionMatrix::new(names.clone());
    let mut pooled = vec![0u64; c];
    let mut total = 0u64;
    for (x, label) in test {
        let ranked = model.predict_ranked(x)?;
        let Some(actual) = classes.iter().position(|l| l == label) else {
            continue;
        };
        let rank = ranked
            .iter()
            .position(|(l, _)| l == label)
            .expect("every class is ranked");
        let predicted = classes.iter().position(|l| *l == ranked[0].0).expect("known class");
        confusion.add(actual, predicted);
        samples[actual] += 1;
        total += 1;
        for r in rank..c {
            hits[actual][r] += 1;
            pooled[r] += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::EmptySet);
    }
    let per_class = hits
        .iter()
        .zip(&samples)
        .map(|(h, n)| {
            h.iter()
                .map(|v| if *n == 0 { 0.0 } else { *v as f64 / *n as f64 })
                .collect()
        })
        .collect();
    let average = pooled.iter().map(|v| *v as f64 / total as f64).collect();
    Ok((
        GuessCurve {
            classes: names,
            samples,
            per_class,
            average,
        },
        confusion,
    ))
}

impl GuessCurve {
    pub fn ranks(&self) -> usize {
        self.average.len()
    }

    /// Table with one row per guess count and one column per class, plus the
    /// pooled average and the chance rate `r / C`.
    pub fn render(&self) -> String {
        let c = self.ranks();
        let mut out = String::new();
        let width = self.classes.iter().map(|s| s.len()).max().unwrap_or(0).max(6);
        out.push_str(&format!("{:<9}", "Guesses"));
        for name in &self.classes {
            out.push_str(&format!(" {name:>width$}"));
        }
        out.push_str(&format!(" {:>7} {:>7}\n", "Average", "Random"));
        for r in 0..c {
            let row_name = ORDINALS.get(r).map(|s| s.to_string()).unwrap_or(format!("#{}", r + 1));
            out.push_str(&format!("{row_name:<9}"));
            for per in &self.per_class {
                let cell = format!("{:.0}%", per[r] * 100.0);
                out.push_str(&format!(" {cell:>width$}"));
            }
            let avg = format!("{:.2}%", self.average[r] * 100.0);
            let rnd = format!("{:.2}%", (r + 1) as f64 / c as f64 * 100.0);
            out.push_str(&format!(" {avg:>7} {rnd:>7}\n"));
        }
        out
    }

    /// Tab-separated plot data: guess count, average hit rate, chance rate.
    pub fn plot_data(&self) -> String {
        let c = self.ranks();
        let mut out = String::from("# guesses\taverage\trandom\n");
        for r in 0..c {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\n",
                r + 1,
                self.average[r],
                (r + 1) as f64 / c as f64
            ));
        }
        out
    }
}

/// Per-digit confusion drawn on the keypad: each key shows, on a miniature
/// keypad, how its presses were classified. The true key is marked with its
/// digit; keys that no digit occupies show `-`.
pub fn render_digit_grid(confusion: &ConfusionMatrix, keypad: &Keypad) -> String {
    let rows = keypad.cells.iter().map(|c| c.0).max().unwrap_or(0) + 1;
    let cols = keypad.columns.max(keypad.cells.iter().map(|c| c.1).max().unwrap_or(0) + 1);
    let index = |d: usize| confusion.index_of(&d.to_string());
    const CELL: usize = 7;
    let block_width = cols * CELL;
    let mut out = String::new();
    for key_row in 0..rows {
        let mut lines = vec![String::new(); rows];
        for key_col in 0..cols {
            let actual = keypad
                .cells
                .iter()
                .position(|&p| p == (key_row, key_col))
                .and_then(|d| index(d).map(|i| (d, i)));
            for (mini_row, line) in lines.iter_mut().enumerate() {
                let mut block = String::new();
                for mini_col in 0..cols {
                    let cell = match actual {
                        None => String::new(),
                        Some((d, a)) => match keypad.cells.iter().position(|&p| p == (mini_row, mini_col)) {
                            None => "-".to_string(),
                            Some(pd) => {
                                let pct = index(pd).map(|p| confusion.percent(a, p)).unwrap_or(0.0);
                                if pd == d {
                                    format!("{d}:{pct:.0}%")
                                } else {
                                    format!("{pct:.0}%")
                                }
                            }
                        },
                    };
                    block.push_str(&format!("{cell:>CELL$}"));
                }
                line.push_str(&format!("{block:<block_width$} |"));
            }
        }
        for line in lines {
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out.push_str(&"-".repeat((block_width + 2) * cols));
        out.push('\n');
    }
    out
}
