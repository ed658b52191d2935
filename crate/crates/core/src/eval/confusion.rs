use serde::{Deserialize, Serialize};

/// Counts of (actual, predicted) class pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[actual][predicted]`
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    pub fn add(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    /// Adds one outcome by class name. Returns false if either is unknown.
    pub fn record(&mut self, actual: &str, predicted: &str) -> bool {
        match (self.index_of(actual), self.index_of(predicted)) {
            (Some(a), Some(p)) => {
                self.add(a, p);
                true
            }
            _ => false,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn actual_total(&self, actual: usize) -> u64 {
        self.counts[actual].iter().sum()
    }

    /// Fraction of all samples on the diagonal; 0 for an empty matrix.
    pub fn rate(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    /// Share of actual-class samples given each prediction, in percent.
    /// Classes with no samples get all zeros.
    pub fn percent(&self, actual: usize, predicted: usize) -> f64 {
        match self.actual_total(actual) {
            0 => 0.0,
            t => 100.0 * self.counts[actual][predicted] as f64 / t as f64,
        }
    }

    /// Sum of percentages over predictions for one actual class.
    pub fn percent_total(&self, actual: usize) -> f64 {
        (0..self.classes.len()).map(|p| self.percent(actual, p)).sum()
    }

    /// Off-diagonal cells as (actual, predicted, percent), largest first;
    /// equal values keep (actual, predicted) order.
    pub fn off_diagonal_ranked(&self) -> Vec<(usize, usize, f64)> {
        let n = self.classes.len();
        let mut cells: Vec<_> = (0..n)
            .flat_map(|a| (0..n).filter(move |p| *p != a).map(move |p| (a, p)))
            .map(|(a, p)| (a, p, self.percent(a, p)))
            .collect();
        cells.sort_by(|x, y| y.2.total_cmp(&x.2));
        cells
    }

    /// Renders percentages with predicted classes as rows and actual classes
    /// as columns, followed by each column's total.
    pub fn render(&self, corner: &str) -> String {
        let n = self.classes.len();
        let first = self
            .classes
            .iter()
            .map(|c| c.len())
            .chain([corner.len(), "Total".len()])
            .max()
            .unwrap_or(0);
        let width = self.classes.iter().map(|c| c.len()).max().unwrap_or(0).max(8);
        let mut out = String::new();
        let sep = format!("{}\n", "-".repeat(first + (width + 2) * n));
        out.push_str(&format!("{corner:<first$}"));
        for c in &self.classes {
            out.push_str(&format!("  {c:>width$}"));
        }
        out.push('\n');
        out.push_str(&sep);
        for p in 0..n {
            out.push_str(&format!("{:<first$}", self.classes[p]));
            for a in 0..n {
                let cell = format!("{:.2}%", self.percent(a, p));
                out.push_str(&format!("  {cell:>width$}"));
            }
            out.push('\n');
        }
        out.push_str(&sep);
        out.push_str(&format!("{:<first$}", "Total"));
        for a in 0..n {
            let cell = format!("{:.2}%", self.percent_total(a));
            out.push_str(&format!("  {cell:>width$}"));
        }
        out.push('\n');
        out
    }
}
