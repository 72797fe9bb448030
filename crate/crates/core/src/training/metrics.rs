use std::fmt::Write as _;

use ndarray::Array2;

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub epochs: Vec<EpochMetrics>,
    pub confusion: Option<ConfusionMatrix>,
}

impl Metrics {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.test_acc)
    }

    /// `epoch,train_loss,test_loss,test_acc` lines under a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,test_loss,test_acc\n");
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.test_loss, e.test_acc).unwrap();
        }
        out
    }
}

/// `counts[[true, predicted]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    pub counts: Array2<usize>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        Self { counts: Array2::zeros((n, n)), class_names }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[[truth, predicted]] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.sum()
    }

    pub fn correct(&self) -> usize {
        self.counts.diag().sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.correct() as f64 / n as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Plain-text table: a label header, then one row per true class.
    pub fn to_text(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain(self.counts.iter().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1);
        let mut out = String::from("# rows: true class, columns: predicted class\n");
        write!(out, "{:>width$}", "").unwrap();
        for name in &self.class_names {
            write!(out, " {name:>width$}").unwrap();
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(self.counts.rows()) {
            write!(out, "{name:>width$}").unwrap();
            for c in row {
                write!(out, " {c:>width$}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Accuracies as percentages in `mean (std)` form with two decimals, e.g. `89.44 (0.55)`.
pub fn format_mean_std(accuracies: &[f64]) -> String {
    let pct: Vec<f64> = accuracies.iter().map(|a| 100.0 * a).collect();
    let (mean, std) = mean_std(&pct);
    format!("{mean:.2} ({std:.2})")
}
