use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Fixed `classes x output_neurons` decoder.
///
/// Output neurons are split into contiguous blocks, one block per class; when the neuron
/// count does not divide evenly the earlier classes get one extra neuron. Each row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VotingMatrix {
    matrix: Array2<f64>,
    assignment: Vec<usize>,
}

impl VotingMatrix {
    pub fn new(num_classes: usize, num_neurons: usize) -> Result<Self> {
        if num_classes == 0 || num_neurons < num_classes {
            return Err(Error::InvalidParameter(format!(
                "cannot assign {num_neurons} output neurons to {num_classes} classes"
            )));
        }
        let base = num_neurons / num_classes;
        let extra = num_neurons % num_classes;
        let assignment =
            (0..num_classes).flat_map(|c| std::iter::repeat_n(c, base + usize::from(c < extra))).collect();
        Self::from_assignment(num_classes, assignment)
    }

    /// Builds the matrix from an explicit `neuron -> class` assignment.
    pub fn from_assignment(num_classes: usize, assignment: Vec<usize>) -> Result<Self> {
        let mut counts = vec![0usize; num_classes];
        for &c in &assignment {
            if c >= num_classes {
                return Err(Error::InvalidParameter(format!(
                    "neuron assigned to class {c} of {num_classes}"
                )));
            }
            counts[c] += 1;
        }
        if let Some(empty) = counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidParameter(format!("class {empty} has no voting neurons")));
        }
        let mut matrix = Array2::zeros((num_classes, assignment.len()));
        for (j, &c) in assignment.iter().enumerate() {
            matrix[[c, j]] = 1.0 / counts[c] as f64;
        }
        Ok(Self { matrix, assignment })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn num_classes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_neurons(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn class_of(&self, neuron: usize) -> usize {
        self.assignment[neuron]
    }

    /// `(1/T) sum_t U o^t` for a `T x neurons` spike record.
    pub fn scores(&self, outputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if outputs.ncols() != self.num_neurons() || outputs.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "voting over {:?} outputs with {} neurons",
                outputs.dim(),
                self.num_neurons()
            )));
        }
        let mean = outputs.mean_axis(Axis(0)).expect("nonempty");
        Ok(self.matrix.dot(&mean))
    }
}

/// Class scores and the argmax (lowest index wins ties).
pub fn vote(outputs: ArrayView2<'_, f64>, voting: &VotingMatrix) -> Result<(Array1<f64>, usize)> {
    let scores = voting.scores(outputs)?;
    let predicted = argmax(&scores);
    Ok((scores, predicted))
}

pub(crate) fn argmax(scores: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
