use std::path::Path;

use rand::Rng;

use super::PerceptionError;
use crate::emotion::{read_labeled_matrix, Emotion, LabeledMatrix, EMOTION_COUNT};

const BUNDLED: &str = include_str!("../../data/recognition_confusion.csv");

/// Largest accepted deviation of a raw column sum from 1 before renormalization.
pub const COLUMN_SUM_TOLERANCE: f64 = 0.02;

/// Recognition confusion: `values[predicted][true]`, column-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    values: LabeledMatrix,
    raw_column_sums: [f64; EMOTION_COUNT],
}

impl ConfusionMatrix {
    /// Renormalizes every column to sum to 1. Columns whose raw sum strays
    /// further than [`COLUMN_SUM_TOLERANCE`] from 1 are rejected.
    pub fn new(raw: LabeledMatrix) -> Result<Self, PerceptionError> {
        let mut sums = [0.0; EMOTION_COUNT];
        for row in &raw {
            for (col, v) in row.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(PerceptionError::InvalidMatrix(format!(
                        "entry {v} is not a non-negative number"
                    )));
                }
                sums[col] += v;
            }
        }
        for (col, s) in sums.iter().enumerate() {
            if (s - 1.0).abs() > COLUMN_SUM_TOLERANCE + 1e-9 {
                return Err(PerceptionError::InvalidMatrix(format!(
                    "column `{}` sums to {s}",
                    Emotion::ALL[col].label()
                )));
            }
        }
        let mut values = raw;
        for row in values.iter_mut() {
            for (col, v) in row.iter_mut().enumerate() {
                *v /= sums[col];
            }
        }
        Ok(Self {
            values,
            raw_column_sums: sums,
        })
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; EMOTION_COUNT]; EMOTION_COUNT];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self::new(m).expect("identity is column-stochastic")
    }

    /// The shipped questionnaire matrix.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED).expect("bundled confusion matrix is valid")
    }

    pub fn from_csv(text: &str) -> Result<Self, PerceptionError> {
        Self::new(read_labeled_matrix(text.as_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PerceptionError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PerceptionError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv(&text)
    }

    pub fn get(&self, predicted: Emotion, truth: Emotion) -> f64 {
        self.values[predicted.index()][truth.index()]
    }

    pub fn values(&self) -> &LabeledMatrix {
        &self.values
    }

    /// Distribution of predictions for one true emotion.
    pub fn column(&self, truth: Emotion) -> [f64; EMOTION_COUNT] {
        let mut c = [0.0; EMOTION_COUNT];
        for (p, row) in self.values.iter().enumerate() {
            c[p] = row[truth.index()];
        }
        c
    }

    pub fn column_sums(&self) -> [f64; EMOTION_COUNT] {
        let mut s = [0.0; EMOTION_COUNT];
        for row in &self.values {
            for (c, v) in row.iter().enumerate() {
                s[c] += v;
            }
        }
        s
    }

    /// Column sums as read, before renormalization.
    pub fn raw_column_sums(&self) -> [f64; EMOTION_COUNT] {
        self.raw_column_sums
    }
}

/// Samples a predicted emotion from the column of the true one.
pub fn noisy_recognize<R: Rng + ?Sized>(
    truth: Emotion,
    matrix: &ConfusionMatrix,
    rng: &mut R,
) -> Emotion {
    let column = matrix.column(truth);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = truth;
    for e in Emotion::ALL {
        let p = column[e.index()];
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = e;
        if u < acc {
            return e;
        }
    }
    last
}
