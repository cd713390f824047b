//! Learned controller: a dense network that maps the current plant and
//! reference states to one of the plant's distinct input directions.

mod codec;
mod mlp;
mod model;
mod train;

pub use codec::DirectionCodec;
pub use mlp::{gradient_check, Dense, Mlp};
pub use model::{ClassifierModel, FEATURE_SCHEMA_VERSION};
pub use train::{accuracy, train, AdamParams, TrainConfig, TrainReport};

use crate::error::{Error, Result};

/// Hidden layer widths used when none are configured.
pub const DEFAULT_HIDDEN: [usize; 3] = [512, 480, 256];

/// Features for the current step: `(x_q, x_ref, x_ref − x_q)`.
pub fn feature_vector(x_q: &[f64], x_ref: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x_q.len(), x_ref.len());
    let mut f = Vec::with_capacity(3 * x_q.len());
    f.extend_from_slice(x_q);
    f.extend_from_slice(x_ref);
    f.extend(x_ref.iter().zip(x_q).map(|(r, q)| r - q));
    f
}

/// Layer dimensions `3n → hidden… → classes`.
pub fn layer_dims(state_dim: usize, hidden: &[usize], classes: usize) -> Vec<usize> {
    let mut dims = vec![3 * state_dim];
    dims.extend_from_slice(hidden);
    dims.push(classes);
    dims
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRow {
    pub features: Vec<f64>,
    pub label: usize,
}

/// Labelled feature rows; all rows share one feature length and every label
/// is below `classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<DatasetRow>,
    classes: usize,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one class".into()));
        }
        let feature_dim = rows.first().map_or(0, |r| r.features.len());
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != feature_dim {
                return Err(Error::DimensionMismatch {
                    context: "dataset row features",
                    expected: feature_dim,
                    actual: r.features.len(),
                });
            }
            if r.label >= classes {
                return Err(Error::InvalidArgument(format!(
                    "row {i} has label {} but there are {classes} classes",
                    r.label
                )));
            }
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset features"));
            }
        }
        Ok(Self {
            rows,
            classes,
            feature_dim,
        })
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Concatenates two datasets with the same schema.
    pub fn concat(mut self, other: Dataset) -> Result<Self> {
        if !other.is_empty() && !self.is_empty() && other.feature_dim != self.feature_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset concat",
                expected: self.feature_dim,
                actual: other.feature_dim,
            });
        }
        let classes = self.classes.max(other.classes);
        self.rows.extend(other.rows);
        Dataset::new(self.rows, classes)
    }

    /// Row count per label.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for r in &self.rows {
            h[r.label] += 1;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn features_layout() {
        assert_eq!(feature_vector(&[1.0, 2.0], &[3.0, 5.0]), vec![1.0, 2.0, 3.0, 5.0, 2.0, 3.0]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.1; 4]), 0);
    }

    #[test]
    fn dataset_validation() {
        let row = |f: Vec<f64>, label| DatasetRow { features: f, label };
        assert!(Dataset::new(vec![row(vec![1.0], 3)], 3).is_err());
        assert!(Dataset::new(vec![row(vec![1.0], 0), row(vec![1.0, 2.0], 0)], 3).is_err());
        assert!(Dataset::new(vec![row(vec![f64::NAN], 0)], 1).is_err());
        let d = Dataset::new(vec![row(vec![1.0], 2), row(vec![0.0], 2)], 3).unwrap();
        assert_eq!(d.label_histogram(), vec![0, 0, 2]);
        assert_eq!(layer_dims(2, &DEFAULT_HIDDEN, 25), vec![6, 512, 480, 256, 25]);
    }
}
