use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::codec::DirectionCodec;
use super::mlp::{Dense, Mlp};
use super::{argmax, feature_vector};
use crate::error::{Error, Result};
use crate::system::{QuantizedPlant, TernaryInput};

/// Bumped whenever the feature layout changes.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// A trained network paired with the codec that gives its classes meaning.
#[derive(Clone, Debug)]
pub struct ClassifierModel {
    mlp: Mlp,
    codec: DirectionCodec,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    feature_schema_version: u32,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    codec: DirectionCodec,
}

impl ClassifierModel {
    pub fn new(mlp: Mlp, codec: DirectionCodec) -> Result<Self> {
        if mlp.classes() != codec.len() {
            return Err(Error::DimensionMismatch {
                context: "network classes vs codec size",
                expected: codec.len(),
                actual: mlp.classes(),
            });
        }
        if mlp.input_dim() != 3 * codec.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input vs feature length",
                expected: 3 * codec.state_dim(),
                actual: mlp.input_dim(),
            });
        }
        Ok(Self { mlp, codec })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn codec(&self) -> &DirectionCodec {
        &self.codec
    }

    pub fn predict_class(&self, features: &[f64]) -> Result<usize> {
        let scores = self.mlp.scores(features)?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("classifier scores"));
        }
        Ok(argmax(&scores))
    }

    /// Canonical input of the most probable direction.
    pub fn predict_input(&self, features: &[f64]) -> Result<TernaryInput> {
        let class = self.predict_class(features)?;
        Ok(self.codec.canonical_inputs()[class].clone())
    }

    pub fn predict_for_states(&self, x_q: &[f64], x_ref: &[f64]) -> Result<TernaryInput> {
        self.predict_input(&feature_vector(x_q, x_ref))
    }

    pub fn check_compatible(&self, plant: &QuantizedPlant) -> Result<()> {
        if self.codec.matches_plant(plant)? && self.codec.columns() == plant.b_q().transpose().to_rows() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "classifier model was trained for a different plant input matrix".into(),
            ))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let layers = self.mlp.layers();
        let doc = ModelDoc {
            feature_schema_version: FEATURE_SCHEMA_VERSION,
            layer_dims: self.mlp.layer_dims(),
            weights: layers.iter().map(|l| l.weights.clone()).collect(),
            biases: layers.iter().map(|l| l.bias.clone()).collect(),
            codec: self.codec.clone(),
        };
        Ok(serde_json::to_string(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.feature_schema_version != FEATURE_SCHEMA_VERSION {
            return Err(Error::InvalidArgument(format!(
                "model feature schema {} is not supported (expected {FEATURE_SCHEMA_VERSION})",
                doc.feature_schema_version
            )));
        }
        let layer_count = doc.layer_dims.len().saturating_sub(1);
        if layer_count == 0 || doc.weights.len() != layer_count || doc.biases.len() != layer_count {
            return Err(Error::InvalidArgument("model layer arrays do not match layer_dims".into()));
        }
        let layers = doc
            .layer_dims
            .windows(2)
            .zip(doc.weights.into_iter().zip(doc.biases))
            .map(|(d, (weights, bias))| Dense {
                inputs: d[0],
                outputs: d[1],
                weights,
                bias,
            })
            .collect();
        Self::new(Mlp::from_layers(layers)?, doc.codec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
