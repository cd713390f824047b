use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{enumerate_alphabet, QuantizedPlant, TernaryInput};

/// Bijection between classifier classes and the distinct aggregate
/// directions `B_q u`.
///
/// Directions are ordered lexicographically. Each carries a canonical input:
/// the smallest ‖u‖₁, ties going to the lexicographically largest `u`, which
/// prefers +1 activations in the earliest columns.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "CodecRepr", into = "CodecRepr")]
pub struct DirectionCodec {
    directions: Vec<Vec<f64>>,
    canonical_inputs: Vec<TernaryInput>,
    columns: Vec<Vec<f64>>,
    quantum: f64,
    index: BTreeMap<Vec<i64>, usize>,
}

#[derive(Serialize, Deserialize)]
struct CodecRepr {
    directions: Vec<Vec<f64>>,
    canonical_inputs: Vec<TernaryInput>,
    /// Columns of `B_q`.
    input_columns: Vec<Vec<f64>>,
}

impl From<DirectionCodec> for CodecRepr {
    fn from(c: DirectionCodec) -> Self {
        CodecRepr {
            directions: c.directions,
            canonical_inputs: c.canonical_inputs,
            input_columns: c.columns,
        }
    }
}

impl TryFrom<CodecRepr> for DirectionCodec {
    type Error = Error;

    fn try_from(r: CodecRepr) -> Result<Self> {
        DirectionCodec::from_parts(r.directions, r.canonical_inputs, r.input_columns)
    }
}

fn quantum_for(scale: f64) -> f64 {
    1e-9 * scale.max(1e-300)
}

fn key(direction: &[f64], quantum: f64) -> Vec<i64> {
    direction.iter().map(|v| (v / quantum).round() as i64).collect()
}

impl DirectionCodec {
    pub fn build(plant: &QuantizedPlant) -> Result<Self> {
        let m = plant.m();
        let alphabet = enumerate_alphabet(m)?;
        let scale = plant.b_q().as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs())) * m as f64;
        let quantum = quantum_for(scale);

        let mut best: BTreeMap<Vec<i64>, (Vec<f64>, TernaryInput)> = BTreeMap::new();
        for u in alphabet {
            let d = plant.direction(&u)?;
            let k = key(&d, quantum);
            match best.get_mut(&k) {
                None => {
                    best.insert(k, (d, u));
                }
                Some(slot) => {
                    let better = (u.l1_norm(), std::cmp::Reverse(&u)) < (slot.1.l1_norm(), std::cmp::Reverse(&slot.1));
                    if better {
                        *slot = (d, u);
                    }
                }
            }
        }
        let (directions, canonical_inputs): (Vec<_>, Vec<_>) = best.into_values().unzip();
        let columns = plant.b_q().transpose().to_rows();
        Self::from_parts_with_quantum(directions, canonical_inputs, columns, quantum)
    }

    fn from_parts(directions: Vec<Vec<f64>>, canonical_inputs: Vec<TernaryInput>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let scale = directions
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()));
        Self::from_parts_with_quantum(directions, canonical_inputs, columns, quantum_for(scale))
    }

    fn from_parts_with_quantum(
        directions: Vec<Vec<f64>>,
        canonical_inputs: Vec<TernaryInput>,
        columns: Vec<Vec<f64>>,
        quantum: f64,
    ) -> Result<Self> {
        if directions.len() != canonical_inputs.len() || directions.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "codec needs one canonical input per direction ({} directions, {} inputs)",
                directions.len(),
                canonical_inputs.len()
            )));
        }
        let n = directions[0].len();
        let m = canonical_inputs[0].len();
        if directions.iter().any(|d| d.len() != n)
            || canonical_inputs.iter().any(|u| u.len() != m)
            || columns.len() != m
            || columns.iter().any(|c| c.len() != n)
        {
            return Err(Error::InvalidArgument("codec entries have inconsistent lengths".into()));
        }
        let mut index = BTreeMap::new();
        for (i, d) in directions.iter().enumerate() {
            if index.insert(key(d, quantum), i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate codec direction {d:?}")));
            }
        }
        Ok(Self {
            directions,
            canonical_inputs,
            columns,
            quantum,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.canonical_inputs[0].len()
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn canonical_inputs(&self) -> &[TernaryInput] {
        &self.canonical_inputs
    }

    pub fn class_of_direction(&self, direction: &[f64]) -> Option<usize> {
        self.index.get(&key(direction, self.quantum)).copied()
    }

    /// Class of the direction `B_q u`.
    pub fn class_of_input(&self, u: &TernaryInput) -> Result<usize> {
        if u.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "codec input",
                expected: self.input_dim(),
                actual: u.len(),
            });
        }
        let mut d = vec![0.0; self.state_dim()];
        for (col, &v) in self.columns.iter().zip(u.entries()) {
            for (acc, c) in d.iter_mut().zip(col) {
                *acc += f64::from(v) * c;
            }
        }
        self.class_of_direction(&d)
            .ok_or_else(|| Error::InvalidArgument(format!("direction {d:?} is not in the codec")))
    }

    /// Columns of `B_q`.
    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Checks that the codec was built from this plant.
    pub fn matches_plant(&self, plant: &QuantizedPlant) -> Result<bool> {
        if plant.n() != self.state_dim() || plant.m() != self.input_dim() {
            return Ok(false);
        }
        for (d, u) in self.directions.iter().zip(&self.canonical_inputs) {
            let got = plant.direction(u)?;
            if key(&got, self.quantum) != key(d, self.quantum) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
