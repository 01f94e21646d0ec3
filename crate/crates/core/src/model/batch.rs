use std::collections::HashMap;

use crate::datamodel::{ConnectionFeature, LabeledSample, ManeuverSequence, NEIGHBOR_SLOTS};
use crate::error::{Error, Result};

/// Targets of one forward pass with their neighborhoods expressed as
/// indices into a table of distinct maneuver sequences, so every distinct
/// sequence is encoded once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SocialBatch {
    pub sequences: Vec<ManeuverSequence>,
    pub targets: Vec<usize>,
    pub neighbors: Vec<[usize; NEIGHBOR_SLOTS]>,
    pub connections: Vec<[ConnectionFeature; NEIGHBOR_SLOTS]>,
    pub labels: Vec<usize>,
}

impl SocialBatch {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a LabeledSample>) -> Self {
        let mut batch = SocialBatch::default();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut intern = |seq: &ManeuverSequence, table: &mut Vec<ManeuverSequence>| {
            let key: Vec<u64> = seq.flat().map(f64::to_bits).collect();
            *seen.entry(key).or_insert_with(|| {
                table.push(*seq);
                table.len() - 1
            })
        };
        for s in samples {
            let t = intern(&s.target, &mut batch.sequences);
            let nbrs = std::array::from_fn(|k| intern(&s.neighbors[k].features, &mut batch.sequences));
            batch.targets.push(t);
            batch.neighbors.push(nbrs);
            batch.connections.push(std::array::from_fn(|k| s.neighbors[k].connection));
            batch.labels.push(s.label.index());
        }
        batch
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Checks that every index refers to a stored sequence and that the
    /// per-target tables agree in length.
    pub fn validate(&self) -> Result<()> {
        let n = self.targets.len();
        if self.neighbors.len() != n || self.connections.len() != n || self.labels.len() != n {
            return Err(Error::shape(format!(
                "batch tables disagree: {} targets, {} neighbor rows, {} connection rows, {} labels",
                n,
                self.neighbors.len(),
                self.connections.len(),
                self.labels.len()
            )));
        }
        let count = self.sequences.len();
        for (i, (&t, nb)) in self.targets.iter().zip(&self.neighbors).enumerate() {
            if let Some(&bad) = std::iter::once(&t).chain(nb.iter()).find(|&&k| k >= count) {
                return Err(Error::validation(format!(
                    "target {} refers to sequence {} but the batch holds {}",
                    i, bad, count
                )));
            }
        }
        if let Some(seq) = self.sequences.iter().position(|s| !s.all_finite()) {
            return Err(Error::validation(format!("sequence {} has non-finite features", seq)));
        }
        if self
            .connections
            .iter()
            .flatten()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::validation("non-finite connection feature"));
        }
        Ok(())
    }
}
