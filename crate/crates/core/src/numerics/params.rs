use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Ordered collection of named parameter tensors.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore {
    entries: Vec<(String, Tensor)>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a tensor and returns its slot index.
    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.entries.push((name.into(), value));
        self.entries.len() - 1
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.entries[index].1
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].1
    }

    pub fn name(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Registers every tensor as a graph parameter, in store order.
    pub fn bind(&self, graph: &mut Graph) -> Vec<Var> {
        self.entries.iter().map(|(_, t)| graph.param(t)).collect()
    }

    /// Collects gradients after `backward`; unreached tensors get zeros.
    pub fn gradients(&self, graph: &Graph, vars: &[Var]) -> Vec<Tensor> {
        self.entries
            .iter()
            .zip(vars)
            .map(|((_, t), &v)| match graph.grad(v) {
                Some(g) => Tensor::new(t.shape(), g.to_vec()).expect("gradient shape"),
                None => Tensor::zeros(t.shape()),
            })
            .collect()
    }

    /// Checks that names and shapes agree with `other`, listing every mismatch.
    pub fn check_layout(&self, other: &ParamStore) -> Result<()> {
        let mut problems = Vec::new();
        if self.len() != other.len() {
            problems.push(format!(
                "expected {} tensors, found {}",
                self.len(),
                other.len()
            ));
        }
        for ((en, et), (fnm, ft)) in self.entries.iter().zip(&other.entries) {
            if en != fnm || et.shape() != ft.shape() {
                problems.push(format!(
                    "expected {} {:?}, found {} {:?}",
                    en,
                    et.shape(),
                    fnm,
                    ft.shape()
                ));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::shape(problems.join("; ")))
        }
    }
}
