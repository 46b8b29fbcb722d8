//! Tensors with named axes. Contracting two labeled tensors sums over every
//! label they share, which keeps the bookkeeping for small clusters of site
//! tensors out of the BP and gradient code.

use crate::error::{Error, Result};
use crate::tensor::{contract, DenseTensor};

#[derive(Clone, Debug)]
pub struct Labeled<L> {
    pub tensor: DenseTensor,
    pub labels: Vec<L>,
}

impl<L: Copy + PartialEq + std::fmt::Debug> Labeled<L> {
    pub fn new(tensor: DenseTensor, labels: Vec<L>) -> Self {
        debug_assert_eq!(tensor.rank(), labels.len());
        Labeled { tensor, labels }
    }

    /// Sums over all shared labels; the result lists the remaining labels of
    /// `self` followed by those of `other`.
    pub fn contract(&self, other: &Labeled<L>) -> Result<Labeled<L>> {
        let mut pairs = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(j) = other.labels.iter().position(|m| m == l) {
                pairs.push((i, j));
            }
        }
        let tensor = contract(&self.tensor, &other.tensor, &pairs)?;
        let labels = self
            .labels
            .iter()
            .enumerate()
            .filter(|(i, _)| !pairs.iter().any(|p| p.0 == *i))
            .map(|(_, &l)| l)
            .chain(
                other
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !pairs.iter().any(|p| p.1 == *j))
                    .map(|(_, &l)| l),
            )
            .collect();
        Ok(Labeled { tensor, labels })
    }

    /// Reorders the axes to follow `order`, which must be a permutation of
    /// the current labels.
    pub fn permute_to(&self, order: &[L]) -> Result<DenseTensor> {
        if order.len() != self.labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "cannot order labels {:?} as {:?}",
                self.labels, order
            )));
        }
        let axes = order
            .iter()
            .map(|l| {
                self.labels.iter().position(|m| m == l).ok_or_else(|| {
                    Error::ShapeMismatch(format!("label {l:?} missing from {:?}", self.labels))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.tensor.permute(&axes)
    }
}

/// Folds a sequence of labeled tensors left to right.
pub fn contract_all<L: Copy + PartialEq + std::fmt::Debug>(parts: &[Labeled<L>]) -> Result<Labeled<L>> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty network".into()))?;
    rest.iter().try_fold(first.clone(), |acc, t| acc.contract(t))
}
