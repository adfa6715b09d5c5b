//! Embedding vectors and sets of them.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding has no components")]
    Empty,
    #[error("embedding component {index} is not finite")]
    NonFinite { index: usize },
    #[error("embedding dimension {found} differs from {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("embedding set is empty")]
    EmptySet,
}

/// A finite, non-empty vector tagged with the provider that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVector")]
pub struct EmbeddingVector {
    values: Vec<f64>,
    provider: String,
}

#[derive(Deserialize)]
struct RawVector {
    values: Vec<f64>,
    provider: String,
}

impl TryFrom<RawVector> for EmbeddingVector {
    type Error = EmbeddingError;

    fn try_from(raw: RawVector) -> Result<Self, EmbeddingError> {
        EmbeddingVector::new(raw.values, raw.provider)
    }
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, provider: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { index });
        }
        Ok(EmbeddingVector {
            values,
            provider: provider.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn provider(&self) -> &str {
        &self.provider
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// N ≥ 1 vectors of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new<I>(vectors: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator,
        I::Item: AsRef<[f64]>,
    {
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut dim = 0;
        for v in vectors {
            let v = v.as_ref();
            if v.is_empty() {
                return Err(EmbeddingError::Empty);
            }
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(EmbeddingError::NonFinite { index });
            }
            if out.is_empty() {
                dim = v.len();
            } else if v.len() != dim {
                return Err(EmbeddingError::DimMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            out.push(v.to_vec());
        }
        if out.is_empty() {
            return Err(EmbeddingError::EmptySet);
        }
        Ok(EmbeddingSet { vectors: out, dim })
    }

    pub fn from_embeddings<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Result<Self, EmbeddingError> {
        Self::new(vectors.into_iter().map(EmbeddingVector::values))
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Mean of the vectors.
    pub fn centroid(&self) -> Vec<f64> {
        let n = self.vectors.len() as f64;
        let mut c = alloc::vec![0.0; self.dim];
        for v in &self.vectors {
            for (acc, x) in c.iter_mut().zip(v) {
                *acc += x;
            }
        }
        for x in &mut c {
            *x /= n;
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn vector_validation() {
        assert_eq!(EmbeddingVector::new(vec![], "p"), Err(EmbeddingError::Empty));
        assert_eq!(
            EmbeddingVector::new(vec![1.0, f64::NAN], "p"),
            Err(EmbeddingError::NonFinite { index: 1 })
        );
        let v = EmbeddingVector::new(vec![1.0, 2.0], "p").unwrap();
        assert_eq!(v.dim(), 2);
    }

    #[test]
    fn set_validation_and_centroid() {
        assert_eq!(EmbeddingSet::new(Vec::<Vec<f64>>::new()), Err(EmbeddingError::EmptySet));
        assert!(matches!(
            EmbeddingSet::new([vec![1.0, 0.0], vec![1.0]]),
            Err(EmbeddingError::DimMismatch { expected: 2, found: 1 })
        ));
        let s = EmbeddingSet::new([vec![1.0, 0.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(s.centroid(), [0.5, 1.5]);
    }
}
