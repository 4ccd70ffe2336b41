use serde::{Deserialize, Serialize};

use crate::numerics::C64;

/// Sparse coefficient vector: ascending indices with their values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl SparseVec {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from `(index, value)` pairs; duplicates are summed.
    pub fn from_pairs(mut pairs: Vec<(usize, C64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = Self::new();
        for (i, v) in pairs {
            if out.indices.last() == Some(&i) {
                *out.values.last_mut().unwrap() += v;
            } else {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    /// Keeps entries whose magnitude exceeds `threshold`.
    pub fn from_dense(dense: &[C64], threshold: f64) -> Self {
        let mut out = Self::new();
        for (i, &v) in dense.iter().enumerate() {
            if v.norm() > threshold {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn to_dense(&self, n: usize) -> Vec<C64> {
        let mut d = vec![C64::new(0.0, 0.0); n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            d[i] += v;
        }
        d
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, C64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn conj(&self) -> Self {
        Self {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest entrywise difference, with missing entries read as zero.
    pub fn max_abs_diff(&self, other: &SparseVec) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut worst = 0.0f64;
        while i < self.nnz() || j < other.nnz() {
            let a = self.indices.get(i).copied().unwrap_or(usize::MAX);
            let b = other.indices.get(j).copied().unwrap_or(usize::MAX);
            if a == b {
                worst = worst.max((self.values[i] - other.values[j]).norm());
                i += 1;
                j += 1;
            } else if a < b {
                worst = worst.max(self.values[i].norm());
                i += 1;
            } else {
                worst = worst.max(other.values[j].norm());
                j += 1;
            }
        }
        worst
    }
}
