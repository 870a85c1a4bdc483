//! Identity-specific measurement maps built from re-identification embeddings.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, GridGeometry, ProbabilityGrid};
use crate::math;

/// Appearance descriptor of a person.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Rescales `values` to unit length. Returns `None` for the zero vector.
    pub fn unit(values: Vec<f64>) -> Option<Self> {
        let norm = norm(&values);
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        Some(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn distance(&self, other: &EmbeddingVector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(euclidean(&self.0, &other.0))
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    math::sqrt(acc)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimMismatch { expected, found });
    }
    Ok(())
}

/// Dense per-cell embeddings of one frame, row-major with the embedding
/// dimension innermost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMap {
    geometry: GridGeometry,
    dim: usize,
    values: Vec<f64>,
}

impl EmbeddingMap {
    pub fn new(geometry: GridGeometry, dim: usize, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if dim == 0 {
            return Err(Error::InvalidGrid("embedding dimension must be positive"));
        }
        if values.len() != geometry.len() * dim {
            return Err(Error::InvalidGrid(
                "embedding map length does not match its shape",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("embedding map values must be finite"));
        }
        Ok(Self {
            geometry,
            dim,
            values,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell(&self, cell: Cell) -> &[f64] {
        let start = self.geometry.index(cell) * self.dim;
        &self.values[start..start + self.dim]
    }

    pub fn set_cell(&mut self, cell: Cell, embedding: &[f64]) -> Result<()> {
        check_dim(self.dim, embedding.len())?;
        let start = self.geometry.index(cell) * self.dim;
        self.values[start..start + self.dim].copy_from_slice(embedding);
        Ok(())
    }

    /// The embedding observed at a pixel position, if the position is on the grid.
    pub fn embedding_at(&self, px: [f64; 2]) -> Option<EmbeddingVector> {
        let cell = self.geometry.cell_at(px)?;
        Some(EmbeddingVector::new(self.cell(cell).to_vec()))
    }

    /// Person-specific distance map: Euclidean distance of every cell to `reference`.
    pub fn distance_map(&self, reference: &EmbeddingVector) -> Result<DistanceGrid> {
        check_dim(self.dim, reference.dim())?;
        let reference = reference.as_slice();
        let values = self
            .values
            .chunks_exact(self.dim)
            .map(|e| euclidean(e, reference))
            .collect();
        Ok(DistanceGrid {
            geometry: self.geometry,
            values,
        })
    }
}

/// Per-cell appearance distances to one track's reference embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceGrid {
    geometry: GridGeometry,
    values: Vec<f64>,
}

impl DistanceGrid {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if values.len() != geometry.len() {
            return Err(Error::InvalidGrid(
                "value count does not match width*height",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidGrid(
                "distances must be finite and non-negative",
            ));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, cell: Cell) -> f64 {
        self.values[self.geometry.index(cell)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell of the smallest distance, first in row-major order on ties.
    pub fn argmin(&self) -> Cell {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        self.geometry.cell_of_index(best)
    }

    /// Boltzmann weighting `exp(-d / temperature)`, normalized over the grid.
    ///
    /// Distances are shifted by their minimum before exponentiation, so the
    /// best cell always has weight one before normalization.
    pub fn softmin(&self, temperature: f64) -> Result<ProbabilityGrid> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::ConfigInvalid(
                "softmin temperature must be positive".into(),
            ));
        }
        let min = self.min();
        let inv_t = 1.0 / temperature;
        let mut w: Vec<f64> = self
            .values
            .iter()
            .map(|d| math::exp(-(d - min) * inv_t))
            .collect();
        let sum: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= sum);
        ProbabilityGrid::new(self.geometry, w)
    }
}

/// Accepts the measurement unless every distance exceeds `n_app`.
pub fn gate_missing(distances: &DistanceGrid, n_app: f64) -> bool {
    !(distances.min() > n_app)
}

/// Accepts a likelihood whose entropy is at most `fraction` of the maximum `ln(W*H)`.
pub fn gate_entropy(likelihood: &ProbabilityGrid, fraction: f64) -> bool {
    likelihood.entropy() <= fraction * likelihood.max_entropy()
}
