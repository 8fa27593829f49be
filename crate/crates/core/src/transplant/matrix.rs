use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("{len} values cannot form a {rows}×{dim} matrix")]
    Shape { rows: usize, dim: usize, len: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixRole {
    Input,
    Output,
}

impl MatrixRole {
    /// Conventional tensor name in embedding files.
    pub fn tensor_name(self) -> &'static str {
        match self {
            MatrixRole::Input => "embed.input",
            MatrixRole::Output => "embed.output",
        }
    }
}

/// Row-major `rows × dim` f32 matrix, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    role: MatrixRole,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f32>, role: MatrixRole) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::ZeroDim);
        }
        if rows.checked_mul(dim) != Some(data.len()) {
            return Err(MatrixError::Shape { rows, dim, len: data.len() });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite { row: i / dim, col: i % dim });
        }
        Ok(Self { rows, dim, data, role })
    }

    pub fn from_rows(rows: &[Vec<f32>], role: MatrixRole) -> Result<Self, MatrixError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(MatrixError::Shape { rows: rows.len(), dim, len: data.len() + r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), dim, data, role)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> MatrixRole {
        self.role
    }

    pub fn with_role(mut self, role: MatrixRole) -> Self {
        self.role = role;
        self
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Column-wise mean over all rows, accumulated in f64.
    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0f64; self.dim];
        for r in 0..self.rows {
            for (m, &x) in mean.iter_mut().zip(self.row(r)) {
                *m += f64::from(x);
            }
        }
        let n = self.rows.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    /// Column-wise population standard deviation.
    pub fn column_std(&self) -> Vec<f64> {
        let mean = self.column_mean();
        let mut var = vec![0f64; self.dim];
        for r in 0..self.rows {
            for ((v, &x), m) in var.iter_mut().zip(self.row(r)).zip(&mean) {
                let d = f64::from(x) - m;
                *v += d * d;
            }
        }
        let n = self.rows.max(1) as f64;
        var.into_iter().map(|v| (v / n).sqrt()).collect()
    }

    pub(crate) fn from_parts_unchecked(rows: usize, dim: usize, data: Vec<f32>, role: MatrixRole) -> Self {
        debug_assert_eq!(rows * dim, data.len());
        Self { rows, dim, data, role }
    }
}
