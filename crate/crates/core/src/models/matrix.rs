use super::ModelError;

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self, ModelError> {
        if data.len() != n_rows * n_cols {
            return Err(ModelError::RaggedRow { row: 0, got: data.len(), expected: n_rows * n_cols });
        }
        Ok(Matrix { n_rows, n_cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], n_cols: usize) -> Result<Self, ModelError> {
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n_cols {
                return Err(ModelError::RaggedRow { row: i, got: r.len(), expected: n_cols });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { n_rows: rows.len(), n_cols, data })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { n_rows: idx.len(), n_cols: self.n_cols, data }
    }

    /// Column-major copy of the given rows.
    pub(crate) fn columns(&self, rows: &[usize]) -> Vec<Vec<f64>> {
        (0..self.n_cols)
            .map(|j| rows.iter().map(|&i| self.get(i, j)).collect())
            .collect()
    }
}
