//! Column dictionaries for the ranking engine.
//!
//! A dictionary exposes the candidate design matrix column by column. The
//! product dictionary never materializes the matrix: columns are rebuilt on
//! the fly from per-dimension univariate tables, reusing partial products
//! shared by consecutive multi-indices in graded-lex order.

use nalgebra::DMatrix;

use crate::basis::{IndexSet, UnivariateTable};

pub trait Dictionary: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    /// Streams every column in index order.
    fn stream(&self, sink: &mut dyn FnMut(usize, &[f64]));
    /// Evaluates column `j` at the given row indices.
    fn column_at_rows(&self, j: usize, rows: &[usize], out: &mut [f64]);
}

/// Implicit tensor-product dictionary over a univariate value table.
pub struct ProductDict<'a> {
    table: &'a UnivariateTable,
    alphas: &'a IndexSet,
    ones: Vec<f64>,
}

impl<'a> ProductDict<'a> {
    pub fn new(table: &'a UnivariateTable, alphas: &'a IndexSet) -> Self {
        let ones = vec![1.0; table.n_samples()];
        ProductDict {
            table,
            alphas,
            ones,
        }
    }
}

impl Dictionary for ProductDict<'_> {
    fn n_rows(&self) -> usize {
        self.table.n_samples()
    }

    fn n_cols(&self) -> usize {
        self.alphas.len()
    }

    fn stream(&self, sink: &mut dyn FnMut(usize, &[f64])) {
        let n = self.table.n_samples();
        // Stack of partial products over the column's non-zero factors.
        let mut factor_stack: Vec<(u16, u8)> = Vec::with_capacity(8);
        let mut bufs: Vec<Vec<f64>> = Vec::new();
        let mut factors: Vec<(u16, u8)> = Vec::with_capacity(8);
        for (j, alpha) in self.alphas.iter().enumerate() {
            factors.clear();
            for (dim, &d) in alpha.iter().enumerate() {
                if d > 0 {
                    factors.push((dim as u16, d));
                }
            }
            // Longest shared prefix with the previous column's factors.
            let mut keep = 0;
            while keep < factor_stack.len()
                && keep < factors.len()
                && factor_stack[keep] == factors[keep]
            {
                keep += 1;
            }
            factor_stack.truncate(keep);
            while bufs.len() < factors.len() {
                bufs.push(vec![0.0; n]);
            }
            for f in &factors[keep..] {
                let level = factor_stack.len();
                let row = self.table.value(f.0 as usize, f.1 as usize);
                let (lower, upper) = bufs.split_at_mut(level);
                let dst = &mut upper[0][..n];
                let src: &[f64] = if level == 0 {
                    &self.ones[..n]
                } else {
                    &lower[level - 1][..n]
                };
                let row = &row[..n];
                for i in 0..n {
                    dst[i] = src[i] * row[i];
                }
                factor_stack.push(*f);
            }
            let col: &[f64] = if factor_stack.is_empty() {
                &self.ones
            } else {
                &bufs[factor_stack.len() - 1]
            };
            sink(j, col);
        }
    }

    fn column_at_rows(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        out.fill(1.0);
        let alpha = self.alphas.row(j);
        for (dim, &d) in alpha.iter().enumerate() {
            if d > 0 {
                let row = self.table.value(dim, d as usize);
                for (o, &r) in out.iter_mut().zip(rows) {
                    *o *= row[r];
                }
            }
        }
    }
}

/// Materialized dictionary over an explicit design matrix.
pub struct DenseDict {
    n: usize,
    p: usize,
    /// Column-major values.
    data: Vec<f64>,
}

impl DenseDict {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        DenseDict {
            n: m.nrows(),
            p: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }
}

impl Dictionary for DenseDict {
    fn n_rows(&self) -> usize {
        self.n
    }

    fn n_cols(&self) -> usize {
        self.p
    }

    fn stream(&self, sink: &mut dyn FnMut(usize, &[f64])) {
        for j in 0..self.p {
            sink(j, &self.data[j * self.n..(j + 1) * self.n]);
        }
    }

    fn column_at_rows(&self, j: usize, rows: &[usize], out: &mut [f64]) {
        let col = &self.data[j * self.n..(j + 1) * self.n];
        for (o, &r) in out.iter_mut().zip(rows) {
            *o = col[r];
        }
    }
}
