use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed; within a row the column order is ascending.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Shape {
                    op: "csr_from_triplets",
                    lhs: vec![nrows, ncols],
                    rhs: vec![i, j],
                });
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }

        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in &row {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Self {
        let mut triplets = Vec::new();
        for i in 0..nrows {
            for j in 0..ncols {
                let v = dense[i * ncols + j];
                if v != 0.0 {
                    triplets.push((i, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(nrows, ncols, &triplets).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                triplets.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &triplets).expect("indices in range")
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[i * self.ncols + j] += v;
            }
        }
        out
    }

    /// `out (+)= self * x` where `x` is `ncols x width` row-major.
    pub fn mul_dense_into(&self, x: &[f64], width: usize, out: &mut [f64], accumulate: bool) {
        debug_assert_eq!(x.len(), self.ncols * width);
        debug_assert_eq!(out.len(), self.nrows * width);
        if !accumulate {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
        for i in 0..self.nrows {
            let dst = &mut out[i * width..(i + 1) * width];
            for p in self.indptr[i]..self.indptr[i + 1] {
                let a = self.values[p];
                let src = &x[self.indices[p] * width..(self.indices[p] + 1) * width];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }

    pub fn mul_dense(&self, x: &[f64], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * width];
        self.mul_dense_into(x, width, &mut out, false);
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.mul_dense(x, 1)
    }

    pub fn scale_rows(&mut self, factors: &[f64]) {
        for i in 0..self.nrows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                self.values[p] *= factors[i];
            }
        }
    }
}

/// A constant sparse operator paired with its transpose so that reverse-mode
/// sweeps do not rebuild the adjoint.
#[derive(Clone, Debug)]
pub struct SparseOp {
    forward: CsrMatrix,
    adjoint: CsrMatrix,
}

impl SparseOp {
    pub fn new(matrix: CsrMatrix) -> Self {
        let adjoint = matrix.transpose();
        SparseOp {
            forward: matrix,
            adjoint,
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.forward
    }

    pub fn adjoint(&self) -> &CsrMatrix {
        &self.adjoint
    }

    pub fn nrows(&self) -> usize {
        self.forward.nrows
    }

    pub fn ncols(&self) -> usize {
        self.forward.ncols
    }
}
