//! Row-compressed operators used inside the master-equation right-hand side.

use crate::qcore::{CMatrix, C64};

/// Compressed sparse row storage with a shared pattern, so several operators
/// on the same pattern can be combined by adding value arrays.
#[derive(Clone, Debug)]
pub(crate) struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    /// Union of the non-zero patterns of `mats`.
    pub fn union(n: usize, mats: &[&CMatrix]) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                if mats.iter().any(|m| m[(i, j)] != C64::default()) {
                    cols.push(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Values of `m` on this pattern. Entries of `m` outside the pattern are dropped.
    pub fn gather(&self, m: &CMatrix) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for &j in &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]] {
                out.push(m[(i, j)]);
            }
        }
        out
    }

    /// `out = S x` for the operator with values `vals` on this pattern.
    pub fn mul_dense(&self, vals: &[C64], x: &CMatrix, out: &mut CMatrix) {
        let ncols = x.ncols();
        for j in 0..ncols {
            let xc = x.column(j);
            let xs = xc.as_slice();
            let mut oc = out.column_mut(j);
            for i in 0..self.n {
                let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
                let mut acc = C64::default();
                for p in lo..hi {
                    acc += vals[p] * xs[self.cols[p]];
                }
                oc[i] = acc;
            }
        }
    }
}

/// A single sparse operator as a list of `(row, col, value)` triplets, used
/// for jump terms `L ρ L†`.
#[derive(Clone, Debug)]
pub(crate) struct Triplets {
    pub entries: Vec<(usize, usize, C64)>,
}

impl Triplets {
    pub fn from_dense(m: &CMatrix, scale: f64) -> Self {
        let mut entries = Vec::new();
        // Column-major scan keeps the accumulation in `sandwich_add` cache friendly.
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != C64::default() {
                    entries.push((i, j, v * scale));
                }
            }
        }
        Self { entries }
    }

    /// `out += L ρ L†`.
    pub fn sandwich_add(&self, rho: &CMatrix, out: &mut CMatrix) {
        for &(j, l, w) in &self.entries {
            let wc = w.conj();
            for &(i, k, v) in &self.entries {
                out[(i, j)] += v * rho[(k, l)] * wc;
            }
        }
    }
}
