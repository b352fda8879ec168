//! Compressed sparse row matrices over `f64`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            rows.push(if d != 0.0 { vec![(i as u32, d)] } else { Vec::new() });
        }
        Self::from_rows(diag.len(), diag.len(), rows)
    }

    /// Builds a matrix from per-row entry lists. Duplicate columns are summed
    /// and exact zeros dropped.
    pub fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(u32, f64)>>) -> Self {
        assert_eq!(rows.len(), nrows);
        let mut builder = RowBuilder::new(nrows, ncols);
        for mut row in rows {
            builder.push_row(&mut row);
        }
        builder.finish()
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

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().zip(&self.values[span]).map(|(&c, &v)| (c as usize, v))
    }

    /// All stored entries as `(row, col, value)`, row-major.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&(c as u32)) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let slot = next[c];
                indices[slot] = r as u32;
                values[slot] = v;
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// Returns `A * diag(scale)`.
    pub fn scale_columns(&self, scale: &[f64]) -> Self {
        assert_eq!(scale.len(), self.ncols);
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&self.indices) {
            *v *= scale[c as usize];
        }
        out
    }

    /// Returns `sum_k w_k A_k` over matrices of equal shape.
    pub fn linear_combination(terms: &[(&CsrMatrix, f64)]) -> Self {
        let (nrows, ncols) = terms.first().map(|(m, _)| (m.nrows, m.ncols)).unwrap_or((0, 0));
        let mut builder = RowBuilder::new(nrows, ncols);
        let mut scratch = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            for (m, w) in terms {
                assert_eq!((m.nrows, m.ncols), (nrows, ncols));
                scratch.extend(m.row(r).map(|(c, v)| (c as u32, w * v)));
            }
            builder.push_row(&mut scratch);
        }
        builder.finish()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut worst = 0.0f64;
        for r in 0..self.nrows {
            let mut a = self.row(r).peekable();
            let mut b = t.row(r).peekable();
            loop {
                match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ca, va)), Some((cb, vb))) => {
                        if ca == cb {
                            worst = worst.max((va - vb).abs());
                            a.next();
                            b.next();
                        } else if ca < cb {
                            worst = worst.max(va.abs());
                            a.next();
                        } else {
                            worst = worst.max(vb.abs());
                            b.next();
                        }
                    }
                    (Some((_, va)), None) => {
                        worst = worst.max(va.abs());
                        a.next();
                    }
                    (None, Some((_, vb))) => {
                        worst = worst.max(vb.abs());
                        b.next();
                    }
                }
            }
        }
        worst
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row_dot = |r: usize| -> f64 {
            let span = self.indptr[r]..self.indptr[r + 1];
            let mut acc = 0.0;
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                acc += v * x[c as usize];
            }
            acc
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            y.par_iter_mut().enumerate().with_min_len(1024).for_each(|(r, out)| *out = row_dot(r));
        }
        #[cfg(not(feature = "parallel"))]
        for (r, out) in y.iter_mut().enumerate() {
            *out = row_dot(r);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// `sum_{r in rows} x_r (A y)_r`, touching only the selected rows.
    pub fn bilinear_rows(&self, rows: Range<usize>, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for r in rows {
            if x[r] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * y[c];
            }
            total += x[r] * acc;
        }
        total
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>, threshold: f64) -> Self {
        let rows = (0..m.nrows())
            .map(|r| (0..m.ncols()).filter(|&c| m[(r, c)].abs() > threshold).map(|c| (c as u32, m[(r, c)])).collect())
            .collect();
        Self::from_rows(m.nrows(), m.ncols(), rows)
    }
}

/// Incremental row-by-row construction.
#[derive(Debug)]
pub struct RowBuilder {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl RowBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        Self { nrows, ncols, indptr, indices: Vec::new(), values: Vec::new() }
    }

    /// Appends the next row; the entry list is sorted in place.
    pub fn push_row(&mut self, entries: &mut [(u32, f64)]) {
        assert!(self.indptr.len() <= self.nrows, "too many rows");
        entries.sort_unstable_by_key(|e| e.0);
        let mut i = 0;
        while i < entries.len() {
            let col = entries[i].0;
            debug_assert!((col as usize) < self.ncols);
            let mut acc = 0.0;
            while i < entries.len() && entries[i].0 == col {
                acc += entries[i].1;
                i += 1;
            }
            if acc != 0.0 {
                self.indices.push(col);
                self.values.push(acc);
            }
        }
        self.indptr.push(self.indices.len());
    }

    pub fn finish(self) -> CsrMatrix {
        assert_eq!(self.indptr.len(), self.nrows + 1, "missing rows");
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}
