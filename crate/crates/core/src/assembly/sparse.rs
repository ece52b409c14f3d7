//! Compressed sparse row matrices.

use std::fmt::Write as _;

/// Row-compressed matrix. Explicit zeros are kept so that patterns stay
/// stable across re-assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

/// Triplet accumulator.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Adds `scale·m` with its origin at `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, m: &CsrMatrix, scale: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(r0 + i, c0 + m.indices[k], scale * m.data[k]);
            }
        }
    }

    /// Adds `scale·mᵀ` with its origin at `(r0, c0)`.
    pub fn add_block_transposed(&mut self, r0: usize, c0: usize, m: &CsrMatrix, scale: f64) {
        for i in 0..m.nrows {
            for k in m.indptr[i]..m.indptr[i + 1] {
                self.push(r0 + m.indices[k], c0 + i, scale * m.data[k]);
            }
        }
    }

    pub fn build(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

impl CsrMatrix {
    /// Duplicates are summed in input order after a stable sort, so the
    /// result is reproducible bit for bit.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (i, j, v) = triplets[k];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) outside {nrows}x{ncols}");
            if last == Some((i, j)) {
                *data.last_mut().expect("entry exists") += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        cols.binary_search(&j)
            .map(|k| self.data[self.indptr[i] + k])
            .unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `xᵀ A y`.
    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                t.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// `a·self + b·other` on the union pattern.
    pub fn add(&self, a: f64, other: &CsrMatrix, b: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut tb = TripletBuilder::new(self.nrows, self.ncols);
        tb.add_block(0, 0, self, a);
        tb.add_block(0, 0, other, b);
        tb.build()
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.indptr == other.indptr
            && self.indices == other.indices
    }

    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        let d = self.add(1.0, other, -1.0);
        d.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate listing `row col value`, one entry per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "% {} {} {}", self.nrows, self.ncols, self.nnz());
        for (i, j, v) in self.to_triplets() {
            let _ = writeln!(s, "{i} {j} {v:.16e}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_kept() {
        let m = CsrMatrix::from_triplets(2, 3, &[(1, 2, 1.0), (0, 0, 2.0), (1, 2, 3.0), (0, 1, 0.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(1, 2), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![2.0, 4.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 1, 1.5), (2, 0, -2.0), (1, 1, 4.0)]);
        let t = m.transpose();
        assert_eq!(t.get(1, 0), 1.5);
        assert_eq!(t.transpose(), m);
    }

    #[test]
    fn blocks_and_sums() {
        let a = CsrMatrix::identity(2);
        let mut tb = TripletBuilder::new(4, 4);
        tb.add_block(0, 0, &a, 2.0);
        tb.add_block_transposed(2, 0, &CsrMatrix::from_triplets(2, 2, &[(0, 1, 5.0)]), 1.0);
        let m = tb.build();
        assert_eq!(m.get(3, 0), 5.0);
        assert_eq!(m.get(1, 1), 2.0);
        let s = a.add(1.0, &a, -1.0);
        assert_eq!(s.data, vec![0.0, 0.0]);
        assert!(m.dump().lines().count() == m.nnz() + 1);
    }
}
