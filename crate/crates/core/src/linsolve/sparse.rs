//! Scalar CSR matrix.

use std::sync::Mutex;

use super::SolverError;
use crate::team::{static_chunk, ThreadTeam};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// explicit zeros are kept as structural entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SolverError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SolverError::Structure(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(SolverError::Structure(format!("non-finite entry at ({i}, {j})")));
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (j, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Dense input with a symmetrized pattern: `(i, j)` is stored whenever
    /// either `a[i][j]` or `a[j][i]` is nonzero.
    pub fn from_dense(a: &[Vec<f64>]) -> Result<Self, SolverError> {
        let n = a.len();
        let mut t = Vec::new();
        for i in 0..n {
            if a[i].len() != n {
                return Err(SolverError::Structure("dense matrix is not square".into()));
            }
            for j in 0..n {
                if a[i][j] != 0.0 || a[j][i] != 0.0 || i == j {
                    t.push((i, j, a[i][j]));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let cols = &self.col_idx[lo..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| self.find(j, i).is_some()))
    }

    /// Replaces the matrix by its transpose by swapping `(i, j)` with `(j, i)`.
    pub fn transpose_in_place(&mut self) -> Result<(), SolverError> {
        if !self.is_structurally_symmetric() {
            return Err(SolverError::Structure(
                "in-place transpose needs a structurally symmetric pattern".into(),
            ));
        }
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j > i {
                    let kt = self.find(j, i).expect("checked symmetric");
                    self.values.swap(k, kt);
                }
            }
        }
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_rows(x, y, 0);
    }

    fn matvec_rows(&self, x: &[f64], y: &mut [f64], first_row: usize) {
        for (r, yi) in y.iter_mut().enumerate() {
            let i = first_row + r;
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// Row-partitioned product on `threads` members of `team`.
    pub fn matvec_par(&self, x: &[f64], y: &mut [f64], team: &ThreadTeam, threads: usize) {
        if threads <= 1 {
            return self.matvec(x, y);
        }
        let mut parts = Vec::with_capacity(threads);
        let mut rest = y;
        for t in 0..threads {
            let len = static_chunk(self.n, t, threads).len();
            let (head, tail) = rest.split_at_mut(len);
            parts.push(Mutex::new(head));
            rest = tail;
        }
        team.run(threads, &|t| {
            let first = static_chunk(self.n, t, threads).start;
            let mut part = parts[t].lock().expect("matvec chunk poisoned");
            self.matvec_rows(x, &mut part, first);
        });
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_permutes_values() {
        let mut a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        assert_eq!(a.nnz(), 4);
        a.transpose_in_place().unwrap();
        assert_eq!(a.to_dense(), vec![vec![2.0, 0.0], vec![1.0, 3.0]]);
    }

    #[test]
    fn nonsymmetric_pattern_rejected() {
        let mut a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]).unwrap();
        assert!(a.transpose_in_place().is_err());
    }

    #[test]
    fn duplicates_sum() {
        let a = CsrMatrix::from_triplets(1, &[(0, 0, 1.0), (0, 0, 2.5)]).unwrap();
        assert_eq!(a.get(0, 0), 3.5);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn parallel_matvec_matches_serial() {
        let n = 37;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, &t).unwrap();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut y1 = vec![0.0; n];
        let mut y2 = vec![0.0; n];
        a.matvec(&x, &mut y1);
        let team = ThreadTeam::new();
        a.matvec_par(&x, &mut y2, &team, 3);
        assert_eq!(y1, y2);
    }
}
