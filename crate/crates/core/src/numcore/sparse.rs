use alloc::vec;
use alloc::vec::Vec;

/// Row-compressed sparse matrix. Entries within a row are kept sorted by
/// column so iteration order (and therefore floating-point summation order)
/// is canonical.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new(n, n);
        for i in 0..n {
            m.rows[i].push((i, 1.0));
        }
        m
    }

    pub fn from_dense(n_rows: usize, n_cols: usize, data: &[f64]) -> Self {
        let mut m = Self::new(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let v = data[i * n_cols + j];
                if v != 0.0 {
                    m.rows[i].push((j, v));
                }
            }
        }
        m
    }

    /// Set entry `(i, j)`, replacing any previous value. Zero removes it.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(pos) if value == 0.0 => {
                row.remove(pos);
            }
            Ok(pos) => row[pos].1 = value,
            Err(_) if value == 0.0 => {}
            Err(pos) => row.insert(pos, (j, value)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map_or(0.0, |pos| self.rows[i][pos].1)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len() * self.n_cols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i * self.n_cols + j] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.n_cols, self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                t.rows[j].push((i, v));
            }
        }
        t
    }

    /// Scale every non-empty row to sum to one.
    pub fn row_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in &mut out.rows {
            let s: f64 = row.iter().map(|&(_, v)| v).sum();
            if s != 0.0 {
                for e in row.iter_mut() {
                    e.1 /= s;
                }
            }
        }
        out
    }

    /// Indices of rows without any entry.
    pub fn empty_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_empty())
            .map(|(i, _)| i)
            .collect()
    }

    /// Principal submatrix on `nodes` (rows and columns), re-indexed to
    /// positions within `nodes`. Entries pointing outside `nodes` are dropped.
    pub fn submatrix(&self, nodes: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n_cols.max(self.rows.len())];
        for (k, &v) in nodes.iter().enumerate() {
            pos[v] = k;
        }
        let mut out = Self::new(nodes.len(), nodes.len());
        for (k, &v) in nodes.iter().enumerate() {
            for &(j, w) in &self.rows[v] {
                if pos[j] != usize::MAX {
                    out.rows[k].push((pos[j], w));
                }
            }
            out.rows[k].sort_by_key(|&(c, _)| c);
        }
        out
    }

    /// Keep only entries `(i, j)` for which `keep(i, j)` holds.
    pub fn filtered(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = self.clone();
        for (i, row) in out.rows.iter_mut().enumerate() {
            row.retain(|&(j, _)| keep(i, j));
        }
        out
    }
}
