//! Compressed sparse row matrices and the normalised propagation operator.

use ndarray::{Array2, ArrayView2, Axis};

use crate::graph::Graph;

/// Row-major compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Keeps the non-zero entries of a dense matrix.
    pub fn from_dense(m: ArrayView2<'_, f64>) -> Self {
        let mut indptr = Vec::with_capacity(m.nrows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in m.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr {
            n_rows: m.nrows(),
            n_cols: m.ncols(),
            indptr,
            indices,
            values,
        }
    }

    /// Builds from per-row `(column, value)` lists; columns must be sorted within a row.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &rows {
            for &(j, v) in row {
                debug_assert!(j < n_cols);
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Csr {
            n_rows: rows.len(),
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                out[[i, j]] = v;
            }
        }
        out
    }

    /// `self * rhs`.
    pub fn dot(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, rhs.nrows(), "sparse-dense product shape mismatch");
        let mut out = Array2::zeros((self.n_rows, rhs.ncols()));
        for (i, mut out_row) in out.axis_iter_mut(Axis(0)).enumerate() {
            for (j, v) in self.row(i) {
                out_row.scaled_add(v, &rhs.row(j));
            }
        }
        out
    }

    /// `self^T * rhs` without materialising the transpose.
    pub fn t_dot(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, rhs.nrows(), "sparse-dense product shape mismatch");
        let mut out = Array2::zeros((self.n_cols, rhs.ncols()));
        for i in 0..self.n_rows {
            let src = rhs.row(i);
            for (j, v) in self.row(i) {
                out.row_mut(j).scaled_add(v, &src);
            }
        }
        out
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationOperator {
    matrix: Csr,
}

impl PropagationOperator {
    pub fn matrix(&self) -> &Csr {
        &self.matrix
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.n_rows
    }

    pub fn apply(&self, h: ArrayView2<'_, f64>) -> Array2<f64> {
        self.matrix.dot(h)
    }
}

pub fn normalized_adjacency(g: &Graph) -> PropagationOperator {
    let n = g.n_nodes();
    let deg: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let weight = |i: usize, j: usize| 1.0 / (deg[i] * deg[j]).sqrt();
    let rows = (0..n)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = g.neighbors(i).iter().map(|&j| (j, weight(i, j))).collect();
            let at = row.partition_point(|&(j, _)| j < i);
            row.insert(at, (i, weight(i, i)));
            row
        })
        .collect();
    PropagationOperator {
        matrix: Csr::from_rows(n, rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Cyclic Jacobi eigenvalue iteration, only for small symmetric test matrices.
    fn symmetric_eigenvalues(mut a: Array2<f64>) -> Vec<f64> {
        let n = a.nrows();
        for _ in 0..100 {
            let mut off = 0.0;
            for p in 0..n {
                for q in p + 1..n {
                    off += a[[p, q]] * a[[p, q]];
                }
            }
            if off < 1e-22 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[[p, q]].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[[k, p]], a[[k, q]]);
                        a[[k, p]] = c * akp - s * akq;
                        a[[k, q]] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                        a[[p, k]] = c * apk - s * aqk;
                        a[[q, k]] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[[i, i]]).collect()
    }

    #[test]
    fn single_edge_is_all_halves() {
        let g = Graph::structural(2, [(0, 1)]).unwrap();
        let m = normalized_adjacency(&g).matrix().to_dense();
        assert_eq!(m, array![[0.5, 0.5], [0.5, 0.5]]);
    }

    #[test]
    fn isolated_node_gets_unit_self_loop() {
        let g = Graph::structural(1, []).unwrap();
        assert_eq!(normalized_adjacency(&g).matrix().to_dense(), array![[1.0]]);
    }

    #[test]
    fn symmetric_bounded_spectrum() {
        let g = Graph::structural(7, [(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (5, 3), (1, 2)]).unwrap();
        let m = normalized_adjacency(&g).matrix().to_dense();
        assert_eq!(m, m.t());
        assert!(m.iter().all(|&v| (0.0..=1.0).contains(&v)));
        for ev in symmetric_eigenvalues(m) {
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ev), "eigenvalue {ev}");
        }
    }

    #[test]
    fn row_sums_are_one_on_regular_graphs() {
        let cycle = Graph::structural(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        let m = normalized_adjacency(&cycle).matrix().to_dense();
        for s in m.sum_axis(Axis(1)) {
            assert!((s - 1.0).abs() < 1e-15);
        }
        let star = Graph::structural(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let m = normalized_adjacency(&star).matrix().to_dense();
        assert!((m.row(0).sum() - 1.0).abs() > 1e-3);
    }

    #[test]
    fn sparse_products_match_dense() {
        let dense = array![[0.0, 2.0, 0.0], [1.0, 0.0, -3.0]];
        let csr = Csr::from_dense(dense.view());
        assert_eq!(csr.nnz(), 3);
        let rhs = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(csr.dot(rhs.view()), dense.dot(&rhs));
        let rhs2 = array![[1.0], [-1.0]];
        assert_eq!(csr.t_dot(rhs2.view()), dense.t().dot(&rhs2));
        assert_eq!(csr.get(1, 2), -3.0);
        assert_eq!(csr.get(0, 0), 0.0);
    }
}
