use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Mat, Side};
use rayon::prelude::*;

use crate::geometry::Mesh;
use crate::{Error, Result};

/// Symmetric positive definite P1 system over the free vertices of a mesh.
///
/// The sparsity pattern and symbolic Cholesky factorization are built once;
/// coefficient matrices are reassembled into the same value layout.
#[derive(Clone, Debug)]
pub struct SpdSystem {
    dof: Vec<Option<usize>>,
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Value slot of each lower-triangle local pair `(a, b)`, `a >= b` in dof order.
    scatter: Vec<[Option<usize>; 9]>,
    symbolic: SymbolicLlt<usize>,
}

pub struct Factor {
    llt: Llt<usize, f64>,
}

impl Factor {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }
}

impl SpdSystem {
    pub fn new(mesh: &Mesh, free: impl Fn(usize) -> bool) -> Result<Self> {
        let mut dof = vec![None; mesh.n_vertices()];
        let mut n = 0;
        for (v, d) in dof.iter_mut().enumerate() {
            if free(v) {
                *d = Some(n);
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::SolveFailure("no free vertices".into()));
        }
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, d) in dof.iter().enumerate() {
            let _ = i;
            if let Some(d) = d {
                cols[*d].push(*d);
            }
        }
        for tri in &mesh.triangles {
            for a in 0..3 {
                for b in 0..3 {
                    if let (Some(r), Some(c)) = (dof[tri[a]], dof[tri[b]]) {
                        if r > c {
                            cols[c].push(r);
                        }
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            row_idx.extend_from_slice(c);
            col_ptr.push(row_idx.len());
        }
        let slot = |r: usize, c: usize| -> usize {
            let s = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + s.binary_search(&r).expect("pattern entry")
        };
        let scatter = mesh
            .triangles
            .iter()
            .map(|tri| {
                let mut out = [None; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        if let (Some(r), Some(c)) = (dof[tri[a]], dof[tri[b]]) {
                            if r >= c {
                                out[3 * a + b] = Some(slot(r, c));
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr.clone(), None, row_idx.clone());
        let symbolic = SymbolicLlt::try_new(sym.as_ref(), Side::Lower)
            .map_err(|e| Error::SolveFailure(format!("symbolic factorization: {e:?}")))?;
        Ok(Self { dof, n, col_ptr, row_idx, scatter, symbolic })
    }

    pub fn n_dofs(&self) -> usize {
        self.n
    }

    pub fn dof(&self, v: usize) -> Option<usize> {
        self.dof[v]
    }

    pub fn dofs(&self) -> &[Option<usize>] {
        &self.dof
    }

    /// Lower-triangle values of `K_ab = sum_T |T| grad(l_a) . A_T grad(l_b)`.
    pub fn assemble(&self, mesh: &Mesh, coef: impl Fn(usize) -> [[f64; 2]; 2] + Sync) -> Vec<f64> {
        let local: Vec<[f64; 9]> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| element_matrix(mesh, t, &coef(t)))
            .collect();
        let mut values = vec![0.0; self.row_idx.len()];
        for (t, k) in local.iter().enumerate() {
            for (e, s) in self.scatter[t].iter().enumerate() {
                if let Some(s) = s {
                    values[*s] += k[e];
                }
            }
        }
        values
    }

    pub fn factor(&self, values: &[f64]) -> Result<Factor> {
        let sym = unsafe {
            faer::sparse::SymbolicSparseColMatRef::new_unchecked(self.n, self.n, &self.col_ptr, None, &self.row_idx)
        };
        let mat = SparseColMatRef::new(sym, values);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::SolveFailure(format!("Cholesky factorization: {e:?}")))?;
        Ok(Factor { llt })
    }

    /// `y = K x` using the lower-triangle storage.
    pub fn apply(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                y[r] += values[k] * x[c];
                if r != c {
                    y[c] += values[k] * x[r];
                }
            }
        }
        y
    }
}

/// Local 3x3 matrix `|T| grad(l_a) . A grad(l_b)`, row-major.
pub fn element_matrix(mesh: &Mesh, t: usize, a: &[[f64; 2]; 2]) -> [f64; 9] {
    let g = mesh.basis_gradients(t);
    let area = mesh.area(t);
    let mut k = [0.0; 9];
    for i in 0..3 {
        let ag = [a[0][0] * g[i][0] + a[0][1] * g[i][1], a[1][0] * g[i][0] + a[1][1] * g[i][1]];
        for j in 0..3 {
            k[3 * j + i] = area * (ag[0] * g[j][0] + ag[1] * g[j][1]);
        }
    }
    k
}
