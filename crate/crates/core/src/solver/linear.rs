//! Sparse direct solves (LU from `faer`) with residual checking.

use std::sync::Once;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use crate::assembly::CsrMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT: usize = 5;

static SEQUENTIAL: Once = Once::new();

/// Factorizations run single-threaded so results do not depend on the
/// thread count.
fn init_parallelism() {
    SEQUENTIAL.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn to_csc(m: &CsrMatrix) -> SparseColMat<usize, f64> {
    let mut col_ptr = vec![0usize; m.ncols + 1];
    for &j in &m.indices {
        col_ptr[j + 1] += 1;
    }
    for j in 0..m.ncols {
        col_ptr[j + 1] += col_ptr[j];
    }
    let mut next = col_ptr.clone();
    let mut row_idx = vec![0usize; m.nnz()];
    let mut val = vec![0.0; m.nnz()];
    for i in 0..m.nrows {
        for k in m.indptr[i]..m.indptr[i + 1] {
            let j = m.indices[k];
            row_idx[next[j]] = i;
            val[next[j]] = m.data[k];
            next[j] += 1;
        }
    }
    let sym = SymbolicSparseColMat::new_checked(m.nrows, m.ncols, col_ptr, None, row_idx);
    SparseColMat::new(sym, val)
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest absolute row sum.
fn matrix_norm_inf(m: &CsrMatrix) -> f64 {
    (0..m.nrows)
        .map(|i| m.data[m.indptr[i]..m.indptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Power-of-two row then column scalings bringing every row and column
/// maximum close to one. Blocks of very different magnitude (elasticity
/// against storage terms) otherwise cost several digits in the pivots.
fn equilibrate(m: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let pow2 = |v: f64| if v > 0.0 { (-v.log2().round()).exp2() } else { 1.0 };
    let row: Vec<f64> = (0..m.nrows)
        .map(|i| pow2(m.data[m.indptr[i]..m.indptr[i + 1]].iter().fold(0.0, |a: f64, v| a.max(v.abs()))))
        .collect();
    let mut cmax = vec![0.0f64; m.ncols];
    for i in 0..m.nrows {
        for k in m.indptr[i]..m.indptr[i + 1] {
            let j = m.indices[k];
            cmax[j] = cmax[j].max((m.data[k] * row[i]).abs());
        }
    }
    (row, cmax.into_iter().map(pow2).collect())
}

/// Reuses the symbolic analysis while the sparsity pattern is unchanged.
#[derive(Default)]
pub struct SymbolicCache {
    pattern: Option<(Vec<usize>, Vec<usize>)>,
    symbolic: Option<SymbolicLu<usize>>,
}

impl SymbolicCache {
    pub fn new() -> Self {
        Self::default()
    }
}

/// A numeric LU factorization together with the matrix it came from.
pub struct LuFactor {
    lu: Lu<usize, f64>,
    matrix: CsrMatrix,
    norm_a: f64,
    norm_scaled: f64,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    pub tolerance: f64,
}

impl LuFactor {
    pub fn new(matrix: &CsrMatrix, tolerance: f64, cache: Option<&mut SymbolicCache>) -> Result<Self> {
        init_parallelism();
        if matrix.nrows != matrix.ncols {
            return Err(Error::Solver(format!(
                "matrix is not square ({}x{})",
                matrix.nrows, matrix.ncols
            )));
        }
        if let Some(i) = matrix.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Solver(format!("matrix entry {i} is not finite")));
        }
        let (row_scale, col_scale) = equilibrate(matrix);
        let mut scaled = matrix.clone();
        for i in 0..scaled.nrows {
            for k in scaled.indptr[i]..scaled.indptr[i + 1] {
                scaled.data[k] *= row_scale[i] * col_scale[scaled.indices[k]];
            }
        }
        let norm_scaled = matrix_norm_inf(&scaled);
        let csc = to_csc(&scaled);
        let fail = |e: &dyn std::fmt::Debug| Error::Solver(format!("LU factorization failed: {e:?}"));
        let symbolic = match cache {
            Some(c) => {
                let same = c
                    .pattern
                    .as_ref()
                    .is_some_and(|(p, i)| *p == matrix.indptr && *i == matrix.indices);
                if !same || c.symbolic.is_none() {
                    c.symbolic = Some(SymbolicLu::try_new(csc.symbolic()).map_err(|e| fail(&e))?);
                    c.pattern = Some((matrix.indptr.clone(), matrix.indices.clone()));
                }
                c.symbolic.clone().expect("set above")
            }
            None => SymbolicLu::try_new(csc.symbolic()).map_err(|e| fail(&e))?,
        };
        let lu = Lu::try_new_with_symbolic(symbolic, csc.as_ref()).map_err(|e| fail(&e))?;
        Ok(LuFactor {
            lu,
            matrix: matrix.clone(),
            norm_a: matrix_norm_inf(matrix),
            norm_scaled,
            row_scale,
            col_scale,
            tolerance,
        })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i] * self.row_scale[i]);
        let x = self.lu.solve(&b);
        (0..rhs.len()).map(|i| x[(i, 0)] * self.col_scale[i]).collect()
    }

    /// Solves with iterative refinement until the normwise backward error
    /// `‖Ax − b‖ / (‖A‖‖x‖ + ‖b‖)` (max norms) is at most `tol`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.matrix.nrows {
            return Err(Error::Contract(format!(
                "right-hand side length {} does not match matrix size {}",
                rhs.len(),
                self.matrix.nrows
            )));
        }
        let bnorm = norm_inf(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let mut x = self.raw_solve(rhs);
        let mut rel = f64::INFINITY;
        for _ in 0..=MAX_REFINEMENT {
            let ax = self.matrix.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm_inf(&r) / (self.norm_a * norm_inf(&x) + bnorm);
            if !rel.is_finite() {
                break;
            }
            if rel <= self.tolerance {
                // ‖A‖‖x‖/‖b‖ on the equilibrated system bounds its condition
                // number from below; past 1/ε the backward error means nothing.
                let sx = norm_inf(&x.iter().zip(&self.col_scale).map(|(v, c)| v / c).collect::<Vec<_>>());
                let sb = norm_inf(&rhs.iter().zip(&self.row_scale).map(|(v, r)| v * r).collect::<Vec<_>>());
                if self.norm_scaled * sx / sb > 1.0 / f64::EPSILON {
                    return Err(Error::Solver(format!(
                        "matrix is numerically singular (condition estimate above 1/eps, n = {})",
                        self.matrix.nrows
                    )));
                }
                return Ok(x);
            }
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        Err(Error::Solver(format!(
            "backward error {rel:.3e} above tolerance {:.1e} after {MAX_REFINEMENT} refinement steps (n = {}); the matrix is singular or severely ill-conditioned",
            self.tolerance, self.matrix.nrows
        )))
    }
}

/// One-shot solve.
pub fn solve_csr(matrix: &CsrMatrix, rhs: &[f64], tolerance: f64) -> Result<Vec<f64>> {
    LuFactor::new(matrix, tolerance, None)?.solve(rhs)
}

pub fn solve_system(system: &crate::assembly::SparseSystem, tolerance: f64) -> Result<Vec<f64>> {
    solve_csr(&system.matrix, &system.rhs, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_csr(&CsrMatrix::identity(3), &b, 1e-12).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let x = solve_csr(&m, &[3.0, 3.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                t.push((i, j, v));
            }
        }
        let m = CsrMatrix::from_triplets(n, n, &t);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = solve_csr(&m, &b, 1e-10).unwrap();
        let r: Vec<f64> = m.matvec(&x).iter().zip(&b).map(|(a, b)| a - b).collect();
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(l2(&r) / l2(&b) <= 1e-10);
    }

    #[test]
    fn singular_matrix_reported() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(solve_csr(&m, &[1.0, 0.0], 1e-10), Err(Error::Solver(_))));
    }

    #[test]
    fn symbolic_reuse() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
        let b = a.scaled(3.0);
        let mut cache = SymbolicCache::new();
        let fa = LuFactor::new(&a, 1e-12, Some(&mut cache)).unwrap();
        let fb = LuFactor::new(&b, 1e-12, Some(&mut cache)).unwrap();
        let xa = fa.solve(&[3.0, 3.0]).unwrap();
        let xb = fb.solve(&[3.0, 3.0]).unwrap();
        assert!((xa[0] - 3.0 * xb[0]).abs() < 1e-14);
    }
}
