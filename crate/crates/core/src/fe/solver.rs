//! Linear solvers for the symmetric positive definite reduced system.

use faer::linalg::solvers::SolveCore;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::fe::CsrMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Sparse Cholesky factorization.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Largest system solved by factorization when no method is forced.
    pub direct_limit: usize,
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    pub method: Option<SolverMethod>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { direct_limit: 500_000, tolerance: 1e-10, max_iterations: None, method: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: SolverMethod,
    pub unknowns: usize,
    pub iterations: usize,
    /// Final `‖Ax - b‖ / ‖b‖`.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64], bnorm: f64) -> (Vec<f64>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let rel = norm(&r) / bnorm;
    (r, rel)
}

/// Solves `A x = b` and verifies the relative residual.
pub fn solve_linear(a: &CsrMatrix, b: &[f64], options: &SolverOptions) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.dim();
    let method = options.method.unwrap_or(if n <= options.direct_limit {
        SolverMethod::Direct
    } else {
        SolverMethod::ConjugateGradient
    });
    let bnorm = norm(b);
    if n == 0 || bnorm == 0.0 {
        return Ok((vec![0.0; n], SolveStats { method, unknowns: n, iterations: 0, residual: 0.0 }));
    }
    let (x, iterations) = match method {
        SolverMethod::Direct => direct(a, b, bnorm, options.tolerance)?,
        SolverMethod::ConjugateGradient => pcg(a, b, bnorm, options)?,
    };
    let (_, residual) = relative_residual(a, &x, b, bnorm);
    if !(residual <= options.tolerance) {
        return Err(Error::SolverBreakdown { residual, iterations });
    }
    Ok((x, SolveStats { method, unknowns: n, iterations, residual }))
}

fn direct(a: &CsrMatrix, b: &[f64], bnorm: f64, tolerance: f64) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    // row-compressed upper triangle read as column-compressed lower triangle
    let (ptr, idx, vals) = a.upper();
    let symbolic = SymbolicSparseColMat::new_checked(n, n, ptr, None, idx);
    let matrix = SparseColMat::new(symbolic, vals);
    let llt = matrix
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::SingularSystem(format!("Cholesky factorization failed: {e:?}")))?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut m = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        llt.solve_in_place_with_conj(Conj::No, m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect()
    };
    let mut x = solve(b);
    let mut steps = 1;
    // iterative refinement for badly scaled right-hand sides
    for _ in 0..3 {
        let (r, rel) = relative_residual(a, &x, b, bnorm);
        if rel <= tolerance {
            break;
        }
        let dx = solve(&r);
        x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        steps += 1;
    }
    Ok((x, steps))
}

fn pcg(a: &CsrMatrix, b: &[f64], bnorm: f64, options: &SolverOptions) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { f64::NAN })
        .collect();
    if inv_diag.iter().any(|d| d.is_nan()) {
        return Err(Error::SingularSystem("non-positive diagonal entry".into()));
    }
    let max_iter = options.max_iterations.unwrap_or(20 * n + 100);
    // aim a little below the acceptance threshold so the true residual passes
    let target = 0.1 * options.tolerance * bnorm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SingularSystem("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= target {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = norm(&r) / bnorm;
    Err(Error::SolverBreakdown { residual, iterations: max_iter })
}
