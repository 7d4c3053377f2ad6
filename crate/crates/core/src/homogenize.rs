//! Apparent elasticity tensors of a microstructure sample.
//!
//! Tensors are 3x3 Voigt matrices mapping `[εxx, εyy, γxy]` to
//! `[σxx, σyy, σxy]`, so the third load case is a unit engineering shear.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::fe::{self, Coupling, LoadCase, MacroLoad, MaterialTable};
use crate::grid::PhaseGrid;
use crate::mesh::QuadMesh;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElasticityTensor2D {
    pub matrix: [[f64; 3]; 3],
    pub coupling: Coupling,
    /// Coarsening step of the mesh it was computed on, if known.
    pub step: Option<usize>,
    /// `max |M - Mᵀ| / max |M|` before symmetrization.
    pub asymmetry: f64,
}

impl ElasticityTensor2D {
    pub fn as_matrix(&self) -> Matrix3<f64> {
        to_matrix(&self.matrix)
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = Some(step);
        self
    }
}

fn to_matrix(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)]))
}

/// Solves the three unit load cases of `coupling` and returns the
/// symmetrized apparent stiffness.
pub fn homogenized_tensor(mesh: &QuadMesh, materials: &MaterialTable, coupling: Coupling) -> Result<ElasticityTensor2D> {
    let mut columns = Matrix3::zeros();
    for k in 0..3 {
        let sol = fe::solve(mesh, materials, &LoadCase::new(MacroLoad::unit(coupling, k)))?;
        let mean = match coupling {
            Coupling::Neumann => sol.field.average_strain(),
            _ => sol.field.average_stress(),
        };
        for i in 0..3 {
            columns[(i, k)] = mean[i];
        }
    }
    let raw = match coupling {
        Coupling::Neumann => columns
            .try_inverse()
            .ok_or_else(|| Error::SingularSystem("apparent compliance is singular".into()))?,
        _ => columns,
    };
    let scale = raw.abs().max();
    let asymmetry = if scale > 0.0 { (raw - raw.transpose()).abs().max() / scale } else { 0.0 };
    let sym = 0.5 * (raw + raw.transpose());
    if sym.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(ElasticityTensor2D { matrix: to_array(&sym), coupling, step: None, asymmetry })
}

/// Volume-weighted arithmetic mean of the phase stiffnesses.
pub fn voigt_bound(grid: &PhaseGrid, materials: &MaterialTable) -> Result<Matrix3<f64>> {
    let mut sum = Matrix3::zeros();
    for (phase, f) in grid.volume_fractions() {
        sum += materials.stiffness(phase)? * f;
    }
    Ok(sum)
}

/// Volume-weighted harmonic mean of the phase stiffnesses.
pub fn reuss_bound(grid: &PhaseGrid, materials: &MaterialTable) -> Result<Matrix3<f64>> {
    let mut sum = Matrix3::zeros();
    for (phase, f) in grid.volume_fractions() {
        let s = materials.stiffness(phase)?.try_inverse().ok_or(Error::NotPositiveDefinite)?;
        sum += s * f;
    }
    sum.try_inverse().ok_or(Error::NotPositiveDefinite)
}

/// `a ⪯ b`: the smallest eigenvalue of `b - a` is at least
/// `-tol · max |b|`.
pub fn psd_leq(a: &Matrix3<f64>, b: &Matrix3<f64>, tol: f64) -> bool {
    let diff = b - a;
    let sym = 0.5 * (diff + diff.transpose());
    SymmetricEigen::new(sym).eigenvalues.min() >= -tol * b.abs().max()
}

/// Per-step coefficient ratios to the step-0 tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub coupling: Coupling,
    pub tensors: Vec<ElasticityTensor2D>,
    /// `ratios[k][i][j] = A_k[i][j] / A_0[i][j]`; `None` where the step-0
    /// coefficient vanishes.
    pub ratios: Vec<[[Option<f64>; 3]; 3]>,
}

impl Sensitivity {
    /// Largest `|ratio - 1|` over all steps and defined coefficients.
    pub fn max_deviation(&self) -> f64 {
        self.ratios
            .iter()
            .flat_map(|r| r.iter().flatten().flatten())
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Relative size below which a step-0 coefficient counts as zero.
const ZERO_COEFFICIENT: f64 = 1e-10;

pub fn coarsening_sensitivity(meshes: &[QuadMesh], materials: &MaterialTable, coupling: Coupling) -> Result<Sensitivity> {
    let tensors = meshes
        .iter()
        .enumerate()
        .map(|(k, m)| homogenized_tensor(m, materials, coupling).map(|t| t.with_step(k)))
        .collect::<Result<Vec<_>>>()?;
    let base = tensors.first().map(|t| t.matrix).unwrap_or_default();
    let scale = base.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratios = tensors
        .iter()
        .map(|t| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    (base[i][j].abs() > ZERO_COEFFICIENT * scale).then(|| t.matrix[i][j] / base[i][j])
                })
            })
        })
        .collect();
    Ok(Sensitivity { coupling, tensors, ratios })
}
