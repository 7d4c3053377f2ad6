//! Plane-strain linear elasticity on quadtree meshes.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::grid::PhaseGrid;
use crate::mesh::QuadMesh;
use crate::{Error, Result, Voigt};

pub mod dofs;
pub mod element;
pub mod fields;
pub mod solver;
pub mod system;

pub use dofs::DofMap;
pub use fields::{DisplacementField, GaussPoint, QuadraturePointField};
pub use solver::{SolveStats, SolverMethod, SolverOptions};
pub use system::{CsrMatrix, LinearSystem};

/// Isotropic linear-elastic constituent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
}

impl Material {
    pub fn new(young: f64, poisson: f64) -> Result<Self> {
        if !(young > 0.0) || !young.is_finite() {
            return Err(Error::InvalidMaterial { phase: None, reason: format!("Young's modulus {young} must be positive") });
        }
        if !(0.0..0.5).contains(&poisson) {
            return Err(Error::InvalidMaterial { phase: None, reason: format!("Poisson ratio {poisson} outside [0, 0.5)") });
        }
        Ok(Self { young, poisson })
    }

    /// Plane-strain Voigt stiffness with engineering shear.
    pub fn stiffness(&self) -> Matrix3<f64> {
        let (e, nu) = (self.young, self.poisson);
        let c = e / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Matrix3::new(
            c * (1.0 - nu), c * nu, 0.0,
            c * nu, c * (1.0 - nu), 0.0,
            0.0, 0.0, c * (1.0 - 2.0 * nu) / 2.0,
        )
    }
}

/// Material per phase id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaterialTable {
    entries: BTreeMap<u32, (Material, Matrix3<f64>)>,
}

impl MaterialTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, phase: u32, material: Material) -> &mut Self {
        self.entries.insert(phase, (material, material.stiffness()));
        self
    }

    /// Builds a table from `(phase, E, ν)` triples.
    pub fn from_constants(items: impl IntoIterator<Item = (u32, f64, f64)>) -> Result<Self> {
        let mut table = Self::new();
        for (phase, young, poisson) in items {
            let m = Material::new(young, poisson).map_err(|e| match e {
                Error::InvalidMaterial { reason, .. } => Error::InvalidMaterial { phase: Some(phase), reason },
                other => other,
            })?;
            table.insert(phase, m);
        }
        Ok(table)
    }

    pub fn material(&self, phase: u32) -> Result<&Material> {
        self.entries.get(&phase).map(|(m, _)| m).ok_or(Error::MissingMaterial(phase))
    }

    pub fn stiffness(&self, phase: u32) -> Result<&Matrix3<f64>> {
        self.entries.get(&phase).map(|(_, d)| d).ok_or(Error::MissingMaterial(phase))
    }

    pub fn phases(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.keys().copied()
    }

    /// Errors unless every phase of `grid` has a material.
    pub fn check_covers(&self, grid: &PhaseGrid) -> Result<()> {
        grid.phases().into_iter().try_for_each(|p| self.material(p).map(|_| ()))
    }
}

/// Boundary coupling kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// Kinematically uniform boundary conditions.
    Dirichlet,
    Periodic,
    Neumann,
}

impl Coupling {
    pub const ALL: [Coupling; 3] = [Coupling::Dirichlet, Coupling::Periodic, Coupling::Neumann];

    pub fn name(self) -> &'static str {
        match self {
            Coupling::Dirichlet => "dirichlet",
            Coupling::Periodic => "periodic",
            Coupling::Neumann => "neumann",
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" | "kubc" => Ok(Self::Dirichlet),
            "periodic" => Ok(Self::Periodic),
            "neumann" => Ok(Self::Neumann),
            other => Err(Error::Parse(format!("unknown coupling '{other}'"))),
        }
    }
}

/// Prescribed macroscopic state. Strains use engineering shear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MacroLoad {
    Dirichlet { strain: Voigt },
    Periodic { strain: Voigt },
    Neumann { stress: Voigt },
}

impl MacroLoad {
    pub fn new(coupling: Coupling, value: Voigt) -> Self {
        match coupling {
            Coupling::Dirichlet => Self::Dirichlet { strain: value },
            Coupling::Periodic => Self::Periodic { strain: value },
            Coupling::Neumann => Self::Neumann { stress: value },
        }
    }

    /// Unit strain (or stress, for Neumann) in Voigt component `k`.
    pub fn unit(coupling: Coupling, k: usize) -> Self {
        let mut v = [0.0; 3];
        v[k] = 1.0;
        Self::new(coupling, v)
    }

    pub fn coupling(&self) -> Coupling {
        match self {
            Self::Dirichlet { .. } => Coupling::Dirichlet,
            Self::Periodic { .. } => Coupling::Periodic,
            Self::Neumann { .. } => Coupling::Neumann,
        }
    }

    pub fn value(&self) -> Voigt {
        match *self {
            Self::Dirichlet { strain } | Self::Periodic { strain } => strain,
            Self::Neumann { stress } => stress,
        }
    }
}

/// Volume force density `b(x, y)`.
#[derive(Clone)]
pub struct BodyForce(Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>);

impl BodyForce {
    pub fn new(f: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        (self.0)(x, y)
    }
}

impl fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BodyForce(..)")
    }
}

#[derive(Debug, Clone)]
pub struct LoadCase {
    pub macro_load: MacroLoad,
    pub body_force: Option<BodyForce>,
}

impl LoadCase {
    pub fn new(macro_load: MacroLoad) -> Self {
        Self { macro_load, body_force: None }
    }

    pub fn with_body_force(mut self, force: BodyForce) -> Self {
        self.body_force = Some(force);
        self
    }
}

impl From<MacroLoad> for LoadCase {
    fn from(m: MacroLoad) -> Self {
        Self::new(m)
    }
}

/// Displacements and Gauss-point fields of one solve.
#[derive(Debug, Clone)]
pub struct Solution<'m> {
    pub mesh: &'m QuadMesh,
    pub displacement: DisplacementField,
    pub field: QuadraturePointField,
    pub stats: SolveStats,
}

/// Assembles, couples and solves one load case.
pub fn solve<'m>(mesh: &'m QuadMesh, materials: &MaterialTable, load: &LoadCase) -> Result<Solution<'m>> {
    solve_with(mesh, materials, load, &SolverOptions::default())
}

pub fn solve_with<'m>(
    mesh: &'m QuadMesh,
    materials: &MaterialTable,
    load: &LoadCase,
    options: &SolverOptions,
) -> Result<Solution<'m>> {
    let system = system::apply_coupling(mesh, materials, load)?;
    let (x, stats) = solver::solve_linear(&system.matrix, &system.rhs, options)?;
    let displacement = DisplacementField::from_dofs(&system.dofs.expand(&x));
    let field = fields::stresses_at_quadrature(mesh, &displacement, materials)?;
    Ok(Solution { mesh, displacement, field, stats })
}

/// `[[exx, gxy/2], [gxy/2, eyy]] · (dx, dy)`.
pub(crate) fn strain_times(strain: &Voigt, dx: f64, dy: f64) -> [f64; 2] {
    [strain[0] * dx + 0.5 * strain[2] * dy, 0.5 * strain[2] * dx + strain[1] * dy]
}
