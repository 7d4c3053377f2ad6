//! Nodal displacements and Gauss-point stresses and strains.

use crate::fe::element::{self, GAUSS_2X2};
use crate::fe::MaterialTable;
use crate::mesh::QuadMesh;
use crate::{Result, Voigt};

/// Per-node displacement `[u_x, u_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    values: Vec<[f64; 2]>,
}

impl DisplacementField {
    pub fn new(values: Vec<[f64; 2]>) -> Self {
        Self { values }
    }

    /// From interleaved node dofs `[ux0, uy0, ux1, ...]`.
    pub fn from_dofs(dofs: &[f64]) -> Self {
        Self { values: dofs.chunks_exact(2).map(|c| [c[0], c[1]]).collect() }
    }

    /// Samples a displacement function at every node; hanging nodes are
    /// then set to the mean of their masters.
    pub fn from_fn(mesh: &QuadMesh, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut values: Vec<[f64; 2]> = mesh.nodes().iter().map(|n| f(n.position[0], n.position[1])).collect();
        // masters may hang themselves; constraints of coarser edges resolve first
        let mut order: Vec<_> = mesh.constraints().to_vec();
        order.sort_by_key(|c| {
            let [p, q] = c.masters.map(|m| mesh.nodes()[m].lattice);
            std::cmp::Reverse(p[0].abs_diff(q[0]) + p[1].abs_diff(q[1]))
        });
        for c in order {
            let [a, b] = c.masters.map(|m| values[m]);
            values[c.node] = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        }
        Self { values }
    }

    pub fn node(&self, n: usize) -> [f64; 2] {
        self.values[n]
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Corner displacements of element `e` in dof order.
    pub fn element_vector(&self, mesh: &QuadMesh, e: usize) -> [f64; 8] {
        let corners = mesh.elements()[e].corners;
        std::array::from_fn(|a| self.values[corners[a / 2]][a % 2])
    }
}

/// Strain, stress and integration data at one Gauss point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussPoint {
    pub position: [f64; 2],
    pub weight: f64,
    pub det_j: f64,
    pub strain: Voigt,
    pub stress: Voigt,
}

/// Four Gauss points per element, ordered like [`GAUSS_2X2`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePointField {
    points: Vec<[GaussPoint; 4]>,
}

impl QuadraturePointField {
    pub fn new(points: Vec<[GaussPoint; 4]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn element(&self, e: usize) -> &[GaussPoint; 4] {
        &self.points[e]
    }

    pub fn elements(&self) -> &[[GaussPoint; 4]] {
        &self.points
    }

    fn integrate(&self, f: impl Fn(&GaussPoint) -> f64) -> f64 {
        self.points.iter().flatten().map(|g| g.weight * g.det_j * f(g)).sum()
    }

    pub fn volume(&self) -> f64 {
        self.integrate(|_| 1.0)
    }

    pub fn average_stress(&self) -> Voigt {
        let v = self.volume();
        std::array::from_fn(|k| self.integrate(|g| g.stress[k]) / v)
    }

    pub fn average_strain(&self) -> Voigt {
        let v = self.volume();
        std::array::from_fn(|k| self.integrate(|g| g.strain[k]) / v)
    }

    /// `∫ σ : ε` over element `e`.
    pub fn element_energy(&self, e: usize) -> f64 {
        self.points[e].iter().map(|g| g.weight * g.det_j * dot(&g.stress, &g.strain)).sum()
    }

    /// `∫ σ : ε` over the domain (twice the strain energy).
    pub fn energy(&self) -> f64 {
        self.integrate(|g| dot(&g.stress, &g.strain))
    }
}

/// `σ : ε` with engineering shear strain.
pub fn dot(a: &Voigt, b: &Voigt) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn mat_vec(d: &nalgebra::Matrix3<f64>, v: &Voigt) -> Voigt {
    std::array::from_fn(|i| d[(i, 0)] * v[0] + d[(i, 1)] * v[1] + d[(i, 2)] * v[2])
}

/// Strain of element `e` at reference coordinates `(ξ, η)`.
pub fn strain_at(mesh: &QuadMesh, u: &DisplacementField, e: usize, xi: f64, eta: f64) -> Voigt {
    let el = &mesh.elements()[e];
    let b = element::square_b(xi, eta, el.side_length);
    let ue = u.element_vector(mesh, e);
    std::array::from_fn(|i| (0..8).map(|a| b[(i, a)] * ue[a]).sum())
}

/// `ε = B u_e` and `σ = D ε` at the 2x2 Gauss points of every element.
pub fn stresses_at_quadrature(
    mesh: &QuadMesh,
    u: &DisplacementField,
    materials: &MaterialTable,
) -> Result<QuadraturePointField> {
    let nodes = mesh.nodes();
    let points = mesh
        .elements()
        .iter()
        .map(|el| {
            let d = materials.stiffness(el.phase)?;
            let origin = nodes[el.corners[0]].position;
            let half = 0.5 * el.side_length;
            let det_j = half * half;
            Ok(GAUSS_2X2.map(|[xi, eta]| {
                let strain = strain_at(mesh, u, el.id, xi, eta);
                GaussPoint {
                    position: [origin[0] + half * (xi + 1.0), origin[1] + half * (eta + 1.0)],
                    weight: 1.0,
                    det_j,
                    strain,
                    stress: mat_vec(d, &strain),
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuadraturePointField { points })
}
