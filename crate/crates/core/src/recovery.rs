//! Nodal stress and strain recovery.
//!
//! Three schemes are provided:
//!
//! * [`spr_standard`]: superconvergent patch recovery over all elements
//!   around a node, regardless of phase.
//! * [`spr_modified`]: the same fit restricted to the elements of one phase,
//!   giving one value per phase at interface nodes.
//! * [`averaging_recovery`]: elementwise extrapolation of the Gauss values to
//!   the corners followed by per-phase nodal averaging.

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::fe::element::{shape, GAUSS_2X2};
use crate::fe::QuadraturePointField;
use crate::mesh::QuadMesh;
use crate::{Error, Result, Voigt};

/// Stress components followed by strain components.
pub type Sample = [f64; 6];

/// Maximum number of breadth-first layers added when growing a patch.
pub const MAX_EXPANSION_LAYERS: usize = 3;

/// Relative eigenvalue threshold below which a normal matrix is singular.
pub const SINGULARITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    StandardSpr,
    ModifiedSpr,
    Averaging,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::StandardSpr, Scheme::ModifiedSpr, Scheme::Averaging];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StandardSpr => "standard_spr",
            Scheme::ModifiedSpr => "modified_spr",
            Scheme::Averaging => "averaging",
        }
    }

    pub fn recover(self, mesh: &QuadMesh, field: &QuadraturePointField) -> Result<RecoveredNodalField> {
        match self {
            Scheme::StandardSpr => spr_standard(mesh, field),
            Scheme::ModifiedSpr => spr_modified(mesh, field),
            Scheme::Averaging => averaging_recovery(mesh, field),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard_spr" | "standard" | "spr" => Ok(Self::StandardSpr),
            "modified_spr" | "modified" => Ok(Self::ModifiedSpr),
            "averaging" => Ok(Self::Averaging),
            other => Err(Error::Parse(format!("unknown recovery scheme '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Monomial {
    One,
    X,
    Y,
    XY,
}

impl Monomial {
    fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            Monomial::One => 1.0,
            Monomial::X => x,
            Monomial::Y => y,
            Monomial::XY => x * y,
        }
    }
}

pub const FULL_BASIS: [Monomial; 4] = [Monomial::One, Monomial::X, Monomial::Y, Monomial::XY];

/// Bases tried in order when a fit is singular or under-sampled.
pub const REDUCTION_ORDER: [&[Monomial]; 5] = [
    &FULL_BASIS,
    &[Monomial::One, Monomial::X, Monomial::Y],
    &[Monomial::One, Monomial::X],
    &[Monomial::One, Monomial::Y],
    &[Monomial::One],
];

/// Least-squares polynomial fit of `N` components over a patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBasis<const N: usize> {
    terms: Vec<Monomial>,
    center: [f64; 2],
    scale: f64,
    coefficients: Vec<[f64; N]>,
}

impl<const N: usize> PatchBasis<N> {
    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; N] {
        let (x, y) = ((p[0] - self.center[0]) / self.scale, (p[1] - self.center[1]) / self.scale);
        let mut out = [0.0; N];
        for (t, a) in self.terms.iter().zip(&self.coefficients) {
            let v = t.eval(x, y);
            for k in 0..N {
                out[k] += a[k] * v;
            }
        }
        out
    }

    /// Least-squares functional `Σ |P a - s|²` summed over components.
    pub fn residual(&self, samples: &[([f64; 2], [f64; N])]) -> f64 {
        samples
            .iter()
            .map(|(p, s)| {
                let v = self.eval(*p);
                (0..N).map(|k| (v[k] - s[k]).powi(2)).sum::<f64>()
            })
            .sum()
    }
}

/// Solves the normal equations `A a = b` for the given terms.
pub fn fit_patch<const N: usize>(samples: &[([f64; 2], [f64; N])], terms: &[Monomial]) -> Result<PatchBasis<N>> {
    let m = terms.len();
    let singular = || Error::SingularPatch { samples: samples.len(), terms: m };
    if samples.len() < m || m == 0 {
        return Err(singular());
    }
    let inv_n = 1.0 / samples.len() as f64;
    let center = [
        samples.iter().map(|(p, _)| p[0]).sum::<f64>() * inv_n,
        samples.iter().map(|(p, _)| p[1]).sum::<f64>() * inv_n,
    ];
    let scale = samples
        .iter()
        .map(|(p, _)| (p[0] - center[0]).abs().max((p[1] - center[1]).abs()))
        .fold(0.0, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DMatrix::<f64>::zeros(m, N);
    for (p, s) in samples {
        let (x, y) = ((p[0] - center[0]) / scale, (p[1] - center[1]) / scale);
        let row: Vec<f64> = terms.iter().map(|t| t.eval(x, y)).collect();
        for i in 0..m {
            for j in 0..m {
                a[(i, j)] += row[i] * row[j];
            }
            for k in 0..N {
                b[(i, k)] += row[i] * s[k];
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let max = eig.max();
    if !(max > 0.0) || eig.min() < SINGULARITY_TOLERANCE * max {
        return Err(singular());
    }
    let chol = a.cholesky().ok_or_else(singular)?;
    let coeffs = chol.solve(&b);
    let coefficients = (0..m).map(|i| std::array::from_fn(|k| coeffs[(i, k)])).collect();
    Ok(PatchBasis { terms: terms.to_vec(), center, scale, coefficients })
}

/// Fits with the first basis in [`REDUCTION_ORDER`] that is well posed.
pub fn fit_reduced<const N: usize>(samples: &[([f64; 2], [f64; N])]) -> Result<PatchBasis<N>> {
    REDUCTION_ORDER
        .iter()
        .find_map(|terms| fit_patch(samples, terms).ok())
        .ok_or(Error::SingularPatch { samples: samples.len(), terms: 1 })
}

/// Element-centre sample: the mean of the four Gauss values, which equals
/// the bilinear Gauss-point interpolant at the centroid.
pub fn superconvergent_samples(mesh: &QuadMesh, field: &QuadraturePointField) -> Vec<([f64; 2], Sample)> {
    mesh.elements()
        .iter()
        .map(|el| {
            let gps = field.element(el.id);
            let mut s = [0.0; 6];
            for g in gps {
                for k in 0..3 {
                    s[k] += 0.25 * g.stress[k];
                    s[k + 3] += 0.25 * g.strain[k];
                }
            }
            (el.center(mesh.nodes()), s)
        })
        .collect()
}

/// Recovered value attached to a node; `phase` is `None` for phase-blind
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodalValue {
    pub phase: Option<u32>,
    pub stress: Voigt,
    pub strain: Voigt,
}

impl NodalValue {
    fn from_sample(phase: Option<u32>, s: Sample) -> Self {
        Self { phase, stress: [s[0], s[1], s[2]], strain: [s[3], s[4], s[5]] }
    }

    pub fn sample(&self) -> Sample {
        let (a, b) = (self.stress, self.strain);
        [a[0], a[1], a[2], b[0], b[1], b[2]]
    }
}

/// Recovered nodal values, one or more per node.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredNodalField {
    scheme: Scheme,
    ptr: Vec<usize>,
    values: Vec<NodalValue>,
}

impl RecoveredNodalField {
    fn from_nodes(scheme: Scheme, per_node: Vec<Vec<NodalValue>>) -> Self {
        let mut ptr = Vec::with_capacity(per_node.len() + 1);
        ptr.push(0);
        let mut values = Vec::new();
        for v in per_node {
            values.extend(v);
            ptr.push(values.len());
        }
        Self { scheme, ptr, values }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn node_count(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn values_at(&self, node: usize) -> &[NodalValue] {
        &self.values[self.ptr[node]..self.ptr[node + 1]]
    }

    /// Value seen from an element of `phase`: the phase-blind value if the
    /// node has one, otherwise the value stored for that phase.
    pub fn value_for(&self, node: usize, phase: u32) -> Option<&NodalValue> {
        let vals = self.values_at(node);
        vals.iter().find(|v| v.phase.is_none()).or_else(|| vals.iter().find(|v| v.phase == Some(phase)))
    }
}

struct PatchContext<'a> {
    mesh: &'a QuadMesh,
    samples: Vec<([f64; 2], Sample)>,
}

impl PatchContext<'_> {
    fn fit_at(&self, elements: &[usize], node: usize) -> Result<Sample> {
        let pts: Vec<([f64; 2], Sample)> = elements.iter().map(|&e| self.samples[e]).collect();
        let basis = fit_reduced(&pts).map_err(|_| Error::UnresolvablePatch { node })?;
        Ok(basis.eval(self.mesh.nodes()[node].position))
    }

    fn full_fit_ok(&self, elements: &[usize]) -> bool {
        let pts: Vec<([f64; 2], Sample)> = elements.iter().map(|&e| self.samples[e]).collect();
        fit_patch(&pts, &FULL_BASIS).is_ok()
    }

    /// Value at `node` when its own patch may not support the full basis:
    /// the mean of the full fits of neighbouring nodes whose whole patch
    /// passes `keep`, each evaluated at `node`. Falls back to growing the
    /// patch when no such neighbour exists.
    fn recover_deficient(&self, node: usize, patch: Vec<usize>, keep: impl Fn(usize) -> bool) -> Result<Sample> {
        if self.full_fit_ok(&patch) {
            return self.fit_at(&patch, node);
        }
        let mut neighbours: Vec<usize> =
            patch.iter().flat_map(|&e| self.mesh.element_nodes(e).iter().copied()).collect();
        neighbours.sort_unstable();
        neighbours.dedup();
        let mut sum = [0.0; 6];
        let mut count = 0usize;
        for m in neighbours {
            if m == node || self.mesh.nodes()[m].is_hanging() {
                continue;
            }
            let inner = self.mesh.node_elements(m);
            if !inner.iter().all(|&k| keep(k)) || !self.full_fit_ok(inner) {
                continue;
            }
            let v = self.fit_at(inner, node)?;
            sum.iter_mut().zip(v).for_each(|(s, v)| *s += v);
            count += 1;
        }
        if count > 0 {
            return Ok(sum.map(|s| s / count as f64));
        }
        let grown = self.expand(patch, keep);
        self.fit_at(&grown, node)
    }

    /// Adds vertex-adjacent elements passing `keep`, layer by layer, until
    /// the full basis is well posed or nothing new is reachable.
    fn expand(&self, mut patch: Vec<usize>, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut seen = vec![false; self.mesh.elements().len()];
        patch.iter().for_each(|&e| seen[e] = true);
        let mut frontier: VecDeque<usize> = patch.iter().copied().collect();
        for _ in 0..MAX_EXPANSION_LAYERS {
            if self.full_fit_ok(&patch) {
                break;
            }
            let mut next = VecDeque::new();
            while let Some(e) = frontier.pop_front() {
                for &n in self.mesh.element_nodes(e) {
                    for &k in self.mesh.node_elements(n) {
                        if !seen[k] && keep(k) {
                            seen[k] = true;
                            next.push_back(k);
                        }
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            let mut layer: Vec<usize> = next.iter().copied().collect();
            layer.sort_unstable();
            patch.extend(layer);
            frontier = next;
        }
        patch
    }
}

/// Phase-blind superconvergent patch recovery.
pub fn spr_standard(mesh: &QuadMesh, field: &QuadraturePointField) -> Result<RecoveredNodalField> {
    let ctx = PatchContext { mesh, samples: superconvergent_samples(mesh, field) };
    let per_node = mesh
        .nodes()
        .iter()
        .map(|node| {
            let patch = mesh.node_elements(node.id).to_vec();
            let value = if mesh.is_domain_boundary(node.id) {
                ctx.recover_deficient(node.id, patch, |_| true)?
            } else {
                ctx.fit_at(&patch, node.id)?
            };
            Ok(vec![NodalValue::from_sample(None, value)])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveredNodalField::from_nodes(Scheme::StandardSpr, per_node))
}

/// Patch recovery with patches restricted to one phase; interface nodes
/// receive one value per incident phase.
pub fn spr_modified(mesh: &QuadMesh, field: &QuadraturePointField) -> Result<RecoveredNodalField> {
    let ctx = PatchContext { mesh, samples: superconvergent_samples(mesh, field) };
    let elements = mesh.elements();
    let per_node = mesh
        .nodes()
        .iter()
        .map(|node| {
            mesh.node_phases(node.id)
                .into_iter()
                .map(|phase| {
                    let patch: Vec<usize> =
                        mesh.node_elements(node.id).iter().copied().filter(|&e| elements[e].phase == phase).collect();
                    let value = if node.is_hanging() {
                        ctx.fit_at(&patch, node.id)?
                    } else {
                        ctx.recover_deficient(node.id, patch, |k| elements[k].phase == phase)?
                    };
                    Ok(NodalValue::from_sample(Some(phase), value))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveredNodalField::from_nodes(Scheme::ModifiedSpr, per_node))
}

/// Inverse of the matrix `N[i][c] = N_c(ξ_i)` mapping corner values to
/// the 2x2 Gauss-point values.
fn gauss_to_corner() -> [[f64; 4]; 4] {
    let n = DMatrix::from_fn(4, 4, |i, c| shape(GAUSS_2X2[i][0], GAUSS_2X2[i][1])[c]);
    let inv = n.try_inverse().expect("Gauss shape matrix is invertible");
    std::array::from_fn(|c| std::array::from_fn(|i| inv[(c, i)]))
}

/// Corner values of element `e` extrapolated from its Gauss points.
pub fn element_corner_values(field: &QuadraturePointField, e: usize) -> [Sample; 4] {
    let m = gauss_to_corner();
    let gps = field.element(e);
    std::array::from_fn(|c| {
        let mut v = [0.0; 6];
        for (i, g) in gps.iter().enumerate() {
            for k in 0..3 {
                v[k] += m[c][i] * g.stress[k];
                v[k + 3] += m[c][i] * g.strain[k];
            }
        }
        v
    })
}

/// Bilinear interpolation of corner values at reference `(ξ, η)`.
pub fn interpolate_corners(corners: &[Sample; 4], xi: f64, eta: f64) -> Sample {
    let n = shape(xi, eta);
    std::array::from_fn(|k| (0..4).map(|c| n[c] * corners[c][k]).sum())
}

/// Elementwise extrapolation and per-phase nodal averaging.
pub fn averaging_recovery(mesh: &QuadMesh, field: &QuadraturePointField) -> Result<RecoveredNodalField> {
    let nodes = mesh.nodes();
    let corner_values: Vec<[Sample; 4]> = (0..mesh.elements().len()).map(|e| element_corner_values(field, e)).collect();
    let per_node = nodes
        .iter()
        .map(|node| {
            let incident = mesh.node_elements(node.id);
            mesh.node_phases(node.id)
                .into_iter()
                .map(|phase| {
                    let mut sum = [0.0; 6];
                    let mut count = 0.0;
                    for &e in incident {
                        let el = &mesh.elements()[e];
                        if el.phase != phase {
                            continue;
                        }
                        let v = match el.corners.iter().position(|&c| c == node.id) {
                            Some(c) => corner_values[e][c],
                            None => {
                                let o = nodes[el.corners[0]].position;
                                let xi = 2.0 * (node.position[0] - o[0]) / el.side_length - 1.0;
                                let eta = 2.0 * (node.position[1] - o[1]) / el.side_length - 1.0;
                                interpolate_corners(&corner_values[e], xi, eta)
                            }
                        };
                        for k in 0..6 {
                            sum[k] += v[k];
                        }
                        count += 1.0;
                    }
                    Ok(NodalValue::from_sample(Some(phase), sum.map(|s| s / count)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveredNodalField::from_nodes(Scheme::Averaging, per_node))
}
