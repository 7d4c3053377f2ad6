//! Energy-norm error estimation, true errors against reference solutions
//! and effectivity indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fe::element::{shape, GAUSS_2X2};
use crate::fe::fields::{dot, mat_vec, strain_at};
use crate::fe::{MaterialTable, QuadraturePointField, Solution};
use crate::mesh::QuadMesh;
use crate::recovery::{RecoveredNodalField, Sample, Scheme};
use crate::{Error, Result};

/// Tolerance for negative error integrals caused by rounding.
pub const NEGATIVE_TOLERANCE: f64 = 1e-14;

/// Estimated error of one recovery scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub scheme: Scheme,
    /// `sqrt(Σ_e s_e)`.
    pub total: f64,
    /// Signed element integrals `s_e = ∫ (σ* - σh) : (ε* - εh)`.
    pub element_squared: Vec<f64>,
    /// Number of elements with `s_e < 0`. These arise when the recovered
    /// stress and strain are not related by the element's own stiffness.
    pub indefinite_elements: usize,
}

impl ErrorEstimate {
    /// `sqrt(max(s_e, 0))` per element.
    pub fn element_errors(&self) -> Vec<f64> {
        self.element_squared.iter().map(|&s| s.max(0.0).sqrt()).collect()
    }
}

/// Recovered stress/strain seen by element `e` at its corners.
fn recovered_corners(mesh: &QuadMesh, recovered: &RecoveredNodalField, e: usize) -> Result<[Sample; 4]> {
    let el = &mesh.elements()[e];
    let mut out = [[0.0; 6]; 4];
    for (c, &n) in el.corners.iter().enumerate() {
        out[c] = recovered
            .value_for(n, el.phase)
            .ok_or(Error::UnresolvablePatch { node: n })?
            .sample();
    }
    Ok(out)
}

/// Elementwise `Σ_i ω_i det J (σ* - σh):(ε* - εh)` with the recovered
/// fields interpolated bilinearly from each element's own-phase nodal values.
pub fn estimate_error(
    mesh: &QuadMesh,
    field: &QuadraturePointField,
    recovered: &RecoveredNodalField,
) -> Result<ErrorEstimate> {
    let nfun: [[f64; 4]; 4] = GAUSS_2X2.map(|[xi, eta]| shape(xi, eta));
    let mut element_squared = Vec::with_capacity(mesh.elements().len());
    for e in 0..mesh.elements().len() {
        let corners = recovered_corners(mesh, recovered, e)?;
        let mut s = 0.0;
        for (i, g) in field.element(e).iter().enumerate() {
            let star: Sample = std::array::from_fn(|k| (0..4).map(|c| nfun[i][c] * corners[c][k]).sum());
            let ds = [star[0] - g.stress[0], star[1] - g.stress[1], star[2] - g.stress[2]];
            let de = [star[3] - g.strain[0], star[4] - g.strain[1], star[5] - g.strain[2]];
            s += g.weight * g.det_j * dot(&ds, &de);
        }
        element_squared.push(s);
    }
    let sum: f64 = element_squared.iter().sum();
    let scale: f64 = element_squared.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    if sum < -NEGATIVE_TOLERANCE * scale {
        return Err(Error::NegativeIntegral(sum));
    }
    let indefinite_elements = element_squared.iter().filter(|&&s| s < 0.0).count();
    Ok(ErrorEstimate { scheme: recovered.scheme(), total: sum.max(0.0).sqrt(), element_squared, indefinite_elements })
}

/// Energy-norm distance between a coarse solution and a solution on a
/// nested, finer mesh of the same domain.
///
/// Each reference Gauss point is mapped to the coarse pixel containing it,
/// then to the coarse element owning that pixel, where the coarse strain is
/// evaluated at the point's local coordinates.
pub fn compute_true_error(coarse: &Solution<'_>, reference: &Solution<'_>, materials: &MaterialTable) -> Result<f64> {
    Ok(true_error_squared(coarse, reference, materials)?.sqrt())
}

fn true_error_squared(coarse: &Solution<'_>, reference: &Solution<'_>, materials: &MaterialTable) -> Result<f64> {
    let (cm, rm) = (coarse.mesh, reference.mesh);
    let (cg, rg) = (cm.grid(), rm.grid());
    if (cg.physical_size() - rg.physical_size()).abs() > 1e-12 * cg.physical_size() {
        return Err(Error::GeometryMismatch("domains differ in size".into()));
    }
    let (cw, rw) = (cg.width(), rg.width());
    if rw < cw || rw % cw != 0 {
        return Err(Error::GeometryMismatch(format!("reference width {rw} is not a multiple of {cw}")));
    }
    let r = rw / cw;
    let h = cg.pixel_size();
    let nodes = cm.nodes();
    let mut sum = 0.0;
    for (e, rel) in rm.elements().iter().enumerate() {
        let [pi, pj] = rel.pixel_origin();
        if cg.phase(pi / r, pj / r) != rel.phase {
            return Err(Error::GeometryMismatch(format!("phase differs at reference pixel ({pi}, {pj})")));
        }
        let d = materials.stiffness(rel.phase)?;
        for g in reference.field.element(e) {
            let col = ((g.position[0] / h) as usize).min(cw - 1);
            let row = ((g.position[1] / h) as usize).min(cw - 1);
            let ce = cm.element_of_pixel(row, col);
            let el = &cm.elements()[ce];
            let o = nodes[el.corners[0]].position;
            let xi = 2.0 * (g.position[0] - o[0]) / el.side_length - 1.0;
            let eta = 2.0 * (g.position[1] - o[1]) / el.side_length - 1.0;
            if xi.abs() > 1.0 + 1e-12 || eta.abs() > 1.0 + 1e-12 {
                return Err(Error::GeometryMismatch(format!("point {:?} outside element {ce}", g.position)));
            }
            let eps_c = strain_at(cm, &coarse.displacement, ce, xi, eta);
            let de = [g.strain[0] - eps_c[0], g.strain[1] - eps_c[1], g.strain[2] - eps_c[2]];
            sum += g.weight * g.det_j * dot(&mat_vec(d, &de), &de);
        }
    }
    Ok(sum)
}

/// Uniformly refined pixel mesh used as reference for true errors.
pub fn reference_mesh(mesh: &QuadMesh, factor: usize) -> Result<QuadMesh> {
    Ok(QuadMesh::uniform(mesh.grid().refine(factor)?))
}

/// `estimated / true`.
pub fn effectivity_index(estimated: f64, true_error: f64) -> Result<f64> {
    if true_error == 0.0 {
        return Err(Error::ZeroTrueError);
    }
    Ok(estimated / true_error)
}

/// Element error divided by the element energy norm `sqrt(∫ σh:εh)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub ratios: Vec<f64>,
    /// Elements with zero energy, reported with ratio 0.
    pub zero_energy: Vec<usize>,
}

pub fn relative_element_errors(estimate: &ErrorEstimate, field: &QuadraturePointField) -> RelativeErrors {
    let mut zero_energy = Vec::new();
    let ratios = estimate
        .element_errors()
        .into_iter()
        .enumerate()
        .map(|(e, err)| {
            let energy = field.element_energy(e);
            if energy > 0.0 {
                err / energy.sqrt()
            } else {
                zero_energy.push(e);
                0.0
            }
        })
        .collect();
    RelativeErrors { ratios, zero_energy }
}

/// Totals for one mesh: estimated errors per scheme, optional true error
/// and effectivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub ndof: usize,
    pub reduction_factor: f64,
    pub total_estimated: BTreeMap<Scheme, f64>,
    pub total_true: Option<f64>,
    pub effectivity: BTreeMap<Scheme, f64>,
}

impl ErrorReport {
    pub fn new(mesh: &QuadMesh, estimates: &[ErrorEstimate], total_true: Option<f64>) -> Self {
        let uniform_ndof = 2 * (mesh.grid().width() + 1).pow(2);
        let total_estimated: BTreeMap<Scheme, f64> = estimates.iter().map(|e| (e.scheme, e.total)).collect();
        let effectivity = match total_true {
            Some(t) if t > 0.0 => total_estimated.iter().map(|(&s, &v)| (s, v / t)).collect(),
            _ => BTreeMap::new(),
        };
        Self {
            ndof: mesh.ndof(),
            reduction_factor: mesh.ndof() as f64 / uniform_ndof as f64,
            total_estimated,
            total_true,
            effectivity,
        }
    }
}
