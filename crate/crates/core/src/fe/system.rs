//! Sparse assembly of the reduced system `Tᵀ K T x = Tᵀ (f - K c)`.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use crate::fe::element::{self, Mat8};
use crate::fe::{BodyForce, DofMap, LoadCase, MacroLoad, MaterialTable};
use crate::mesh::QuadMesh;
use crate::Result;

const MAX_LOCAL: usize = 64;

/// Square sparse matrix in compressed row form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                scale = scale.max(v.abs());
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        if scale == 0.0 { 0.0 } else { worst / scale }
    }

    /// Upper triangle in row-compressed form: `(row_ptr, col_idx, values)`.
    pub(crate) fn upper(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        ptr.push(0);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if j >= i {
                    cols.push(j);
                    vals.push(v);
                }
            }
            ptr.push(cols.len());
        }
        (ptr, cols, vals)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

struct Builder {
    rows: Vec<Vec<(u32, f64)>>,
}

impl Builder {
    fn new(n: usize) -> Self {
        Self { rows: vec![Vec::new(); n] }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &mut self.rows[i];
        match row.iter_mut().find(|(c, _)| *c as usize == j) {
            Some((_, x)) => *x += v,
            None => row.push((j as u32, v)),
        }
    }

    fn finish(self) -> CsrMatrix {
        let n = self.rows.len();
        let nnz = self.rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for mut row in self.rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                col_idx.push(c as usize);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }
}

/// Reduced system with the map back to node dofs.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
}

/// Stiffness per phase; square Q4 stiffness does not depend on size.
pub(crate) fn phase_stiffness(mesh: &QuadMesh, materials: &MaterialTable) -> Result<BTreeMap<u32, Mat8>> {
    let mut cache = BTreeMap::new();
    for el in mesh.elements() {
        if let Entry::Vacant(slot) = cache.entry(el.phase) {
            slot.insert(element::square_stiffness(1.0, materials.stiffness(el.phase)?)?);
        }
    }
    Ok(cache)
}

/// Condensed stiffness with hanging dofs eliminated; dimension `mesh.ndof()`.
pub fn assemble(mesh: &QuadMesh, materials: &MaterialTable) -> Result<(CsrMatrix, DofMap)> {
    let dofs = DofMap::hanging_only(mesh);
    let (matrix, _) = assemble_with(mesh, materials, &dofs, None, None)?;
    Ok((matrix, dofs))
}

/// Builds the coupled system for one load case.
pub fn apply_coupling(mesh: &QuadMesh, materials: &MaterialTable, load: &LoadCase) -> Result<LinearSystem> {
    let dofs = DofMap::for_load(mesh, &load.macro_load)?;
    let tractions = match load.macro_load {
        MacroLoad::Neumann { stress } => Some(boundary_tractions(mesh, &stress)),
        _ => None,
    };
    let (matrix, rhs) = assemble_with(mesh, materials, &dofs, load.body_force.as_ref(), tractions.as_deref())?;
    Ok(LinearSystem { matrix, rhs, dofs })
}

fn assemble_with(
    mesh: &QuadMesh,
    materials: &MaterialTable,
    dofs: &DofMap,
    body: Option<&BodyForce>,
    nodal_loads: Option<&[f64]>,
) -> Result<(CsrMatrix, Vec<f64>)> {
    let stiffness = phase_stiffness(mesh, materials)?;
    let mut builder = Builder::new(dofs.unknowns());
    let mut rhs = vec![0.0; dofs.unknowns()];
    let nodes = mesh.nodes();
    let mut local: Vec<usize> = Vec::with_capacity(MAX_LOCAL);
    let mut t = [[0.0f64; MAX_LOCAL]; 8];
    for el in mesh.elements() {
        let ke = &stiffness[&el.phase];
        let node_dofs: [usize; 8] = std::array::from_fn(|a| 2 * el.corners[a / 2] + a % 2);
        local.clear();
        let mut c = [0.0; 8];
        for (a, &d) in node_dofs.iter().enumerate() {
            let (terms, offset) = dofs.expression(d);
            c[a] = offset;
            t[a] = [0.0; MAX_LOCAL];
            for &(k, w) in terms {
                let slot = match local.iter().position(|&u| u == k) {
                    Some(s) => s,
                    None => {
                        assert!(local.len() < MAX_LOCAL, "element couples to too many unknowns");
                        local.push(k);
                        local.len() - 1
                    }
                };
                t[a][slot] += w;
            }
        }
        let m = local.len();
        let mut fe = match body {
            Some(b) => element::square_body_load(nodes[el.corners[0]].position, el.side_length, &|x, y| b.eval(x, y)),
            None => [0.0; 8],
        };
        for a in 0..8 {
            fe[a] -= (0..8).map(|b| ke[(a, b)] * c[b]).sum::<f64>();
        }
        // Tᵀ K T and Tᵀ f on the local unknowns
        let mut kt = [[0.0f64; MAX_LOCAL]; 8];
        for a in 0..8 {
            for b in 0..8 {
                let kab = ke[(a, b)];
                if kab != 0.0 {
                    for j in 0..m {
                        kt[a][j] += kab * t[b][j];
                    }
                }
            }
        }
        for i in 0..m {
            let mut fi = 0.0;
            for a in 0..8 {
                fi += t[a][i] * fe[a];
            }
            rhs[local[i]] += fi;
            for j in 0..m {
                let mut v = 0.0;
                for a in 0..8 {
                    v += t[a][i] * kt[a][j];
                }
                if v != 0.0 {
                    builder.add(local[i], local[j], v);
                }
            }
        }
    }
    if let Some(f) = nodal_loads {
        for (d, &fd) in f.iter().enumerate() {
            if fd != 0.0 {
                let (terms, _) = dofs.expression(d);
                for &(k, w) in terms {
                    rhs[k] += w * fd;
                }
            }
        }
    }
    Ok((builder.finish(), rhs))
}

/// Consistent nodal forces of the uniform traction `Σ·n` on the domain boundary.
pub fn boundary_tractions(mesh: &QuadMesh, stress: &crate::Voigt) -> Vec<f64> {
    let w = mesh.grid().width();
    let nodes = mesh.nodes();
    let mut f = vec![0.0; 2 * nodes.len()];
    let traction = |nx: f64, ny: f64| [stress[0] * nx + stress[2] * ny, stress[2] * nx + stress[1] * ny];
    for el in mesh.elements() {
        let [a0, b0] = nodes[el.corners[0]].lattice;
        let s = el.pixel_span();
        let c = el.corners;
        let edges = [
            (b0 == 0, c[0], c[1], (0.0, -1.0)),
            (a0 + s == w, c[1], c[2], (1.0, 0.0)),
            (b0 + s == w, c[2], c[3], (0.0, 1.0)),
            (a0 == 0, c[3], c[0], (-1.0, 0.0)),
        ];
        for (on_boundary, p, q, (nx, ny)) in edges {
            if on_boundary {
                let t = traction(nx, ny);
                let half = 0.5 * el.side_length;
                for n in [p, q] {
                    f[2 * n] += t[0] * half;
                    f[2 * n + 1] += t[1] * half;
                }
            }
        }
    }
    f
}
