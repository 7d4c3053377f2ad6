//! Quadtree meshes over a [`PhaseGrid`] and the three marking criteria.
//!
//! Every element is an axis-aligned square covering a `2^level x 2^level`
//! block of pixels whose origin is a multiple of the block size, anchored at
//! pixel `(0, 0)`. Nodes live on the integer lattice of pixel corners, so a
//! node is identified by its lattice coordinates `(a, b)` = (column, row).
//!
//! A node lying strictly inside an element edge is *hanging*. Its masters are
//! the end points of the smallest dyadic sub-interval of that edge having the
//! node as midpoint, so the hanging position is always the mean of its two
//! masters. With one hanging node per edge the masters are simply the edge
//! end points; deeper chains (possible with [`mark_basic`]) resolve
//! recursively.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::PhaseGrid;
use crate::{Error, Result};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Free,
    Hanging { masters: [usize; 2] },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshNode {
    pub id: usize,
    /// Lattice coordinates `(a, b)`: column and row of the pixel corner.
    pub lattice: [usize; 2],
    pub position: [f64; 2],
    pub kind: NodeKind,
}

impl MeshNode {
    pub fn is_hanging(&self) -> bool {
        matches!(self.kind, NodeKind::Hanging { .. })
    }

    pub fn masters(&self) -> Option<[usize; 2]> {
        match self.kind {
            NodeKind::Hanging { masters } => Some(masters),
            NodeKind::Free => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadElement {
    pub id: usize,
    /// Corner node ids, counterclockwise from the bottom-left corner.
    pub corners: [usize; 4],
    pub level: u32,
    /// Block coordinates `(row, col)` at this element's level.
    pub block: [usize; 2],
    pub side_length: f64,
    pub phase: u32,
}

impl QuadElement {
    /// Side length in pixels.
    pub fn pixel_span(&self) -> usize {
        1 << self.level
    }

    /// Bottom-left covered pixel `(row, col)`.
    pub fn pixel_origin(&self) -> [usize; 2] {
        [self.block[0] << self.level, self.block[1] << self.level]
    }

    pub fn center(&self, nodes: &[MeshNode]) -> [f64; 2] {
        let p0 = nodes[self.corners[0]].position;
        let half = 0.5 * self.side_length;
        [p0[0] + half, p0[1] + half]
    }

    pub fn area(&self) -> f64 {
        self.side_length * self.side_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HangingConstraint {
    pub node: usize,
    pub masters: [usize; 2],
}

/// Conforming quadtree mesh with hanging-node constraints.
#[derive(Debug, Clone)]
pub struct QuadMesh {
    grid: Arc<PhaseGrid>,
    nodes: Vec<MeshNode>,
    elements: Vec<QuadElement>,
    constraints: Vec<HangingConstraint>,
    lattice: Vec<u32>,
    pixel_owner: Vec<u32>,
    elem_node_ptr: Vec<usize>,
    elem_nodes: Vec<usize>,
    node_elem_ptr: Vec<usize>,
    node_elems: Vec<usize>,
    ndof: usize,
}

/// Quadtree block: `(level, block_row, block_col)`.
type Block = (u32, usize, usize);

impl QuadMesh {
    /// One level-0 element per pixel.
    pub fn uniform(grid: impl Into<Arc<PhaseGrid>>) -> Self {
        let grid = grid.into();
        let n = grid.width();
        let blocks = (0..n).flat_map(|i| (0..n).map(move |j| (0, i, j))).collect();
        Self::from_blocks(grid, blocks).expect("uniform blocks are always valid")
    }

    fn from_blocks(grid: Arc<PhaseGrid>, mut blocks: Vec<Block>) -> Result<Self> {
        let w = grid.width();
        let lw = w + 1;
        let h = grid.pixel_size();
        blocks.sort_unstable_by_key(|&(l, bi, bj)| (bi << l, bj << l, l));

        let mut pixel_owner = vec![NONE; w * w];
        let mut phases = Vec::with_capacity(blocks.len());
        for (e, &(l, bi, bj)) in blocks.iter().enumerate() {
            let s = 1usize << l;
            let (r0, c0) = (bi * s, bj * s);
            if r0 + s > w || c0 + s > w {
                return Err(Error::GeometryMismatch(format!("block {:?} exceeds the grid", (l, bi, bj))));
            }
            let phase = grid.phase(r0, c0);
            for r in r0..r0 + s {
                for c in c0..c0 + s {
                    let owner = &mut pixel_owner[r * w + c];
                    if *owner != NONE {
                        return Err(Error::GeometryMismatch(format!("pixel ({r}, {c}) covered twice")));
                    }
                    if grid.phase(r, c) != phase {
                        return Err(Error::GeometryMismatch(format!(
                            "block {:?} mixes phases",
                            (l, bi, bj)
                        )));
                    }
                    *owner = e as u32;
                }
            }
            phases.push(phase);
        }
        if pixel_owner.contains(&NONE) {
            return Err(Error::GeometryMismatch("blocks do not cover the grid".into()));
        }

        // corner lattice points
        let mut lattice = vec![NONE; lw * lw];
        for &(l, bi, bj) in &blocks {
            let s = 1usize << l;
            let (b0, a0) = (bi * s, bj * s);
            for (a, b) in [(a0, b0), (a0 + s, b0), (a0 + s, b0 + s), (a0, b0 + s)] {
                lattice[b * lw + a] = 0;
            }
        }
        let mut nodes = Vec::new();
        for b in 0..lw {
            for a in 0..lw {
                let slot = &mut lattice[b * lw + a];
                if *slot != NONE {
                    *slot = nodes.len() as u32;
                    nodes.push(MeshNode {
                        id: nodes.len(),
                        lattice: [a, b],
                        position: [a as f64 * h, b as f64 * h],
                        kind: NodeKind::Free,
                    });
                }
            }
        }

        let node_at = |a: usize, b: usize| -> Option<usize> {
            let v = lattice[b * lw + a];
            (v != NONE).then_some(v as usize)
        };

        let mut elements = Vec::with_capacity(blocks.len());
        let mut elem_node_ptr = vec![0];
        let mut elem_nodes = Vec::with_capacity(4 * blocks.len());
        let mut constraints = Vec::new();
        for (e, &(l, bi, bj)) in blocks.iter().enumerate() {
            let s = 1usize << l;
            let (b0, a0) = (bi * s, bj * s);
            let corners = [
                node_at(a0, b0).unwrap(),
                node_at(a0 + s, b0).unwrap(),
                node_at(a0 + s, b0 + s).unwrap(),
                node_at(a0, b0 + s).unwrap(),
            ];
            elem_nodes.extend_from_slice(&corners);
            // edges as (start, unit step) in lattice coordinates
            let edges = [((a0, b0), (1, 0)), ((a0, b0 + s), (1, 0)), ((a0, b0), (0, 1)), ((a0 + s, b0), (0, 1))];
            for ((sa, sb), (da, db)) in edges {
                let at = |t: usize| (sa + da * t, sb + db * t);
                for t in 1..s {
                    let (a, b) = at(t);
                    if let Some(n) = node_at(a, b) {
                        let v = t.trailing_zeros();
                        let lo = (t >> (v + 1)) << (v + 1);
                        let hi = lo + (2usize << v);
                        let (la, lb) = at(lo);
                        let (ha, hb) = at(hi);
                        let masters = [
                            node_at(la, lb).expect("dyadic master must exist"),
                            node_at(ha, hb).expect("dyadic master must exist"),
                        ];
                        nodes[n].kind = NodeKind::Hanging { masters };
                        constraints.push(HangingConstraint { node: n, masters });
                        elem_nodes.push(n);
                    }
                }
            }
            elem_node_ptr.push(elem_nodes.len());
            elements.push(QuadElement {
                id: e,
                corners,
                level: l,
                block: [bi, bj],
                side_length: s as f64 * h,
                phase: phases[e],
            });
        }
        constraints.sort_unstable_by_key(|c| c.node);

        // node -> elements (closure adjacency)
        let mut counts = vec![0usize; nodes.len() + 1];
        for &n in &elem_nodes {
            counts[n + 1] += 1;
        }
        for i in 0..nodes.len() {
            counts[i + 1] += counts[i];
        }
        let node_elem_ptr = counts.clone();
        let mut fill = counts;
        let mut node_elems = vec![0; elem_nodes.len()];
        for e in 0..elements.len() {
            for &n in &elem_nodes[elem_node_ptr[e]..elem_node_ptr[e + 1]] {
                node_elems[fill[n]] = e;
                fill[n] += 1;
            }
        }

        let ndof = 2 * (nodes.len() - constraints.len());
        Ok(Self {
            grid,
            nodes,
            elements,
            constraints,
            lattice,
            pixel_owner,
            elem_node_ptr,
            elem_nodes,
            node_elem_ptr,
            node_elems,
            ndof,
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<PhaseGrid> {
        Arc::clone(&self.grid)
    }

    pub fn nodes(&self) -> &[MeshNode] {
        &self.nodes
    }

    pub fn elements(&self) -> &[QuadElement] {
        &self.elements
    }

    pub fn constraints(&self) -> &[HangingConstraint] {
        &self.constraints
    }

    /// Unconstrained displacement dofs before boundary conditions.
    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn free_node_count(&self) -> usize {
        self.nodes.len() - self.constraints.len()
    }

    /// All nodes on the closed boundary of element `e`: the four corners
    /// followed by any hanging nodes on its edges.
    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.elem_nodes[self.elem_node_ptr[e]..self.elem_node_ptr[e + 1]]
    }

    /// Elements whose closure contains node `n`.
    pub fn node_elements(&self, n: usize) -> &[usize] {
        &self.node_elems[self.node_elem_ptr[n]..self.node_elem_ptr[n + 1]]
    }

    pub fn node_at_lattice(&self, a: usize, b: usize) -> Option<usize> {
        let lw = self.grid.width() + 1;
        if a >= lw || b >= lw {
            return None;
        }
        let v = self.lattice[b * lw + a];
        (v != NONE).then_some(v as usize)
    }

    /// Element covering pixel `(row, col)`.
    pub fn element_of_pixel(&self, row: usize, col: usize) -> usize {
        self.pixel_owner[row * self.grid.width() + col] as usize
    }

    pub fn is_domain_boundary(&self, n: usize) -> bool {
        let [a, b] = self.nodes[n].lattice;
        let w = self.grid.width();
        a == 0 || b == 0 || a == w || b == w
    }

    /// A node is a phase-boundary node iff the pixels touching it carry at
    /// least two distinct phases.
    pub fn phase_boundary_nodes(&self) -> Vec<bool> {
        let w = self.grid.width();
        self.nodes
            .iter()
            .map(|node| {
                let [a, b] = node.lattice;
                let mut first = None;
                for i in b.saturating_sub(1)..(b + 1).min(w) {
                    for j in a.saturating_sub(1)..(a + 1).min(w) {
                        let p = self.grid.phase(i, j);
                        match first {
                            None => first = Some(p),
                            Some(q) if q != p => return true,
                            _ => {}
                        }
                    }
                }
                false
            })
            .collect()
    }

    /// Hanging nodes and their masters.
    pub fn constrained_nodes(&self) -> Vec<bool> {
        let mut flags = vec![false; self.nodes.len()];
        for c in &self.constraints {
            flags[c.node] = true;
            flags[c.masters[0]] = true;
            flags[c.masters[1]] = true;
        }
        flags
    }

    /// Phases of the elements around node `n`, ascending and deduplicated.
    pub fn node_phases(&self, n: usize) -> Vec<u32> {
        let mut p: Vec<u32> = self.node_elements(n).iter().map(|&e| self.elements[e].phase).collect();
        p.sort_unstable();
        p.dedup();
        p
    }

    /// Serializable description of the mesh.
    pub fn to_document(&self) -> MeshDocument {
        MeshDocument {
            physical_size: self.grid.physical_size(),
            grid_width: self.grid.width(),
            ndof: self.ndof,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    x: n.position[0],
                    y: n.position[1],
                    masters: n.masters(),
                })
                .collect(),
            elements: self
                .elements
                .iter()
                .map(|e| ElementRecord {
                    id: e.id,
                    corners: e.corners,
                    level: e.level,
                    phase: e.phase,
                    origin: e.pixel_origin(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    /// Rebuilds a mesh from its document and the originating grid.
    pub fn from_document(doc: &MeshDocument, grid: impl Into<Arc<PhaseGrid>>) -> Result<Self> {
        let grid = grid.into();
        if doc.grid_width != grid.width() {
            return Err(Error::GeometryMismatch(format!(
                "document grid width {} != {}",
                doc.grid_width,
                grid.width()
            )));
        }
        let blocks = doc
            .elements
            .iter()
            .map(|e| (e.level, e.origin[0] >> e.level, e.origin[1] >> e.level))
            .collect();
        let mesh = Self::from_blocks(grid, blocks)?;
        if mesh.nodes.len() != doc.nodes.len() || mesh.ndof != doc.ndof {
            return Err(Error::GeometryMismatch("document nodes disagree with elements".into()));
        }
        Ok(mesh)
    }
}

/// JSON mesh schema: `{ physical_size, grid_width, ndof, nodes: [{id, x, y,
/// masters}], elements: [{id, corners, level, phase, origin}] }`. `masters`
/// is `null` for free nodes; `origin` is the bottom-left pixel `[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDocument {
    pub physical_size: f64,
    pub grid_width: usize,
    pub ndof: usize,
    pub nodes: Vec<NodeRecord>,
    pub elements: Vec<ElementRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub masters: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementRecord {
    pub id: usize,
    pub corners: [usize; 4],
    pub level: u32,
    pub phase: u32,
    pub origin: [usize; 2],
}

/// Per-element coarsening marks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marks(Vec<bool>);

impl Marks {
    pub fn none(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn from_elements(n: usize, marked: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::none(n);
        for e in marked {
            m.0[e] = true;
        }
        m
    }

    pub fn contains(&self, e: usize) -> bool {
        self.0.get(e).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter_map(|(e, &m)| m.then_some(e))
    }

    pub fn is_subset_of(&self, other: &Marks) -> bool {
        self.iter().all(|e| other.contains(e))
    }
}

/// Marks every element none of whose nodes is a phase-boundary node.
pub fn mark_basic(mesh: &QuadMesh, boundary_nodes: &[bool]) -> Marks {
    Marks(
        (0..mesh.elements.len())
            .map(|e| !mesh.element_nodes(e).iter().any(|&n| boundary_nodes[n]))
            .collect(),
    )
}

/// Like [`mark_basic`], additionally excluding elements with a node that
/// takes part in a hanging-node constraint.
pub fn mark_hard(mesh: &QuadMesh) -> Marks {
    let flagged = flagged_nodes(mesh);
    mark_basic(mesh, &flagged)
}

/// Like [`mark_hard`] with a one-element buffer: an element is marked only if
/// no element sharing one of its nodes touches the phase boundary or a
/// constraint.
pub fn mark_soft(mesh: &QuadMesh) -> Marks {
    let flagged = flagged_nodes(mesh);
    let flagged_elems: Vec<bool> = (0..mesh.elements.len())
        .map(|e| mesh.element_nodes(e).iter().any(|&n| flagged[n]))
        .collect();
    Marks(
        (0..mesh.elements.len())
            .map(|e| {
                mesh.element_nodes(e)
                    .iter()
                    .all(|&n| mesh.node_elements(n).iter().all(|&k| !flagged_elems[k]))
            })
            .collect(),
    )
}

fn flagged_nodes(mesh: &QuadMesh) -> Vec<bool> {
    let mut flagged = mesh.phase_boundary_nodes();
    for (f, c) in flagged.iter_mut().zip(mesh.constrained_nodes()) {
        *f |= c;
    }
    flagged
}

/// Merges every aligned 2x2 block of same-level, same-phase, all-marked
/// siblings into its parent.
pub fn coarsen(mesh: &QuadMesh, marks: &Marks) -> QuadMesh {
    let mut families: HashMap<Block, (u8, Option<u32>, bool)> = HashMap::new();
    for e in marks.iter() {
        let el = &mesh.elements[e];
        let key = (el.level + 1, el.block[0] >> 1, el.block[1] >> 1);
        let entry = families.entry(key).or_insert((0, None, true));
        entry.0 += 1;
        match entry.1 {
            None => entry.1 = Some(el.phase),
            Some(p) if p != el.phase => entry.2 = false,
            _ => {}
        }
    }
    let merged: Vec<Block> = families
        .into_iter()
        .filter(|(_, (count, _, same_phase))| *count == 4 && *same_phase)
        .map(|(k, _)| k)
        .collect();
    if merged.is_empty() {
        return mesh.clone();
    }
    let merged_set: std::collections::HashSet<Block> = merged.iter().copied().collect();
    let mut blocks: Vec<Block> = mesh
        .elements
        .iter()
        .filter(|el| !merged_set.contains(&(el.level + 1, el.block[0] >> 1, el.block[1] >> 1)))
        .map(|el| (el.level, el.block[0], el.block[1]))
        .collect();
    blocks.extend(merged);
    QuadMesh::from_blocks(mesh.shared_grid(), blocks).expect("merging valid sibling blocks keeps the mesh valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    /// Phase-boundary criterion only; may stack hanging nodes on an edge.
    Basic,
    Hard,
    Soft,
}

impl Algorithm {
    pub fn marks(self, mesh: &QuadMesh) -> Marks {
        match self {
            Algorithm::Basic => mark_basic(mesh, &mesh.phase_boundary_nodes()),
            Algorithm::Hard => mark_hard(mesh),
            Algorithm::Soft => mark_soft(mesh),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(Self::Basic),
            "hard" => Ok(Self::Hard),
            "soft" => Ok(Self::Soft),
            other => Err(Error::Parse(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// `[mesh_0, ..., mesh_steps]`, starting from the uniform pixel mesh.
pub fn coarsen_pipeline(grid: impl Into<Arc<PhaseGrid>>, algorithm: Algorithm, steps: usize) -> Vec<QuadMesh> {
    let mut meshes = vec![QuadMesh::uniform(grid)];
    for _ in 0..steps {
        let last = meshes.last().unwrap();
        let marks = algorithm.marks(last);
        meshes.push(coarsen(last, &marks));
    }
    meshes
}
