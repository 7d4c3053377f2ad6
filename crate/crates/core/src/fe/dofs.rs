//! Affine maps from node displacements to system unknowns.
//!
//! Every node dof is written as `u = Σ w_k x_k + c` over the unknowns `x`.
//! Hanging-node constraints, prescribed displacements and periodic ties are
//! all rules of this form; resolving them recursively yields an expression
//! per node dof that assembly uses as the transformation `u = T x + c`.

use crate::fe::{strain_times, MacroLoad};
use crate::mesh::QuadMesh;
use crate::{Error, Result, Voigt};

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    Unknown,
    Fixed(f64),
    Tie(Vec<(usize, f64)>, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    unknowns: usize,
    ptr: Vec<usize>,
    terms: Vec<(usize, f64)>,
    offsets: Vec<f64>,
}

impl DofMap {
    /// Only hanging-node constraints: the unknowns are the free node dofs.
    pub fn hanging_only(mesh: &QuadMesh) -> Self {
        Rules::new(mesh).resolve().expect("hanging constraints form a forest")
    }

    /// Hanging constraints plus the boundary coupling of `load`.
    pub fn for_load(mesh: &QuadMesh, load: &MacroLoad) -> Result<Self> {
        let mut rules = Rules::new(mesh);
        match *load {
            MacroLoad::Dirichlet { strain } => rules.kubc(mesh, &strain),
            MacroLoad::Periodic { strain } => rules.periodic(mesh, &strain)?,
            MacroLoad::Neumann { .. } => rules.gauge(mesh),
        }
        rules.resolve()
    }

    pub fn unknowns(&self) -> usize {
        self.unknowns
    }

    /// Number of node dofs (twice the node count).
    pub fn node_dofs(&self) -> usize {
        self.offsets.len()
    }

    pub fn expression(&self, dof: usize) -> (&[(usize, f64)], f64) {
        (&self.terms[self.ptr[dof]..self.ptr[dof + 1]], self.offsets[dof])
    }

    /// Node dof values `T x + c`.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        (0..self.node_dofs())
            .map(|d| {
                let (terms, c) = self.expression(d);
                c + terms.iter().map(|&(k, w)| w * x[k]).sum::<f64>()
            })
            .collect()
    }
}

struct Rules {
    rules: Vec<Rule>,
}

impl Rules {
    fn new(mesh: &QuadMesh) -> Self {
        let mut rules = vec![Rule::Unknown; 2 * mesh.nodes().len()];
        for c in mesh.constraints() {
            for comp in 0..2 {
                rules[2 * c.node + comp] =
                    Rule::Tie(vec![(2 * c.masters[0] + comp, 0.5), (2 * c.masters[1] + comp, 0.5)], 0.0);
            }
        }
        Self { rules }
    }

    fn fix(&mut self, node: usize, comp: usize, value: f64) {
        self.rules[2 * node + comp] = Rule::Fixed(value);
    }

    /// `u(node) = Σ w u(master) + offset`, componentwise.
    fn tie(&mut self, node: usize, masters: &[(usize, f64)], offset: [f64; 2]) {
        for comp in 0..2 {
            let terms = masters.iter().map(|&(m, w)| (2 * m + comp, w)).collect();
            self.rules[2 * node + comp] = Rule::Tie(terms, offset[comp]);
        }
    }

    fn kubc(&mut self, mesh: &QuadMesh, strain: &Voigt) {
        for node in mesh.nodes() {
            if mesh.is_domain_boundary(node.id) {
                let [x, y] = node.position;
                let u = strain_times(strain, x, y);
                self.fix(node.id, 0, u[0]);
                self.fix(node.id, 1, u[1]);
            }
        }
    }

    /// Pins the origin and the x-dof of the top-left corner.
    fn gauge(&mut self, mesh: &QuadMesh) {
        let w = mesh.grid().width();
        let origin = mesh.node_at_lattice(0, 0).expect("corner node");
        let top_left = mesh.node_at_lattice(0, w).expect("corner node");
        self.fix(origin, 0, 0.0);
        self.fix(origin, 1, 0.0);
        self.fix(top_left, 0, 0.0);
    }

    /// Ties opposite edges so the fluctuation is periodic. Nodes present on
    /// only one side follow the piecewise-linear trace of the opposite side,
    /// which keeps the coupled field exactly periodic on mismatched edges.
    fn periodic(&mut self, mesh: &QuadMesh, strain: &Voigt) -> Result<()> {
        let w = mesh.grid().width();
        let size = mesh.grid().physical_size();
        let side = |fixed_a: Option<usize>, fixed_b: Option<usize>| -> Vec<(usize, usize)> {
            (0..=w)
                .filter_map(|t| {
                    let (a, b) = (fixed_a.unwrap_or(t), fixed_b.unwrap_or(t));
                    mesh.node_at_lattice(a, b).map(|n| (t, n))
                })
                .collect()
        };
        let left = side(Some(0), None);
        let right = side(Some(w), None);
        let bottom = side(None, Some(0));
        let top = side(None, Some(w));
        let jump_x = strain_times(strain, size, 0.0);
        let jump_y = strain_times(strain, 0.0, size);
        let neg = |v: [f64; 2]| [-v[0], -v[1]];

        let origin = mesh.node_at_lattice(0, 0).expect("corner node");
        self.fix(origin, 0, 0.0);
        self.fix(origin, 1, 0.0);
        for &(t, n) in &right {
            self.tie(n, &trace(&left, t), jump_x);
        }
        for &(t, n) in &top {
            if t < w {
                self.tie(n, &trace(&bottom, t), jump_y);
            }
        }
        for &(t, n) in &left {
            if t > 0 && t < w && !contains(&right, t) {
                self.tie(n, &trace(&right, t), neg(jump_x));
            }
        }
        for &(t, n) in &bottom {
            if t > 0 && t < w && !contains(&top, t) {
                self.tie(n, &trace(&top, t), neg(jump_y));
            }
        }
        Ok(())
    }

    fn resolve(self) -> Result<DofMap> {
        let n = self.rules.len();
        let mut unknown_of = vec![usize::MAX; n];
        let mut unknowns = 0;
        for (d, r) in self.rules.iter().enumerate() {
            if *r == Rule::Unknown {
                unknown_of[d] = unknowns;
                unknowns += 1;
            }
        }
        let mut state: Vec<Option<(Vec<(usize, f64)>, f64)>> = vec![None; n];
        let mut visiting = vec![false; n];
        for d in 0..n {
            resolve_dof(d, &self.rules, &unknown_of, &mut state, &mut visiting)?;
        }
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        let mut terms = Vec::new();
        let mut offsets = Vec::with_capacity(n);
        for s in state {
            let (t, c) = s.expect("all dofs resolved");
            terms.extend(t);
            ptr.push(terms.len());
            offsets.push(c);
        }
        Ok(DofMap { unknowns, ptr, terms, offsets })
    }
}

fn resolve_dof(
    d: usize,
    rules: &[Rule],
    unknown_of: &[usize],
    state: &mut [Option<(Vec<(usize, f64)>, f64)>],
    visiting: &mut [bool],
) -> Result<()> {
    if state[d].is_some() {
        return Ok(());
    }
    if visiting[d] {
        return Err(Error::SingularSystem(format!("cyclic constraint through node dof {d}")));
    }
    visiting[d] = true;
    let resolved = match &rules[d] {
        Rule::Unknown => (vec![(unknown_of[d], 1.0)], 0.0),
        Rule::Fixed(v) => (Vec::new(), *v),
        Rule::Tie(masters, offset) => {
            let mut acc: Vec<(usize, f64)> = Vec::new();
            let mut c = *offset;
            for &(m, w) in masters {
                resolve_dof(m, rules, unknown_of, state, visiting)?;
                let (t, mc) = state[m].as_ref().unwrap();
                c += w * mc;
                acc.extend(t.iter().map(|&(k, v)| (k, w * v)));
            }
            acc.sort_unstable_by_key(|&(k, _)| k);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            for (k, v) in acc {
                match merged.last_mut() {
                    Some((lk, lv)) if *lk == k => *lv += v,
                    _ => merged.push((k, v)),
                }
            }
            (merged, c)
        }
    };
    visiting[d] = false;
    state[d] = Some(resolved);
    Ok(())
}

fn contains(side: &[(usize, usize)], t: usize) -> bool {
    side.binary_search_by_key(&t, |&(s, _)| s).is_ok()
}

/// Linear interpolation weights of the side trace at lattice coordinate `t`.
fn trace(side: &[(usize, usize)], t: usize) -> Vec<(usize, f64)> {
    match side.binary_search_by_key(&t, |&(s, _)| s) {
        Ok(i) => vec![(side[i].1, 1.0)],
        Err(i) => {
            let (t0, n0) = side[i - 1];
            let (t1, n1) = side[i];
            let s = (t - t0) as f64 / (t1 - t0) as f64;
            vec![(n0, 1.0 - s), (n1, s)]
        }
    }
}
