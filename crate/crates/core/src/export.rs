//! Legacy VTK and CSV writers for mesh fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::fe::DisplacementField;
use crate::mesh::QuadMesh;
use crate::{Error, Result, Voigt};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
    /// Voigt components `[xx, yy, xy]`.
    Tensor(Vec<Voigt>),
}

impl FieldData {
    pub fn len(&self) -> usize {
        match self {
            Self::Scalar(v) => v.len(),
            Self::Vector(v) => v.len(),
            Self::Tensor(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn components(&self) -> usize {
        match self {
            Self::Scalar(_) => 1,
            Self::Vector(_) => 2,
            Self::Tensor(_) => 3,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        match self {
            Self::Scalar(v) => std::slice::from_ref(&v[i]),
            Self::Vector(v) => &v[i],
            Self::Tensor(v) => &v[i],
        }
    }

    fn column_suffixes(&self) -> &'static [&'static str] {
        match self {
            Self::Scalar(_) => &[""],
            Self::Vector(_) => &["_x", "_y"],
            Self::Tensor(_) => &["_xx", "_yy", "_xy"],
        }
    }
}

/// Named per-element and per-node fields on one mesh.
#[derive(Debug, Clone)]
pub struct FieldSnapshot<'m> {
    mesh: &'m QuadMesh,
    cell: Vec<(String, FieldData)>,
    point: Vec<(String, FieldData)>,
    metadata: BTreeMap<String, String>,
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

impl<'m> FieldSnapshot<'m> {
    pub fn new(mesh: &'m QuadMesh) -> Self {
        Self { mesh, cell: Vec::new(), point: Vec::new(), metadata: BTreeMap::new() }
    }

    /// Adds the `phase` and `level` cell fields.
    pub fn with_topology(mut self) -> Self {
        let els = self.mesh.elements();
        self.cell.push(("phase".into(), FieldData::Scalar(els.iter().map(|e| e.phase as f64).collect())));
        self.cell.push(("level".into(), FieldData::Scalar(els.iter().map(|e| e.level as f64).collect())));
        self
    }

    pub fn mesh(&self) -> &QuadMesh {
        self.mesh
    }

    pub fn cell_fields(&self) -> &[(String, FieldData)] {
        &self.cell
    }

    pub fn point_fields(&self) -> &[(String, FieldData)] {
        &self.point
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    fn check(name: &str, data: &FieldData, expected: usize) -> Result<()> {
        if data.len() != expected {
            return Err(Error::FieldLength { name: name.to_owned(), got: data.len(), expected });
        }
        Ok(())
    }

    pub fn add_cell_field(&mut self, name: &str, data: FieldData) -> Result<&mut Self> {
        Self::check(name, &data, self.mesh.elements().len())?;
        self.cell.push((sanitize(name), data));
        Ok(self)
    }

    pub fn add_point_field(&mut self, name: &str, data: FieldData) -> Result<&mut Self> {
        Self::check(name, &data, self.mesh.nodes().len())?;
        self.point.push((sanitize(name), data));
        Ok(self)
    }

    pub fn add_displacement(&mut self, u: &DisplacementField) -> Result<&mut Self> {
        self.add_point_field("displacement", FieldData::Vector(u.values().to_vec()))
    }

    pub fn to_vtk(&self) -> String {
        let mesh = self.mesh;
        let mut s = String::from("# vtk DataFile Version 3.0\n");
        let meta: Vec<_> = self.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let title = if meta.is_empty() { "microfield".to_owned() } else { meta.join(" ") };
        writeln!(s, "{}", title.replace('\n', " ")).unwrap();
        s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
        writeln!(s, "POINTS {} double", mesh.nodes().len()).unwrap();
        for n in mesh.nodes() {
            writeln!(s, "{:e} {:e} 0", n.position[0], n.position[1]).unwrap();
        }
        let ne = mesh.elements().len();
        writeln!(s, "CELLS {ne} {}", 5 * ne).unwrap();
        for e in mesh.elements() {
            let [a, b, c, d] = e.corners;
            writeln!(s, "4 {a} {b} {c} {d}").unwrap();
        }
        writeln!(s, "CELL_TYPES {ne}").unwrap();
        for _ in 0..ne {
            s.push_str("9\n");
        }
        write_section(&mut s, "CELL_DATA", ne, &self.cell);
        write_section(&mut s, "POINT_DATA", mesh.nodes().len(), &self.point);
        s
    }

    /// One row per element: id, centroid, then every cell field component.
    /// With no cell fields only the header line is written.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["element".to_owned(), "center_x".into(), "center_y".into()];
        for (name, data) in &self.cell {
            header.extend(data.column_suffixes().iter().map(|sfx| format!("{name}{sfx}")));
        }
        let mut s = header.join(",");
        s.push('\n');
        if self.cell.is_empty() {
            return s;
        }
        let nodes = self.mesh.nodes();
        for (i, e) in self.mesh.elements().iter().enumerate() {
            let c = e.center(nodes);
            let mut row = vec![i.to_string(), format!("{:e}", c[0]), format!("{:e}", c[1])];
            for (_, data) in &self.cell {
                row.extend(data.row(i).iter().map(|v| format!("{v:e}")));
            }
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

fn write_section(s: &mut String, label: &str, count: usize, fields: &[(String, FieldData)]) {
    if fields.is_empty() {
        return;
    }
    writeln!(s, "{label} {count}").unwrap();
    for (name, data) in fields {
        match data {
            FieldData::Vector(v) => {
                writeln!(s, "VECTORS {name} double").unwrap();
                for [x, y] in v {
                    writeln!(s, "{x:e} {y:e} 0").unwrap();
                }
            }
            _ => {
                writeln!(s, "SCALARS {name} double {}\nLOOKUP_TABLE default", data.components()).unwrap();
                for i in 0..count {
                    let row: Vec<_> = data.row(i).iter().map(|v| format!("{v:e}")).collect();
                    writeln!(s, "{}", row.join(" ")).unwrap();
                }
            }
        }
    }
}

pub fn export_vtk(snapshot: &FieldSnapshot, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, snapshot.to_vtk())?;
    Ok(())
}

pub fn export_csv(snapshot: &FieldSnapshot, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, snapshot.to_csv())?;
    Ok(())
}
