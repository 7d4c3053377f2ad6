//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use mf_core::fe::{BodyForce, Coupling, LoadCase, MacroLoad, Material, MaterialTable};
use mf_core::grid::synthetic;
use mf_core::mesh::Algorithm;
use mf_core::recovery::Scheme;
use mf_core::{Palette, PhaseGrid};
use serde::{Deserialize, Serialize};

pub const REFERENCE_FACTORS: [usize; 5] = [0, 2, 4, 8, 16];
pub const DEFAULT_MACRO_STRAIN: [f64; 3] = [1e-3, 0.0, 5e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Synthetic {
    Uniform { size: usize },
    Laminate { size: usize, fraction: f64 },
    Cross { size: usize, half_width: f64, half_length: f64 },
}

impl Synthetic {
    fn build(&self) -> mf_core::Result<PhaseGrid> {
        match *self {
            Self::Uniform { size } => synthetic::uniform(size),
            Self::Laminate { size, fraction } => synthetic::laminate(size, fraction),
            Self::Cross { size, half_width, half_length } => synthetic::cross(size, half_width, half_length),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialEntry {
    pub phase: u32,
    pub young: f64,
    pub poisson: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    input: Option<String>,
    synthetic: Option<Synthetic>,
    palette: Option<String>,
    physical_size: Option<f64>,
    algorithm: Option<String>,
    steps: Option<usize>,
    coupling: Option<OneOrMany>,
    macro_strain: Option<[f64; 3]>,
    macro_stress: Option<[f64; 3]>,
    body_force: Option<f64>,
    recovery: Option<Vec<String>>,
    reference_factor: Option<usize>,
    homogenize: Option<bool>,
    output: Option<String>,
    #[serde(default)]
    material: Vec<MaterialEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSource {
    File { path: String },
    Synthetic(Synthetic),
}

/// Validated configuration. Paths are kept as written; `base` resolves them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub source: GridSource,
    pub palette: Option<String>,
    pub physical_size: f64,
    pub materials: Vec<MaterialEntry>,
    pub algorithm: Algorithm,
    pub steps: usize,
    pub couplings: Vec<Coupling>,
    pub macro_strain: [f64; 3],
    pub macro_stress: Option<[f64; 3]>,
    /// Amplitude of `b = a·(sin 2πx/L cos 2πy/L, cos 2πx/L sin 2πy/L)`.
    pub body_force: Option<f64>,
    pub schemes: Vec<Scheme>,
    pub reference_factor: usize,
    pub homogenize: bool,
    pub output: String,
    #[serde(skip)]
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let source = match (raw.input, raw.synthetic) {
            (Some(path), None) => GridSource::File { path },
            (None, Some(s)) => GridSource::Synthetic(s),
            (Some(_), Some(_)) => bail!("'input' and 'synthetic' are mutually exclusive"),
            (None, None) => bail!("one of 'input' or 'synthetic' is required"),
        };
        let physical_size = raw.physical_size.unwrap_or(1.0);
        ensure!(physical_size > 0.0 && physical_size.is_finite(), "physical_size must be positive");

        let algorithm: Algorithm = raw.algorithm.as_deref().unwrap_or("soft").parse()?;
        ensure!(algorithm != Algorithm::Basic, "algorithm must be 'hard' or 'soft'");

        let names = match raw.coupling {
            None => vec!["dirichlet".to_owned()],
            Some(OneOrMany::One(s)) => vec![s],
            Some(OneOrMany::Many(v)) => v,
        };
        let mut couplings = Vec::new();
        for name in &names {
            let c: Coupling = name.parse()?;
            if !couplings.contains(&c) {
                couplings.push(c);
            }
        }
        ensure!(!couplings.is_empty(), "coupling list is empty");
        if couplings.contains(&Coupling::Neumann) {
            ensure!(raw.macro_stress.is_some(), "neumann coupling requires 'macro_stress'");
        }

        let mut schemes = Vec::new();
        for name in raw.recovery.unwrap_or_else(|| Scheme::ALL.iter().map(|s| s.name().to_owned()).collect()) {
            let s: Scheme = name.parse()?;
            if !schemes.contains(&s) {
                schemes.push(s);
            }
        }
        ensure!(!schemes.is_empty(), "recovery scheme list is empty");

        let reference_factor = raw.reference_factor.unwrap_or(0);
        ensure!(
            REFERENCE_FACTORS.contains(&reference_factor),
            "reference_factor must be one of {REFERENCE_FACTORS:?}, got {reference_factor}"
        );

        ensure!(!raw.material.is_empty(), "at least one [[material]] entry is required");
        for (i, m) in raw.material.iter().enumerate() {
            ensure!(
                raw.material[..i].iter().all(|o| o.phase != m.phase),
                "phase {} has more than one material",
                m.phase
            );
            Material::new(m.young, m.poisson)?;
        }
        if let Some(b) = raw.body_force {
            ensure!(b.is_finite(), "body_force must be finite");
        }

        Ok(Self {
            source,
            palette: raw.palette,
            physical_size,
            materials: raw.material,
            algorithm,
            steps: raw.steps.unwrap_or(0),
            couplings,
            macro_strain: raw.macro_strain.unwrap_or(DEFAULT_MACRO_STRAIN),
            macro_stress: raw.macro_stress,
            body_force: raw.body_force,
            schemes,
            reference_factor,
            homogenize: raw.homogenize.unwrap_or(true),
            output: raw.output.unwrap_or_else(|| "out".to_owned()),
            base,
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base.join(&self.output)
    }

    pub fn load_palette(&self) -> Result<Option<Palette>> {
        let Some(p) = &self.palette else { return Ok(None) };
        let path = self.base.join(p);
        let text = fs::read_to_string(&path).with_context(|| format!("reading palette {}", path.display()))?;
        let palette = Palette::parse(&text).with_context(|| format!("invalid palette {}", path.display()))?;
        Ok(Some(palette))
    }

    pub fn load_grid(&self) -> Result<PhaseGrid> {
        let palette = self.load_palette()?;
        let grid = match &self.source {
            GridSource::File { path } => {
                let path = self.base.join(path);
                let bytes = fs::read(&path).with_context(|| format!("reading input {}", path.display()))?;
                PhaseGrid::load(&bytes, palette.as_ref(), self.physical_size)
                    .with_context(|| format!("loading input {}", path.display()))?
            }
            GridSource::Synthetic(s) => s.build()?.with_physical_size(self.physical_size)?,
        };
        Ok(grid)
    }

    pub fn material_table(&self) -> Result<MaterialTable> {
        Ok(MaterialTable::from_constants(self.materials.iter().map(|m| (m.phase, m.young, m.poisson)))?)
    }

    pub fn load_case(&self, coupling: Coupling) -> LoadCase {
        let value = match coupling {
            Coupling::Neumann => self.macro_stress.unwrap_or_default(),
            _ => self.macro_strain,
        };
        let case = LoadCase::new(MacroLoad::new(coupling, value));
        match self.body_force {
            Some(a) if a != 0.0 => {
                let k = 2.0 * std::f64::consts::PI / self.physical_size;
                case.with_body_force(BodyForce::new(move |x, y| {
                    [a * (k * x).sin() * (k * y).cos(), a * (k * x).cos() * (k * y).sin()]
                }))
            }
            _ => case,
        }
    }
}
