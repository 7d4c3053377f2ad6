//! Run report, timing log and the plain-text summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use mf_core::error_analysis::ErrorReport;
use mf_core::fe::Coupling;
use mf_core::recovery::Scheme;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub width: usize,
    pub physical_size: f64,
    pub volume_fractions: BTreeMap<u32, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub coupling: Coupling,
    pub errors: ErrorReport,
    pub indefinite_elements: BTreeMap<Scheme, usize>,
    pub tensor: Option<[[f64; 3]; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: usize,
    pub elements: usize,
    pub hanging_nodes: usize,
    pub ndof: usize,
    pub reduction_factor: f64,
    pub couplings: Vec<CouplingReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub grid: GridInfo,
    pub steps: Vec<StepReport>,
}

impl Report {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(REPORT_FILE), text)?;
        Ok(())
    }

    pub fn couplings(&self) -> Vec<Coupling> {
        self.steps.first().map(|s| s.couplings.iter().map(|c| c.coupling).collect()).unwrap_or_default()
    }

    /// One table per coupling and recovery scheme, one row per step, then
    /// the homogenized coefficients per coupling.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let g = &self.grid;
        writeln!(s, "grid {0}x{0}, physical size {1}", g.width, g.physical_size).unwrap();
        for (phase, f) in &g.volume_fractions {
            writeln!(s, "  phase {phase}: volume fraction {f:.4}").unwrap();
        }
        let with_true = self.config.reference_factor > 0;
        for (ci, coupling) in self.couplings().into_iter().enumerate() {
            for &scheme in &self.config.schemes {
                writeln!(s, "\n[{coupling}] {scheme}").unwrap();
                let mut header = format!("{:>4} {:>9} {:>8} {:>12} {:>8}", "step", "ndof", "factor", "est_error", "err_fac");
                if with_true {
                    write!(header, " {:>12} {:>8}", "true_error", "theta").unwrap();
                }
                writeln!(s, "{header}").unwrap();
                let est0 = self.steps.first().and_then(|st| st.couplings[ci].errors.total_estimated.get(&scheme).copied());
                for st in &self.steps {
                    let e = &st.couplings[ci].errors;
                    let est = e.total_estimated.get(&scheme).copied();
                    let err_fac = match (est, est0) {
                        (Some(a), Some(b)) if b > 0.0 => format!("{:.4}", a / b),
                        _ => "-".into(),
                    };
                    write!(
                        s,
                        "{:>4} {:>9} {:>8.4} {:>12} {:>8}",
                        st.step,
                        st.ndof,
                        st.reduction_factor,
                        fmt_opt(est),
                        err_fac
                    )
                    .unwrap();
                    if with_true {
                        let theta = e.effectivity.get(&scheme).map(|t| format!("{t:.4}")).unwrap_or_else(|| "-".into());
                        write!(s, " {:>12} {:>8}", fmt_opt(e.total_true), theta).unwrap();
                    }
                    s.push('\n');
                }
            }
            if self.steps.iter().any(|st| st.couplings[ci].tensor.is_some()) {
                writeln!(s, "\n[{coupling}] homogenized tensor").unwrap();
                writeln!(s, "{:>4} {:>12} {:>12} {:>12} {:>12}", "step", "A11", "A22", "A33", "A12").unwrap();
                for st in &self.steps {
                    if let Some(a) = st.couplings[ci].tensor {
                        writeln!(s, "{:>4} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}", st.step, a[0][0], a[1][1], a[2][2], a[0][1])
                            .unwrap();
                    }
                }
            }
        }
        s
    }

    pub fn write_summary(&self, dir: &Path) -> Result<String> {
        let text = self.summary();
        fs::write(dir.join(SUMMARY_FILE), &text)?;
        Ok(text)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4e}"))
}

/// Wall-clock seconds, kept apart from the report so the report stays
/// reproducible.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub reference_solve: BTreeMap<Coupling, f64>,
    pub steps: Vec<StepTimings>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepTimings {
    pub step: usize,
    pub ndof: usize,
    pub coarsen: f64,
    pub solve: BTreeMap<Coupling, f64>,
    pub total: f64,
}

impl Timings {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join(TIMINGS_FILE), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
