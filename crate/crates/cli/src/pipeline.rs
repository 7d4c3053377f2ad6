//! `run` and `coarsen` drivers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use mf_core::error_analysis::{compute_true_error, estimate_error, reference_mesh, relative_element_errors, ErrorReport};
use mf_core::export::{export_csv, export_vtk, FieldData, FieldSnapshot};
use mf_core::fe::{self, Coupling, DisplacementField, MaterialTable, Solution};
use mf_core::homogenize::homogenized_tensor;
use mf_core::mesh::{coarsen, QuadMesh};
use mf_core::recovery::Scheme;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::report::{CouplingReport, GridInfo, Report, StepReport, StepTimings, Timings};

/// Everything one coupling produces on one mesh.
struct CouplingOutcome {
    report: CouplingReport,
    displacement: DisplacementField,
    strain_xx: Vec<f64>,
    relative: Vec<(Scheme, Vec<f64>)>,
    solve_seconds: f64,
}

fn hanging_nodes(mesh: &QuadMesh) -> usize {
    mesh.nodes().iter().filter(|n| n.is_hanging()).count()
}

fn analyse(
    config: &RunConfig,
    mesh: &QuadMesh,
    materials: &MaterialTable,
    coupling: Coupling,
    reference: Option<&Solution>,
) -> Result<CouplingOutcome> {
    let start = Instant::now();
    let sol = fe::solve(mesh, materials, &config.load_case(coupling)).context("micro solve")?;
    let solve_seconds = start.elapsed().as_secs_f64();

    let mut estimates = Vec::with_capacity(config.schemes.len());
    let mut relative = Vec::with_capacity(config.schemes.len());
    for &scheme in &config.schemes {
        let recovered = scheme.recover(mesh, &sol.field).with_context(|| format!("{scheme} recovery"))?;
        let est = estimate_error(mesh, &sol.field, &recovered).with_context(|| format!("{scheme} estimate"))?;
        relative.push((scheme, relative_element_errors(&est, &sol.field).ratios));
        estimates.push(est);
    }
    let total_true = reference
        .map(|r| compute_true_error(&sol, r, materials))
        .transpose()
        .context("true error")?;
    let tensor = config
        .homogenize
        .then(|| homogenized_tensor(mesh, materials, coupling))
        .transpose()
        .context("homogenization")?
        .map(|t| t.matrix);
    let strain_xx = sol.field.elements().iter().map(|gp| gp.iter().map(|g| g.strain[0]).sum::<f64>() / 4.0).collect();

    Ok(CouplingOutcome {
        report: CouplingReport {
            coupling,
            errors: ErrorReport::new(mesh, &estimates, total_true),
            indefinite_elements: estimates.iter().map(|e| (e.scheme, e.indefinite_elements)).collect(),
            tensor,
        },
        displacement: sol.displacement,
        strain_xx,
        relative,
        solve_seconds,
    })
}

fn export_step(dir: &Path, step: usize, mesh: &QuadMesh, outcomes: &[CouplingOutcome]) -> Result<()> {
    let mut snap = FieldSnapshot::new(mesh).with_topology();
    snap.set_metadata("step", step);
    for o in outcomes {
        let c = o.report.coupling;
        for (scheme, ratios) in &o.relative {
            snap.add_cell_field(&format!("rel_error_{c}_{scheme}"), FieldData::Scalar(ratios.clone()))?;
        }
        snap.add_cell_field(&format!("strain_xx_{c}"), FieldData::Scalar(o.strain_xx.clone()))?;
        snap.add_point_field(&format!("displacement_{c}"), FieldData::Vector(o.displacement.values().to_vec()))?;
    }
    export_vtk(&snap, dir.join(format!("mesh_step{step}.vtk")))?;
    export_csv(&snap, dir.join(format!("elements_step{step}.csv")))?;
    Ok(())
}

/// Runs every step, writing that step's artifacts and the updated report
/// before coarsening further.
pub fn run(config: &RunConfig) -> Result<Report> {
    let grid = Arc::new(config.load_grid()?);
    let materials = config.material_table()?;
    materials.check_covers(&grid)?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;

    let mut timings = Timings::default();
    let ref_mesh = match config.reference_factor {
        0 => None,
        r => Some(reference_mesh(&QuadMesh::uniform(grid.clone()), r)?),
    };
    let references: Vec<Option<Solution>> = config
        .couplings
        .par_iter()
        .map(|&c| {
            ref_mesh
                .as_ref()
                .map(|m| {
                    let start = Instant::now();
                    let sol = fe::solve(m, &materials, &config.load_case(c))
                        .with_context(|| format!("reference solve, coupling {c}"));
                    sol.map(|s| (s, start.elapsed().as_secs_f64()))
                })
                .transpose()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .zip(&config.couplings)
        .map(|(r, &c)| {
            r.map(|(sol, secs)| {
                timings.reference_solve.insert(c, secs);
                sol
            })
        })
        .collect();

    let mut report = Report {
        config: config.clone(),
        grid: GridInfo {
            width: grid.width(),
            physical_size: grid.physical_size(),
            volume_fractions: grid.volume_fractions(),
        },
        steps: Vec::new(),
    };
    let mut mesh = QuadMesh::uniform(grid);
    for step in 0..=config.steps {
        let start = Instant::now();
        if step > 0 {
            mesh = coarsen(&mesh, &config.algorithm.marks(&mesh));
        }
        let coarsen_seconds = start.elapsed().as_secs_f64();
        let outcomes = config
            .couplings
            .par_iter()
            .zip(&references)
            .map(|(&c, r)| {
                analyse(config, &mesh, &materials, c, r.as_ref()).with_context(|| format!("step {step}, coupling {c}"))
            })
            .collect::<Result<Vec<_>>>()?;
        export_step(&dir, step, &mesh, &outcomes).with_context(|| format!("step {step}, export"))?;

        report.steps.push(StepReport {
            step,
            elements: mesh.elements().len(),
            hanging_nodes: hanging_nodes(&mesh),
            ndof: mesh.ndof(),
            reduction_factor: outcomes[0].report.errors.reduction_factor,
            couplings: outcomes.iter().map(|o| o.report.clone()).collect(),
        });
        timings.steps.push(StepTimings {
            step,
            ndof: mesh.ndof(),
            coarsen: coarsen_seconds,
            solve: outcomes.iter().map(|o| (o.report.coupling, o.solve_seconds)).collect::<BTreeMap<_, _>>(),
            total: start.elapsed().as_secs_f64(),
        });
        report.write(&dir)?;
        timings.write(&dir)?;
        report.write_summary(&dir)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshStats {
    pub step: usize,
    pub elements: usize,
    pub hanging_nodes: usize,
    pub ndof: usize,
}

/// Coarsening only: `mesh_stepK.vtk` with phase and level plus the mesh as
/// `mesh_stepK.json`.
pub fn coarsen_only(config: &RunConfig) -> Result<Vec<MeshStats>> {
    let grid = config.load_grid()?;
    let dir = config.output_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut mesh = QuadMesh::uniform(grid);
    let mut stats = Vec::new();
    for step in 0..=config.steps {
        if step > 0 {
            mesh = coarsen(&mesh, &config.algorithm.marks(&mesh));
        }
        export_vtk(&FieldSnapshot::new(&mesh).with_topology(), dir.join(format!("mesh_step{step}.vtk")))?;
        fs::write(dir.join(format!("mesh_step{step}.json")), mesh.to_json()?)?;
        stats.push(MeshStats { step, elements: mesh.elements().len(), hanging_nodes: hanging_nodes(&mesh), ndof: mesh.ndof() });
    }
    Ok(stats)
}
