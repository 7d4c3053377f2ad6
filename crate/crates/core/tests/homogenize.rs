use mf_core::fe::{Coupling, MaterialTable};
use mf_core::grid::synthetic;
use mf_core::homogenize::{coarsening_sensitivity, homogenized_tensor, psd_leq, reuss_bound, voigt_bound};
use mf_core::mesh::{coarsen_pipeline, Algorithm};
use nalgebra::{Matrix3, Matrix4, Vector4};

fn sic_diamond() -> MaterialTable {
    MaterialTable::from_constants([(0, 250_000.0, 0.17), (1, 775_000.0, 0.2)]).unwrap()
}

/// Effective stiffness of layers stacked along x: per-phase strains follow
/// from continuity of σxx, σxy and εyy plus the mean-strain condition.
fn laminate_tensor(t: &MaterialTable, f1: f64) -> Matrix3<f64> {
    let (d0, d1) = (t.stiffness(0).unwrap(), t.stiffness(1).unwrap());
    let f0 = 1.0 - f1;
    let a = Matrix4::new(
        d0[(0, 0)], -d1[(0, 0)], d0[(0, 2)], -d1[(0, 2)],
        d0[(2, 0)], -d1[(2, 0)], d0[(2, 2)], -d1[(2, 2)],
        f0, f1, 0.0, 0.0,
        0.0, 0.0, f0, f1,
    );
    let mut out = Matrix3::zeros();
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let rhs = Vector4::new((d1[(0, 1)] - d0[(0, 1)]) * e[1], (d1[(2, 1)] - d0[(2, 1)]) * e[1], e[0], e[2]);
        let s = a.lu().solve(&rhs).unwrap();
        let eps0 = nalgebra::Vector3::new(s[0], e[1], s[2]);
        let eps1 = nalgebra::Vector3::new(s[1], e[1], s[3]);
        out.set_column(k, &(d0 * eps0 * f0 + d1 * eps1 * f1));
    }
    out
}

#[test]
fn periodic_laminate_matches_closed_form() {
    let t = sic_diamond();
    let grid = synthetic::laminate(16, 0.5).unwrap();
    let want = laminate_tensor(&t, 0.5);
    for mesh in coarsen_pipeline(grid, Algorithm::Soft, 2) {
        let got = homogenized_tensor(&mesh, &t, Coupling::Periodic).unwrap().as_matrix();
        assert!((got - want).abs().max() <= 1e-9 * want.abs().max(), "{got} vs {want}");
    }
}

#[test]
fn laminate_tensor_sits_between_bounds() {
    let t = sic_diamond();
    let grid = synthetic::laminate(16, 0.5).unwrap();
    let a = laminate_tensor(&t, 0.5);
    assert!(psd_leq(&reuss_bound(&grid, &t).unwrap(), &a, 1e-12));
    assert!(psd_leq(&a, &voigt_bound(&grid, &t).unwrap(), 1e-12));
}

#[test]
fn neumann_tensor_inverts_compliance() {
    // single phase: compliance inversion must return D
    let t = MaterialTable::from_constants([(0, 10.0, 0.3)]).unwrap();
    let mesh = coarsen_pipeline(synthetic::uniform(8).unwrap(), Algorithm::Hard, 2).pop().unwrap();
    let a = homogenized_tensor(&mesh, &t, Coupling::Neumann).unwrap();
    assert!((a.as_matrix() - t.stiffness(0).unwrap()).abs().max() < 1e-10);
    assert!(a.asymmetry < 1e-12);
}

#[test]
fn sensitivity_rows_cover_every_step() {
    let t = sic_diamond();
    let meshes = coarsen_pipeline(synthetic::cross(32, 0.125, 0.25).unwrap(), Algorithm::Soft, 2);
    let s = coarsening_sensitivity(&meshes, &t, Coupling::Dirichlet).unwrap();
    assert_eq!(s.ratios.len(), meshes.len());
    assert_eq!(s.tensors.iter().map(|t| t.step).collect::<Vec<_>>(), vec![Some(0), Some(1), Some(2)]);
    assert!(s.max_deviation() < 0.01);
}
