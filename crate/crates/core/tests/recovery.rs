use mf_core::error_analysis::estimate_error;
use mf_core::fe::fields::stresses_at_quadrature;
use mf_core::fe::{DisplacementField, MaterialTable, QuadraturePointField};
use mf_core::mesh::{coarsen_pipeline, Algorithm};
use mf_core::recovery::Scheme;
use mf_core::{PhaseGrid, QuadMesh};
use proptest::prelude::*;

fn materials() -> MaterialTable {
    MaterialTable::from_constants([(0, 250_000.0, 0.17), (1, 775_000.0, 0.2)]).unwrap()
}

fn random_field(mesh: &QuadMesh, seed: &[f64]) -> QuadraturePointField {
    let u = DisplacementField::from_fn(mesh, |x, y| {
        let k = ((x * 7.0 + y * 13.0) as usize) % seed.len();
        [seed[k] * 1e-3 + 1e-4 * x * y, seed[(k + 1) % seed.len()] * 1e-3 - 2e-4 * x]
    });
    stresses_at_quadrature(mesh, &u, &materials()).unwrap()
}

fn strategy() -> impl Strategy<Value = (Vec<u32>, usize, Vec<f64>, f64)> {
    (proptest::collection::vec(0u32..2, 64), 0usize..3, proptest::collection::vec(-1.0f64..1.0, 7), 0.5f64..3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phase_values_ignore_other_phase((bits, steps, seed, scale) in strategy()) {
        let grid = PhaseGrid::from_fn(8, 1.0, |i, j| bits[i * 8 + j]).unwrap();
        let mesh = coarsen_pipeline(grid, Algorithm::Soft, steps).pop().unwrap();
        let field = random_field(&mesh, &seed);
        // rescale every Gauss value of phase-1 elements
        let perturbed = QuadraturePointField::new(
            field
                .elements()
                .iter()
                .zip(mesh.elements())
                .map(|(gps, el)| {
                    let mut gps = *gps;
                    if el.phase == 1 {
                        for g in &mut gps {
                            g.stress = g.stress.map(|v| v * scale + 1.0);
                            g.strain = g.strain.map(|v| v * scale - 1e-3);
                        }
                    }
                    gps
                })
                .collect(),
        );
        for scheme in [Scheme::ModifiedSpr, Scheme::Averaging] {
            let a = scheme.recover(&mesh, &field).unwrap();
            let b = scheme.recover(&mesh, &perturbed).unwrap();
            for n in 0..mesh.nodes().len() {
                prop_assert_eq!(a.values_at(n).len(), mesh.node_phases(n).len());
                for (va, vb) in a.values_at(n).iter().zip(b.values_at(n)) {
                    prop_assert_eq!(va.phase, vb.phase);
                    if va.phase == Some(0) {
                        prop_assert_eq!(va, vb);
                    }
                }
            }
        }
    }

    #[test]
    fn estimate_is_sum_of_element_parts((bits, steps, seed, _s) in strategy()) {
        let grid = PhaseGrid::from_fn(8, 1.0, |i, j| bits[i * 8 + j]).unwrap();
        let mesh = coarsen_pipeline(grid, Algorithm::Soft, steps).pop().unwrap();
        let field = random_field(&mesh, &seed);
        for scheme in Scheme::ALL {
            let est = estimate_error(&mesh, &field, &scheme.recover(&mesh, &field).unwrap()).unwrap();
            let sum: f64 = est.element_squared.iter().sum();
            prop_assert!((est.total * est.total - sum.max(0.0)).abs() <= 1e-12 * sum.abs().max(1e-300));
            if scheme != Scheme::StandardSpr {
                let top = est.element_squared.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let low = est.element_squared.iter().fold(0.0f64, |m, &v| m.min(v));
                prop_assert!(low >= -1e-12 * top, "{scheme}: {low:e} vs {top:e}");
            }
        }
    }
}
