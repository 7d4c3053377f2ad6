//! Bilinear Q4 element kinematics and integration.

use nalgebra::{Matrix3, SMatrix};

use crate::{Error, Result};

pub type Mat8 = SMatrix<f64, 8, 8>;
pub type BMatrix = SMatrix<f64, 3, 8>;

/// Reference corner coordinates, counterclockwise from `(-1, -1)`.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

const G: f64 = 0.577_350_269_189_625_8;

/// 2x2 Gauss-Legendre points, ordered like the element corners. Weights are 1.
pub const GAUSS_2X2: [[f64; 2]; 4] = [[-G, -G], [G, -G], [G, G], [-G, G]];

/// 3x3 Gauss-Legendre points and weights.
pub fn gauss_3x3() -> impl Iterator<Item = ([f64; 2], f64)> {
    let p = (0.6f64).sqrt();
    let rule = [(-p, 5.0 / 9.0), (0.0, 8.0 / 9.0), (p, 5.0 / 9.0)];
    rule.into_iter()
        .flat_map(move |(y, wy)| rule.into_iter().map(move |(x, wx)| ([x, y], wx * wy)))
}

pub fn shape(xi: f64, eta: f64) -> [f64; 4] {
    CORNERS.map(|[a, b]| 0.25 * (1.0 + a * xi) * (1.0 + b * eta))
}

/// `[dN/dξ, dN/dη]` for each corner.
pub fn shape_gradients(xi: f64, eta: f64) -> [[f64; 2]; 4] {
    CORNERS.map(|[a, b]| [0.25 * a * (1.0 + b * eta), 0.25 * b * (1.0 + a * xi)])
}

/// Strain-displacement matrix for an axis-aligned square of side `side`.
pub fn square_b(xi: f64, eta: f64, side: f64) -> BMatrix {
    let scale = 2.0 / side;
    let grads = shape_gradients(xi, eta).map(|[gx, gy]| [gx * scale, gy * scale]);
    b_from_gradients(&grads)
}

fn b_from_gradients(grads: &[[f64; 2]; 4]) -> BMatrix {
    let mut b = BMatrix::zeros();
    for (k, [dx, dy]) in grads.iter().copied().enumerate() {
        b[(0, 2 * k)] = dx;
        b[(1, 2 * k + 1)] = dy;
        b[(2, 2 * k)] = dy;
        b[(2, 2 * k + 1)] = dx;
    }
    b
}

/// Isoparametric B matrix and `det J` at `(ξ, η)` for arbitrary corner
/// coordinates (counterclockwise).
pub fn isoparametric_b(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> Result<(BMatrix, f64)> {
    let dn = shape_gradients(xi, eta);
    let mut j = [[0.0; 2]; 2];
    for (k, [gx, ge]) in dn.iter().copied().enumerate() {
        j[0][0] += gx * coords[k][0];
        j[0][1] += gx * coords[k][1];
        j[1][0] += ge * coords[k][0];
        j[1][1] += ge * coords[k][1];
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if !(det > 0.0) {
        return Err(Error::DegenerateElement(det));
    }
    let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let grads = dn.map(|[gx, ge]| [inv[0][0] * gx + inv[0][1] * ge, inv[1][0] * gx + inv[1][1] * ge]);
    Ok((b_from_gradients(&grads), det))
}

/// Stiffness of a general Q4 element with 2x2 quadrature.
pub fn isoparametric_stiffness(coords: &[[f64; 2]; 4], d: &Matrix3<f64>) -> Result<Mat8> {
    let mut k = Mat8::zeros();
    for [xi, eta] in GAUSS_2X2 {
        let (b, det) = isoparametric_b(coords, xi, eta)?;
        k += b.transpose() * d * b * det;
    }
    Ok(k)
}

/// Stiffness of an axis-aligned square element. Independent of the side
/// length in 2D.
pub fn square_stiffness(side: f64, d: &Matrix3<f64>) -> Result<Mat8> {
    if !(side > 0.0) {
        return Err(Error::DegenerateElement(side));
    }
    let coords = CORNERS.map(|[a, b]| [0.5 * side * (a + 1.0), 0.5 * side * (b + 1.0)]);
    isoparametric_stiffness(&coords, d)
}

/// Consistent nodal loads for a body force over a square element with
/// bottom-left corner `origin`, by 3x3 Gauss quadrature.
pub fn square_body_load(origin: [f64; 2], side: f64, force: &dyn Fn(f64, f64) -> [f64; 2]) -> [f64; 8] {
    let det = 0.25 * side * side;
    let mut f = [0.0; 8];
    for ([xi, eta], w) in gauss_3x3() {
        let x = origin[0] + 0.5 * side * (xi + 1.0);
        let y = origin[1] + 0.5 * side * (eta + 1.0);
        let b = force(x, y);
        for (k, n) in shape(xi, eta).into_iter().enumerate() {
            f[2 * k] += w * det * n * b[0];
            f[2 * k + 1] += w * det * n * b[1];
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::Material;
    use approx::assert_relative_eq;
    use nalgebra::{SVector, SymmetricEigen};

    /// Closed-form unit-square Q4 stiffness for E = 1, ν = 0 under plane
    /// strain, D = diag(1, 1, 1/2), from exact integrals of the shape
    /// function gradients on [0,1]².
    fn closed_form_nu0() -> Mat8 {
        // ∫ N_i,x N_j,x, ∫ N_i,y N_j,y and ∫ N_i,x N_j,y
        let xx = |i: usize, j: usize| {
            let ([ai, bi], [aj, bj]) = (CORNERS[i], CORNERS[j]);
            ai * aj * (1.0 + bi * bj / 3.0) / 4.0
        };
        let yy = |i: usize, j: usize| {
            let ([ai, bi], [aj, bj]) = (CORNERS[i], CORNERS[j]);
            bi * bj * (1.0 + ai * aj / 3.0) / 4.0
        };
        let xy = |i: usize, j: usize| CORNERS[i][0] * CORNERS[j][1] / 4.0;
        let mut k = Mat8::zeros();
        for i in 0..4 {
            for j in 0..4 {
                k[(2 * i, 2 * j)] = xx(i, j) + 0.5 * yy(i, j);
                k[(2 * i + 1, 2 * j + 1)] = yy(i, j) + 0.5 * xx(i, j);
                k[(2 * i, 2 * j + 1)] = 0.5 * xy(j, i);
                k[(2 * i + 1, 2 * j)] = 0.5 * xy(i, j);
            }
        }
        k
    }

    #[test]
    fn unit_square_matches_closed_form() {
        let d = Material::new(1.0, 0.0).unwrap().stiffness();
        let k = square_stiffness(1.0, &d).unwrap();
        assert_relative_eq!(k, closed_form_nu0(), epsilon = 1e-14);
    }

    #[test]
    fn size_invariance_and_symmetry() {
        let d = Material::new(250_000.0, 0.17).unwrap().stiffness();
        let k1 = square_stiffness(1.0, &d).unwrap();
        let k2 = square_stiffness(2.0, &d).unwrap();
        assert_relative_eq!(k1, k2, max_relative = 1e-13);
        assert_relative_eq!(k1, k1.transpose(), max_relative = 1e-14);
    }

    #[test]
    fn three_rigid_modes() {
        let d = Material::new(3.0, 0.3).unwrap().stiffness();
        let k = square_stiffness(0.5, &d).unwrap();
        let eig = SymmetricEigen::new(k).eigenvalues;
        let max = eig.max();
        let zeros = eig.iter().filter(|&&l| l.abs() < 1e-12 * max).count();
        assert_eq!(zeros, 3);
        assert!(eig.iter().all(|&l| l > -1e-12 * max));
        let translation = SVector::<f64, 8>::from_fn(|i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
        assert!((k * translation).norm() < 1e-12 * max);
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let d = Material::new(1.0, 0.2).unwrap().stiffness();
        let flipped = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        assert!(matches!(isoparametric_stiffness(&flipped, &d), Err(Error::DegenerateElement(_))));
        let collapsed = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        assert!(isoparametric_stiffness(&collapsed, &d).is_err());
    }

    #[test]
    fn body_load_sums_to_resultant() {
        let f = square_body_load([1.0, 2.0], 0.5, &|x, y| [x, 2.0 * y]);
        let fx: f64 = f.iter().step_by(2).sum();
        let fy: f64 = f.iter().skip(1).step_by(2).sum();
        // ∫x dA and ∫2y dA over [1,1.5]x[2,2.5]
        assert_relative_eq!(fx, 0.25 * 1.25, epsilon = 1e-14);
        assert_relative_eq!(fy, 0.25 * 2.0 * 2.25, epsilon = 1e-14);
    }
}
