//! Isoparametric maps from reference to physical elements.

use crate::error::{Error, Result};
use crate::fe::reference::{BasisEval, ReferenceElement};

pub type Mat3 = [[f64; 3]; 3];

/// The isoparametric map evaluated at one reference point.
#[derive(Clone, Debug)]
pub struct MappedPoint {
    pub x: [f64; 3],
    /// `jac[i][j] = d x_i / d xi_j`.
    pub jac: Mat3,
    pub det: f64,
    pub inv: Mat3,
}

impl MappedPoint {
    /// Physical gradient `J^{-T} grad_xi` of a reference gradient.
    pub fn physical_gradient(&self, dim: usize, g: &[f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, slot) in out.iter_mut().enumerate().take(dim) {
            *slot = (0..dim).map(|j| self.inv[j][i] * g[j]).sum();
        }
        out
    }
}

/// Maps `xi` with the geometry basis already evaluated there. `element` is
/// only used for error reporting.
pub fn map_with(dim: usize, coords: &[[f64; 3]], basis: &BasisEval, element: usize) -> Result<MappedPoint> {
    let mut x = [0.0; 3];
    let mut jac = [[0.0; 3]; 3];
    for (a, c) in coords.iter().enumerate() {
        for i in 0..dim {
            x[i] += basis.values[a] * c[i];
            for j in 0..dim {
                jac[i][j] += c[i] * basis.grads[a][j];
            }
        }
    }
    let (det, inv) = invert(dim, &jac);
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::InvertedElement { element, det });
    }
    Ok(MappedPoint { x, jac, det, inv })
}

pub fn map_point(
    reference: &ReferenceElement,
    coords: &[[f64; 3]],
    xi: &[f64; 3],
    element: usize,
) -> Result<MappedPoint> {
    let basis = reference.eval(xi)?;
    map_with(reference.dim(), coords, &basis, element)
}

fn invert(dim: usize, m: &Mat3) -> (f64, Mat3) {
    let mut inv = [[0.0; 3]; 3];
    if dim == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        inv[0][0] = m[1][1] / det;
        inv[0][1] = -m[0][1] / det;
        inv[1][0] = -m[1][0] / det;
        inv[1][1] = m[0][0] / det;
        return (det, inv);
    }
    let c = |i: usize, j: usize| {
        let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
        let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
        m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = c(j, i) / det;
        }
    }
    (det, inv)
}

/// Surface measure density and unit outward normal on a face, given the
/// mapped point and the face parametrization axes in reference coordinates.
pub fn face_measure(dim: usize, mapped: &MappedPoint, axes: &[[f64; 3]], ref_normal: &[f64; 3]) -> (f64, [f64; 3]) {
    let tangent = |a: &[f64; 3]| {
        let mut t = [0.0; 3];
        for (i, slot) in t.iter_mut().enumerate().take(dim) {
            *slot = (0..dim).map(|j| mapped.jac[i][j] * a[j]).sum();
        }
        t
    };
    let mut n = if dim == 2 {
        let t = tangent(&axes[0]);
        [t[1], -t[0], 0.0]
    } else {
        let t1 = tangent(&axes[0]);
        let t2 = tangent(&axes[1]);
        [
            t1[1] * t2[2] - t1[2] * t2[1],
            t1[2] * t2[0] - t1[0] * t2[2],
            t1[0] * t2[1] - t1[1] * t2[0],
        ]
    };
    let measure = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in n.iter_mut() {
        *v /= measure;
    }
    let outward = mapped.physical_gradient(dim, ref_normal);
    let dot: f64 = (0..dim).map(|i| n[i] * outward[i]).sum();
    if dot < 0.0 {
        for v in n.iter_mut() {
            *v = -*v;
        }
    }
    (measure, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fe::reference::ElementKind;

    #[test]
    fn affine_quad_jacobian() {
        let q1 = ReferenceElement::new(ElementKind::Quadrilateral, 1).unwrap();
        let coords = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 1.0, 0.0]];
        let m = map_point(&q1, &coords, &[0.0, 0.0, 0.0], 0).unwrap();
        assert!((m.det - 0.5).abs() < 1e-15);
        assert!((m.x[0] - 1.0).abs() < 1e-15 && (m.x[1] - 0.5).abs() < 1e-15);
        let g = m.physical_gradient(2, &[1.0, 1.0, 0.0]);
        assert!((g[0] - 1.0).abs() < 1e-15 && (g[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn inverted_element_rejected() {
        let q1 = ReferenceElement::new(ElementKind::Quadrilateral, 1).unwrap();
        let coords = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        let err = map_point(&q1, &coords, &[0.0, 0.0, 0.0], 7).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { element: 7, .. }));
    }

    #[test]
    fn hex_inverse_is_inverse() {
        let h1 = ReferenceElement::new(ElementKind::Hexahedron, 1).unwrap();
        let coords: Vec<[f64; 3]> = h1
            .nodes()
            .iter()
            .map(|x| {
                [
                    1.0 + 0.5 * x[0] + 0.1 * x[1],
                    0.7 * x[1] + 0.05 * x[0] * x[2],
                    2.0 * x[2] - 0.2 * x[0],
                ]
            })
            .collect();
        let m = map_point(&h1, &coords, &[0.2, -0.3, 0.6], 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| m.jac[i][k] * m.inv[k][j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((prod - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn face_normals_point_outward() {
        let q1 = ReferenceElement::new(ElementKind::Quadrilateral, 1).unwrap();
        let coords = [[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 2.0, 0.0], [3.0, 2.0, 0.0]];
        let expected = [[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]];
        let lengths = [3.0, 2.0, 3.0, 2.0];
        for (f, face) in q1.faces().iter().enumerate() {
            let xi = face.point(&[0.3]);
            let m = map_point(&q1, &coords, &xi, 0).unwrap();
            let (meas, n) = face_measure(2, &m, &face.axes, &face.normal);
            assert!((meas - lengths[f]).abs() < 1e-14);
            assert!((n[0] - expected[f][0]).abs() < 1e-14 && (n[1] - expected[f][1]).abs() < 1e-14);
        }
        let h1 = ReferenceElement::new(ElementKind::Hexahedron, 1).unwrap();
        let coords: Vec<[f64; 3]> = h1.nodes().to_vec();
        for face in h1.faces() {
            let m = map_point(&h1, &coords, &face.point(&[0.5, 0.5]), 0).unwrap();
            let (meas, n) = face_measure(3, &m, &face.axes, &face.normal);
            assert!((meas - 4.0).abs() < 1e-14);
            for k in 0..3 {
                assert!((n[k] - face.normal[k]).abs() < 1e-14);
            }
        }
        let t1 = ReferenceElement::new(ElementKind::Simplex, 1).unwrap();
        let coords = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let hyp = &t1.faces()[1];
        let m = map_point(&t1, &coords, &hyp.point(&[0.5]), 0).unwrap();
        let (meas, n) = face_measure(2, &m, &hyp.axes, &hyp.normal);
        assert!((meas - 2f64.sqrt()).abs() < 1e-14);
        assert!((n[0] - n[1]).abs() < 1e-14 && n[0] > 0.0);
    }
}
