use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric shape of an element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementKind {
    Quadrilateral,
    Simplex,
    Hexahedron,
}

impl ElementKind {
    pub fn dim(self) -> usize {
        match self {
            ElementKind::Quadrilateral | ElementKind::Simplex => 2,
            ElementKind::Hexahedron => 3,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ElementKind::Quadrilateral => "quad",
            ElementKind::Simplex => "simplex",
            ElementKind::Hexahedron => "hex",
        }
    }

    pub fn parse(word: &str) -> Option<Self> {
        match word {
            "quad" | "quadrilateral" => Some(ElementKind::Quadrilateral),
            "simplex" | "tri" | "triangle" => Some(ElementKind::Simplex),
            "hex" | "hexahedron" => Some(ElementKind::Hexahedron),
            _ => None,
        }
    }

    /// Number of Lagrange nodes of the given order.
    pub fn node_count(self, order: usize) -> usize {
        match self {
            ElementKind::Quadrilateral => (order + 1).pow(2),
            ElementKind::Hexahedron => (order + 1).pow(3),
            ElementKind::Simplex => (order + 1) * (order + 2) / 2,
        }
    }

    /// Measure of the reference domain.
    pub fn measure(self) -> f64 {
        match self {
            ElementKind::Quadrilateral => 4.0,
            ElementKind::Hexahedron => 8.0,
            ElementKind::Simplex => 0.5,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// One face of a reference element, parametrized over the unit facet
/// `s in [0,1]^(d-1)` as `xi = origin + sum_i s_i axes[i]`.
#[derive(Clone, Debug)]
pub struct ReferenceFace {
    pub nodes: Vec<usize>,
    pub origin: [f64; 3],
    pub axes: Vec<[f64; 3]>,
    /// Unit outward normal in reference coordinates.
    pub normal: [f64; 3],
}

impl ReferenceFace {
    pub fn point(&self, s: &[f64]) -> [f64; 3] {
        let mut xi = self.origin;
        for (a, &si) in self.axes.iter().zip(s) {
            for k in 0..3 {
                xi[k] += si * a[k];
            }
        }
        xi
    }
}

/// Basis values and reference-coordinate gradients at one point.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 3]>,
}

/// Lagrange element on equispaced nodes.
///
/// Node ordering: quadrilaterals and hexahedra are lexicographic with the
/// first reference coordinate fastest (`i + (p+1) j + (p+1)^2 k`, node
/// `xi_i = -1 + 2 i / p`); triangles list `(i/p, j/p)` for `i + j <= p` with
/// `j` outer and `i` inner, so the order-1 triangle is `(0,0), (1,0), (0,1)`.
#[derive(Clone, Debug)]
pub struct ReferenceElement {
    kind: ElementKind,
    order: usize,
    nodes: Vec<[f64; 3]>,
    faces: Vec<ReferenceFace>,
    /// Monomial coefficients of each basis function (triangles only).
    simplex_coeffs: Option<DMatrix<f64>>,
}

const INSIDE_TOL: f64 = 1e-12;

impl ReferenceElement {
    pub fn new(kind: ElementKind, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::Config(format!("unsupported {kind} order {order}")));
        }
        let p = order;
        let x1d: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();
        let nodes: Vec<[f64; 3]> = match kind {
            ElementKind::Quadrilateral => (0..=p)
                .flat_map(|j| (0..=p).map(move |i| (i, j)))
                .map(|(i, j)| [x1d[i], x1d[j], 0.0])
                .collect(),
            ElementKind::Hexahedron => (0..=p)
                .flat_map(|k| (0..=p).flat_map(move |j| (0..=p).map(move |i| (i, j, k))))
                .map(|(i, j, k)| [x1d[i], x1d[j], x1d[k]])
                .collect(),
            ElementKind::Simplex => (0..=p)
                .flat_map(|j| (0..=p - j).map(move |i| (i, j)))
                .map(|(i, j)| [i as f64 / p as f64, j as f64 / p as f64, 0.0])
                .collect(),
        };
        let simplex_coeffs = if kind == ElementKind::Simplex {
            let exps = simplex_exponents(p);
            let n = nodes.len();
            let v = DMatrix::from_fn(n, n, |i, m| {
                let (a, b) = exps[m];
                nodes[i][0].powi(a as i32) * nodes[i][1].powi(b as i32)
            });
            Some(
                v.try_inverse()
                    .ok_or_else(|| Error::Singular("simplex Vandermonde matrix".into()))?,
            )
        } else {
            None
        };
        let mut element = ReferenceElement {
            kind,
            order,
            nodes,
            faces: Vec::new(),
            simplex_coeffs,
        };
        element.faces = element.build_faces();
        Ok(element)
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn faces(&self) -> &[ReferenceFace] {
        &self.faces
    }

    pub fn contains(&self, xi: &[f64; 3]) -> bool {
        let d = self.dim();
        match self.kind {
            ElementKind::Quadrilateral | ElementKind::Hexahedron => {
                xi[..d].iter().all(|x| x.abs() <= 1.0 + INSIDE_TOL)
            }
            ElementKind::Simplex => {
                xi[0] >= -INSIDE_TOL && xi[1] >= -INSIDE_TOL && xi[0] + xi[1] <= 1.0 + INSIDE_TOL
            }
        }
    }

    /// Basis values and reference gradients at `xi`, which must lie in the
    /// reference domain.
    pub fn eval(&self, xi: &[f64; 3]) -> Result<BasisEval> {
        if !self.contains(xi) {
            return Err(Error::OutsideReference {
                point: xi[..self.dim()].to_vec(),
            });
        }
        Ok(self.eval_unchecked(xi))
    }

    pub fn eval_unchecked(&self, xi: &[f64; 3]) -> BasisEval {
        match self.kind {
            ElementKind::Quadrilateral | ElementKind::Hexahedron => self.eval_tensor(xi),
            ElementKind::Simplex => self.eval_simplex(xi),
        }
    }

    fn eval_tensor(&self, xi: &[f64; 3]) -> BasisEval {
        let p = self.order;
        let d = self.dim();
        let nodes1d: Vec<f64> = (0..=p).map(|i| -1.0 + 2.0 * i as f64 / p as f64).collect();
        let per_axis: Vec<(Vec<f64>, Vec<f64>)> = (0..d).map(|a| lagrange_1d(&nodes1d, xi[a])).collect();
        let n = self.nodes.len();
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0; 3]; n];
        for node in 0..n {
            let mut idx = [0usize; 3];
            let mut rest = node;
            for slot in idx.iter_mut().take(d) {
                *slot = rest % (p + 1);
                rest /= p + 1;
            }
            let mut v = 1.0;
            for a in 0..d {
                v *= per_axis[a].0[idx[a]];
            }
            values[node] = v;
            for g in 0..d {
                let mut dv = 1.0;
                for a in 0..d {
                    dv *= if a == g { per_axis[a].1[idx[a]] } else { per_axis[a].0[idx[a]] };
                }
                grads[node][g] = dv;
            }
        }
        BasisEval { values, grads }
    }

    fn eval_simplex(&self, xi: &[f64; 3]) -> BasisEval {
        let coeffs = self.simplex_coeffs.as_ref().expect("simplex coefficients");
        let exps = simplex_exponents(self.order);
        let (x, y) = (xi[0], xi[1]);
        let pw = |b: f64, e: usize| if e == 0 { 1.0 } else { b.powi(e as i32) };
        let mono: Vec<f64> = exps.iter().map(|&(a, b)| pw(x, a) * pw(y, b)).collect();
        let dmono_x: Vec<f64> = exps
            .iter()
            .map(|&(a, b)| if a == 0 { 0.0 } else { a as f64 * pw(x, a - 1) * pw(y, b) })
            .collect();
        let dmono_y: Vec<f64> = exps
            .iter()
            .map(|&(a, b)| if b == 0 { 0.0 } else { b as f64 * pw(x, a) * pw(y, b - 1) })
            .collect();
        let n = self.nodes.len();
        let mut values = vec![0.0; n];
        let mut grads = vec![[0.0; 3]; n];
        for k in 0..n {
            for m in 0..n {
                let c = coeffs[(m, k)];
                values[k] += c * mono[m];
                grads[k][0] += c * dmono_x[m];
                grads[k][1] += c * dmono_y[m];
            }
        }
        BasisEval { values, grads }
    }

    fn nodes_where(&self, pred: impl Fn(&[f64; 3]) -> bool) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| pred(&self.nodes[i])).collect()
    }

    fn build_faces(&self) -> Vec<ReferenceFace> {
        let on = |v: f64, target: f64| (v - target).abs() < 1e-12;
        match self.kind {
            ElementKind::Quadrilateral => vec![
                ReferenceFace {
                    nodes: self.nodes_where(|x| on(x[1], -1.0)),
                    origin: [-1.0, -1.0, 0.0],
                    axes: vec![[2.0, 0.0, 0.0]],
                    normal: [0.0, -1.0, 0.0],
                },
                ReferenceFace {
                    nodes: self.nodes_where(|x| on(x[0], 1.0)),
                    origin: [1.0, -1.0, 0.0],
                    axes: vec![[0.0, 2.0, 0.0]],
                    normal: [1.0, 0.0, 0.0],
                },
                ReferenceFace {
                    nodes: self.nodes_where(|x| on(x[1], 1.0)),
                    origin: [-1.0, 1.0, 0.0],
                    axes: vec![[2.0, 0.0, 0.0]],
                    normal: [0.0, 1.0, 0.0],
                },
                ReferenceFace {
                    nodes: self.nodes_where(|x| on(x[0], -1.0)),
                    origin: [-1.0, -1.0, 0.0],
                    axes: vec![[0.0, 2.0, 0.0]],
                    normal: [-1.0, 0.0, 0.0],
                },
            ],
            ElementKind::Simplex => {
                let r = std::f64::consts::FRAC_1_SQRT_2;
                vec![
                    ReferenceFace {
                        nodes: self.nodes_where(|x| on(x[1], 0.0)),
                        origin: [0.0, 0.0, 0.0],
                        axes: vec![[1.0, 0.0, 0.0]],
                        normal: [0.0, -1.0, 0.0],
                    },
                    ReferenceFace {
                        nodes: self.nodes_where(|x| on(x[0] + x[1], 1.0)),
                        origin: [1.0, 0.0, 0.0],
                        axes: vec![[-1.0, 1.0, 0.0]],
                        normal: [r, r, 0.0],
                    },
                    ReferenceFace {
                        nodes: self.nodes_where(|x| on(x[0], 0.0)),
                        origin: [0.0, 0.0, 0.0],
                        axes: vec![[0.0, 1.0, 0.0]],
                        normal: [-1.0, 0.0, 0.0],
                    },
                ]
            }
            ElementKind::Hexahedron => {
                let mut faces = Vec::with_capacity(6);
                for axis in 0..3 {
                    for side in [-1.0, 1.0] {
                        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                        let mut origin = [-1.0; 3];
                        origin[axis] = side;
                        let mut ea = [0.0; 3];
                        ea[a] = 2.0;
                        let mut eb = [0.0; 3];
                        eb[b] = 2.0;
                        let mut normal = [0.0; 3];
                        normal[axis] = side;
                        faces.push(ReferenceFace {
                            nodes: self.nodes_where(|x| on(x[axis], side)),
                            origin,
                            axes: vec![ea, eb],
                            normal,
                        });
                    }
                }
                faces
            }
        }
    }

    /// Local indices of the order-1 vertex nodes.
    pub fn vertex_nodes(&self) -> Vec<usize> {
        let lower = ReferenceElement::new(self.kind, 1).expect("order 1 exists");
        lower
            .nodes
            .iter()
            .map(|v| self.local_index_of(v).expect("vertices are nodes"))
            .collect()
    }

    pub fn local_index_of(&self, xi: &[f64; 3]) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| (0..3).all(|k| (n[k] - xi[k]).abs() < 1e-12))
    }
}

fn simplex_exponents(p: usize) -> Vec<(usize, usize)> {
    (0..=p)
        .flat_map(|total| (0..=total).map(move |b| (total - b, b)))
        .collect()
}

/// Values and derivatives of the 1-D Lagrange polynomials on `nodes` at `x`.
fn lagrange_1d(nodes: &[f64], x: f64) -> (Vec<f64>, Vec<f64>) {
    let n = nodes.len();
    let mut values = vec![0.0; n];
    let mut derivs = vec![0.0; n];
    for i in 0..n {
        let mut v = 1.0;
        for m in 0..n {
            if m != i {
                v *= (x - nodes[m]) / (nodes[i] - nodes[m]);
            }
        }
        values[i] = v;
        let mut d = 0.0;
        for skip in 0..n {
            if skip == i {
                continue;
            }
            let mut term = 1.0 / (nodes[i] - nodes[skip]);
            for m in 0..n {
                if m != i && m != skip {
                    term *= (x - nodes[m]) / (nodes[i] - nodes[m]);
                }
            }
            d += term;
        }
        derivs[i] = d;
    }
    (values, derivs)
}
