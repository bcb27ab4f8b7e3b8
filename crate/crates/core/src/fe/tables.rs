//! Basis values and gradients tabulated at every quadrature point of the
//! mesh, stored as sparse interpolation operators.

use std::collections::HashMap;

use crate::error::Result;
use crate::fe::geometry::{face_measure, map_with};
use crate::fe::quadrature::{facet_rule, volume_rule};
use crate::fe::{BasisEval, ElementKind, FunctionSpace, ReferenceElement};
use crate::mesh::Mesh;
use crate::tensor::CsrMatrix;

/// Interpolation from one space's nodal coefficients to quadrature points:
/// `values * U` gives `u` and `grads[j] * U` gives `du/dx_j` at each point.
#[derive(Clone, Debug)]
pub struct SpaceTables {
    pub values: CsrMatrix,
    pub grads: Vec<CsrMatrix>,
}

/// Volume quadrature of the whole mesh. Points are ordered element by
/// element; every space shares the same points.
#[derive(Clone, Debug)]
pub struct QuadratureTables {
    pub dim: usize,
    pub points: Vec<[f64; 3]>,
    /// `det J * beta` at each point.
    pub weights: Vec<f64>,
    pub element_of: Vec<usize>,
    pub spaces: Vec<SpaceTables>,
}

struct ReferenceCache {
    references: HashMap<(ElementKind, usize), ReferenceElement>,
}

impl ReferenceCache {
    fn new() -> Self {
        ReferenceCache {
            references: HashMap::new(),
        }
    }

    fn get(&mut self, kind: ElementKind, order: usize) -> Result<&ReferenceElement> {
        if !self.references.contains_key(&(kind, order)) {
            self.references.insert((kind, order), ReferenceElement::new(kind, order)?);
        }
        Ok(&self.references[&(kind, order)])
    }
}

impl QuadratureTables {
    pub fn build(mesh: &Mesh, spaces: &[&FunctionSpace], degree: usize) -> Result<Self> {
        let dim = mesh.dim();
        let mut cache = ReferenceCache::new();
        // Basis evaluations at the reference rule points, keyed by
        // (kind, order): the same for every element of that kind.
        let mut evals: HashMap<(ElementKind, usize), Vec<BasisEval>> = HashMap::new();
        let mut rules = HashMap::new();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut element_of = Vec::new();
        let mut triplets: Vec<Vec<Vec<(usize, usize, f64)>>> = vec![vec![Vec::new(); dim + 1]; spaces.len()];
        for (e, el) in mesh.elements().iter().enumerate() {
            if !rules.contains_key(&el.kind) {
                rules.insert(el.kind, volume_rule(el.kind, degree)?);
            }
            let rule = &rules[&el.kind];
            let mut orders = vec![el.order];
            orders.extend(spaces.iter().map(|s| s.order()));
            for &order in &orders {
                if !evals.contains_key(&(el.kind, order)) {
                    let r = cache.get(el.kind, order)?;
                    let table = rule.points.iter().map(|xi| r.eval_unchecked(xi)).collect();
                    evals.insert((el.kind, order), table);
                }
            }
            let coords = mesh.element_coords(e);
            let geometry = &evals[&(el.kind, el.order)];
            for (qi, beta) in rule.weights.iter().enumerate() {
                let mapped = map_with(dim, &coords, &geometry[qi], e)?;
                let q = points.len();
                points.push(mapped.x);
                weights.push(mapped.det * beta);
                element_of.push(e);
                for (s, space) in spaces.iter().enumerate() {
                    let basis = &evals[&(el.kind, space.order())][qi];
                    for (a, &dof) in space.element_dofs(e).iter().enumerate() {
                        triplets[s][0].push((q, dof, basis.values[a]));
                        let g = mapped.physical_gradient(dim, &basis.grads[a]);
                        for j in 0..dim {
                            triplets[s][j + 1].push((q, dof, g[j]));
                        }
                    }
                }
            }
        }
        let n_points = points.len();
        let spaces = spaces
            .iter()
            .zip(triplets)
            .map(|(space, trip)| {
                let n = space.n_nodes();
                let mut mats = trip
                    .iter()
                    .map(|t| CsrMatrix::from_triplets(n_points, n, t))
                    .collect::<Result<Vec<_>>>()?;
                let values = mats.remove(0);
                Ok(SpaceTables { values, grads: mats })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuadratureTables {
            dim,
            points,
            weights,
            element_of,
            spaces,
        })
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// One surface quadrature point of a boundary facet.
#[derive(Clone, Debug)]
pub struct SurfacePoint {
    pub x: [f64; 3],
    pub normal: [f64; 3],
    /// Surface Jacobian times the facet rule weight.
    pub weight: f64,
    /// `(space node index, basis value)` for the owning element's basis.
    pub basis: Vec<(usize, f64)>,
}

/// Quadrature points on one boundary facet with outward normals and the
/// basis of `space` evaluated there.
pub fn surface_points(mesh: &Mesh, facet: usize, space: &FunctionSpace, degree: usize) -> Result<Vec<SurfacePoint>> {
    let dim = mesh.dim();
    let owner = mesh.facet_owner(facet);
    let el = &mesh.elements()[owner.element];
    let geometry = ReferenceElement::new(el.kind, el.order)?;
    let basis_ref = ReferenceElement::new(el.kind, space.order())?;
    let face = &geometry.faces()[owner.face];
    let rule = facet_rule(dim, degree)?;
    let coords = mesh.element_coords(owner.element);
    let mut out = Vec::with_capacity(rule.len());
    for (s, beta) in rule.points.iter().zip(&rule.weights) {
        let xi = face.point(&s[..dim - 1]);
        let g = geometry.eval_unchecked(&xi);
        let mapped = map_with(dim, &coords, &g, owner.element)?;
        let (measure, normal) = face_measure(dim, &mapped, &face.axes, &face.normal);
        let b = basis_ref.eval_unchecked(&xi);
        let basis = space
            .element_dofs(owner.element)
            .iter()
            .zip(&b.values)
            .map(|(&d, &v)| (d, v))
            .collect();
        out.push(SurfacePoint {
            x: mapped.x,
            normal,
            weight: measure * beta,
            basis,
        });
    }
    Ok(out)
}
