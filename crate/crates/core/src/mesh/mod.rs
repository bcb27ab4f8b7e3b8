//! Unstructured meshes: nodes, elements, tagged boundary facets.

pub mod dofs;
pub mod generate;
pub mod graph;
pub mod io;

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::fe::{ElementKind, ReferenceElement};

pub use dofs::{BcTarget, DofMap, DofRole, EssentialBc, Observation, Profile, TrainableBc};
pub use graph::GraphOperators;

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub kind: ElementKind,
    pub order: usize,
    pub nodes: Vec<usize>,
}

/// A boundary facet carrying a tag, given by its node ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    pub tag: String,
    pub nodes: Vec<usize>,
}

/// Element and local face index a facet belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FacetOwner {
    pub element: usize,
    pub face: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 3]>,
    elements: Vec<Element>,
    facets: Vec<Facet>,
    owners: Vec<FacetOwner>,
}

impl Mesh {
    /// Builds a mesh and checks its topology: node indices in range, node
    /// counts consistent with element kind and order, every facet a face of
    /// exactly one element.
    pub fn new(dim: usize, nodes: Vec<[f64; 3]>, elements: Vec<Element>, facets: Vec<Facet>) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Topology(format!("unsupported dimension {dim}")));
        }
        if nodes.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
            return Err(Error::Topology("non-finite node coordinate".into()));
        }
        let mut references: HashMap<(ElementKind, usize), ReferenceElement> = HashMap::new();
        for (e, el) in elements.iter().enumerate() {
            if el.kind.dim() != dim {
                return Err(Error::Topology(format!(
                    "element {e} is a {} in a {dim}-d mesh",
                    el.kind
                )));
            }
            if !references.contains_key(&(el.kind, el.order)) {
                references.insert((el.kind, el.order), ReferenceElement::new(el.kind, el.order)?);
            }
            let expected = el.kind.node_count(el.order);
            if el.nodes.len() != expected {
                return Err(Error::Topology(format!(
                    "element {e} has {} nodes, order-{} {} needs {expected}",
                    el.nodes.len(),
                    el.order,
                    el.kind
                )));
            }
            if let Some(&bad) = el.nodes.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::Topology(format!(
                    "element {e} references node {bad}, mesh has {}",
                    nodes.len()
                )));
            }
        }
        let mut elements_of: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for (e, el) in elements.iter().enumerate() {
            for &n in &el.nodes {
                elements_of[n].push(e);
            }
        }
        let mut owners = Vec::with_capacity(facets.len());
        for (f, facet) in facets.iter().enumerate() {
            if facet.tag.is_empty() {
                return Err(Error::Topology(format!("facet {f} has an empty tag")));
            }
            if let Some(&bad) = facet.nodes.iter().find(|&&n| n >= nodes.len()) {
                return Err(Error::Topology(format!("facet {f} references node {bad}")));
            }
            let wanted: BTreeSet<usize> = facet.nodes.iter().copied().collect();
            let mut found = Vec::new();
            let first = facet.nodes.first().copied().unwrap_or(usize::MAX);
            for &e in elements_of.get(first).map_or(&[][..], |v| &v[..]) {
                let el = &elements[e];
                let reference = &references[&(el.kind, el.order)];
                for (k, face) in reference.faces().iter().enumerate() {
                    let have: BTreeSet<usize> = face.nodes.iter().map(|&l| el.nodes[l]).collect();
                    if have == wanted && face.nodes.len() == facet.nodes.len() {
                        found.push(FacetOwner { element: e, face: k });
                    }
                }
            }
            match found.len() {
                1 => owners.push(found[0]),
                0 => {
                    return Err(Error::Topology(format!(
                        "facet {f} ({}) is not a face of any element",
                        facet.tag
                    )))
                }
                k => {
                    return Err(Error::Topology(format!(
                        "facet {f} ({}) is shared by {k} elements, so it is not on the boundary",
                        facet.tag
                    )))
                }
            }
        }
        Ok(Mesh {
            dim,
            nodes,
            elements,
            facets,
            owners,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet_owner(&self, facet: usize) -> FacetOwner {
        self.owners[facet]
    }

    pub fn element_coords(&self, e: usize) -> Vec<[f64; 3]> {
        self.elements[e].nodes.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Distinct tags in sorted order.
    pub fn tags(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.facets.iter().map(|f| f.tag.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.facets.iter().any(|f| f.tag == tag)
    }

    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = usize> + 'a {
        (0..self.facets.len()).filter(move |&f| self.facets[f].tag == tag)
    }

    /// Sorted, deduplicated ids of all nodes on facets with this tag.
    pub fn nodes_with_tag(&self, tag: &str) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .facets_with_tag(tag)
            .flat_map(|f| self.facets[f].nodes.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Node closest to `point`.
    pub fn nearest_node(&self, point: &[f64; 3]) -> usize {
        let dist = |x: &[f64; 3]| (0..3).map(|k| (x[k] - point[k]).powi(2)).sum::<f64>();
        (0..self.nodes.len())
            .min_by(|&a, &b| dist(&self.nodes[a]).total_cmp(&dist(&self.nodes[b])))
            .expect("mesh has nodes")
    }

    /// Same mesh with elements reordered: new element `i` is old `perm[i]`.
    pub fn with_element_order(&self, perm: &[usize]) -> Result<Mesh> {
        let elements = perm.iter().map(|&p| self.elements[p].clone()).collect();
        Mesh::new(self.dim, self.nodes.clone(), elements, self.facets.clone())
    }

    /// Lowest and highest coordinate along each axis.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for x in &self.nodes {
            for k in 0..3 {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_q1() -> (Vec<[f64; 3]>, Vec<Element>) {
        let nodes = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        let elements = vec![Element {
            kind: ElementKind::Quadrilateral,
            order: 1,
            nodes: vec![0, 1, 2, 3],
        }];
        (nodes, elements)
    }

    #[test]
    fn facet_owner_resolved() {
        let (nodes, elements) = unit_square_q1();
        let facets = vec![
            Facet { tag: "right".into(), nodes: vec![3, 1] },
            Facet { tag: "bottom".into(), nodes: vec![0, 1] },
        ];
        let mesh = Mesh::new(2, nodes, elements, facets).unwrap();
        assert_eq!(mesh.facet_owner(0), FacetOwner { element: 0, face: 1 });
        assert_eq!(mesh.facet_owner(1), FacetOwner { element: 0, face: 0 });
        assert_eq!(mesh.tags(), vec!["bottom".to_string(), "right".to_string()]);
        assert_eq!(mesh.nodes_with_tag("right"), vec![1, 3]);
    }

    #[test]
    fn bad_topology_rejected() {
        let (nodes, elements) = unit_square_q1();
        let diagonal = vec![Facet { tag: "d".into(), nodes: vec![0, 3] }];
        assert!(Mesh::new(2, nodes.clone(), elements.clone(), diagonal).is_err());
        let mut bad = elements.clone();
        bad[0].nodes[2] = 9;
        assert!(Mesh::new(2, nodes.clone(), bad, vec![]).is_err());
        let mut short = elements.clone();
        short[0].nodes.pop();
        assert!(Mesh::new(2, nodes.clone(), short, vec![]).is_err());
        let untagged = vec![Facet { tag: String::new(), nodes: vec![0, 1] }];
        assert!(Mesh::new(2, nodes, elements, untagged).is_err());
    }

    #[test]
    fn interior_facet_rejected() {
        let nodes = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        let t = |n: [usize; 3]| Element {
            kind: ElementKind::Simplex,
            order: 1,
            nodes: n.to_vec(),
        };
        let elements = vec![t([0, 1, 2]), t([1, 3, 2])];
        let shared = vec![Facet { tag: "x".into(), nodes: vec![1, 2] }];
        let err = Mesh::new(2, nodes, elements, shared).unwrap_err();
        assert!(err.to_string().contains("shared by 2"));
    }
}
