//! Continuous Lagrange spaces on a mesh.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::fe::{ElementKind, ReferenceElement};
use crate::mesh::Mesh;

/// Continuous Lagrange space whose basis functions sit on a subset of the
/// mesh nodes: all of them (solution order equal to geometry order) or the
/// element vertices only (order 1 on higher-order geometry, as for the
/// pressure of a Taylor-Hood pair).
#[derive(Clone, Debug)]
pub struct FunctionSpace {
    order: usize,
    nodes: Vec<usize>,
    /// Per element, index into `nodes` of each local basis function.
    element_dofs: Vec<Vec<usize>>,
    /// Per element, mesh-local position of each basis function's node.
    element_local: Vec<Vec<usize>>,
}

impl FunctionSpace {
    /// Space of the same order as the mesh geometry.
    pub fn geometric(mesh: &Mesh) -> Result<Self> {
        let order = mesh
            .elements()
            .first()
            .map(|e| e.order)
            .ok_or_else(|| Error::Topology("mesh has no elements".into()))?;
        FunctionSpace::new(mesh, order)
    }

    pub fn new(mesh: &Mesh, order: usize) -> Result<Self> {
        let mut vertex_cache: HashMap<(ElementKind, usize), Vec<usize>> = HashMap::new();
        let mut element_local = Vec::with_capacity(mesh.elements().len());
        for (e, el) in mesh.elements().iter().enumerate() {
            let local: Vec<usize> = if el.order == order {
                (0..el.nodes.len()).collect()
            } else if order == 1 {
                if !vertex_cache.contains_key(&(el.kind, el.order)) {
                    let r = ReferenceElement::new(el.kind, el.order)?;
                    vertex_cache.insert((el.kind, el.order), r.vertex_nodes());
                }
                vertex_cache[&(el.kind, el.order)].clone()
            } else {
                return Err(Error::Config(format!(
                    "element {e}: order-{order} space on order-{} geometry is not supported",
                    el.order
                )));
            };
            element_local.push(local);
        }
        let set: BTreeSet<usize> = mesh
            .elements()
            .iter()
            .zip(&element_local)
            .flat_map(|(el, local)| local.iter().map(move |&l| el.nodes[l]))
            .collect();
        let nodes: Vec<usize> = set.into_iter().collect();
        let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let element_dofs = mesh
            .elements()
            .iter()
            .zip(&element_local)
            .map(|(el, local)| local.iter().map(|&l| index[&el.nodes[l]]).collect())
            .collect();
        Ok(FunctionSpace {
            order,
            nodes,
            element_dofs,
            element_local,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Mesh node ids carrying a basis function, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        &self.element_dofs[e]
    }

    /// Positions within the element's node list of this space's nodes.
    pub fn element_local(&self, e: usize) -> &[usize] {
        &self.element_local[e]
    }

    pub fn index_of(&self, mesh_node: usize) -> Option<usize> {
        self.nodes.binary_search(&mesh_node).ok()
    }

    pub fn coordinates(&self, mesh: &Mesh) -> Vec<Vec<f64>> {
        self.nodes
            .iter()
            .map(|&n| mesh.nodes()[n][..mesh.dim()].to_vec())
            .collect()
    }
}
