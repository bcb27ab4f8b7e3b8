//! Graph built from mesh connectivity and its scaled Laplacian.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::tensor::{CsrMatrix, SparseOp};

/// Adjacency over a subset of mesh nodes: two nodes are neighbours when they
/// belong to a common element.
#[derive(Clone, Debug)]
pub struct GraphOperators {
    nodes: Vec<usize>,
    adjacency: CsrMatrix,
    degree: Vec<f64>,
    /// `-D^{-1/2} A D^{-1/2}`: the normalized Laplacian shifted by `-I`, so
    /// its spectrum lies in `[-1, 1]`.
    scaled_laplacian: CsrMatrix,
}

impl GraphOperators {
    /// `nodes` lists the mesh nodes carrying unknowns; graph vertex `i` is
    /// mesh node `nodes[i]`.
    pub fn build(mesh: &Mesh, nodes: &[usize]) -> Result<Self> {
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        if local.len() != nodes.len() {
            return Err(Error::Topology("graph node list has duplicates".into()));
        }
        if let Some(&bad) = nodes.iter().find(|&&n| n >= mesh.n_nodes()) {
            return Err(Error::Topology(format!("graph node {bad} is not a mesh node")));
        }
        let n = nodes.len();
        let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for el in mesh.elements() {
            let members: Vec<usize> = el.nodes.iter().filter_map(|m| local.get(m).copied()).collect();
            for &a in &members {
                for &b in &members {
                    if a != b {
                        neighbours[a].insert(b);
                    }
                }
            }
        }
        if let Some(i) = neighbours.iter().position(BTreeSet::is_empty) {
            return Err(Error::Topology(format!(
                "mesh node {} has no neighbours in the graph",
                nodes[i]
            )));
        }
        let degree: Vec<f64> = neighbours.iter().map(|s| s.len() as f64).collect();
        let mut adj = Vec::new();
        let mut lap = Vec::new();
        for (i, set) in neighbours.iter().enumerate() {
            for &j in set {
                adj.push((i, j, 1.0));
                lap.push((i, j, -1.0 / (degree[i] * degree[j]).sqrt()));
            }
        }
        Ok(GraphOperators {
            nodes: nodes.to_vec(),
            adjacency: CsrMatrix::from_triplets(n, n, &adj)?,
            degree,
            scaled_laplacian: CsrMatrix::from_triplets(n, n, &lap)?,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn mesh_nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn scaled_laplacian(&self) -> &CsrMatrix {
        &self.scaled_laplacian
    }

    pub fn scaled_laplacian_op(&self) -> Arc<SparseOp> {
        Arc::new(SparseOp::new(self.scaled_laplacian.clone()))
    }

    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        self.adjacency.row(i).map(|(j, _)| j).collect()
    }
}
