//! Degree-of-freedom numbering and the split into free, prescribed,
//! trainable and observed unknowns.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Spatial profile of a prescribed boundary value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `peak * (1 - ((x[axis] - center) / half_width)^2)`.
    Parabola {
        axis: usize,
        center: f64,
        half_width: f64,
        peak: f64,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn value(&self, x: &[f64; 3]) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::Parabola {
                axis,
                center,
                half_width,
                peak,
            } => {
                let s = (x[axis] - center) / half_width;
                peak * (1.0 - s * s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcTarget {
    /// All nodes of facets carrying this tag.
    Tag(String),
    /// The single node at this location.
    Point([f64; 3]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EssentialBc {
    pub target: BcTarget,
    pub component: usize,
    pub value: Profile,
}

impl EssentialBc {
    pub fn on_tag(tag: &str, component: usize, value: Profile) -> Self {
        EssentialBc {
            target: BcTarget::Tag(tag.to_string()),
            component,
            value,
        }
    }
}

/// Boundary values on a tag that are unknown and learned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainableBc {
    pub tag: String,
    pub components: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub component: usize,
    /// Mesh node id.
    pub node: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DofRole {
    Free,
    Essential,
    TrainableEssential,
    Observed,
}

/// Component-major numbering: the unknowns of component `c` occupy
/// `offset(c)..offset(c) + component_nodes(c).len()` in node-list order.
#[derive(Clone, Debug)]
pub struct DofMap {
    nodes: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    local: Vec<HashMap<usize, usize>>,
    roles: Vec<DofRole>,
    values: Vec<f64>,
}

const POINT_TOL: f64 = 1e-9;

impl DofMap {
    /// All-free numbering for the given per-component mesh node lists.
    pub fn new(component_nodes: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(component_nodes.len());
        let mut total = 0;
        for nodes in &component_nodes {
            offsets.push(total);
            total += nodes.len();
        }
        let local = component_nodes
            .iter()
            .map(|nodes| nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect())
            .collect();
        DofMap {
            nodes: component_nodes,
            offsets,
            local,
            roles: vec![DofRole::Free; total],
            values: vec![0.0; total],
        }
    }

    /// Numbers the unknowns and classifies them. Essential conditions are
    /// applied in order, so where targets overlap the later one wins.
    pub fn build(
        mesh: &Mesh,
        component_nodes: Vec<Vec<usize>>,
        essential: &[EssentialBc],
        trainable: &[TrainableBc],
        observations: &[Observation],
    ) -> Result<Self> {
        let mut map = DofMap::new(component_nodes);
        let n_comp = map.n_components();
        for bc in essential {
            if bc.component >= n_comp {
                return Err(Error::Config(format!(
                    "essential condition on component {} but there are {n_comp}",
                    bc.component
                )));
            }
            let targets: Vec<usize> = match &bc.target {
                BcTarget::Tag(tag) => {
                    if !mesh.has_tag(tag) {
                        return Err(Error::Config(format!("boundary tag `{tag}` is not on the mesh")));
                    }
                    mesh.nodes_with_tag(tag)
                        .into_iter()
                        .filter(|n| map.local[bc.component].contains_key(n))
                        .collect()
                }
                BcTarget::Point(p) => vec![map.node_at(bc.component, mesh, p)?],
            };
            for n in targets {
                let d = map.dof(bc.component, n).expect("filtered to component nodes");
                map.roles[d] = DofRole::Essential;
                map.values[d] = bc.value.value(&mesh.nodes()[n]);
            }
        }
        for tb in trainable {
            if !mesh.has_tag(&tb.tag) {
                return Err(Error::Config(format!("boundary tag `{}` is not on the mesh", tb.tag)));
            }
            let mut count = 0;
            for &c in &tb.components {
                if c >= n_comp {
                    return Err(Error::Config(format!("trainable condition on missing component {c}")));
                }
                let clash = essential
                    .iter()
                    .any(|bc| bc.component == c && bc.target == BcTarget::Tag(tb.tag.clone()));
                if clash {
                    return Err(Error::Config(format!(
                        "tag `{}` component {c} is both prescribed and trainable",
                        tb.tag
                    )));
                }
                for n in mesh.nodes_with_tag(&tb.tag) {
                    if let Some(d) = map.dof(c, n) {
                        if map.roles[d] == DofRole::Free {
                            map.roles[d] = DofRole::TrainableEssential;
                            count += 1;
                        }
                    }
                }
            }
            if count == 0 {
                return Err(Error::Config(format!(
                    "trainable condition on `{}` leaves no unknown boundary values",
                    tb.tag
                )));
            }
        }
        for obs in observations {
            let d = map
                .local
                .get(obs.component)
                .and_then(|l| l.get(&obs.node))
                .map(|&i| map.offsets[obs.component] + i)
                .ok_or_else(|| {
                    Error::Config(format!(
                        "observation at node {} has no unknown for component {}",
                        obs.node, obs.component
                    ))
                })?;
            if !obs.value.is_finite() {
                return Err(Error::Config(format!("observation at node {} is not finite", obs.node)));
            }
            match map.roles[d] {
                DofRole::Free => {
                    map.roles[d] = DofRole::Observed;
                    map.values[d] = obs.value;
                }
                DofRole::Observed => {
                    return Err(Error::Config(format!(
                        "node {} component {} observed twice",
                        obs.node, obs.component
                    )))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "observation at node {} component {} falls on a boundary-constrained unknown",
                        obs.node, obs.component
                    )))
                }
            }
        }
        Ok(map)
    }

    fn node_at(&self, component: usize, mesh: &Mesh, p: &[f64; 3]) -> Result<usize> {
        let best = self.nodes[component].iter().copied().min_by(|&a, &b| {
            dist(&mesh.nodes()[a], p).total_cmp(&dist(&mesh.nodes()[b], p))
        });
        match best {
            Some(n) if dist(&mesh.nodes()[n], p) < POINT_TOL => Ok(n),
            _ => Err(Error::Config(format!(
                "no node of component {component} at {:?}",
                &p[..mesh.dim()]
            ))),
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.roles.len()
    }

    pub fn n_components(&self) -> usize {
        self.nodes.len()
    }

    pub fn component_nodes(&self, c: usize) -> &[usize] {
        &self.nodes[c]
    }

    pub fn offset(&self, c: usize) -> usize {
        self.offsets[c]
    }

    pub fn dof(&self, c: usize, mesh_node: usize) -> Option<usize> {
        self.local[c].get(&mesh_node).map(|&i| self.offsets[c] + i)
    }

    /// Component and mesh node of a dof.
    pub fn locate(&self, dof: usize) -> (usize, usize) {
        let c = self.offsets.partition_point(|&o| o <= dof) - 1;
        (c, self.nodes[c][dof - self.offsets[c]])
    }

    pub fn role(&self, dof: usize) -> DofRole {
        self.roles[dof]
    }

    pub fn roles(&self) -> &[DofRole] {
        &self.roles
    }

    /// Prescribed value of an essential dof or observed value of an
    /// observed one; zero otherwise.
    pub fn value(&self, dof: usize) -> f64 {
        self.values[dof]
    }

    pub fn with_role(&self, role: DofRole) -> Vec<usize> {
        (0..self.n_dofs()).filter(|&d| self.roles[d] == role).collect()
    }

    /// Unknowns whose residual equations are enforced: everything except
    /// prescribed and trainable boundary values.
    pub fn residual_rows(&self) -> Vec<usize> {
        (0..self.n_dofs())
            .filter(|&d| matches!(self.roles[d], DofRole::Free | DofRole::Observed))
            .collect()
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::structured_quad;

    fn square() -> Mesh {
        structured_quad(2, 2, 1, |s, t| [s, t]).unwrap()
    }

    fn all_nodes(mesh: &Mesh) -> Vec<usize> {
        (0..mesh.n_nodes()).collect()
    }

    #[test]
    fn later_conditions_override() {
        let mesh = square();
        let bcs = vec![
            EssentialBc::on_tag("top", 0, Profile::constant(1.0)),
            EssentialBc::on_tag("left", 0, Profile::constant(0.0)),
        ];
        let map = DofMap::build(&mesh, vec![all_nodes(&mesh)], &bcs, &[], &[]).unwrap();
        let corner = mesh.nearest_node(&[0.0, 1.0, 0.0]);
        let mid_top = mesh.nearest_node(&[0.5, 1.0, 0.0]);
        assert_eq!(map.value(map.dof(0, corner).unwrap()), 0.0);
        assert_eq!(map.value(map.dof(0, mid_top).unwrap()), 1.0);
        assert_eq!(map.with_role(DofRole::Essential).len(), 5);
    }

    #[test]
    fn observation_on_prescribed_value_rejected() {
        let mesh = square();
        let bcs = vec![EssentialBc::on_tag("left", 0, Profile::constant(0.0))];
        let on_left = mesh.nodes_with_tag("left")[0];
        let obs = vec![Observation { component: 0, node: on_left, value: 1.0 }];
        assert!(DofMap::build(&mesh, vec![all_nodes(&mesh)], &bcs, &[], &obs).is_err());
    }

    #[test]
    fn unknown_tag_and_point_rejected() {
        let mesh = square();
        let bad = vec![EssentialBc::on_tag("nowhere", 0, Profile::constant(0.0))];
        assert!(DofMap::build(&mesh, vec![all_nodes(&mesh)], &bad, &[], &[]).is_err());
        let off = vec![EssentialBc {
            target: BcTarget::Point([0.3, 0.3, 0.0]),
            component: 0,
            value: Profile::constant(0.0),
        }];
        assert!(DofMap::build(&mesh, vec![all_nodes(&mesh)], &off, &[], &[]).is_err());
    }

    #[test]
    fn trainable_conflicts() {
        let mesh = square();
        let bcs = vec![EssentialBc::on_tag("bottom", 0, Profile::constant(0.0))];
        let tb = vec![TrainableBc {
            tag: "bottom".into(),
            components: vec![0],
        }];
        assert!(DofMap::build(&mesh, vec![all_nodes(&mesh)], &bcs, &tb, &[]).is_err());
        let walls = vec![
            EssentialBc::on_tag("left", 0, Profile::constant(0.0)),
            EssentialBc::on_tag("right", 0, Profile::constant(0.0)),
        ];
        let map = DofMap::build(&mesh, vec![all_nodes(&mesh)], &walls, &tb, &[]).unwrap();
        assert_eq!(map.with_role(DofRole::TrainableEssential).len(), 1);
    }

    #[test]
    fn component_major_numbering() {
        let mesh = square();
        let nodes = all_nodes(&mesh);
        let map = DofMap::new(vec![nodes.clone(), vec![0, 2, 6, 8]]);
        assert_eq!(map.n_dofs(), 13);
        assert_eq!(map.dof(1, 6), Some(11));
        assert_eq!(map.locate(11), (1, 6));
        assert_eq!(map.locate(3), (0, 3));
        assert_eq!(map.dof(1, 1), None);
    }
}
