//! A complete boundary value problem: mesh, model, parameters, boundary
//! conditions and observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::FunctionSpace;
use crate::mesh::{DofMap, EssentialBc, Mesh, Observation, TrainableBc};
use crate::physics::Model;
use crate::residual::{Assembler, NaturalBc};

/// A model parameter. Known parameters use `value`; trainable ones start
/// from half of it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub value: f64,
    #[serde(default)]
    pub trainable: bool,
}

impl ParamSpec {
    pub fn known(value: f64) -> Self {
        ParamSpec { value, trainable: false }
    }

    pub fn unknown(nominal: f64) -> Self {
        ParamSpec {
            value: nominal,
            trainable: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub model: Model,
    pub params: Vec<ParamSpec>,
    pub essential: Vec<EssentialBc>,
    pub natural: Vec<NaturalBc>,
    pub trainable_bc: Vec<TrainableBc>,
    pub observations: Vec<Observation>,
}

impl ProblemSpec {
    pub fn new(mesh: Mesh, model: Model, params: Vec<ParamSpec>) -> Self {
        ProblemSpec {
            mesh,
            model,
            params,
            essential: Vec::new(),
            natural: Vec::new(),
            trainable_bc: Vec::new(),
            observations: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn n_components(&self) -> usize {
        self.model.n_components(self.dim())
    }

    /// Primary space of the geometry order, plus an order-1 space on the
    /// element vertices for the Navier-Stokes pressure.
    pub fn spaces(&self) -> Result<Vec<FunctionSpace>> {
        let primary = FunctionSpace::geometric(&self.mesh)?;
        let mut spaces = vec![primary];
        if self.model.n_spaces() == 2 {
            if spaces[0].order() < 2 {
                return Err(Error::Config("mixed velocity-pressure pair needs order-2 geometry".into()));
            }
            spaces.push(FunctionSpace::new(&self.mesh, 1)?);
        }
        Ok(spaces)
    }

    pub fn assembler(&self) -> Result<Assembler> {
        let names = self.model.param_names();
        if self.params.len() != names.len() {
            return Err(Error::Config(format!(
                "{} takes parameters {:?}, got {}",
                self.model.name(),
                names,
                self.params.len()
            )));
        }
        for (i, p) in self.params.iter().enumerate() {
            if !p.value.is_finite() || (self.model.param_positive(i) && p.value <= 0.0) {
                return Err(Error::Config(format!("parameter {} = {} is invalid", names[i], p.value)));
            }
        }
        let spaces = self.spaces()?;
        let component_nodes = (0..self.n_components())
            .map(|c| spaces[self.model.space_of(c)].nodes().to_vec())
            .collect();
        let dofs = DofMap::build(
            &self.mesh,
            component_nodes,
            &self.essential,
            &self.trainable_bc,
            &self.observations,
        )?;
        Assembler::new(&self.mesh, self.model, spaces, dofs, &self.natural)
    }

    pub fn param_values(&self) -> Vec<f64> {
        self.params.iter().map(|p| p.value).collect()
    }

    pub fn has_unknowns(&self) -> bool {
        self.params.iter().any(|p| p.trainable) || !self.trainable_bc.is_empty()
    }
}
