//! WebAssembly bindings for the demo page in `www/`.
//!
//! Everything runs on the unit square with `u = 0` on the boundary and a
//! constant source. The page can solve it with the Galerkin oracle, train a
//! graph network on it step by step, or train with the source unknown and
//! the oracle value at the center observed.

use galerkin_gcn::mesh::generate::unit_square;
use galerkin_gcn::mesh::{EssentialBc, Observation, Profile};
use galerkin_gcn::oracle::{solve, NewtonOptions};
use galerkin_gcn::physics::Model;
use galerkin_gcn::problem::{ParamSpec, ProblemSpec};
use galerkin_gcn::tensor::{Adam, Tape};
use galerkin_gcn::training::{relative_error, Assimilation, TrainConfig, Trainer};
use galerkin_gcn::{Error, Result};
use wasm_bindgen::prelude::*;

const MAX_ELEMENTS: usize = 8;

fn square(n: usize, order: usize, source: ParamSpec) -> Result<ProblemSpec> {
    if !(1..=MAX_ELEMENTS).contains(&n) {
        return Err(Error::Config(format!("elements per side must be 1..={MAX_ELEMENTS}, got {n}")));
    }
    let mut spec = ProblemSpec::new(unit_square(n, order)?, Model::Poisson, vec![source]);
    for side in ["bottom", "right", "top", "left"] {
        spec.essential.push(EssentialBc::on_tag(side, 0, Profile::constant(0.0)));
    }
    Ok(spec)
}

fn oracle(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let asm = spec.assembler()?;
    Ok(solve(&asm, &spec.param_values(), NewtonOptions::default())?.state)
}

/// Node coordinates in dof order, interleaved `x0, y0, x1, y1, ...`.
fn positions(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let asm = spec.assembler()?;
    let nodes = spec.mesh.nodes();
    Ok(asm
        .dofs()
        .component_nodes(0)
        .iter()
        .flat_map(|&i| [nodes[i][0], nodes[i][1]])
        .collect())
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Nodal field with its node positions.
#[wasm_bindgen]
pub struct Field {
    positions: Vec<f64>,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Field {
    /// `x0, y0, x1, y1, ...`
    pub fn positions(&self) -> Vec<f64> {
        self.positions.clone()
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Field {
    pub fn oracle(n: usize, order: usize, source: f64) -> Result<Field> {
        let spec = square(n, order, ParamSpec::known(source))?;
        Ok(Field {
            positions: positions(&spec)?,
            values: oracle(&spec)?,
        })
    }
}

/// Galerkin solution of `-Δu = source` on an `n` by `n` mesh of order `order`.
#[wasm_bindgen]
pub fn solve_poisson(n: usize, order: usize, source: f64) -> std::result::Result<Field, JsError> {
    Field::oracle(n, order, source).map_err(js)
}

/// Network training driven one batch of iterations at a time.
#[wasm_bindgen]
pub struct Session {
    trainer: Trainer,
    adam: Adam,
    scale: Vec<f64>,
    iteration: usize,
    loss: f64,
    positions: Vec<f64>,
    reference: Vec<f64>,
}

impl Session {
    /// With `infer_source` the source starts unknown and the oracle value
    /// at the center node is clamped into the network output.
    pub fn create(n: usize, order: usize, source: f64, infer_source: bool, seed: u64) -> Result<Session> {
        let truth = square(n, order, ParamSpec::known(source))?;
        let reference = oracle(&truth)?;
        let (spec, mode) = if infer_source {
            let mut spec = square(n, order, ParamSpec::unknown(1.0))?;
            let center = spec.mesh.nearest_node(&[0.5, 0.5, 0.0]);
            let d = truth.assembler()?.dofs().dof(0, center).expect("center node");
            spec.observations.push(Observation {
                component: 0,
                node: center,
                value: reference[d],
            });
            (spec, Assimilation::Hard)
        } else {
            (truth, Assimilation::None)
        };
        // Smaller than the full network so a step stays interactive.
        let mut config = TrainConfig::new(0);
        config.hidden = vec![32, 64, 32];
        config.cheb_order = 6;
        config.seed = seed;
        let trainer = Trainer::new(&spec, mode, config.clone())?;
        Ok(Session {
            scale: trainer.step_scale(),
            adam: Adam::new(config.learning_rate),
            trainer,
            iteration: 0,
            loss: f64::NAN,
            positions: positions(&spec)?,
            reference,
        })
    }

    pub fn advance(&mut self, iterations: usize) -> Result<f64> {
        for _ in 0..iterations {
            let mut tape = Tape::new();
            let g = self.trainer.build(&mut tape)?;
            let loss = tape.value(g.loss).item();
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    iteration: self.iteration,
                    loss,
                });
            }
            self.loss = loss;
            let grads = tape.backward(g.loss, &g.bound)?;
            self.adam.step_scaled(self.trainer.params_mut(), &grads, &self.scale)?;
            self.iteration += 1;
        }
        Ok(self.loss)
    }

    pub fn current(&self) -> Result<Field> {
        Ok(Field {
            positions: self.positions.clone(),
            values: self.trainer.state()?,
        })
    }

    pub fn relative_error(&self) -> Result<f64> {
        relative_error(&self.trainer.state()?, &self.reference)
    }
}

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(
        n: usize,
        order: usize,
        source: f64,
        infer_source: bool,
        seed: u64,
    ) -> std::result::Result<Session, JsError> {
        Session::create(n, order, source, infer_source, seed).map_err(js)
    }

    /// Runs `iterations` optimizer steps and returns the last loss.
    pub fn step(&mut self, iterations: usize) -> std::result::Result<f64, JsError> {
        self.advance(iterations).map_err(js)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn field(&self) -> std::result::Result<Field, JsError> {
        self.current().map_err(js)
    }

    /// Relative error against the oracle.
    pub fn error(&self) -> std::result::Result<f64, JsError> {
        self.relative_error().map_err(js)
    }

    /// Current source value (the given one when it is not inferred).
    pub fn source(&self) -> f64 {
        self.trainer.physical_params()[0]
    }
}
