//! Training loops: forward solution, and inverse solution with observations
//! assimilated either as a penalty or by clamping them into the state.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::{GraphInput, SubNetBundle, DEFAULT_ORDER, HIDDEN_WIDTHS};
use crate::mesh::{DofRole, GraphOperators};
use crate::problem::ProblemSpec;
use crate::residual::Assembler;
use crate::tensor::{softplus_inverse, Adam, ParamId, ParamSet, Tape, Tensor, Var};

/// How observations enter training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Assimilation {
    /// No observations: forward problem.
    None,
    /// Penalty `lambda * ||U_obs - U_o||` added to the residual norm.
    Soft { lambda: f64 },
    /// Observed values clamped into the state.
    Hard,
}

impl Assimilation {
    pub fn label(&self) -> &'static str {
        match self {
            Assimilation::None => "forward",
            Assimilation::Soft { .. } => "inverse-soft",
            Assimilation::Hard => "inverse-hard",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    /// Learning rate of unknown PDE parameters and boundary values; the
    /// network weights use `learning_rate`.
    #[serde(default = "default_unknown_lr")]
    pub unknowns_learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Stop once the loss falls below this value.
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Multiply the learning rates by `decay_factor` at these fractions of
    /// the budget.
    #[serde(default = "default_decay")]
    pub decay_at: Vec<f64>,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    /// Chebyshev order of every graph convolution.
    #[serde(default = "default_order")]
    pub cheb_order: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_unknown_lr() -> f64 {
    1e-2
}

fn default_decay() -> Vec<f64> {
    vec![0.6, 0.85]
}

fn default_decay_factor() -> f64 {
    0.5
}

fn default_order() -> usize {
    DEFAULT_ORDER
}

fn default_hidden() -> Vec<usize> {
    HIDDEN_WIDTHS.to_vec()
}

impl TrainConfig {
    pub fn new(iterations: usize) -> Self {
        TrainConfig {
            iterations,
            learning_rate: default_lr(),
            unknowns_learning_rate: default_unknown_lr(),
            seed: 0,
            tolerance: None,
            decay_at: default_decay(),
            decay_factor: default_decay_factor(),
            cheb_order: DEFAULT_ORDER,
            hidden: HIDDEN_WIDTHS.to_vec(),
        }
    }

    pub fn learning_rate_at(&self, iteration: usize) -> f64 {
        let passed = self
            .decay_at
            .iter()
            .filter(|&&f| iteration as f64 >= f * self.iterations as f64)
            .count();
        self.learning_rate * self.decay_factor.powi(passed as i32)
    }
}

/// Result of one training run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: Assimilation,
    pub iterations: usize,
    pub loss_history: Vec<f64>,
    /// Residual norm part of the loss at each iteration.
    pub residual_history: Vec<f64>,
    /// Unweighted data misfit at each iteration (soft mode only).
    pub data_history: Vec<f64>,
    /// Physical parameter values at each iteration.
    pub param_history: Vec<Vec<f64>>,
    pub best_iteration: usize,
    pub best_loss: f64,
    /// Full nodal state at the best iterate.
    pub state: Vec<f64>,
    /// Physical parameter values at the best iterate.
    pub params: Vec<f64>,
    /// `(dof, value)` of trained boundary values at the best iterate.
    pub boundary_values: Vec<(usize, f64)>,
    pub wall_time_s: f64,
    /// Set when unknowns are trained without any data to pin them down.
    pub identifiability_warning: Option<String>,
}

/// Networks, unknowns and optimizer state for one problem.
pub struct Trainer {
    assembler: Assembler,
    bundle: SubNetBundle,
    params: ParamSet,
    mode: Assimilation,
    config: TrainConfig,
    /// Raw trainable scalars, one per model parameter (`None` if known).
    mu_raw: Vec<Option<ParamId>>,
    known: Vec<f64>,
    positive: Vec<bool>,
    boundary: Option<(ParamId, Arc<[usize]>)>,
    /// Per component: local node indices driven by the network and the
    /// global dofs they fill.
    driven: Vec<(Arc<[usize]>, Arc<[usize]>)>,
    clamped: (Arc<[usize]>, Vec<f64>),
    observed: (Arc<[usize]>, Vec<f64>),
    warning: Option<String>,
}

impl Trainer {
    pub fn new(spec: &ProblemSpec, mode: Assimilation, config: TrainConfig) -> Result<Self> {
        if let Assimilation::Soft { lambda } = mode {
            if !(lambda >= 0.0) {
                return Err(Error::Config(format!("penalty weight must be non-negative, got {lambda}")));
            }
        }
        if mode == Assimilation::None && spec.has_unknowns() {
            return Err(Error::Config("forward training needs every parameter and boundary value known".into()));
        }
        if mode == Assimilation::None && !spec.observations.is_empty() {
            return Err(Error::Config("forward training takes no observations".into()));
        }
        let assembler = spec.assembler()?;
        let dofs = assembler.dofs();
        let model = spec.model;
        let n_comp = spec.n_components();

        let mut graphs = Vec::new();
        for space in assembler.spaces() {
            let ops = GraphOperators::build(&spec.mesh, space.nodes())?;
            graphs.push(GraphInput::from_coordinates(
                ops.scaled_laplacian_op(),
                &space.coordinates(&spec.mesh),
            )?);
        }
        let graph_of = (0..n_comp).map(|c| model.space_of(c)).collect();
        let mut params = ParamSet::new();
        let bundle = SubNetBundle::new(&mut params, graphs, graph_of, &config.hidden, config.cheb_order)?;
        bundle.init_weights(&mut params, config.seed);

        let names = model.param_names();
        let positive: Vec<bool> = (0..names.len()).map(|i| model.param_positive(i)).collect();
        let mut mu_raw = Vec::new();
        for (i, p) in spec.params.iter().enumerate() {
            if p.trainable {
                let init = 0.5 * p.value;
                let raw = if positive[i] { softplus_inverse(init) } else { init };
                mu_raw.push(Some(params.insert(format!("param.{}", names[i]), Tensor::scalar(raw))?));
            } else {
                mu_raw.push(None);
            }
        }
        let known = spec.param_values();

        let trainable_dofs = dofs.with_role(DofRole::TrainableEssential);
        let boundary = if trainable_dofs.is_empty() {
            None
        } else {
            let id = params.insert("boundary", Tensor::zeros(&[trainable_dofs.len()]))?;
            Some((id, trainable_dofs.into()))
        };

        let hard = mode == Assimilation::Hard;
        let mut driven = Vec::with_capacity(n_comp);
        let mut clamped_idx = Vec::new();
        let mut clamped_val = Vec::new();
        for c in 0..n_comp {
            let mut local = Vec::new();
            let mut global = Vec::new();
            let offset = dofs.offset(c);
            for i in 0..dofs.component_nodes(c).len() {
                let d = offset + i;
                match dofs.role(d) {
                    DofRole::Free => {
                        local.push(i);
                        global.push(d);
                    }
                    DofRole::Observed if !hard => {
                        local.push(i);
                        global.push(d);
                    }
                    DofRole::Observed | DofRole::Essential => {
                        clamped_idx.push(d);
                        clamped_val.push(dofs.value(d));
                    }
                    DofRole::TrainableEssential => {}
                }
            }
            driven.push((local.into(), global.into()));
        }
        let observed_dofs = dofs.with_role(DofRole::Observed);
        let observed_vals = observed_dofs.iter().map(|&d| dofs.value(d)).collect();

        let warning = if spec.has_unknowns() && (observed_dofs.is_empty() || mode == (Assimilation::Soft { lambda: 0.0 })) {
            Some("unknown parameters or boundary values are trained without data; they are not identifiable".into())
        } else {
            None
        };

        Ok(Trainer {
            assembler,
            bundle,
            params,
            mode,
            config,
            mu_raw,
            known,
            positive,
            boundary,
            driven,
            clamped: (clamped_idx.into(), clamped_val),
            observed: (observed_dofs.into(), observed_vals),
            warning,
        })
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn bundle(&self) -> &SubNetBundle {
        &self.bundle
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Physical parameter values for the current raw parameters.
    pub fn physical_params(&self) -> Vec<f64> {
        self.mu_raw
            .iter()
            .enumerate()
            .map(|(i, raw)| match raw {
                Some(id) => {
                    let r = self.params.get(*id).item();
                    if self.positive[i] {
                        crate::tensor::softplus(r)
                    } else {
                        r
                    }
                }
                None => self.known[i],
            })
            .collect()
    }

    /// Records the state, physical parameters and loss terms on `tape`.
    pub fn build(&self, tape: &mut Tape) -> Result<Graph> {
        let bound = self.params.bind(tape);
        let outputs = self.bundle.forward(tape, &bound)?;
        let mut parts: Vec<(Var, Arc<[usize]>)> = Vec::new();
        for (out, (local, global)) in outputs.iter().zip(&self.driven) {
            if !local.is_empty() {
                let g = tape.gather(*out, local.clone())?;
                parts.push((g, global.clone()));
            }
        }
        if !self.clamped.0.is_empty() {
            let c = tape.constant(Tensor::vector(self.clamped.1.clone()));
            parts.push((c, self.clamped.0.clone()));
        }
        if let Some((id, idx)) = &self.boundary {
            parts.push((bound[id.index()], idx.clone()));
        }
        let state = tape.scatter(self.assembler.n_dofs(), parts)?;
        let mut mu = Vec::with_capacity(self.mu_raw.len());
        for (i, raw) in self.mu_raw.iter().enumerate() {
            mu.push(match raw {
                Some(id) if self.positive[i] => tape.softplus(bound[id.index()]),
                Some(id) => bound[id.index()],
                None => tape.constant(Tensor::scalar(self.known[i])),
            });
        }
        let full = self.assembler.residual_tape(tape, state, &mu)?;
        let condensed = self.assembler.condense_tape(tape, full)?;
        let residual = tape.l2_norm(condensed);
        let (loss, data) = match self.mode {
            Assimilation::Soft { lambda } if !self.observed.0.is_empty() => {
                let pred = tape.gather(state, self.observed.0.clone())?;
                let target = tape.constant(Tensor::vector(self.observed.1.clone()));
                let diff = tape.sub(pred, target)?;
                let data = tape.l2_norm(diff);
                let weighted = tape.scale(data, lambda);
                (tape.add(residual, weighted)?, Some(data))
            }
            _ => (residual, None),
        };
        Ok(Graph {
            bound,
            state,
            mu,
            residual,
            data,
            loss,
        })
    }

    /// Current state vector.
    pub fn state(&self) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let g = self.build(&mut tape)?;
        Ok(tape.value(g.state).data().to_vec())
    }

    /// Per-parameter learning-rate multipliers for [`Adam::step_scaled`]:
    /// unknown PDE parameters and boundary values move at
    /// `unknowns_learning_rate`, network weights at `learning_rate`.
    pub fn step_scale(&self) -> Vec<f64> {
        let ratio = self.config.unknowns_learning_rate / self.config.learning_rate;
        let mut scale = vec![1.0; self.params.len()];
        for id in self.mu_raw.iter().flatten().chain(self.boundary.as_ref().map(|(id, _)| id)) {
            scale[id.index()] = ratio;
        }
        scale
    }

    pub fn train(&mut self) -> Result<TrainReport> {
        self.train_with(|_, _| {})
    }

    /// Runs the configured budget; `progress(iteration, loss)` is called
    /// after every iteration. On return the parameters hold the best
    /// iterate.
    pub fn train_with(&mut self, mut progress: impl FnMut(usize, f64)) -> Result<TrainReport> {
        let start = Instant::now();
        let mut adam = Adam::new(self.config.learning_rate);
        let scale = self.step_scale();
        let mut report = TrainReport {
            mode: self.mode,
            iterations: 0,
            loss_history: Vec::new(),
            residual_history: Vec::new(),
            data_history: Vec::new(),
            param_history: Vec::new(),
            best_iteration: 0,
            best_loss: f64::INFINITY,
            state: Vec::new(),
            params: Vec::new(),
            boundary_values: Vec::new(),
            wall_time_s: 0.0,
            identifiability_warning: self.warning.clone(),
        };
        let mut best = self.params.clone();
        for it in 0..=self.config.iterations {
            let mut tape = Tape::new();
            let g = self.build(&mut tape)?;
            let loss = tape.value(g.loss).item();
            if !loss.is_finite() {
                return Err(Error::Diverged { iteration: it, loss });
            }
            report.loss_history.push(loss);
            report.residual_history.push(tape.value(g.residual).item());
            if let Some(d) = g.data {
                report.data_history.push(tape.value(d).item());
            }
            let mu: Vec<f64> = g.mu.iter().map(|&v| tape.value(v).item()).collect();
            report.param_history.push(mu.clone());
            if loss < report.best_loss {
                report.best_loss = loss;
                report.best_iteration = it;
                best.clone_from(&self.params);
                report.state = tape.value(g.state).data().to_vec();
                report.params = mu;
                report.boundary_values = match &self.boundary {
                    Some((_, idx)) => idx.iter().map(|&d| (d, report.state[d])).collect(),
                    None => Vec::new(),
                };
            }
            report.iterations = it;
            progress(it, loss);
            let done = self.config.tolerance.is_some_and(|t| loss < t);
            if it == self.config.iterations || done {
                break;
            }
            let grads = tape.backward(g.loss, &g.bound)?;
            adam.lr = self.config.learning_rate_at(it);
            adam.step_scaled(&mut self.params, &grads, &scale)?;
        }
        // Leave the network at the best iterate so checkpoints match the report.
        self.params = best;
        report.wall_time_s = start.elapsed().as_secs_f64();
        Ok(report)
    }
}

/// Tape handles produced by [`Trainer::build`].
pub struct Graph {
    pub bound: Vec<Var>,
    pub state: Var,
    pub mu: Vec<Var>,
    pub residual: Var,
    pub data: Option<Var>,
    pub loss: Var,
}

/// `||prediction - reference|| / ||reference||`.
pub fn relative_error(prediction: &[f64], reference: &[f64]) -> Result<f64> {
    if prediction.len() != reference.len() {
        return Err(Error::Shape {
            op: "relative_error",
            lhs: vec![prediction.len()],
            rhs: vec![reference.len()],
        });
    }
    let den = reference.iter().map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(Error::Config("relative error against an all-zero reference".into()));
    }
    let num = prediction
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_examples() {
        let u = [1.0, -2.0, 0.5];
        assert_eq!(relative_error(&u, &u).unwrap(), 0.0);
        let twice: Vec<f64> = u.iter().map(|x| 2.0 * x).collect();
        assert!((relative_error(&twice, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&u, &[0.0; 3]).is_err());
    }

    #[test]
    fn schedule_halves() {
        let c = TrainConfig::new(100);
        assert_eq!(c.learning_rate_at(0), 1e-3);
        assert_eq!(c.learning_rate_at(60), 5e-4);
        assert_eq!(c.learning_rate_at(85), 2.5e-4);
    }
}
