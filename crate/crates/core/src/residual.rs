//! Galerkin weak-form residual as a differentiable function of the nodal
//! state and the model parameters.
//!
//! With `B`, `G_j` the interpolation operators from nodal coefficients to
//! quadrature-point values and `x_j`-derivatives, and `W` the diagonal of
//! quadrature weights, the residual of component `c` is
//!
//! ```text
//! R_c = L_c - sum_j G_j^T W F_cj - B^T W S_c
//! ```
//!
//! where `L_c` is the surface integral of the prescribed boundary flux
//! against the basis. It vanishes at the discrete solution.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::tables::surface_points;
use crate::fe::{FunctionSpace, QuadratureTables};
use crate::mesh::{DofMap, Mesh};
use crate::physics::{Model, QpFields};
use crate::tensor::{CsrMatrix, SparseOp, Tape, Tensor, Var};

/// Prescribed boundary flux `F n` on a tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaturalFlux {
    /// Fixed vector; entry `c` applies to component `c`.
    Traction(Vec<f64>),
    /// `scale * n` on the first `dim` components.
    NormalScaled(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaturalBc {
    pub tag: String,
    pub flux: NaturalFlux,
}

/// Interpolation operators of one space plus their weighted transposes.
#[derive(Clone, Debug)]
struct SpaceOps {
    values: Arc<SparseOp>,
    grads: Vec<Arc<SparseOp>>,
    values_tw: Arc<SparseOp>,
    grads_tw: Vec<Arc<SparseOp>>,
}

impl SpaceOps {
    fn new(values: &CsrMatrix, grads: &[CsrMatrix], weights: &[f64]) -> Self {
        let weighted_t = |m: &CsrMatrix| {
            let mut scaled = m.clone();
            scaled.scale_rows(weights);
            Arc::new(SparseOp::new(scaled.transpose()))
        };
        SpaceOps {
            values: Arc::new(SparseOp::new(values.clone())),
            grads: grads.iter().map(|g| Arc::new(SparseOp::new(g.clone()))).collect(),
            values_tw: weighted_t(values),
            grads_tw: grads.iter().map(weighted_t).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Assembler {
    model: Model,
    dim: usize,
    spaces: Vec<FunctionSpace>,
    tables: QuadratureTables,
    ops: Vec<SpaceOps>,
    dofs: DofMap,
    load: Vec<f64>,
    rows: Arc<[usize]>,
    component_ranges: Vec<Arc<[usize]>>,
}

/// Quadrature degree for volume integrals with solution order `p`.
pub fn volume_degree(p: usize) -> usize {
    2 * p + 2
}

/// Quadrature degree for surface integrals with solution order `p`.
pub fn surface_degree(p: usize) -> usize {
    2 * p + 1
}

impl Assembler {
    /// `spaces[s]` is the space with index `model.space_of(c) == s`, and
    /// `dofs` must number the components on those spaces' node lists.
    pub fn new(mesh: &Mesh, model: Model, spaces: Vec<FunctionSpace>, dofs: DofMap, natural: &[NaturalBc]) -> Result<Self> {
        let dim = mesh.dim();
        let n_comp = model.n_components(dim);
        if spaces.len() != model.n_spaces() || dofs.n_components() != n_comp {
            return Err(Error::Config(format!(
                "{} needs {} spaces and {n_comp} components",
                model.name(),
                model.n_spaces()
            )));
        }
        for c in 0..n_comp {
            if dofs.component_nodes(c) != spaces[model.space_of(c)].nodes() {
                return Err(Error::Config(format!("component {c} is not numbered on its space")));
            }
        }
        let p = spaces.iter().map(FunctionSpace::order).max().unwrap_or(1);
        let refs: Vec<&FunctionSpace> = spaces.iter().collect();
        let tables = QuadratureTables::build(mesh, &refs, volume_degree(p))?;
        let ops = tables
            .spaces
            .iter()
            .map(|s| SpaceOps::new(&s.values, &s.grads, &tables.weights))
            .collect();
        let mut load = vec![0.0; dofs.n_dofs()];
        for bc in natural {
            if !mesh.has_tag(&bc.tag) {
                return Err(Error::Config(format!("boundary tag `{}` is not on the mesh", bc.tag)));
            }
            if let NaturalFlux::Traction(t) = &bc.flux {
                if t.len() > n_comp {
                    return Err(Error::Config(format!(
                        "traction on `{}` has {} entries, model has {n_comp} components",
                        bc.tag,
                        t.len()
                    )));
                }
            }
            for f in mesh.facets_with_tag(&bc.tag) {
                for c in 0..n_comp {
                    let space = &spaces[model.space_of(c)];
                    for pt in surface_points(mesh, f, space, surface_degree(p))? {
                        let value = match &bc.flux {
                            NaturalFlux::Traction(t) => t.get(c).copied().unwrap_or(0.0),
                            NaturalFlux::NormalScaled(k) if c < dim => k * pt.normal[c],
                            NaturalFlux::NormalScaled(_) => 0.0,
                        };
                        if value == 0.0 {
                            continue;
                        }
                        for &(i, phi) in &pt.basis {
                            load[dofs.offset(c) + i] += pt.weight * phi * value;
                        }
                    }
                }
            }
        }
        let rows: Arc<[usize]> = dofs.residual_rows().into();
        let component_ranges = (0..n_comp)
            .map(|c| {
                let o = dofs.offset(c);
                (o..o + dofs.component_nodes(c).len()).collect::<Vec<_>>().into()
            })
            .collect();
        Ok(Assembler {
            model,
            dim,
            spaces,
            tables,
            ops,
            dofs,
            load,
            rows,
            component_ranges,
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spaces(&self) -> &[FunctionSpace] {
        &self.spaces
    }

    pub fn tables(&self) -> &QuadratureTables {
        &self.tables
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Surface-load contribution of the natural conditions.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    /// Rows kept by condensation (unconstrained and observed unknowns).
    pub fn residual_rows(&self) -> &[usize] {
        &self.rows
    }

    /// Values and gradients of every component at the quadrature points.
    pub fn interpolate_tape(&self, tape: &mut Tape, state: Var) -> Result<QpFields> {
        let n_comp = self.model.n_components(self.dim);
        let mut u = Vec::with_capacity(n_comp);
        let mut grad = Vec::with_capacity(n_comp);
        for c in 0..n_comp {
            let ops = &self.ops[self.model.space_of(c)];
            let coeffs = tape.gather(state, self.component_ranges[c].clone())?;
            u.push(tape.sparse_mul(&ops.values, coeffs)?);
            let g = ops
                .grads
                .iter()
                .map(|op| tape.sparse_mul(op, coeffs))
                .collect::<Result<Vec<_>>>()?;
            grad.push(g);
        }
        Ok(QpFields { u, grad })
    }

    /// Full (uncondensed) residual on the tape. `state` has length
    /// `n_dofs`; `params` are scalars in physical units.
    pub fn residual_tape(&self, tape: &mut Tape, state: Var, params: &[Var]) -> Result<Var> {
        if tape.value(state).len() != self.n_dofs() {
            return Err(Error::Shape {
                op: "residual",
                lhs: vec![self.n_dofs()],
                rhs: tape.shape(state).to_vec(),
            });
        }
        let n_points = self.tables.n_points();
        let fields = self.interpolate_tape(tape, state)?;
        let terms = self.model.eval_tape(tape, self.dim, &fields, params, n_points)?;
        let mut parts = Vec::with_capacity(terms.source.len());
        for (c, (flux, source)) in terms.flux.iter().zip(&terms.source).enumerate() {
            let ops = &self.ops[self.model.space_of(c)];
            let mut acc: Option<Var> = None;
            let mut pending = Vec::new();
            for (j, f) in flux.iter().enumerate() {
                if let Some(f) = f {
                    self.check_finite(tape, *f, "flux", c)?;
                    pending.push(tape.sparse_mul(&ops.grads_tw[j], *f)?);
                }
            }
            if let Some(s) = source {
                self.check_finite(tape, *s, "source", c)?;
                pending.push(tape.sparse_mul(&ops.values_tw, *s)?);
            }
            for term in pending {
                acc = Some(match acc {
                    None => term,
                    Some(a) => tape.add(a, term)?,
                });
            }
            let n_c = self.component_ranges[c].len();
            let part = match acc {
                Some(a) => tape.neg(a),
                None => tape.constant(Tensor::zeros(&[n_c])),
            };
            parts.push(part);
        }
        let interior = tape.concat_rows(&parts)?;
        if self.load.iter().all(|&x| x == 0.0) {
            return Ok(interior);
        }
        let load = tape.constant(Tensor::vector(self.load.clone()));
        tape.add(interior, load)
    }

    fn check_finite(&self, tape: &Tape, v: Var, what: &str, c: usize) -> Result<()> {
        if let Some(q) = tape.value(v).data().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{what} of component {c} at element {} quadrature point {q}",
                self.tables.element_of[q]
            )));
        }
        Ok(())
    }

    /// Residual rows kept after condensation.
    pub fn condense_tape(&self, tape: &mut Tape, residual: Var) -> Result<Var> {
        tape.gather(residual, self.rows.clone())
    }

    pub fn residual(&self, state: &[f64], params: &[f64]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let s = tape.constant(Tensor::vector(state.to_vec()));
        let p: Vec<Var> = params.iter().map(|&v| tape.constant(Tensor::scalar(v))).collect();
        let r = self.residual_tape(&mut tape, s, &p)?;
        Ok(tape.value(r).data().to_vec())
    }

    pub fn condense(&self, residual: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|&i| residual[i]).collect()
    }

    /// `||R_u||_2` at a numeric state.
    pub fn condensed_norm(&self, state: &[f64], params: &[f64]) -> Result<f64> {
        let r = self.residual(state, params)?;
        Ok(self.condense(&r).iter().map(|x| x * x).sum::<f64>().sqrt())
    }

    /// State with the essential and observed values filled in and zeros
    /// elsewhere.
    pub fn prescribed_state(&self) -> Vec<f64> {
        (0..self.n_dofs()).map(|d| self.dofs.value(d)).collect()
    }

    /// Component `c` of a state vector.
    pub fn component<'a>(&self, state: &'a [f64], c: usize) -> &'a [f64] {
        let r = &self.component_ranges[c];
        &state[r[0]..r[0] + r.len()]
    }

    pub fn component_range(&self, c: usize) -> std::ops::Range<usize> {
        let r = &self.component_ranges[c];
        r[0]..r[0] + r.len()
    }
}
