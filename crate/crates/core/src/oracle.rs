//! Classical Galerkin solver on the same discretization: dense Newton
//! iteration with an analytically assembled Jacobian. For linear models it
//! converges in one step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::physics::Model;
use crate::residual::Assembler;

/// Residual and Jacobian evaluated pointwise from the model, without the
/// tape.
pub struct Linearization {
    pub residual: Vec<f64>,
    pub jacobian: DMatrix<f64>,
}

struct PointBasis {
    /// Per component: `(global dof, value, grads)` of each local function.
    funcs: Vec<Vec<(usize, f64, [f64; 3])>>,
}

fn point_basis(asm: &Assembler, q: usize) -> PointBasis {
    let dim = asm.dim();
    let model = asm.model();
    let tables = asm.tables();
    let e = tables.element_of[q];
    let funcs = (0..model.n_components(dim))
        .map(|c| {
            let s = model.space_of(c);
            let space = &asm.spaces()[s];
            let t = &tables.spaces[s];
            let offset = asm.dofs().offset(c);
            space
                .element_dofs(e)
                .iter()
                .map(|&i| {
                    let mut g = [0.0; 3];
                    for (j, gj) in g.iter_mut().enumerate().take(dim) {
                        *gj = t.grads[j].get(q, i);
                    }
                    (offset + i, t.values.get(q, i), g)
                })
                .collect()
        })
        .collect();
    PointBasis { funcs }
}

/// Residual and full Jacobian of `model` (which may differ from the
/// assembler's, e.g. Stokes for an initial guess) at `state`.
pub fn linearize(asm: &Assembler, model: Model, state: &[f64], params: &[f64]) -> Result<Linearization> {
    let dim = asm.dim();
    let n = asm.n_dofs();
    let n_comp = model.n_components(dim);
    let mut residual = asm.load().to_vec();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let tables = asm.tables();
    for q in 0..tables.n_points() {
        let w = tables.weights[q];
        let pb = point_basis(asm, q);
        let mut u = vec![0.0; n_comp];
        let mut g = vec![[0.0; 3]; n_comp];
        for c in 0..n_comp {
            for &(d, v, gr) in &pb.funcs[c] {
                u[c] += v * state[d];
                for j in 0..dim {
                    g[c][j] += gr[j] * state[d];
                }
            }
        }
        let terms = model.pointwise(dim, &u, &g, params);
        let lin = model.linearize(dim, &u, &g, params);
        for c in 0..n_comp {
            if terms.flux[c].iter().chain(std::iter::once(&terms.source[c])).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "component {c} at element {} quadrature point {q}",
                    tables.element_of[q]
                )));
            }
            for &(row, phi, dphi) in &pb.funcs[c] {
                let mut r = phi * terms.source[c];
                for j in 0..dim {
                    r += dphi[j] * terms.flux[c][j];
                }
                residual[row] -= w * r;
                for b in 0..n_comp {
                    // Coefficients multiplying the trial value and gradient.
                    let mut cu = phi * lin.ds_du[c][b];
                    let mut cg = [0.0; 3];
                    for k in 0..dim {
                        cg[k] = phi * lin.ds_dg[c][b][k];
                    }
                    for j in 0..dim {
                        cu += dphi[j] * lin.df_du[c][j][b];
                        for k in 0..dim {
                            cg[k] += dphi[j] * lin.df_dg[c][j][b][k];
                        }
                    }
                    if cu == 0.0 && cg.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    for &(col, psi, dpsi) in &pb.funcs[b] {
                        let mut v = cu * psi;
                        for k in 0..dim {
                            v += cg[k] * dpsi[k];
                        }
                        jac[(row, col)] -= w * v;
                    }
                }
            }
        }
    }
    Ok(Linearization {
        residual,
        jacobian: jac,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-9,
            max_iters: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub state: Vec<f64>,
    /// Condensed residual norm before each update and after the last.
    pub history: Vec<f64>,
}

impl OracleSolution {
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on the condensed system, starting from `state`.
pub fn newton(asm: &Assembler, model: Model, mut state: Vec<f64>, params: &[f64], opts: NewtonOptions) -> Result<OracleSolution> {
    let rows = asm.residual_rows().to_vec();
    let mut history = Vec::new();
    for _ in 0..=opts.max_iters {
        let lin = linearize(asm, model, &state, params)?;
        let r: Vec<f64> = rows.iter().map(|&i| lin.residual[i]).collect();
        let rn = norm(&r);
        history.push(rn);
        if !rn.is_finite() {
            return Err(Error::NotConverged {
                iterations: history.len() - 1,
                history,
            });
        }
        if rn < opts.tol {
            return Ok(OracleSolution { state, history });
        }
        if history.len() > opts.max_iters {
            break;
        }
        let k = rows.len();
        let j = DMatrix::from_fn(k, k, |a, b| lin.jacobian[(rows[a], rows[b])]);
        let delta = j
            .lu()
            .solve(&DVector::from_vec(r))
            .ok_or_else(|| Error::Singular("condensed Jacobian (missing essential conditions?)".into()))?;
        if delta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular("condensed Jacobian".into()));
        }
        for (a, &i) in rows.iter().enumerate() {
            state[i] -= delta[a];
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iters,
        history,
    })
}

/// Reference solution for the assembler's model and parameters. The
/// Navier-Stokes solve starts from the Stokes solution.
pub fn solve(asm: &Assembler, params: &[f64], opts: NewtonOptions) -> Result<OracleSolution> {
    let start = asm.prescribed_state();
    let model = asm.model();
    match model {
        Model::NavierStokes { convection: true } => {
            let stokes = newton(asm, Model::NavierStokes { convection: false }, start, params, opts)?;
            newton(asm, model, stokes.state, params, opts)
        }
        _ => newton(asm, model, start, params, opts),
    }
}
