//! PDE models in the divergence form `div F(u, grad u) - S(u, grad u) = 0`.
//!
//! * Poisson: `F = grad u`, `S = -f`, i.e. `lap u + f = 0`.
//! * Linear elasticity: `F = sigma = lambda tr(grad u) I + mu (grad u + grad u^T)`, `S = 0`.
//! * Incompressible Navier-Stokes with unknowns `(v_1, v_2, p)`: momentum
//!   flux `nu grad v - p I` and source `(v . grad) v`, so that
//!   `(v . grad) v - nu lap v + grad p = 0`; the continuity row has no flux
//!   and source `div v`, tested with the pressure basis.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Poisson,
    Elasticity,
    /// `convection = false` drops the convective source (Stokes flow).
    NavierStokes { convection: bool },
}

/// A named group of components compared together by the error metric.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldGroup {
    pub name: &'static str,
    pub components: Vec<usize>,
}

/// Pointwise flux and source.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTerms {
    /// `flux[c][j]`.
    pub flux: Vec<[f64; 3]>,
    pub source: Vec<f64>,
}

/// Derivatives of flux and source with respect to the unknowns and their
/// gradients at one point.
#[derive(Clone, Debug)]
pub struct PointJacobian {
    /// `df_du[c][j][b] = dF_cj / du_b`.
    pub df_du: Vec<[Vec<f64>; 3]>,
    /// `df_dg[c][j][b][k] = dF_cj / d(du_b/dx_k)`.
    pub df_dg: Vec<[Vec<[f64; 3]>; 3]>,
    /// `ds_du[c][b]`.
    pub ds_du: Vec<Vec<f64>>,
    /// `ds_dg[c][b][k]`.
    pub ds_dg: Vec<Vec<[f64; 3]>>,
}

impl PointJacobian {
    fn zeros(n: usize) -> Self {
        let row = || [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let rowg = || [vec![[0.0; 3]; n], vec![[0.0; 3]; n], vec![[0.0; 3]; n]];
        PointJacobian {
            df_du: (0..n).map(|_| row()).collect(),
            df_dg: (0..n).map(|_| rowg()).collect(),
            ds_du: vec![vec![0.0; n]; n],
            ds_dg: vec![vec![[0.0; 3]; n]; n],
        }
    }
}

/// Unknowns and their gradients at every quadrature point, as tape values.
pub struct QpFields {
    pub u: Vec<Var>,
    /// `grad[c][j]`.
    pub grad: Vec<Vec<Var>>,
}

/// Flux and source at every quadrature point; `None` marks an identically
/// zero term.
pub struct QpTerms {
    pub flux: Vec<Vec<Option<Var>>>,
    pub source: Vec<Option<Var>>,
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Poisson => "poisson",
            Model::Elasticity => "elasticity",
            Model::NavierStokes { .. } => "navier_stokes",
        }
    }

    pub fn n_components(&self, dim: usize) -> usize {
        match *self {
            Model::Poisson => 1,
            Model::Elasticity => dim,
            Model::NavierStokes { .. } => 3,
        }
    }

    /// Index of the function space carrying component `c`: 0 for the
    /// primary space, 1 for the Navier-Stokes pressure space.
    pub fn space_of(&self, c: usize) -> usize {
        match self {
            Model::NavierStokes { .. } if c == 2 => 1,
            _ => 0,
        }
    }

    pub fn n_spaces(&self) -> usize {
        match self {
            Model::NavierStokes { .. } => 2,
            _ => 1,
        }
    }

    pub fn component_names(&self, dim: usize) -> Vec<String> {
        match self {
            Model::Poisson => vec!["u".into()],
            Model::Elasticity => (1..=dim).map(|i| format!("u{i}")).collect(),
            Model::NavierStokes { .. } => vec!["v1".into(), "v2".into(), "p".into()],
        }
    }

    pub fn field_groups(&self, dim: usize) -> Vec<FieldGroup> {
        match self {
            Model::Poisson => vec![FieldGroup {
                name: "u",
                components: vec![0],
            }],
            Model::Elasticity => vec![FieldGroup {
                name: "displacement",
                components: (0..dim).collect(),
            }],
            Model::NavierStokes { .. } => vec![
                FieldGroup {
                    name: "velocity",
                    components: vec![0, 1],
                },
                FieldGroup {
                    name: "pressure",
                    components: vec![2],
                },
            ],
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Model::Poisson => &["f"],
            Model::Elasticity => &["lambda", "mu"],
            Model::NavierStokes { .. } => &["nu"],
        }
    }

    /// Whether a parameter must stay positive (trained through softplus).
    pub fn param_positive(&self, i: usize) -> bool {
        !matches!(self, Model::Poisson) || i > 0
    }

    pub fn is_linear(&self) -> bool {
        !matches!(self, Model::NavierStokes { convection: true })
    }

    /// Flux and source at one point.
    pub fn pointwise(&self, dim: usize, u: &[f64], g: &[[f64; 3]], mu: &[f64]) -> PointTerms {
        let n = self.n_components(dim);
        let mut flux = vec![[0.0; 3]; n];
        let mut source = vec![0.0; n];
        match *self {
            Model::Poisson => {
                flux[0] = g[0];
                source[0] = -mu[0];
            }
            Model::Elasticity => {
                let (lambda, shear) = (mu[0], mu[1]);
                let div: f64 = (0..dim).map(|k| g[k][k]).sum();
                for i in 0..dim {
                    for j in 0..dim {
                        flux[i][j] = shear * (g[i][j] + g[j][i]) + if i == j { lambda * div } else { 0.0 };
                    }
                }
            }
            Model::NavierStokes { convection } => {
                let nu = mu[0];
                for i in 0..2 {
                    for j in 0..2 {
                        flux[i][j] = nu * g[i][j] - if i == j { u[2] } else { 0.0 };
                    }
                    if convection {
                        source[i] = u[0] * g[i][0] + u[1] * g[i][1];
                    }
                }
                source[2] = g[0][0] + g[1][1];
            }
        }
        PointTerms { flux, source }
    }

    /// Exact derivatives of [`Model::pointwise`].
    pub fn linearize(&self, dim: usize, u: &[f64], g: &[[f64; 3]], mu: &[f64]) -> PointJacobian {
        let n = self.n_components(dim);
        let mut jac = PointJacobian::zeros(n);
        match *self {
            Model::Poisson => {
                for j in 0..dim {
                    jac.df_dg[0][j][0][j] = 1.0;
                }
            }
            Model::Elasticity => {
                let (lambda, shear) = (mu[0], mu[1]);
                for i in 0..dim {
                    for j in 0..dim {
                        jac.df_dg[i][j][i][j] += shear;
                        jac.df_dg[i][j][j][i] += shear;
                        if i == j {
                            for k in 0..dim {
                                jac.df_dg[i][j][k][k] += lambda;
                            }
                        }
                    }
                }
            }
            Model::NavierStokes { convection } => {
                let nu = mu[0];
                for i in 0..2 {
                    for j in 0..2 {
                        jac.df_dg[i][j][i][j] = nu;
                    }
                    jac.df_du[i][i][2] = -1.0;
                    if convection {
                        // S_i = v_0 g_i0 + v_1 g_i1
                        jac.ds_du[i][0] += g[i][0];
                        jac.ds_du[i][1] += g[i][1];
                        jac.ds_dg[i][i][0] += u[0];
                        jac.ds_dg[i][i][1] += u[1];
                    }
                }
                jac.ds_dg[2][0][0] = 1.0;
                jac.ds_dg[2][1][1] = 1.0;
            }
        }
        jac
    }

    /// Flux and source at all `n_points` quadrature points on the tape.
    /// `params` holds one scalar per entry of [`Model::param_names`], in
    /// physical (already transformed) units.
    pub fn eval_tape(&self, tape: &mut Tape, dim: usize, fields: &QpFields, params: &[Var], n_points: usize) -> Result<QpTerms> {
        let n = self.n_components(dim);
        let mut flux: Vec<Vec<Option<Var>>> = vec![vec![None; dim]; n];
        let mut source: Vec<Option<Var>> = vec![None; n];
        let g = &fields.grad;
        match *self {
            Model::Poisson => {
                for j in 0..dim {
                    flux[0][j] = Some(g[0][j]);
                }
                let ones = tape.constant(Tensor::filled(&[n_points], -1.0));
                source[0] = Some(tape.mul_scalar(ones, params[0])?);
            }
            Model::Elasticity => {
                let mut div = g[0][0];
                for k in 1..dim {
                    div = tape.add(div, g[k][k])?;
                }
                let lam_div = tape.mul_scalar(div, params[0])?;
                for i in 0..dim {
                    for j in 0..dim {
                        let sym = if i == j {
                            tape.scale(g[i][i], 2.0)
                        } else {
                            tape.add(g[i][j], g[j][i])?
                        };
                        let mut s = tape.mul_scalar(sym, params[1])?;
                        if i == j {
                            s = tape.add(s, lam_div)?;
                        }
                        flux[i][j] = Some(s);
                    }
                }
            }
            Model::NavierStokes { convection } => {
                for i in 0..2 {
                    for j in 0..2 {
                        let visc = tape.mul_scalar(g[i][j], params[0])?;
                        flux[i][j] = Some(if i == j { tape.sub(visc, fields.u[2])? } else { visc });
                    }
                    if convection {
                        let a = tape.mul(fields.u[0], g[i][0])?;
                        let b = tape.mul(fields.u[1], g[i][1])?;
                        source[i] = Some(tape.add(a, b)?);
                    }
                }
                source[2] = Some(tape.add(g[0][0], g[1][1])?);
            }
        }
        Ok(QpTerms { flux, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad(rows: &[&[f64]]) -> Vec<[f64; 3]> {
        rows.iter()
            .map(|r| {
                let mut g = [0.0; 3];
                g[..r.len()].copy_from_slice(r);
                g
            })
            .collect()
    }

    #[test]
    fn hand_evaluations() {
        let p = Model::Poisson.pointwise(2, &[0.3], &grad(&[&[1.0, 2.0]]), &[1.0]);
        assert_eq!(&p.flux[0][..2], &[1.0, 2.0]);
        assert_eq!(p.source[0], -1.0);

        let e = Model::Elasticity.pointwise(2, &[0.0, 0.0], &grad(&[&[1.0, 0.0], &[0.0, 1.0]]), &[1.0, 1.0]);
        assert_eq!(&e.flux[0][..2], &[4.0, 0.0]);
        assert_eq!(&e.flux[1][..2], &[0.0, 4.0]);

        let ns = Model::NavierStokes { convection: true };
        let t = ns.pointwise(2, &[1.0, 0.0, 2.0], &grad(&[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]]), &[0.01]);
        assert_eq!(&t.flux[0][..2], &[-2.0, 0.0]);
        assert_eq!(&t.flux[1][..2], &[0.0, -2.0]);
        assert_eq!(&t.source[..2], &[0.0, 0.0]);
    }

    #[test]
    fn convection_matches_expansion() {
        let ns = Model::NavierStokes { convection: true };
        // v = (y, 0): (v.grad) v = y * d/dx (y, 0) = 0
        let (x, y) = (0.3, 0.7);
        let t = ns.pointwise(2, &[y, 0.0, 0.0], &grad(&[&[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]]), &[0.01]);
        assert_eq!(&t.source[..2], &[0.0, 0.0]);
        // v = (y, x): (v.grad) v = (y*0 + x*1, y*1 + x*0) = (x, y)
        let t = ns.pointwise(2, &[y, x, 0.0], &grad(&[&[0.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]]), &[0.01]);
        assert!((t.source[0] - x).abs() < 1e-15 && (t.source[1] - y).abs() < 1e-15);
        assert_eq!(t.source[2], 0.0);
    }

    #[test]
    fn elasticity_symmetric_and_homogeneous() {
        let m = Model::Elasticity;
        let g = grad(&[&[0.1, -0.4, 0.7], &[0.3, 0.2, -0.5], &[0.9, 0.05, -0.2]]);
        let t = m.pointwise(3, &[0.0; 3], &g, &[0.73, 0.376]);
        let g2: Vec<[f64; 3]> = g.iter().map(|r| [2.5 * r[0], 2.5 * r[1], 2.5 * r[2]]).collect();
        let t2 = m.pointwise(3, &[0.0; 3], &g2, &[0.73, 0.376]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((t.flux[i][j] - t.flux[j][i]).abs() < 1e-15);
                assert!((t2.flux[i][j] - 2.5 * t.flux[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn disk_solution_satisfies_strong_form() {
        // u = (1 - x^2 - y^2) / 4: F = grad u = (-x/2, -y/2), div F = -1 = S.
        let h = 1e-5;
        let (x, y) = (0.31, -0.42);
        let flux_at = |x: f64, y: f64| {
            Model::Poisson
                .pointwise(2, &[0.0], &grad(&[&[-x / 2.0, -y / 2.0]]), &[1.0])
                .flux[0]
        };
        let div = (flux_at(x + h, y)[0] - flux_at(x - h, y)[0]) / (2.0 * h)
            + (flux_at(x, y + h)[1] - flux_at(x, y - h)[1]) / (2.0 * h);
        let s = Model::Poisson.pointwise(2, &[0.0], &grad(&[&[0.0, 0.0]]), &[1.0]).source[0];
        assert!((div - s).abs() < 1e-9);
    }

    #[test]
    fn linearization_matches_differences() {
        let cases: Vec<(Model, usize, Vec<f64>)> = vec![
            (Model::Poisson, 2, vec![1.3]),
            (Model::Elasticity, 2, vec![0.7, 0.4]),
            (Model::Elasticity, 3, vec![0.73, 0.376]),
            (Model::NavierStokes { convection: true }, 2, vec![0.01]),
        ];
        let h = 1e-6;
        for (model, dim, mu) in cases {
            let n = model.n_components(dim);
            let u: Vec<f64> = (0..n).map(|i| 0.3 + 0.2 * i as f64).collect();
            let g: Vec<[f64; 3]> = (0..n)
                .map(|i| [0.1 * i as f64 - 0.2, 0.5 - 0.1 * i as f64, 0.25])
                .collect();
            let jac = model.linearize(dim, &u, &g, &mu);
            for b in 0..n {
                let mut up = u.clone();
                up[b] += h;
                let mut um = u.clone();
                um[b] -= h;
                let tp = model.pointwise(dim, &up, &g, &mu);
                let tm = model.pointwise(dim, &um, &g, &mu);
                for c in 0..n {
                    assert!(((tp.source[c] - tm.source[c]) / (2.0 * h) - jac.ds_du[c][b]).abs() < 1e-8);
                    for j in 0..dim {
                        assert!(((tp.flux[c][j] - tm.flux[c][j]) / (2.0 * h) - jac.df_du[c][j][b]).abs() < 1e-8);
                    }
                }
                for k in 0..dim {
                    let mut gp = g.clone();
                    gp[b][k] += h;
                    let mut gm = g.clone();
                    gm[b][k] -= h;
                    let tp = model.pointwise(dim, &u, &gp, &mu);
                    let tm = model.pointwise(dim, &u, &gm, &mu);
                    for c in 0..n {
                        let fd = (tp.source[c] - tm.source[c]) / (2.0 * h);
                        assert!((fd - jac.ds_dg[c][b][k]).abs() < 1e-8, "{} dS{c}/dg{b}{k}", model.name());
                        for j in 0..dim {
                            let fd = (tp.flux[c][j] - tm.flux[c][j]) / (2.0 * h);
                            assert!((fd - jac.df_dg[c][j][b][k]).abs() < 1e-8);
                        }
                    }
                }
            }
        }
    }
}
