//! Registered benchmark problems with their reference solutions, default
//! budgets and acceptance thresholds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::generate::{hollow_cylinder, unit_disk, unit_square};
use crate::mesh::io::parse_mesh;
use crate::mesh::{BcTarget, DofRole, EssentialBc, Mesh, Observation, Profile, TrainableBc};
use crate::oracle::{self, NewtonOptions};
use crate::physics::Model;
use crate::problem::{ParamSpec, ProblemSpec};
use crate::residual::{NaturalBc, NaturalFlux};
use crate::report::{RunSummary, REPORT_VERSION};
use crate::training::{relative_error, Assimilation, TrainConfig, TrainReport, Trainer};

pub const NOTCH_MESH: &str = include_str!("../meshes/notch.mesh");
pub const STENOSIS_MESH: &str = include_str!("../meshes/stenosis.mesh");

/// Default penalty weight for soft assimilation.
pub const DEFAULT_LAMBDA: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Forward,
    InverseSoft,
    InverseHard,
}

impl ModeKind {
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Forward => "forward",
            ModeKind::InverseSoft => "inverse-soft",
            ModeKind::InverseHard => "inverse-hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward" => Some(ModeKind::Forward),
            "inverse-soft" | "soft" => Some(ModeKind::InverseSoft),
            "inverse-hard" | "hard" => Some(ModeKind::InverseHard),
            _ => None,
        }
    }

    pub fn assimilation(self, lambda: f64) -> Assimilation {
        match self {
            ModeKind::Forward => Assimilation::None,
            ModeKind::InverseSoft => Assimilation::Soft { lambda },
            ModeKind::InverseHard => Assimilation::Hard,
        }
    }
}

/// Pass condition on one metric of one mode.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Target {
    pub mode: ModeKind,
    pub metric: &'static str,
    /// Value reported for the original experiment, if any.
    pub reported: Option<f64>,
    /// Largest accepted value.
    pub accept: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CaseInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub modes: &'static [ModeKind],
    pub targets: &'static [Target],
    /// Default iteration budget.
    pub iterations: usize,
    pub seed: u64,
}

const FWD: &[ModeKind] = &[ModeKind::Forward];
const INV: &[ModeKind] = &[ModeKind::InverseHard, ModeKind::InverseSoft];

const fn target(mode: ModeKind, metric: &'static str, reported: Option<f64>, accept: f64) -> Target {
    Target {
        mode,
        metric,
        reported,
        accept,
    }
}

use ModeKind::{Forward as F, InverseHard as H, InverseSoft as S};

pub const CASES: &[CaseInfo] = &[
    CaseInfo {
        name: "poisson_square",
        description: "Poisson, f = 1, u = 0 on the unit square; 4 cubic quadrilaterals",
        modes: FWD,
        targets: &[target(F, "e", Some(5e-3), 5e-2)],
        iterations: 3000,
        seed: 1,
    },
    CaseInfo {
        name: "poisson_disk",
        description: "Poisson, f = 1, u = 0 on the unit disk; 4 curved quadratic quadrilaterals",
        modes: FWD,
        targets: &[target(F, "e", Some(5e-4), 5e-3)],
        iterations: 3000,
        seed: 2,
    },
    CaseInfo {
        name: "poisson_inverse",
        description: "Poisson on the unit square, unknown constant source f = 2, one observation",
        modes: INV,
        targets: &[
            target(H, "f_error", Some(1e-2), 5e-2),
            target(H, "e", Some(1e-2), 5e-2),
            target(S, "f_error", Some(1e-2), 1e-1),
        ],
        iterations: 3000,
        seed: 3,
    },
    CaseInfo {
        name: "elasticity_square",
        description: "Linear elasticity on the unit square, left edge clamped, traction [0.5, 0] on the right",
        modes: FWD,
        targets: &[target(F, "e", Some(1e-2), 5e-2)],
        iterations: 3000,
        seed: 4,
    },
    CaseInfo {
        name: "elasticity_notch",
        description: "Linear elasticity on a notched square plate, 55 linear triangles",
        modes: FWD,
        targets: &[target(F, "e", Some(5e-3), 5e-2)],
        iterations: 3000,
        seed: 5,
    },
    CaseInfo {
        name: "elasticity_cylinder_3d",
        description: "Linear elasticity of a hollow cylinder, inner pressure and axial end load; 40 quadratic hexahedra",
        modes: FWD,
        targets: &[target(F, "e", Some(5e-2), 1.5e-1)],
        iterations: 700,
        seed: 6,
    },
    CaseInfo {
        name: "lame_inverse",
        description: "Elasticity square with unknown Lame parameters, 5 observed points",
        modes: INV,
        targets: &[
            target(H, "e", Some(5e-3), 2.5e-2),
            target(S, "e", Some(1e-2), 5e-2),
            target(H, "lambda_error", None, 1e-1),
            target(H, "mu_error", None, 1e-1),
            target(S, "lambda_error", None, 1e-1),
            target(S, "mu_error", None, 1e-1),
        ],
        iterations: 3000,
        seed: 7,
    },
    CaseInfo {
        name: "ns_cavity",
        description: "Navier-Stokes lid-driven cavity, nu = 0.01; 100 Taylor-Hood quadrilaterals",
        modes: FWD,
        targets: &[
            target(F, "e_velocity", Some(8.7e-3), 5e-2),
            target(F, "e_pressure", Some(1.95e-2), 1e-1),
        ],
        iterations: 1200,
        seed: 8,
    },
    CaseInfo {
        name: "ns_stenosis",
        description: "Navier-Stokes flow through a constricted channel, uniform inlet, free outlet",
        modes: FWD,
        targets: &[
            target(F, "e_velocity", Some(4.4e-3), 5e-2),
            target(F, "e_pressure", Some(1.8e-2), 1e-1),
        ],
        iterations: 600,
        seed: 9,
    },
    CaseInfo {
        name: "ns_inlet_inverse",
        description: "Stenosis flow with unknown inlet profile, velocity observed at 19 points",
        modes: INV,
        targets: &[target(H, "e_inlet", Some(4e-2), 1.5e-1), target(S, "e_inlet", Some(4e-1), f64::INFINITY)],
        iterations: 900,
        seed: 10,
    },
];

/// `(case, metric, better mode, worse mode)`: the first mode must reach a
/// strictly smaller value than the second under the same budget.
pub const ORDERINGS: &[(&str, &str, ModeKind, ModeKind)] = &[("ns_inlet_inverse", "e_inlet", H, S)];

pub fn info(name: &str) -> Result<&'static CaseInfo> {
    CASES.iter().find(|c| c.name == name).ok_or_else(|| {
        let names: Vec<&str> = CASES.iter().map(|c| c.name).collect();
        Error::Config(format!("unknown case `{name}`; known cases: {}", names.join(", ")))
    })
}

/// Where the reference solution comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Oracle,
    Analytic,
}

/// A fully built case: the problem seen by training plus the ground truth
/// used for scoring.
#[derive(Clone, Debug)]
pub struct Case {
    pub info: &'static CaseInfo,
    /// Problem with the unknowns marked trainable and observations attached.
    pub spec: ProblemSpec,
    /// Fully specified problem the observations were generated from.
    pub truth: ProblemSpec,
    pub true_params: Vec<f64>,
    pub reference: Vec<f64>,
    pub reference_kind: ReferenceKind,
}

#[derive(Clone, Debug, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

fn poisson_square_spec(f: f64) -> Result<ProblemSpec> {
    let mesh = unit_square(2, 3)?;
    let mut spec = ProblemSpec::new(mesh, Model::Poisson, vec![ParamSpec::known(f)]);
    for side in ["bottom", "right", "top", "left"] {
        spec.essential.push(EssentialBc::on_tag(side, 0, Profile::constant(0.0)));
    }
    Ok(spec)
}

fn elasticity_square_spec() -> Result<ProblemSpec> {
    let mesh = unit_square(2, 2)?;
    let mut spec = ProblemSpec::new(mesh, Model::Elasticity, vec![ParamSpec::known(1.0), ParamSpec::known(1.0)]);
    clamp(&mut spec, "left", 2);
    spec.natural.push(NaturalBc {
        tag: "right".into(),
        flux: NaturalFlux::Traction(vec![0.5, 0.0]),
    });
    Ok(spec)
}

fn clamp(spec: &mut ProblemSpec, tag: &str, components: usize) {
    for c in 0..components {
        spec.essential.push(EssentialBc::on_tag(tag, c, Profile::constant(0.0)));
    }
}

/// Stenosis with no-slip walls and the given inlet velocity profile.
fn stenosis_spec(inlet: Option<Profile>) -> Result<ProblemSpec> {
    let mesh = parse_mesh(STENOSIS_MESH)?;
    let mut spec = ProblemSpec::new(mesh, Model::NavierStokes { convection: true }, vec![ParamSpec::known(0.01)]);
    if let Some(profile) = inlet {
        spec.essential.push(EssentialBc::on_tag("inlet", 0, Profile::constant(0.0)));
        spec.essential.push(EssentialBc::on_tag("inlet", 1, profile));
    }
    clamp(&mut spec, "wall", 2);
    Ok(spec)
}

fn parabolic_inlet() -> Profile {
    Profile::Parabola {
        axis: 0,
        center: 0.0,
        half_width: 0.5,
        peak: 1.0,
    }
}

/// Mesh nodes that lie on no boundary facet.
fn interior_nodes(mesh: &Mesh, candidates: &[usize]) -> Vec<usize> {
    let mut on_boundary = vec![false; mesh.n_nodes()];
    for f in mesh.facets() {
        for &n in &f.nodes {
            on_boundary[n] = true;
        }
    }
    candidates.iter().copied().filter(|&n| !on_boundary[n]).collect()
}

/// Observations of `components` at `count` seeded random nodes whose
/// unknowns are all free.
fn sample_observations(
    truth: &ProblemSpec,
    reference: &[f64],
    candidates: Vec<usize>,
    components: &[usize],
    count: usize,
    seed: u64,
) -> Result<Vec<Observation>> {
    let asm = truth.assembler()?;
    let dofs = asm.dofs();
    let mut pool: Vec<usize> = candidates
        .into_iter()
        .filter(|&n| {
            components
                .iter()
                .all(|&c| dofs.dof(c, n).is_some_and(|d| dofs.role(d) == DofRole::Free))
        })
        .collect();
    if pool.len() < count {
        return Err(Error::Config(format!("only {} candidate observation nodes", pool.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(count);
    pool.sort_unstable();
    let mut obs = Vec::new();
    for &n in &pool {
        for &c in components {
            let d = dofs.dof(c, n).expect("checked above");
            obs.push(Observation {
                component: c,
                node: n,
                value: reference[d],
            });
        }
    }
    Ok(obs)
}

fn oracle_state(spec: &ProblemSpec) -> Result<Vec<f64>> {
    let asm = spec.assembler()?;
    Ok(oracle::solve(&asm, &spec.param_values(), NewtonOptions::default())?.state)
}

impl Case {
    pub fn build(name: &str) -> Result<Case> {
        let info = info(name)?;
        let mut reference_kind = ReferenceKind::Oracle;
        let (spec, truth) = match name {
            "poisson_square" => {
                let s = poisson_square_spec(1.0)?;
                (s.clone(), s)
            }
            "poisson_disk" => {
                let mut s = ProblemSpec::new(unit_disk(2)?, Model::Poisson, vec![ParamSpec::known(1.0)]);
                s.essential.push(EssentialBc::on_tag("boundary", 0, Profile::constant(0.0)));
                reference_kind = ReferenceKind::Analytic;
                (s.clone(), s)
            }
            "poisson_inverse" => {
                let truth = poisson_square_spec(2.0)?;
                let reference = oracle_state(&truth)?;
                let mut spec = poisson_square_spec(1.0)?;
                spec.params = vec![ParamSpec::unknown(1.0)];
                let center = spec.mesh.nearest_node(&[0.5, 0.5, 0.0]);
                let d = truth.assembler()?.dofs().dof(0, center).expect("center node");
                spec.observations.push(Observation {
                    component: 0,
                    node: center,
                    value: reference[d],
                });
                (spec, truth)
            }
            "elasticity_square" => {
                let s = elasticity_square_spec()?;
                (s.clone(), s)
            }
            "elasticity_notch" => {
                let mesh = parse_mesh(NOTCH_MESH)?;
                let mut s = ProblemSpec::new(mesh, Model::Elasticity, vec![ParamSpec::known(1.0), ParamSpec::known(1.0)]);
                clamp(&mut s, "left", 2);
                s.natural.push(NaturalBc {
                    tag: "right".into(),
                    flux: NaturalFlux::Traction(vec![0.5, 0.0]),
                });
                (s.clone(), s)
            }
            "elasticity_cylinder_3d" => {
                let mesh = hollow_cylinder(4, 2, 5, 2, 1.0, 1.5, 3.0)?;
                let mut s = ProblemSpec::new(mesh, Model::Elasticity, vec![ParamSpec::known(0.73), ParamSpec::known(0.376)]);
                clamp(&mut s, "left", 3);
                s.natural.push(NaturalBc {
                    tag: "inner".into(),
                    flux: NaturalFlux::NormalScaled(-1.0),
                });
                s.natural.push(NaturalBc {
                    tag: "right".into(),
                    flux: NaturalFlux::Traction(vec![0.0, 0.0, -0.25]),
                });
                (s.clone(), s)
            }
            "lame_inverse" => {
                let truth = elasticity_square_spec()?;
                let reference = oracle_state(&truth)?;
                let mut spec = truth.clone();
                spec.params = vec![ParamSpec::unknown(1.0), ParamSpec::unknown(1.0)];
                let all: Vec<usize> = (0..spec.mesh.n_nodes()).collect();
                spec.observations = sample_observations(&truth, &reference, all, &[0, 1], 5, info.seed)?;
                (spec, truth)
            }
            "ns_cavity" => {
                let mesh = unit_square(10, 2)?;
                let mut s = ProblemSpec::new(mesh, Model::NavierStokes { convection: true }, vec![ParamSpec::known(0.01)]);
                s.essential.push(EssentialBc::on_tag("top", 0, Profile::constant(1.0)));
                s.essential.push(EssentialBc::on_tag("top", 1, Profile::constant(0.0)));
                for side in ["bottom", "right", "left"] {
                    clamp(&mut s, side, 2);
                }
                s.essential.push(EssentialBc {
                    target: BcTarget::Point([0.0, 0.0, 0.0]),
                    component: 2,
                    value: Profile::constant(0.0),
                });
                (s.clone(), s)
            }
            "ns_stenosis" => {
                let s = stenosis_spec(Some(Profile::constant(1.0)))?;
                (s.clone(), s)
            }
            "ns_inlet_inverse" => {
                let truth = stenosis_spec(Some(parabolic_inlet()))?;
                let reference = oracle_state(&truth)?;
                let mut spec = stenosis_spec(None)?;
                spec.trainable_bc.push(TrainableBc {
                    tag: "inlet".into(),
                    components: vec![0, 1],
                });
                let velocity_nodes = truth.spaces()?[0].nodes().to_vec();
                let candidates = interior_nodes(&truth.mesh, &velocity_nodes);
                spec.observations = sample_observations(&truth, &reference, candidates, &[0, 1], 19, info.seed)?;
                (spec, truth)
            }
            _ => unreachable!("registry and builder disagree on `{name}`"),
        };
        let true_params = truth.param_values();
        let reference = match reference_kind {
            ReferenceKind::Oracle => oracle_state(&truth)?,
            ReferenceKind::Analytic => {
                let asm = truth.assembler()?;
                asm.dofs()
                    .component_nodes(0)
                    .iter()
                    .map(|&n| {
                        let x = truth.mesh.nodes()[n];
                        (1.0 - x[0] * x[0] - x[1] * x[1]) / 4.0
                    })
                    .collect()
            }
        };
        Ok(Case {
            info,
            spec,
            truth,
            true_params,
            reference,
            reference_kind,
        })
    }

    /// Dofs of the trained boundary values, with their true values.
    pub fn trainable_boundary(&self) -> Result<Vec<(usize, f64)>> {
        let asm = self.spec.assembler()?;
        Ok(asm
            .dofs()
            .with_role(DofRole::TrainableEssential)
            .into_iter()
            .map(|d| (d, self.reference[d]))
            .collect())
    }

    /// Relative errors of every field group against the reference, plus
    /// parameter and boundary-value errors for inverse cases.
    pub fn metrics(&self, state: &[f64], params: &[f64], boundary: &[(usize, f64)]) -> Result<Vec<Metric>> {
        let model = self.spec.model;
        let asm = self.truth.assembler()?;
        let groups = model.field_groups(self.spec.dim());
        let mut out = Vec::new();
        for g in &groups {
            let mut pred = Vec::new();
            let mut refv = Vec::new();
            for &c in &g.components {
                let r = asm.component_range(c);
                pred.extend_from_slice(&state[r.clone()]);
                refv.extend_from_slice(&self.reference[r]);
            }
            let name = if groups.len() == 1 {
                "e".to_string()
            } else {
                format!("e_{}", g.name)
            };
            out.push(Metric {
                name,
                value: relative_error(&pred, &refv)?,
            });
        }
        for (i, p) in self.spec.params.iter().enumerate() {
            if p.trainable {
                let truth = self.true_params[i];
                out.push(Metric {
                    name: model.param_names()[i].to_string(),
                    value: params[i],
                });
                out.push(Metric {
                    name: format!("{}_error", model.param_names()[i]),
                    value: (params[i] - truth).abs() / truth.abs(),
                });
            }
        }
        if !boundary.is_empty() {
            let pred: Vec<f64> = boundary.iter().map(|&(_, v)| v).collect();
            let refv: Vec<f64> = boundary.iter().map(|&(d, _)| self.reference[d]).collect();
            out.push(Metric {
                name: "e_inlet".into(),
                value: relative_error(&pred, &refv)?,
            });
        }
        Ok(out)
    }

    pub fn report_metrics(&self, report: &TrainReport) -> Result<Vec<Metric>> {
        self.metrics(&report.state, &report.params, &report.boundary_values)
    }
}

/// Outcome of one threshold check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub case: &'static str,
    pub mode: ModeKind,
    pub metric: &'static str,
    pub value: f64,
    pub accept: f64,
    pub passed: bool,
}

/// Checks the targets of `mode` against computed metrics.
pub fn check(info: &'static CaseInfo, mode: ModeKind, metrics: &[Metric]) -> Vec<Check> {
    info.targets
        .iter()
        .filter(|t| t.mode == mode)
        .map(|t| {
            let value = metrics
                .iter()
                .find(|m| m.name == t.metric)
                .map(|m| m.value)
                .unwrap_or(f64::NAN);
            Check {
                case: info.name,
                mode,
                metric: t.metric,
                value,
                accept: t.accept,
                passed: value <= t.accept,
            }
        })
        .collect()
}

/// Training outcome of one case in one mode.
#[derive(Clone, Debug)]
pub struct CaseRun {
    pub mode: ModeKind,
    pub report: TrainReport,
    pub metrics: Vec<Metric>,
    pub checks: Vec<Check>,
}

impl CaseRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self, case: &Case, seed: u64) -> RunSummary {
        RunSummary {
            version: REPORT_VERSION,
            case: case.info.name.to_string(),
            mode: self.mode.label().to_string(),
            seed,
            iterations: self.report.iterations,
            best_iteration: self.report.best_iteration,
            best_loss: self.report.best_loss,
            wall_time_s: self.report.wall_time_s,
            param_names: case.spec.model.param_names().iter().map(|s| s.to_string()).collect(),
            params: self.report.params.clone(),
            metrics: self.metrics.iter().map(|m| (m.name.clone(), m.value)).collect(),
            checks: self
                .checks
                .iter()
                .map(|c| (c.metric.to_string(), c.value, c.accept, c.passed))
                .collect(),
            identifiability_warning: self.report.identifiability_warning.clone(),
        }
    }
}

impl Case {
    /// Default training configuration of the case.
    pub fn config(&self) -> TrainConfig {
        let mut cfg = TrainConfig::new(self.info.iterations);
        cfg.seed = self.info.seed;
        cfg
    }

    /// Trainer for `mode`, rejecting modes the case does not support.
    pub fn trainer(&self, mode: ModeKind, lambda: f64, config: TrainConfig) -> Result<Trainer> {
        if !self.info.modes.contains(&mode) {
            let modes: Vec<&str> = self.info.modes.iter().map(|m| m.label()).collect();
            return Err(Error::Config(format!(
                "case `{}` runs in modes {}, not {}",
                self.info.name,
                modes.join(", "),
                mode.label()
            )));
        }
        Trainer::new(&self.spec, mode.assimilation(lambda), config)
    }

    pub fn score(&self, mode: ModeKind, report: TrainReport) -> Result<CaseRun> {
        let metrics = self.report_metrics(&report)?;
        let checks = check(self.info, mode, &metrics);
        Ok(CaseRun {
            mode,
            report,
            metrics,
            checks,
        })
    }

    /// Trains the case in `mode` and scores the best iterate.
    pub fn run(
        &self,
        mode: ModeKind,
        lambda: f64,
        config: TrainConfig,
        progress: impl FnMut(usize, f64),
    ) -> Result<CaseRun> {
        let report = self.trainer(mode, lambda, config)?.train_with(progress)?;
        self.score(mode, report)
    }
}
