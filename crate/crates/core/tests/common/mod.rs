//! Property checks shared by the property tests and the acceptance run.
//! Each returns the measured defect so callers can compare against their
//! own tolerance.

#![allow(dead_code)]

use std::sync::Arc;

use galerkin_gcn::cases::{Case, ModeKind, ReferenceKind, CASES, DEFAULT_LAMBDA};
use galerkin_gcn::fe::{volume_rule, ElementKind, ReferenceElement};
use galerkin_gcn::gcn::{GcnNet, GraphInput};
use galerkin_gcn::mesh::generate::{structured_quad, unit_square};
use galerkin_gcn::mesh::GraphOperators;
use galerkin_gcn::mesh::{DofRole, EssentialBc, Observation, Profile};
use galerkin_gcn::oracle::{solve, NewtonOptions};
use galerkin_gcn::physics::Model;
use galerkin_gcn::problem::{ParamSpec, ProblemSpec};
use galerkin_gcn::residual::{NaturalBc, NaturalFlux};
use galerkin_gcn::tensor::{Adam, CsrMatrix, ParamSet, SparseOp, Tape, Tensor};
use galerkin_gcn::training::{Assimilation, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    perm
}

pub fn poisson_square(n: usize, order: usize, f: f64) -> ProblemSpec {
    let mut spec = ProblemSpec::new(
        unit_square(n, order).unwrap(),
        Model::Poisson,
        vec![ParamSpec::known(f)],
    );
    for side in ["bottom", "right", "top", "left"] {
        spec.essential
            .push(EssentialBc::on_tag(side, 0, Profile::constant(0.0)));
    }
    spec
}

pub fn elasticity_square() -> ProblemSpec {
    let mut spec = ProblemSpec::new(
        unit_square(2, 2).unwrap(),
        Model::Elasticity,
        vec![ParamSpec::known(1.0), ParamSpec::known(1.0)],
    );
    for c in 0..2 {
        spec.essential
            .push(EssentialBc::on_tag("left", c, Profile::constant(0.0)));
    }
    spec.natural.push(NaturalBc {
        tag: "right".into(),
        flux: NaturalFlux::Traction(vec![0.5, 0.0]),
    });
    spec
}

/// Small network configuration for property checks.
pub fn small_config(iterations: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(iterations);
    cfg.hidden = vec![6, 6];
    cfg.cheb_order = 3;
    cfg
}

/// Largest relative mismatch between reverse-mode gradients of the soft
/// inverse loss and central differences, over every network tensor and the
/// unknown parameter.
pub fn loss_gradient_fd_error() -> f64 {
    let mesh = structured_quad(2, 1, 2, |s, t| [s, 0.5 * t]).unwrap();
    let mut spec = ProblemSpec::new(mesh, Model::Poisson, vec![ParamSpec::unknown(1.0)]);
    spec.essential
        .push(EssentialBc::on_tag("left", 0, Profile::constant(0.0)));
    spec.essential
        .push(EssentialBc::on_tag("right", 0, Profile::constant(0.2)));
    let obs = spec.mesh.nearest_node(&[0.5, 0.25, 0.0]);
    spec.observations.push(Observation {
        component: 0,
        node: obs,
        value: 0.3,
    });
    let mut trainer = Trainer::new(
        &spec,
        Assimilation::Soft { lambda: 10.0 },
        TrainConfig::new(1),
    )
    .unwrap();
    let loss = |t: &Trainer| {
        let mut tape = Tape::new();
        let g = t.build(&mut tape).unwrap();
        tape.value(g.loss).item()
    };
    // Zero biases put pre-activations exactly on ReLU kinks at nodes with a
    // zero normalized coordinate; move them off.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let biases: Vec<_> = trainer
        .params()
        .iter()
        .filter(|(_, n, _)| n.ends_with("bias"))
        .map(|(id, _, _)| id)
        .collect();
    for id in biases {
        for b in trainer.params_mut().get_mut(id).data_mut() {
            *b = rng.gen_range(-0.1..0.1);
        }
    }
    let mut tape = Tape::new();
    let g = trainer.build(&mut tape).unwrap();
    let grads = tape.backward(g.loss, &g.bound).unwrap();
    let ids: Vec<_> = trainer.params().iter().map(|(id, _, _)| id).collect();
    let mut worst: f64 = 0.0;
    for &id in &ids {
        let len = trainer.params().get(id).len();
        let picks: Vec<usize> = if len == 1 {
            vec![0]
        } else {
            (0..2).map(|_| rng.gen_range(0..len)).collect()
        };
        for k in picks {
            let analytic = grads[id.index()].data()[k];
            let h = 1e-6;
            let orig = trainer.params().get(id).data()[k];
            trainer.params_mut().get_mut(id).data_mut()[k] = orig + h;
            let lp = loss(&trainer);
            trainer.params_mut().get_mut(id).data_mut()[k] = orig - h;
            let lm = loss(&trainer);
            trainer.params_mut().get_mut(id).data_mut()[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let scale = analytic.abs().max(fd.abs()).max(1e-3);
            worst = worst.max((analytic - fd).abs() / scale);
        }
    }
    worst
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn interval_monomial(a: u32) -> f64 {
    if a % 2 == 1 {
        0.0
    } else {
        2.0 / (a as f64 + 1.0)
    }
}

/// Worst error of every volume rule on monomials up to its declared degree.
pub fn quadrature_exactness_error() -> f64 {
    let mut worst: f64 = 0.0;
    for degree in 0..=galerkin_gcn::fe::quadrature::MAX_DEGREE as u32 {
        let quad = volume_rule(ElementKind::Quadrilateral, degree as usize).unwrap();
        let hex = volume_rule(ElementKind::Hexahedron, degree as usize).unwrap();
        let tri = volume_rule(ElementKind::Simplex, degree as usize).unwrap();
        for a in 0..=degree {
            for b in 0..=degree {
                let got = quad.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32));
                worst = worst.max((got - interval_monomial(a) * interval_monomial(b)).abs());
                let got = hex.integrate(|x| x[0].powi(a as i32) * x[2].powi(b as i32));
                worst = worst.max((got - 2.0 * interval_monomial(a) * interval_monomial(b)).abs());
                if a + b <= degree {
                    let got = tri.integrate(|x| x[0].powi(a as i32) * x[1].powi(b as i32));
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    worst = worst.max((got - exact).abs());
                }
            }
        }
    }
    worst
}

/// Worst deviation of `sum_i phi_i` from one (and of `sum_i grad phi_i`
/// from zero) at random interior points of every reference element.
pub fn partition_of_unity_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (kind, orders) in [
        (ElementKind::Quadrilateral, 1..=3),
        (ElementKind::Hexahedron, 1..=3),
        (ElementKind::Simplex, 1..=3),
    ] {
        for order in orders {
            let el = ReferenceElement::new(kind, order).unwrap();
            for _ in 0..5 {
                let xi = match kind {
                    ElementKind::Simplex => {
                        let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                        let (a, b) = if a + b > 1.0 {
                            (1.0 - a, 1.0 - b)
                        } else {
                            (a, b)
                        };
                        [a, b, 0.0]
                    }
                    _ => {
                        let mut p = [0.0; 3];
                        for v in p.iter_mut().take(kind.dim()) {
                            *v = rng.gen_range(-1.0..1.0);
                        }
                        p
                    }
                };
                let ev = el.eval(&xi).unwrap();
                worst = worst.max((ev.values.iter().sum::<f64>() - 1.0).abs());
                for j in 0..kind.dim() {
                    worst = worst.max(ev.grads.iter().map(|g| g[j]).sum::<f64>().abs());
                }
            }
        }
    }
    worst
}

/// Column-stacked `[T_0(L) X, ..., T_{K-1}(L) X]` from the tape against
/// dense matrix powers built from the same `L`.
pub fn chebyshev_dense_error(order: usize, seed: u64) -> f64 {
    let mesh = unit_square(2, 2).unwrap();
    let nodes: Vec<usize> = (0..mesh.n_nodes()).collect();
    let ops = GraphOperators::build(&mesh, &nodes).unwrap();
    let n = ops.n_nodes();
    let l = ops.scaled_laplacian().to_dense();
    let width = 3;
    let x = random_vec(n * width, seed);

    let mut tape = Tape::new();
    let xv = tape.constant(Tensor::matrix(n, width, x.clone()).unwrap());
    let basis = tape
        .cheb_basis(&ops.scaled_laplacian_op(), xv, order)
        .unwrap();
    let got = tape.value(basis).clone();

    let matmul = |a: &[f64], b: &[f64]| {
        let mut c = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                for j in 0..n {
                    c[i * n + j] += a[i * n + k] * b[k * n + j];
                }
            }
        }
        c
    };
    let mut identity = vec![0.0; n * n];
    for i in 0..n {
        identity[i * n + i] = 1.0;
    }
    let mut t = vec![identity, l.clone()];
    while t.len() < order {
        let k = t.len();
        let lt = matmul(&l, &t[k - 1]);
        let next = lt.iter().zip(&t[k - 2]).map(|(a, b)| 2.0 * a - b).collect();
        t.push(next);
    }
    let mut worst: f64 = 0.0;
    for (k, tk) in t.iter().take(order).enumerate() {
        for i in 0..n {
            for c in 0..width {
                let dense: f64 = (0..n).map(|j| tk[i * n + j] * x[j * width + c]).sum();
                worst = worst.max((got.at(i, k * width + c) - dense).abs());
            }
        }
    }
    worst
}

/// Output of a Chebyshev network on a graph whose nodes are relabelled by
/// `perm` against the relabelled output on the original graph.
pub fn gcn_equivariance_defect(seed: u64) -> f64 {
    let mesh = unit_square(2, 2).unwrap();
    let nodes: Vec<usize> = (0..mesh.n_nodes()).collect();
    let ops = GraphOperators::build(&mesh, &nodes).unwrap();
    let n = ops.n_nodes();
    let coords: Vec<Vec<f64>> = mesh.nodes().iter().map(|p| p[..2].to_vec()).collect();
    let perm = shuffled(n, seed);

    let l = ops.scaled_laplacian();
    let mut triplets = Vec::new();
    for i in 0..n {
        for (j, v) in l.row(i) {
            triplets.push((perm[i], perm[j], v));
        }
    }
    let lp = Arc::new(SparseOp::new(
        CsrMatrix::from_triplets(n, n, &triplets).unwrap(),
    ));
    let mut coords_p = vec![Vec::new(); n];
    for i in 0..n {
        coords_p[perm[i]] = coords[i].clone();
    }

    let mut params = ParamSet::new();
    let net = GcnNet::new(&mut params, "net", 2, &[8, 8], 1, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<_> = params.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        for w in params.get_mut(id).data_mut() {
            *w = rng.gen_range(-0.5..0.5);
        }
    }
    let run = |lhat: Arc<SparseOp>, coords: &[Vec<f64>]| {
        let input = GraphInput::from_coordinates(lhat.clone(), coords).unwrap();
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let x = tape.constant(input.features);
        let y = net.forward(&mut tape, &bound, &lhat, x).unwrap();
        tape.value(y).data().to_vec()
    };
    let y = run(ops.scaled_laplacian_op(), &coords);
    let yp = run(lp, &coords_p);
    (0..n)
        .map(|i| (yp[perm[i]] - y[i]).abs())
        .fold(0.0, f64::max)
}

/// `R(a + b) - R(a) - R(b) + R(0)` for the linear models.
pub fn affine_defect(spec: &ProblemSpec, seed: u64) -> f64 {
    let asm = spec.assembler().unwrap();
    let mu = spec.param_values();
    let n = asm.n_dofs();
    let a = random_vec(n, seed);
    let b = random_vec(n, seed + 1);
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
    let ra = asm.residual(&a, &mu).unwrap();
    let rb = asm.residual(&b, &mu).unwrap();
    let rab = asm.residual(&ab, &mu).unwrap();
    let r0 = asm.residual(&vec![0.0; n], &mu).unwrap();
    (0..n)
        .map(|i| (rab[i] - ra[i] - rb[i] + r0[i]).abs())
        .fold(0.0, f64::max)
}

/// Residual change when the elements are listed in a shuffled order.
pub fn element_order_defect(seed: u64) -> f64 {
    let spec = elasticity_square();
    let perm = shuffled(spec.mesh.elements().len(), seed);
    let mut other = spec.clone();
    other.mesh = spec.mesh.with_element_order(&perm).unwrap();
    let state = random_vec(spec.assembler().unwrap().n_dofs(), seed);
    let r1 = spec
        .assembler()
        .unwrap()
        .residual(&state, &[1.0, 1.0])
        .unwrap();
    let r2 = other
        .assembler()
        .unwrap()
        .residual(&state, &[1.0, 1.0])
        .unwrap();
    r1.iter()
        .zip(&r2)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// `||R_u||` of the Galerkin oracle solution of every registered case.
/// Analytic references are replaced by a fresh oracle solve.
pub fn oracle_residuals() -> Vec<(&'static str, f64)> {
    CASES
        .iter()
        .map(|info| {
            let case = Case::build(info.name).unwrap();
            let asm = case.truth.assembler().unwrap();
            let state = match case.reference_kind {
                ReferenceKind::Oracle => case.reference.clone(),
                ReferenceKind::Analytic => {
                    solve(&asm, &case.true_params, NewtonOptions::default())
                        .unwrap()
                        .state
                }
            };
            (
                info.name,
                asm.condensed_norm(&state, &case.true_params).unwrap(),
            )
        })
        .collect()
}

/// Largest deviation of clamped dofs (essential values, plus observations
/// in hard mode) from their prescribed values over `steps` optimizer
/// iterations. Exact clamping gives zero.
pub fn clamping_defect(case: &str, mode: ModeKind, steps: usize) -> f64 {
    let case = Case::build(case).unwrap();
    let mut trainer = Trainer::new(
        &case.spec,
        mode.assimilation(DEFAULT_LAMBDA),
        small_config(steps),
    )
    .unwrap();
    let dofs = trainer.assembler().dofs().clone();
    let mut clamped: Vec<usize> = dofs.with_role(DofRole::Essential);
    if mode == ModeKind::InverseHard {
        clamped.extend(dofs.with_role(DofRole::Observed));
    }
    assert!(!clamped.is_empty());
    let mut adam = Adam::new(1e-2);
    let mut worst: f64 = 0.0;
    for _ in 0..=steps {
        let mut tape = Tape::new();
        let g = trainer.build(&mut tape).unwrap();
        let state = tape.value(g.state).data().to_vec();
        for &d in &clamped {
            worst = worst.max((state[d] - dofs.value(d)).abs());
        }
        let grads = tape.backward(g.loss, &g.bound).unwrap();
        adam.step(trainer.params_mut(), &grads).unwrap();
    }
    worst
}

/// Difference of the final error between two identical training runs.
pub fn rerun_difference(case: &str, mode: ModeKind, iterations: usize) -> f64 {
    let case = Case::build(case).unwrap();
    let mut cfg = case.config();
    cfg.iterations = iterations;
    let run = || {
        let r = case
            .run(mode, DEFAULT_LAMBDA, cfg.clone(), |_, _| {})
            .unwrap();
        r.metrics[0].value
    };
    (run() - run()).abs()
}
