use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Contracts `out` against fixed random weights so every output entry
/// contributes to the scalar being differentiated.
fn project(tape: &mut Tape, out: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = random_tensor(&mut rng, tape.shape(out));
    let w = tape.constant(w);
    let prod = tape.mul(out, w).unwrap();
    tape.sum(prod)
}

/// Relative error between reverse-mode gradients and central differences.
fn fd_check(inputs: &[Tensor], build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let eval = |vals: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &vars);
        let loss = project(&mut tape, out, 99);
        (tape.value(loss).item(), tape, vars, loss)
    };
    let (_, tape, vars, loss) = eval(inputs);
    let grads = tape.backward(loss, &vars).unwrap();

    let h = 1e-6;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, t) in inputs.iter().enumerate() {
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += h;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= h;
            let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
            let ad = grads[k].data()[i];
            num += (fd - ad) * (fd - ad);
            den += fd * fd;
        }
    }
    num.sqrt() / den.sqrt().max(1e-12)
}

fn graph_op(n: usize, seed: u64) -> Arc<SparseOp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            if i == j || rng.gen_bool(0.4) {
                let v = rng.gen_range(-0.5..0.5);
                dense[i * n + j] = v;
                dense[j * n + i] = v;
            }
        }
    }
    Arc::new(SparseOp::new(CsrMatrix::from_dense(n, n, &dense)))
}

#[test]
fn matmul_identity() {
    let mut tape = Tape::new();
    let i = tape.constant(Tensor::identity(2));
    let a = tape.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let c = tape.matmul(i, a).unwrap();
    assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn sum_and_its_gradient() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![1.0, 2.0, 3.0]));
    let s = tape.sum(x);
    assert_eq!(tape.value(s).item(), 6.0);
    let g = tape.backward(s, &[x]).unwrap();
    assert_eq!(g[0].data(), &[1.0, 1.0, 1.0]);
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let err = tape.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]"), "{err}");
    let c = tape.constant(Tensor::zeros(&[3]));
    assert!(tape.add(a, c).is_err());
}

#[test]
fn relu_values_and_mask() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![-1.0, 0.0, 2.0]));
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
    let s = tape.sum(y);
    let g = tape.backward(s, &[x]).unwrap();
    assert_eq!(g[0].data(), &[0.0, 0.0, 1.0]);

    let pos = tape.constant(Tensor::vector(vec![0.5, 1.5]));
    let r = tape.relu(pos);
    assert_eq!(tape.value(r).data(), &[0.5, 1.5]);
}

#[test]
fn relu_gradient_matches_differences_away_from_zero() {
    let x = Tensor::vector(vec![-0.7, -0.2, 0.3, 0.9, -0.05, 0.6]);
    let err = fd_check(&[x], |t, v| t.relu(v[0]));
    assert!(err < 1e-8, "{err}");
}

#[test]
fn l2_norm_cases() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::vector(vec![3.0, 4.0]));
    let n = tape.l2_norm(x);
    assert_eq!(tape.value(n).item(), 5.0);
    let g = tape.backward(n, &[x]).unwrap();
    assert!((g[0].data()[0] - 0.6).abs() < 1e-15);

    let z = tape.param(Tensor::zeros(&[4]));
    let nz = tape.l2_norm(z);
    assert_eq!(tape.value(nz).item(), 0.0);
    let gz = tape.backward(nz, &[z]).unwrap();
    assert!(gz[0].data().iter().all(|&v| v == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut acc = 0.0;
    for x in &v {
        acc += x * x;
    }
    let r = tape.constant(Tensor::vector(v));
    let nr = tape.l2_norm(r);
    assert!((tape.value(nr).item() - acc.sqrt()).abs() < 1e-15);
}

#[test]
fn backward_examples() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::scalar(3.0));
    let other = tape.param(Tensor::vector(vec![1.0, 2.0]));
    let sq = tape.mul(x, x).unwrap();
    let g = tape.backward(sq, &[x, other]).unwrap();
    assert_eq!(g[0].item(), 6.0);
    assert_eq!(g[1].data(), &[0.0, 0.0]);

    let v = tape.param(Tensor::vector(vec![1.0, 2.0]));
    assert!(tape.backward(v, &[v]).is_err());
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::new();
    let c = tape.constant(Tensor::vector(vec![1.0, 2.0]));
    let p = tape.param(Tensor::vector(vec![3.0, 4.0]));
    let m = tape.mul(c, p).unwrap();
    let s = tape.sum(m);
    assert!(!tape.requires_grad(c));
    let g = tape.backward(s, &[c, p]).unwrap();
    assert_eq!(g[0].data(), &[0.0, 0.0]);
    assert_eq!(g[1].data(), &[1.0, 2.0]);
}

#[test]
fn matmul_gradient_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_tensor(&mut rng, &[4, 3]);
    let b = random_tensor(&mut rng, &[3, 5]);
    let err = fd_check(&[a, b], |t, v| t.matmul(v[0], v[1]).unwrap());
    assert!(err < 1e-6, "{err}");
}

#[test]
fn elementwise_gradients_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_tensor(&mut rng, &[3, 4]);
    let b = random_tensor(&mut rng, &[3, 4]);
    let s = random_tensor(&mut rng, &[1]);
    let row = random_tensor(&mut rng, &[4]);
    let err = fd_check(&[a, b, s, row], |t, v| {
        let x = t.add(v[0], v[1]).unwrap();
        let y = t.sub(x, v[1]).unwrap();
        let z = t.mul(y, v[1]).unwrap();
        let w = t.mul_scalar(z, v[2]).unwrap();
        let q = t.scale(w, 1.7);
        let sp = t.softplus(q);
        t.add_row(sp, v[3]).unwrap()
    });
    assert!(err < 1e-5, "{err}");
}

#[test]
fn structural_gradients_fd() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_tensor(&mut rng, &[4, 2]);
    let b = random_tensor(&mut rng, &[4, 3]);
    let v = random_tensor(&mut rng, &[5]);
    let err = fd_check(&[a, b, v], |t, x| {
        let c = t.concat_cols(&[x[0], x[1]]).unwrap();
        let g = t.gather(c, vec![3, 0, 0, 2]).unwrap();
        let n = t.l2_norm(g);
        let idx: Arc<[usize]> = vec![1, 4].into();
        let part = t.gather(x[2], vec![0, 3]).unwrap();
        let rest = t.gather(x[2], vec![1, 2, 4]).unwrap();
        let sc = t.scatter(5, vec![(part, idx), (rest, vec![0, 2, 3].into())]).unwrap();
        let nn = t.concat_rows(&[sc, n]).unwrap();
        let s = t.sum(nn);
        t.mul_scalar(nn, s).unwrap()
    });
    assert!(err < 1e-5, "{err}");
}

#[test]
fn sparse_and_cheb_gradients_fd() {
    let op = graph_op(6, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = random_tensor(&mut rng, &[6, 3]);
    let err = fd_check(&[x.clone()], |t, v| t.sparse_mul(&op, v[0]).unwrap());
    assert!(err < 1e-6, "{err}");
    for k in 1..=6 {
        let err = fd_check(&[x.clone()], |t, v| t.cheb_basis(&op, v[0], k).unwrap());
        assert!(err < 1e-6, "K={k}: {err}");
    }
}

#[test]
fn cheb_zero_operator() {
    let op = Arc::new(SparseOp::new(CsrMatrix::from_triplets(3, 3, &[]).unwrap()));
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap());
    let z = tape.cheb_basis(&op, x, 3).unwrap();
    assert_eq!(tape.value(z).data(), &[1.0, 0.0, -1.0, 2.0, 0.0, -2.0, 3.0, 0.0, -3.0]);
    let z1 = tape.cheb_basis(&op, x, 1).unwrap();
    assert_eq!(tape.value(z1).data(), &[1.0, 2.0, 3.0]);
    assert!(tape.cheb_basis(&op, x, 0).is_err());
}

#[test]
fn backward_is_deterministic() {
    let op = graph_op(8, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random_tensor(&mut rng, &[8, 2]);
    let w = random_tensor(&mut rng, &[6, 4]);
    let run = || {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let wv = tape.param(w.clone());
        let z = tape.cheb_basis(&op, xv, 3).unwrap();
        let y = tape.matmul(z, wv).unwrap();
        let r = tape.relu(y);
        let l = tape.l2_norm(r);
        let g = tape.backward(l, &[wv]).unwrap();
        (tape.value(l).item(), g[0].clone())
    };
    let (l1, g1) = run();
    let (l2, g2) = run();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert_eq!(g1, g2);
}

#[test]
fn adam_zero_gradient_keeps_parameters() {
    let mut params = ParamSet::new();
    let id = params.insert("p", Tensor::vector(vec![1.0, -2.0])).unwrap();
    let mut adam = Adam::new(0.1);
    adam.step(&mut params, &[Tensor::zeros(&[2])]).unwrap();
    assert_eq!(params.get(id).data(), &[1.0, -2.0]);
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut params = ParamSet::new();
    let id = params.insert("p", Tensor::scalar(1.0)).unwrap();
    let mut adam = Adam::new(0.1);
    adam.step(&mut params, &[Tensor::scalar(1.0)]).unwrap();
    // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
    let expected = 1.0 - 0.1 / (1.0 + 1e-8);
    assert!((params.get(id).item() - expected).abs() < 1e-15);
}

#[test]
fn adam_descends_scalar_quadratic() {
    // f(p) = (p - 3)^2 from p = 0: iterates move monotonically toward 3.
    let mut params = ParamSet::new();
    let id = params.insert("p", Tensor::scalar(0.0)).unwrap();
    let mut adam = Adam::new(0.01);
    let mut prev = 0.0;
    for _ in 0..100 {
        let p = params.get(id).item();
        adam.step(&mut params, &[Tensor::scalar(2.0 * (p - 3.0))]).unwrap();
        let now = params.get(id).item();
        assert!(now > prev && now < 3.0);
        prev = now;
    }
}

#[test]
fn adam_rejects_non_finite_gradient() {
    let mut params = ParamSet::new();
    params.insert("theta", Tensor::scalar(1.0)).unwrap();
    let err = Adam::default()
        .step(&mut params, &[Tensor::scalar(f64::NAN)])
        .unwrap_err()
        .to_string();
    assert!(err.contains("theta"), "{err}");
}

#[test]
fn duplicate_parameter_names_rejected() {
    let mut params = ParamSet::new();
    params.insert("a", Tensor::scalar(1.0)).unwrap();
    assert!(params.insert("a", Tensor::scalar(2.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_chain_gradient_matches_fd(seed in 0u64..1000, m in 1usize..5, k in 1usize..5, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, &[m, k]);
        let b = random_tensor(&mut rng, &[k, n]);
        let bias = random_tensor(&mut rng, &[n]);
        let err = fd_check(&[a, b, bias], |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            let y = t.add_row(y, v[2]).unwrap();
            t.mul(y, y).unwrap()
        });
        prop_assert!(err < 1e-5, "relative error {}", err);
    }

    #[test]
    fn replaying_a_graph_gives_identical_loss(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_tensor(&mut rng, &[3, 3]);
        let eval = || {
            let mut tape = Tape::new();
            let v = tape.param(a.clone());
            let y = tape.matmul(v, v).unwrap();
            let n = tape.l2_norm(y);
            tape.value(n).item()
        };
        prop_assert_eq!(eval().to_bits(), eval().to_bits());
    }
}
