mod common;

use common::{grad_check, model_grad_check, random_batch, small_model, uniform};
use flowcast::autodiff::{compute_loss, LossKind, Tape, Tensor, Var};
use flowcast::ode::{integrate, Method, SolverConfig};
use flowcast::rnn::CellKind;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const SEEDS: u64 = 20;

/// Values bounded away from zero so kinks (abs, relu, max) are not probed.
fn away_from_zero(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Tensor<f64> {
    let t = uniform(rng, r, c, 0.2, 1.5);
    let signs = uniform(rng, r, c, -1.0, 1.0);
    Tensor::from_vec(r, c, t.data().iter().zip(signs.data()).map(|(v, s)| v * s.signum()).collect()).unwrap()
}

type Build = fn(&mut Tape<f64>, &[Var]) -> Var;

fn unary_cases() -> Vec<(&'static str, Build)> {
    vec![
        ("neg", |t, v| t.neg(v[0])),
        ("tanh", |t, v| t.tanh(v[0])),
        ("sigmoid", |t, v| t.sigmoid(v[0])),
        ("relu", |t, v| t.relu(v[0])),
        ("exp", |t, v| t.exp(v[0])),
        ("softplus", |t, v| t.softplus(v[0])),
        ("abs", |t, v| t.abs(v[0])),
        ("square", |t, v| t.square(v[0])),
        ("max_scalar", |t, v| t.max_scalar(v[0], 0.1)),
        ("add_scalar", |t, v| t.add_scalar(v[0], 0.7)),
        ("mul_scalar", |t, v| t.mul_scalar(v[0], -1.3)),
        ("one_minus", |t, v| t.one_minus(v[0])),
        ("sum", |t, v| t.sum(v[0])),
        ("mean", |t, v| t.mean(v[0])),
        ("slice", |t, v| t.slice(v[0], 1, 3)),
    ]
}

fn binary_cases() -> Vec<(&'static str, Build)> {
    vec![
        ("add", |t, v| t.add(v[0], v[1])),
        ("sub", |t, v| t.sub(v[0], v[1])),
        ("mul", |t, v| t.mul(v[0], v[1])),
        ("div", |t, v| t.div(v[0], v[1])),
        ("concat", |t, v| t.concat(&[v[0], v[1]])),
    ]
}

#[test]
fn unary_primitives() {
    for (name, build) in unary_cases() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut x = away_from_zero(&mut rng, 3, 4);
            if name == "max_scalar" {
                // keep clear of the floor at 0.1
                x = x.map(|v| if (v - 0.1).abs() < 0.05 { v + 0.2 } else { v });
            }
            let err = grad_check(&[x], seed, build);
            assert!(err <= TOL, "{name} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn binary_primitives_with_broadcasting() {
    for (name, build) in binary_cases() {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = away_from_zero(&mut rng, 3, 4);
            let shapes: &[(usize, usize)] = if name == "concat" { &[(3, 2)] } else { &[(3, 4), (1, 4), (3, 1), (1, 1)] };
            for &(r, c) in shapes {
                let b = away_from_zero(&mut rng, r, c);
                let err = grad_check(&[a.clone(), b.clone()], seed, build);
                assert!(err <= TOL, "{name} rhs {r}x{c} seed {seed}: {err:e}");
                if name != "concat" {
                    let err = grad_check(&[b, a.clone()], seed, build);
                    assert!(err <= TOL, "{name} lhs {r}x{c} seed {seed}: {err:e}");
                }
            }
        }
    }
}

#[test]
fn matmul_chain_and_affine() {
    for seed in 0..SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ms: Vec<Tensor<f64>> = (0..3).map(|_| uniform(&mut rng, 3, 3, -1.0, 1.0)).collect();
        let err = grad_check(&ms, seed, |t, v| {
            let ab = t.matmul(v[0], v[1]);
            t.matmul(ab, v[2])
        });
        assert!(err <= TOL, "matmul chain seed {seed}: {err:e}");

        let x = uniform(&mut rng, 5, 3, -1.0, 1.0);
        let w = uniform(&mut rng, 3, 2, -1.0, 1.0);
        let b = uniform(&mut rng, 1, 2, -1.0, 1.0);
        let err = grad_check(&[x, w, b], seed, |t, v| t.affine(v[0], v[1], v[2]));
        assert!(err <= TOL, "affine seed {seed}: {err:e}");
    }
}

#[test]
fn losses() {
    for kind in [LossKind::Mse, LossKind::Mae, LossKind::Huber { delta: 1.0 }] {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target = uniform(&mut rng, 4, 3, -1.0, 1.0);
            let offset = away_from_zero(&mut rng, 4, 3).map(|v| v * 1.5);
            let pred = Tensor::from_vec(4, 3, target.data().iter().zip(offset.data()).map(|(a, b)| a + b).collect()).unwrap();
            let tgt = target.clone();
            let err = grad_check(&[pred], seed, move |t, v| {
                let y = t.constant(tgt.clone());
                compute_loss(t, kind, v[0], y).unwrap()
            });
            assert!(err <= TOL, "{} seed {seed}: {err:e}", kind.name());
        }
    }
}

#[test]
fn solvers() {
    for method in [Method::Euler, Method::Rk4] {
        for seed in 0..SEEDS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h0 = uniform(&mut rng, 2, 3, -1.0, 1.0);
            let w = uniform(&mut rng, 3, 3, -1.0, 1.0);
            let cfg = SolverConfig::new(method, 4).unwrap();
            let err = grad_check(&[h0, w], seed, |t, v| {
                let w = v[1];
                integrate(t, |t, h| {
                    let hw = t.matmul(h, w);
                    t.tanh(hw)
                }, v[0], 0.0, 1.3, &cfg)
                .unwrap()
            });
            assert!(err <= TOL, "{method:?} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn every_cell_kind() {
    for kind in CellKind::ALL {
        for seed in 0..SEEDS {
            let model = small_model(kind, seed);
            let batch = random_batch(3, 2, 5, 1000 + seed);
            let err = model_grad_check(&model, &batch, seed);
            assert!(err <= TOL, "{kind} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn checker_flags_a_detached_path() {
    // x ⊙ stop_grad(x) has true derivative 2x but the tape reports x.
    let x = Tensor::from_vec(1, 3, vec![0.5, -1.0, 2.0]).unwrap();
    let err = grad_check(&[x], 0, |t, v| {
        let frozen = t.constant(t.value(v[0]).clone());
        t.mul(v[0], frozen)
    });
    assert!(err > 0.4, "{err}");
}
