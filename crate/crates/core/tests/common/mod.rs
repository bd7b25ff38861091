#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// ARMA(p, q) path with unit innovations after a 500-step burn-in.
pub fn simulate_arma(phi: &[f64], theta: &[f64], c: f64, n: usize, seed: u64) -> Vec<f64> {
    let burn = 500;
    let e = normals(n + burn, seed);
    let mut y = vec![0.0; n + burn];
    for t in 0..n + burn {
        let mut v = c + e[t];
        for (i, a) in phi.iter().enumerate() {
            if t > i {
                v += a * y[t - 1 - i];
            }
        }
        for (j, b) in theta.iter().enumerate() {
            if t > j {
                v += b * e[t - 1 - j];
            }
        }
        y[t] = v;
    }
    y.split_off(burn)
}

pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    normals(n, seed)
        .into_iter()
        .scan(0.0, |acc, e| {
            *acc += e;
            Some(*acc)
        })
        .collect()
}

use flowcast::autodiff::{Tape, Tensor, Var};
use flowcast::rnn::{BoundParams, CellConfig, CellKind, Model, SequenceBatch};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central-difference check of `build` with respect to every element of
/// every input; the scalar probed is `Σ out ⊙ R` for a fixed random `R`.
/// Returns the worst relative error.
pub fn grad_check(inputs: &[Tensor<f64>], seed: u64, build: impl Fn(&mut Tape<f64>, &[Var]) -> Var) -> f64 {
    let forward = |vals: &[Tensor<f64>]| -> (Tape<f64>, Vec<Var>, Var) {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.param(t)).collect();
        let out = build(&mut tape, &vars);
        (tape, vars, out)
    };
    let (tape, _, out) = forward(inputs);
    let [r, c] = tape.shape(out);
    let weights = uniform(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed), r, c, -1.0, 1.0);
    let probe = |vals: &[Tensor<f64>]| -> f64 {
        let (tape, _, out) = forward(vals);
        tape.check().unwrap();
        tape.value(out).data().iter().zip(weights.data()).map(|(a, b)| a * b).sum()
    };

    let (mut tape, vars, out) = forward(inputs);
    let w = tape.constant(weights.clone());
    let prod = tape.mul(out, w);
    let loss = tape.sum(prod);
    let grads = tape.backward(loss).unwrap();

    let mut worst: f64 = 0.0;
    for (i, v) in vars.iter().enumerate() {
        let g = grads.get(*v).unwrap();
        for j in 0..inputs[i].len() {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[j] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[j] -= FD_STEP;
            let numeric = (probe(&plus) - probe(&minus)) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[j], numeric));
        }
    }
    worst
}

/// Regular hourly-ish batch with jittered gaps so continuous-time cells see
/// distinct `dt` per row.
pub fn random_batch(inputs: usize, batch: usize, len: usize, seed: u64) -> SequenceBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = (0..len).map(|_| uniform(&mut rng, batch, inputs, -1.0, 1.0)).collect();
    let mut t: Vec<f64> = (0..batch).map(|_| rng.random_range(0.0..3.0)).collect();
    let mut times = Vec::with_capacity(len);
    for _ in 0..len {
        times.push(t.clone());
        for v in t.iter_mut() {
            *v += rng.random_range(0.5..1.5);
        }
    }
    SequenceBatch {
        inputs: xs,
        times,
        mask: None,
    }
}

/// Worst relative error of the model's parameter gradients through the
/// full sequence forward pass.
pub fn model_grad_check(model: &Model<f64>, batch: &SequenceBatch<f64>, seed: u64) -> f64 {
    grad_check(&model.params.tensors(), seed, |tape, vars| {
        let bound = BoundParams::from_vars(&model.params, vars.to_vec()).unwrap();
        model.sequence_forward(tape, &bound, batch).unwrap()
    })
}

pub fn small_model(kind: CellKind, seed: u64) -> Model<f64> {
    let mut cfg = CellConfig::new(kind, 3, 4, 2);
    if kind == CellKind::PhasedLstm {
        // Wide open phase and a visible leak so every parameter matters.
        cfg.r_on = 0.6;
        cfg.leak_alpha = 0.2;
        cfg.tau_init = (2.0, 8.0);
    }
    let mut m = Model::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
    m.input_mean = uniform(&mut rng, 1, 3, -0.5, 0.5);
    m
}
