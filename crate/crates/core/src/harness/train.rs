use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use crate::autodiff::{clip_global_norm, compute_loss, Adam, Tape, Tensor};
use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::rnn::{CellConfig, CellKind, Model};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f64>,
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
    pub elapsed: Duration,
}

/// Per-feature mean over the rows the training windows read.
fn input_means(data: &WindowedDataset) -> Tensor<f64> {
    let frame = data.frame();
    let f = frame.n_features();
    let first = data.target_row(0) - data.window_len();
    let last = data.target_row(data.len() - 1);
    let mut sum = vec![0.0; f];
    for t in first..last {
        for (s, v) in sum.iter_mut().zip(frame.row(t)) {
            *s += v;
        }
    }
    let n = (last - first) as f64;
    Tensor::row(sum.into_iter().map(|s| s / n).collect())
}

/// Cell settings a benchmark run uses for `kind` on `data`.
pub fn cell_config(kind: CellKind, data: &WindowedDataset, cfg: &TrainConfig) -> CellConfig {
    CellConfig::new(kind, data.frame().n_features(), cfg.hidden_size, data.frame().n_pois())
}

/// Backpropagation through time with Adam over shuffled mini-batches.
pub fn train(kind: CellKind, data: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_model(cell_config(kind, data, cfg), data, cfg)
}

pub fn train_model(cell: CellConfig, data: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.window_len() != cfg.sequence_length {
        return Err(Error::Config(format!(
            "dataset windows have length {} but sequence_length is {}",
            data.window_len(),
            cfg.sequence_length
        )));
    }
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let start = Instant::now();
    let mut model = Model::<f64>::init(cell, cfg.seed)?;
    model.input_mean = input_means(data);
    let mut adam = Adam::new(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5b0f_f1e5);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let phase = epoch % cfg.train_stride;
        let mut order: Vec<usize> = (phase..data.len()).step_by(cfg.train_stride).collect();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size) {
            let (batch, target) = data.batch::<f64>(idx)?;
            let mut tape = Tape::new();
            let params = model.bind(&mut tape);
            let pred = model.sequence_forward(&mut tape, &params, &batch)?;
            let y = tape.constant(target);
            let loss = compute_loss(&mut tape, cfg.loss, pred, y)?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            let mut grads = tape.backward(loss)?;
            let vars = params.vars().to_vec();
            let mut g: Vec<Tensor<f64>> = vars
                .iter()
                .zip(model.params.iter())
                .map(|(&v, (_, p))| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
                .collect();
            if g.iter().any(|t| !t.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            clip_global_norm(&mut g, cfg.clip_norm);
            let mut values = model.params.tensors();
            adam.step(&mut values, &g)?;
            model.params.set_tensors(values)?;
            total += value;
            batches += 1;
        }
        loss_curve.push(total / batches.max(1) as f64);
    }
    Ok(TrainOutcome { model, loss_curve, elapsed: start.elapsed() })
}
