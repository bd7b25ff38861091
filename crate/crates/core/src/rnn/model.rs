use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cells::*;
use super::{CellConfig, CellKind};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered collection of named parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> Default for ParamSet<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Scalar> ParamSet<T> {
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((name, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn set_tensors(&mut self, values: Vec<Tensor<T>>) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(Error::Invalid("parameter count changed".into()));
        }
        for ((_, slot), v) in self.entries.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::Shape {
                    op: "set_tensors",
                    left: slot.shape(),
                    right: v.shape(),
                });
            }
            *slot = v;
        }
        Ok(())
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.entries.iter_mut().map(|(_, t)| t)
    }
}

/// Parameters of a [`Model`] recorded as trainable leaves on one tape.
#[derive(Debug, Clone)]
pub struct BoundParams<'a, T> {
    set: &'a ParamSet<T>,
    vars: Vec<Var>,
}

impl<'a, T: Scalar> BoundParams<'a, T> {
    /// Pairs `set` with leaves already recorded on a tape, one per entry in
    /// parameter-set order.
    pub fn from_vars(set: &'a ParamSet<T>, vars: Vec<Var>) -> Result<Self> {
        if vars.len() != set.len() {
            return Err(Error::Invalid(format!("{} leaves for {} parameters", vars.len(), set.len())));
        }
        Ok(Self { set, vars })
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.set
            .entries
            .iter()
            .position(|(n, _)| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::Invalid(format!("parameter `{name}` not bound")))
    }

    /// Leaves in parameter-set order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// One batch of equally long input sequences.
#[derive(Debug, Clone)]
pub struct SequenceBatch<T> {
    /// `L` matrices of shape `B×F`.
    pub inputs: Vec<Tensor<T>>,
    /// `L` vectors of `B` timestamps in hours.
    pub times: Vec<Vec<T>>,
    /// Observation masks (`B×F`, 1 = observed). `None` means fully observed.
    pub mask: Option<Vec<Tensor<T>>>,
}

impl<T: Scalar> SequenceBatch<T> {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map(|t| t.rows()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn validate(&self, features: usize) -> Result<()> {
        let b = self.batch_size();
        if self.inputs.is_empty() || b == 0 {
            return Err(Error::Empty("sequence batch"));
        }
        if self.times.len() != self.inputs.len() {
            return Err(Error::Invalid(format!(
                "{} input steps but {} timestamp steps",
                self.inputs.len(),
                self.times.len()
            )));
        }
        for (x, t) in self.inputs.iter().zip(&self.times) {
            if x.shape() != [b, features] {
                return Err(Error::Shape {
                    op: "sequence_forward",
                    left: x.shape(),
                    right: [b, features],
                });
            }
            if t.len() != b {
                return Err(Error::Invalid("timestamp row count differs from batch size".into()));
            }
        }
        if let Some(mask) = &self.mask {
            if mask.len() != self.inputs.len() || mask.iter().any(|m| m.shape() != [b, features]) {
                return Err(Error::Invalid("mask shape differs from inputs".into()));
            }
        }
        Ok(())
    }
}

/// A recurrent layer of one [`CellKind`] followed by a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: CellConfig,
    pub params: ParamSet<T>,
    /// Empirical input means from the training split (GRU-D imputation).
    pub input_mean: Tensor<T>,
}

fn uniform<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Tensor<T> {
    let data = (0..rows * cols).map(|_| T::lit(rng.random_range(-bound..=bound))).collect();
    Tensor::from_vec(rows, cols, data).expect("init shape")
}

fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

impl<T: Scalar> Model<T> {
    /// Seeded initialisation: weights uniform in `±1/√fan_in`.
    pub fn init(config: CellConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, h, out) = (config.input_size, config.hidden_size, config.output_size);
        let bx = 1.0 / (f as f64).sqrt();
        let bh = 1.0 / (h as f64).sqrt();
        let mut ps = ParamSet::default();
        let gates = |kind: CellKind| match kind {
            CellKind::VanillaRnn | CellKind::CtRnn => 1,
            CellKind::Lstm | CellKind::PhasedLstm => 4,
            CellKind::GruD | CellKind::OdeRnnAnode => 3,
            CellKind::CtLstm => 7,
        };
        let g = gates(config.kind);
        ps.insert("W", uniform(&mut rng, f, g * h, bx));
        match config.kind {
            CellKind::GruD | CellKind::OdeRnnAnode => {
                ps.insert("U_zr", uniform(&mut rng, h, 2 * h, bh));
                ps.insert("U_n", uniform(&mut rng, h, h, bh));
            }
            _ => ps.insert("U", uniform(&mut rng, h, g * h, bh)),
        }
        ps.insert("b", uniform(&mut rng, 1, g * h, bh));
        match config.kind {
            CellKind::PhasedLstm => {
                let (lo, hi) = (config.tau_init.0.ln(), config.tau_init.1.ln());
                let taus: Vec<f64> = (0..h).map(|_| rng.random_range(lo..=hi).exp()).collect();
                let shifts: Vec<T> = taus.iter().map(|&t| T::lit(rng.random_range(0.0..=t))).collect();
                ps.insert("tau_raw", Tensor::row(taus.iter().map(|&t| T::lit(softplus_inverse(t))).collect()));
                ps.insert("shift", Tensor::row(shifts));
            }
            CellKind::CtRnn => {
                ps.insert("tau_raw", Tensor::full(1, h, T::lit(softplus_inverse(config.ct_tau_init))));
            }
            CellKind::GruD => {
                ps.insert("gamma_x_w", uniform(&mut rng, 1, f, bx));
                ps.insert("gamma_x_b", uniform(&mut rng, 1, f, bx));
                ps.insert("gamma_h_w", uniform(&mut rng, f, h, bx));
                ps.insert("gamma_h_b", uniform(&mut rng, 1, h, bx));
            }
            CellKind::OdeRnnAnode => {
                let dim = h + config.augment_dims;
                let bd = 1.0 / (dim as f64).sqrt();
                ps.insert("ode_w1", uniform(&mut rng, dim, h, bd));
                ps.insert("ode_b1", uniform(&mut rng, 1, h, bd));
                ps.insert("ode_w2", uniform(&mut rng, h, dim, bh));
                ps.insert("ode_b2", uniform(&mut rng, 1, dim, bh));
            }
            _ => {}
        }
        ps.insert("readout_w", uniform(&mut rng, h, out, bh));
        ps.insert("readout_b", uniform(&mut rng, 1, out, bh));
        Ok(Self {
            input_mean: Tensor::zeros(1, f),
            config,
            params: ps,
        })
    }

    /// Number of trainable scalars, readout included.
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn bind<'a>(&'a self, tape: &mut Tape<T>) -> BoundParams<'a, T> {
        let vars = self.params.entries.iter().map(|(_, t)| tape.param(t)).collect();
        BoundParams { set: &self.params, vars }
    }

    /// Runs the cell over every step of `batch` and applies the readout to
    /// the final hidden state. Returns a `B×P` prediction node.
    pub fn sequence_forward(&self, tape: &mut Tape<T>, p: &BoundParams<T>, batch: &SequenceBatch<T>) -> Result<Var> {
        let cfg = &self.config;
        batch.validate(cfg.input_size)?;
        let b = batch.batch_size();
        let f = cfg.input_size;
        let mut state = CellState::zeros(tape, cfg, b);
        let x_mean = tape.constant(self.input_mean.clone());
        let ones = Tensor::full(b, f, T::one());
        let mut delta = Tensor::<T>::zeros(b, f);
        let mut prev_mask = ones.clone();

        for (k, (xt, times)) in batch.inputs.iter().zip(&batch.times).enumerate() {
            let dt: Vec<T> = if k == 0 {
                vec![T::one(); b]
            } else {
                times.iter().zip(&batch.times[k - 1]).map(|(a, z)| *a - *z).collect()
            };
            let x = tape.constant(xt.clone());
            state = match cfg.kind {
                CellKind::VanillaRnn => vanilla_step(tape, x, &state, p)?,
                CellKind::Lstm => lstm_step(tape, x, &state, p)?,
                CellKind::PhasedLstm => phased_lstm_step(tape, x, times, &state, p, cfg)?,
                CellKind::GruD => {
                    let mask = batch.mask.as_ref().map(|m| m[k].clone()).unwrap_or_else(|| ones.clone());
                    // δ accumulates across unobserved steps.
                    for r in 0..b {
                        for c in 0..f {
                            let carried = if k == 0 {
                                T::zero()
                            } else {
                                (T::one() - prev_mask.get(r, c)) * delta.get(r, c)
                            };
                            delta.set(r, c, dt[r] + carried);
                        }
                    }
                    let m = tape.constant(mask.clone());
                    let d = tape.constant(delta.clone());
                    prev_mask = mask;
                    gru_d_step(tape, x, m, d, &state, p, x_mean)?
                }
                CellKind::CtRnn => ct_rnn_step(tape, x, &dt, &state, p, cfg)?,
                CellKind::CtLstm => ct_lstm_step(tape, x, &dt, &state, p)?,
                CellKind::OdeRnnAnode => ode_rnn_anode_step(tape, x, &dt, &state, p, cfg)?,
            };
        }
        let h = if cfg.kind == CellKind::OdeRnnAnode {
            tape.slice(state.h, 0, cfg.hidden_size)
        } else {
            state.h
        };
        let (rw, rb) = (p.get("readout_w")?, p.get("readout_b")?);
        let out = tape.affine(h, rw, rb);
        tape.check()?;
        Ok(out)
    }

    /// Forward pass on a throwaway tape.
    pub fn predict(&self, batch: &SequenceBatch<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let p = self.bind(&mut tape);
        let out = self.sequence_forward(&mut tape, &p, batch)?;
        Ok(tape.value(out).clone())
    }
}
