//! The seven recurrent architectures and their shared readout.
//!
//! All cells use the row-vector convention: a batch of inputs is a `B×F`
//! matrix and the update is `x·W + h·U + b`.

mod cells;
mod checkpoint;
mod model;

pub use cells::{
    ct_lstm_step, ct_rnn_step, decay_interpolate, gru_d_step, lstm_step, ode_rnn_anode_step, phase_gate,
    phased_lstm_step, vanilla_step, CellState,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use model::{BoundParams, Model, ParamSet, SequenceBatch};

use std::fmt;

use crate::error::{Error, Result};
use crate::ode::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKind {
    VanillaRnn,
    Lstm,
    PhasedLstm,
    GruD,
    CtRnn,
    CtLstm,
    OdeRnnAnode,
}

impl CellKind {
    pub const ALL: [CellKind; 7] = [
        CellKind::VanillaRnn,
        CellKind::Lstm,
        CellKind::PhasedLstm,
        CellKind::GruD,
        CellKind::CtRnn,
        CellKind::CtLstm,
        CellKind::OdeRnnAnode,
    ];

    /// Row order of the comparison table.
    pub const TABLE_ORDER: [CellKind; 7] = [
        CellKind::OdeRnnAnode,
        CellKind::VanillaRnn,
        CellKind::Lstm,
        CellKind::PhasedLstm,
        CellKind::CtLstm,
        CellKind::CtRnn,
        CellKind::GruD,
    ];

    /// Short identifier used on the command line and in CSV files.
    pub fn id(&self) -> &'static str {
        match self {
            CellKind::VanillaRnn => "vanilla",
            CellKind::Lstm => "lstm",
            CellKind::PhasedLstm => "phased_lstm",
            CellKind::GruD => "gru_d",
            CellKind::CtRnn => "ct_rnn",
            CellKind::CtLstm => "ct_lstm",
            CellKind::OdeRnnAnode => "anode",
        }
    }

    pub fn display_name(&self) -> &'static str {
        match self {
            CellKind::VanillaRnn => "Vanilla RNN",
            CellKind::Lstm => "LSTM",
            CellKind::PhasedLstm => "Phased LSTM",
            CellKind::GruD => "GRU-D",
            CellKind::CtRnn => "CT-RNN",
            CellKind::CtLstm => "CT-LSTM",
            CellKind::OdeRnnAnode => "ANODE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|k| k.id() == s || k.display_name().to_ascii_lowercase().replace('-', "_") == s)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Shape and gate settings for one recurrent layer plus readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellConfig {
    pub kind: CellKind,
    pub hidden_size: usize,
    pub input_size: usize,
    /// Readout width, one prediction per point of interest.
    pub output_size: usize,
    /// Extra zero-initialised state dimensions (ANODE only).
    pub augment_dims: usize,
    /// Phased-LSTM period initialisation range in hours, sampled log-uniformly.
    pub tau_init: (f64, f64),
    /// Phased-LSTM open ratio.
    pub r_on: f64,
    /// Phased-LSTM leak applied while the gate is closed.
    pub leak_alpha: f64,
    /// Initial CT-RNN time constant.
    pub ct_tau_init: f64,
    pub solver: SolverConfig,
}

impl CellConfig {
    pub fn new(kind: CellKind, input_size: usize, hidden_size: usize, output_size: usize) -> Self {
        Self {
            kind,
            hidden_size,
            input_size,
            output_size,
            augment_dims: 4,
            tau_init: (1.0, 168.0),
            r_on: 0.1,
            leak_alpha: 0.001,
            ct_tau_init: 1.0,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.input_size == 0 || self.output_size == 0 {
            return Err(Error::Config("hidden, input and output sizes must be positive".into()));
        }
        if !(self.r_on > 0.0 && self.r_on <= 1.0) {
            return Err(Error::Config(format!("r_on must be in (0, 1], got {}", self.r_on)));
        }
        if !(0.0..1.0).contains(&self.leak_alpha) {
            return Err(Error::Config(format!("leak_alpha must be in [0, 1), got {}", self.leak_alpha)));
        }
        if !(self.tau_init.0 > 0.0 && self.tau_init.1 >= self.tau_init.0) {
            return Err(Error::Config(format!("bad tau_init range {:?}", self.tau_init)));
        }
        if !(self.ct_tau_init > 0.0) {
            return Err(Error::Config("ct_tau_init must be positive".into()));
        }
        self.solver.validate()
    }

    /// Dimension of the recurrent state `h`.
    pub fn state_size(&self) -> usize {
        match self.kind {
            CellKind::OdeRnnAnode => self.hidden_size + self.augment_dims,
            _ => self.hidden_size,
        }
    }
}

/// Floor applied to learnable time constants and decay rates after the
/// softplus reparameterisation.
pub const POSITIVE_FLOOR: f64 = 1e-3;
