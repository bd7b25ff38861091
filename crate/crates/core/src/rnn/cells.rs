use super::model::BoundParams;
use super::{CellConfig, POSITIVE_FLOOR};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::ode::integrate_rows;
use crate::scalar::Scalar;

/// Recurrent state of one batch. Unused slots stay `None`.
#[derive(Debug, Clone)]
pub struct CellState<T> {
    pub h: Var,
    /// Memory cell (LSTM family).
    pub c: Option<Var>,
    /// Asymptotic memory target (CT-LSTM).
    pub c_limit: Option<Var>,
    /// Last observed input (GRU-D).
    pub x_last: Option<Var>,
    /// Timestamp of the previous observation, per row.
    pub t_last: Option<Vec<T>>,
}

impl<T: Scalar> CellState<T> {
    /// All-zero state for a batch of `batch` rows.
    pub fn zeros(tape: &mut Tape<T>, cfg: &CellConfig, batch: usize) -> Self {
        use super::CellKind::*;
        let h = tape.constant(Tensor::zeros(batch, cfg.state_size()));
        let zeros = |tape: &mut Tape<T>, w| Some(tape.constant(Tensor::zeros(batch, w)));
        let (c, c_limit, x_last) = match cfg.kind {
            Lstm | PhasedLstm => (zeros(tape, cfg.hidden_size), None, None),
            CtLstm => (zeros(tape, cfg.hidden_size), zeros(tape, cfg.hidden_size), None),
            GruD => (None, None, zeros(tape, cfg.input_size)),
            VanillaRnn | CtRnn | OdeRnnAnode => (None, None, None),
        };
        Self {
            h,
            c,
            c_limit,
            x_last,
            t_last: None,
        }
    }

    fn with_h(&self, h: Var) -> Self {
        Self { h, ..self.clone() }
    }
}

fn check_cols<T: Scalar>(tape: &Tape<T>, v: Var, cols: usize, what: &'static str) -> Result<()> {
    let s = tape.shape(v);
    if s[1] != cols {
        return Err(Error::Shape {
            op: what,
            left: s,
            right: [s[0], cols],
        });
    }
    Ok(())
}

fn missing(name: &str) -> Error {
    Error::Invalid(format!("state slot `{name}` missing for this cell"))
}

/// Positive reparameterisation `max(softplus(raw), floor)`.
fn positive<T: Scalar>(tape: &mut Tape<T>, raw: Var) -> Var {
    let sp = tape.softplus(raw);
    tape.max_scalar(sp, T::lit(POSITIVE_FLOOR))
}

/// `h' = tanh(x·W + h·U + b)`.
pub fn vanilla_step<T: Scalar>(tape: &mut Tape<T>, x: Var, state: &CellState<T>, p: &BoundParams<T>) -> Result<CellState<T>> {
    let (w, u, b) = (p.get("W")?, p.get("U")?, p.get("b")?);
    check_cols(tape, x, tape.shape(w)[0], "vanilla_step")?;
    let xw = tape.affine(x, w, b);
    let hu = tape.matmul(state.h, u);
    let pre = tape.add(xw, hu);
    let h = tape.tanh(pre);
    tape.check()?;
    Ok(state.with_h(h))
}

/// Standard LSTM update; gates are laid out `[i | f | g | o]`.
fn lstm_proposal<T: Scalar>(tape: &mut Tape<T>, x: Var, h: Var, c: Var, p: &BoundParams<T>) -> Result<(Var, Var)> {
    let (w, u, b) = (p.get("W")?, p.get("U")?, p.get("b")?);
    check_cols(tape, x, tape.shape(w)[0], "lstm_step")?;
    let hs = tape.shape(u)[0];
    let xw = tape.affine(x, w, b);
    let hu = tape.matmul(h, u);
    let z = tape.add(xw, hu);
    let zi = tape.slice(z, 0, hs);
    let zf = tape.slice(z, hs, 2 * hs);
    let zg = tape.slice(z, 2 * hs, 3 * hs);
    let zo = tape.slice(z, 3 * hs, 4 * hs);
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);
    let fc = tape.mul(f, c);
    let ig = tape.mul(i, g);
    let c_new = tape.add(fc, ig);
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc);
    Ok((c_new, h_new))
}

pub fn lstm_step<T: Scalar>(tape: &mut Tape<T>, x: Var, state: &CellState<T>, p: &BoundParams<T>) -> Result<CellState<T>> {
    let c = state.c.ok_or_else(|| missing("c"))?;
    let (c_new, h_new) = lstm_proposal(tape, x, state.h, c, p)?;
    tape.check()?;
    Ok(CellState {
        h: h_new,
        c: Some(c_new),
        ..state.clone()
    })
}

/// Phased-LSTM time gate `k` for timestamps `t` (`B×1`), per-unit phase
/// shift `shift` and period `tau` (both `1×H`).
///
/// The phase `φ = ((t - s) mod τ) / τ` is evaluated as `(t - s)/τ - n` with
/// the integer `n` taken as a constant, so the gate stays differentiable in
/// `s` and `τ` away from the wrap points.
pub fn phase_gate<T: Scalar>(tape: &mut Tape<T>, t: Var, shift: Var, tau: Var, r_on: T, alpha: T) -> Var {
    let diff = tape.sub(t, shift);
    let q = tape.div(diff, tau);
    let whole = tape.value(q).map(|v| v.floor());
    let whole = tape.constant(whole);
    let phi = tape.sub(q, whole);

    let half_on = r_on * T::lit(0.5);
    let pv = tape.value(phi).clone();
    let rising = pv.map(|v| if v < half_on { T::one() } else { T::zero() });
    let falling = pv.map(|v| if v >= half_on && v < r_on { T::one() } else { T::zero() });
    let closed = pv.map(|v| if v >= r_on { T::one() } else { T::zero() });
    let rising = tape.constant(rising);
    let falling = tape.constant(falling);
    let closed = tape.constant(closed);

    let up = tape.mul_scalar(phi, T::lit(2.0) / r_on);
    let down = tape.one_minus(up);
    let down = tape.add_scalar(down, T::one());
    let leak = tape.mul_scalar(phi, alpha);
    let a = tape.mul(rising, up);
    let b = tape.mul(falling, down);
    let c = tape.mul(closed, leak);
    let ab = tape.add(a, b);
    tape.add(ab, c)
}

/// LSTM proposal blended with the previous state through the time gate:
/// `c' = c + k⊙(c̃ - c)`, `h' = h + k⊙(h̃ - h)`.
pub fn phased_lstm_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    t: &[T],
    state: &CellState<T>,
    p: &BoundParams<T>,
    cfg: &CellConfig,
) -> Result<CellState<T>> {
    let c = state.c.ok_or_else(|| missing("c"))?;
    if let Some(prev) = &state.t_last {
        if prev.len() != t.len() || prev.iter().zip(t).any(|(a, b)| b < a) {
            return Err(Error::Invalid("phased LSTM timestamps must be non-decreasing".into()));
        }
    }
    let (c_prop, h_prop) = lstm_proposal(tape, x, state.h, c, p)?;
    let tau_raw = p.get("tau_raw")?;
    let tau = positive(tape, tau_raw);
    let shift = p.get("shift")?;
    let tv = tape.constant(Tensor::column(t.to_vec()));
    let k = phase_gate(tape, tv, shift, tau, T::lit(cfg.r_on), T::lit(cfg.leak_alpha));
    let dc = tape.sub(c_prop, c);
    let kdc = tape.mul(k, dc);
    let c_new = tape.add(c, kdc);
    let dh = tape.sub(h_prop, state.h);
    let kdh = tape.mul(k, dh);
    let h_new = tape.add(state.h, kdh);
    tape.check()?;
    Ok(CellState {
        h: h_new,
        c: Some(c_new),
        t_last: Some(t.to_vec()),
        ..state.clone()
    })
}

/// GRU update with gates `[z | r | n]` in `W`/`b`; `U_zr` feeds the update
/// and reset gates and `U_n` the candidate applied to `r⊙h`.
fn gru_update<T: Scalar>(tape: &mut Tape<T>, x: Var, h: Var, p: &BoundParams<T>) -> Result<Var> {
    let (w, uzr, un, b) = (p.get("W")?, p.get("U_zr")?, p.get("U_n")?, p.get("b")?);
    check_cols(tape, x, tape.shape(w)[0], "gru_update")?;
    let hs = tape.shape(un)[0];
    let xw = tape.affine(x, w, b);
    let hu = tape.matmul(h, uzr);
    let xz = tape.slice(xw, 0, hs);
    let xr = tape.slice(xw, hs, 2 * hs);
    let xn = tape.slice(xw, 2 * hs, 3 * hs);
    let hz = tape.slice(hu, 0, hs);
    let hr = tape.slice(hu, hs, 2 * hs);
    let zs = tape.add(xz, hz);
    let z = tape.sigmoid(zs);
    let rs = tape.add(xr, hr);
    let r = tape.sigmoid(rs);
    let rh = tape.mul(r, h);
    let rhu = tape.matmul(rh, un);
    let ns = tape.add(xn, rhu);
    let n = tape.tanh(ns);
    let diff = tape.sub(n, h);
    let zd = tape.mul(z, diff);
    Ok(tape.add(h, zd))
}

/// GRU-D step. `mask` and `delta` are `B×F`; `x_mean` is `1×F`.
///
/// Input decay `γx = exp(-max(0, δ⊙w + b))` pulls missing inputs from the
/// last observation toward the empirical mean; hidden decay
/// `γh = exp(-max(0, δ·W + b))` shrinks `h` before the GRU update.
pub fn gru_d_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    mask: Var,
    delta: Var,
    state: &CellState<T>,
    p: &BoundParams<T>,
    x_mean: Var,
) -> Result<CellState<T>> {
    let f = tape.shape(x)[1];
    for (v, what) in [(mask, "gru_d_step mask"), (delta, "gru_d_step delta"), (x_mean, "gru_d_step x_mean")] {
        check_cols(tape, v, f, what)?;
    }
    if tape.value(delta).data().iter().any(|d| *d < T::zero()) {
        return Err(Error::Invalid("GRU-D time gaps must be non-negative".into()));
    }
    let x_last = state.x_last.ok_or_else(|| missing("x_last"))?;

    let (gxw, gxb) = (p.get("gamma_x_w")?, p.get("gamma_x_b")?);
    let s = tape.mul(delta, gxw);
    let s = tape.add(s, gxb);
    let s = tape.relu(s);
    let s = tape.neg(s);
    let gamma_x = tape.exp(s);

    // x̂ = m⊙x + (1-m)⊙(γx⊙x_last + (1-γx)⊙x_mean)
    let toward_mean = tape.sub(x_last, x_mean);
    let scaled = tape.mul(gamma_x, toward_mean);
    let fallback = tape.add(scaled, x_mean);
    let not_mask = tape.one_minus(mask);
    let observed = tape.mul(mask, x);
    let filled = tape.mul(not_mask, fallback);
    let x_hat = tape.add(observed, filled);

    let (ghw, ghb) = (p.get("gamma_h_w")?, p.get("gamma_h_b")?);
    let s = tape.affine(delta, ghw, ghb);
    let s = tape.relu(s);
    let s = tape.neg(s);
    let gamma_h = tape.exp(s);
    let h_decayed = tape.mul(gamma_h, state.h);

    let h_new = gru_update(tape, x_hat, h_decayed, p)?;

    let kept = tape.mul(not_mask, x_last);
    let x_last_new = tape.add(observed, kept);
    tape.check()?;
    Ok(CellState {
        h: h_new,
        x_last: Some(x_last_new),
        ..state.clone()
    })
}

/// Continuous-time RNN: `dh/dt = -h/τ + tanh(x·W + h·U + b)` solved over
/// each row's gap `dt` with the input held constant.
pub fn ct_rnn_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    dt: &[T],
    state: &CellState<T>,
    p: &BoundParams<T>,
    cfg: &CellConfig,
) -> Result<CellState<T>> {
    if dt.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::Invalid("CT-RNN step requires dt > 0".into()));
    }
    let (w, u, b, tau_raw) = (p.get("W")?, p.get("U")?, p.get("b")?, p.get("tau_raw")?);
    check_cols(tape, x, tape.shape(w)[0], "ct_rnn_step")?;
    let drive = tape.affine(x, w, b);
    let tau = positive(tape, tau_raw);
    let field = |tape: &mut Tape<T>, h: Var| {
        let hu = tape.matmul(h, u);
        let pre = tape.add(hu, drive);
        let act = tape.tanh(pre);
        let leak = tape.div(h, tau);
        tape.sub(act, leak)
    };
    let h = integrate_rows(tape, field, state.h, dt, &cfg.solver)?;
    Ok(state.with_h(h))
}

/// `c_limit + (c_fast - c_limit)⊙exp(-rate⊙dt)`; `dt` broadcasts over columns.
pub fn decay_interpolate<T: Scalar>(tape: &mut Tape<T>, c_fast: Var, c_limit: Var, rate: Var, dt: Var) -> Var {
    let rd = tape.mul(rate, dt);
    let nrd = tape.neg(rd);
    let decay = tape.exp(nrd);
    let gap = tape.sub(c_fast, c_limit);
    let g = tape.mul(gap, decay);
    tape.add(c_limit, g)
}

/// Continuous-time LSTM with gates `[i | f | z | o | ī | f̄ | d]`.
///
/// `c_fast = f⊙c + i⊙z` and `c_limit = f̄⊙c̄ + ī⊙z`; between observations the
/// memory relaxes from `c_fast` toward `c_limit` at rate `d`.
pub fn ct_lstm_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    dt: &[T],
    state: &CellState<T>,
    p: &BoundParams<T>,
) -> Result<CellState<T>> {
    let c = state.c.ok_or_else(|| missing("c"))?;
    let c_bar = state.c_limit.ok_or_else(|| missing("c_limit"))?;
    if dt.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::Invalid("CT-LSTM step requires dt > 0".into()));
    }
    let (w, u, b) = (p.get("W")?, p.get("U")?, p.get("b")?);
    check_cols(tape, x, tape.shape(w)[0], "ct_lstm_step")?;
    let hs = tape.shape(u)[0];
    let xw = tape.affine(x, w, b);
    let hu = tape.matmul(state.h, u);
    let pre = tape.add(xw, hu);
    let gate = |tape: &mut Tape<T>, k: usize| tape.slice(pre, k * hs, (k + 1) * hs);
    let (gi, gf, gz, go, gib, gfb, gd) = (
        gate(tape, 0),
        gate(tape, 1),
        gate(tape, 2),
        gate(tape, 3),
        gate(tape, 4),
        gate(tape, 5),
        gate(tape, 6),
    );
    let i = tape.sigmoid(gi);
    let f = tape.sigmoid(gf);
    let z = tape.tanh(gz);
    let o = tape.sigmoid(go);
    let ib = tape.sigmoid(gib);
    let fb = tape.sigmoid(gfb);
    let d = positive(tape, gd);

    let fc = tape.mul(f, c);
    let iz = tape.mul(i, z);
    let c_fast = tape.add(fc, iz);
    let fbc = tape.mul(fb, c_bar);
    let ibz = tape.mul(ib, z);
    let c_limit = tape.add(fbc, ibz);

    let dtv = tape.constant(Tensor::column(dt.to_vec()));
    let c_t = decay_interpolate(tape, c_fast, c_limit, d, dtv);
    let tc = tape.tanh(c_t);
    let h = tape.mul(o, tc);
    tape.check()?;
    Ok(CellState {
        h,
        c: Some(c_t),
        c_limit: Some(c_limit),
        ..state.clone()
    })
}

/// ODE-RNN step over an augmented state: the full `H + A` state evolves
/// under a two-layer tanh field, then a GRU update folds the observation into
/// the first `H` dimensions.
pub fn ode_rnn_anode_step<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    dt: &[T],
    state: &CellState<T>,
    p: &BoundParams<T>,
    cfg: &CellConfig,
) -> Result<CellState<T>> {
    let dim = cfg.hidden_size + cfg.augment_dims;
    check_cols(tape, state.h, dim, "ode_rnn_anode_step state")?;
    if dt.iter().any(|d| !(*d >= T::zero())) {
        return Err(Error::Invalid("ODE-RNN step requires dt >= 0".into()));
    }
    let (w1, b1, w2, b2) = (p.get("ode_w1")?, p.get("ode_b1")?, p.get("ode_w2")?, p.get("ode_b2")?);
    let field = |tape: &mut Tape<T>, h: Var| {
        let a = tape.affine(h, w1, b1);
        let a = tape.tanh(a);
        tape.affine(a, w2, b2)
    };
    let evolved = integrate_rows(tape, field, state.h, dt, &cfg.solver)?;
    let top = tape.slice(evolved, 0, cfg.hidden_size);
    let rest = tape.slice(evolved, cfg.hidden_size, dim);
    let top = gru_update(tape, x, top, p)?;
    let h = tape.concat(&[top, rest]);
    tape.check()?;
    Ok(state.with_h(h))
}
