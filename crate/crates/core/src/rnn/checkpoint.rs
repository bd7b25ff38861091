//! Flat checkpoint file: a plain-text header naming each array with its
//! shape and byte offset, followed by the raw little-endian `f64` payload.
//!
//! ```text
//! FLOWCAST-CHECKPOINT 1
//! meta kind=lstm
//! array W 8 128 0
//! array U 32 128 8192
//! end
//! <payload>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{CellConfig, CellKind, Model, ParamSet};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::ode::{Method, SolverConfig};
use crate::scalar::Scalar;

const MAGIC: &str = "FLOWCAST-CHECKPOINT 1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub meta: Vec<(String, String)>,
    pub arrays: Vec<(String, [usize; 2], Vec<f64>)>,
}

impl Checkpoint {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn array(&self, name: &str) -> Option<(&[usize; 2], &[f64])> {
        self.arrays.iter().find(|(n, _, _)| n == name).map(|(_, s, d)| (s, d.as_slice()))
    }
}

fn bad(line: u64, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: "checkpoint".into(),
        line,
        msg: msg.into(),
    }
}

pub fn write_checkpoint<W: Write>(mut w: W, ck: &Checkpoint) -> Result<()> {
    writeln!(w, "{MAGIC}")?;
    for (k, v) in &ck.meta {
        if k.contains(char::is_whitespace) || k.contains('=') || v.contains('\n') {
            return Err(Error::Invalid(format!("unencodable meta entry {k:?}")));
        }
        writeln!(w, "meta {k}={v}")?;
    }
    let mut offset = 0usize;
    for (name, shape, data) in &ck.arrays {
        if name.contains(char::is_whitespace) || data.len() != shape[0] * shape[1] {
            return Err(Error::Invalid(format!("bad array entry {name:?}")));
        }
        writeln!(w, "array {name} {} {} {offset}", shape[0], shape[1])?;
        offset += data.len() * 8;
    }
    writeln!(w, "end")?;
    for (_, _, data) in &ck.arrays {
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Checkpoint> {
    let mut r = BufReader::new(r);
    let mut line = String::new();
    let mut lineno = 0u64;
    let mut next = |r: &mut BufReader<R>, line: &mut String| -> Result<u64> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(bad(lineno + 1, "unexpected end of header"));
        }
        lineno += 1;
        Ok(lineno)
    };
    let n = next(&mut r, &mut line)?;
    if line.trim_end() != MAGIC {
        return Err(bad(n, "missing checkpoint magic"));
    }
    let mut ck = Checkpoint::default();
    let mut layout = Vec::new();
    loop {
        let n = next(&mut r, &mut line)?;
        let l = line.trim_end_matches('\n');
        if l == "end" {
            break;
        } else if let Some(kv) = l.strip_prefix("meta ") {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad(n, "meta entry without '='"))?;
            ck.meta.push((k.to_string(), v.to_string()));
        } else if let Some(rest) = l.strip_prefix("array ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(bad(n, "array entry needs name, rows, cols, offset"));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| bad(n, format!("bad number {s:?}")));
            layout.push((parts[0].to_string(), [num(parts[1])?, num(parts[2])?], num(parts[3])?, n));
        } else {
            return Err(bad(n, format!("unrecognised header line {l:?}")));
        }
    }
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    for (name, shape, offset, n) in layout {
        let len = shape[0] * shape[1];
        let end = offset + len * 8;
        if end > payload.len() {
            return Err(bad(n, format!("array {name} extends past payload")));
        }
        let data = payload[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ck.arrays.push((name, shape, data));
    }
    Ok(ck)
}

impl<T: Scalar> Model<T> {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let meta = vec![
            ("kind", c.kind.id().to_string()),
            ("hidden_size", c.hidden_size.to_string()),
            ("input_size", c.input_size.to_string()),
            ("output_size", c.output_size.to_string()),
            ("augment_dims", c.augment_dims.to_string()),
            ("tau_init", format!("{},{}", c.tau_init.0, c.tau_init.1)),
            ("r_on", c.r_on.to_string()),
            ("leak_alpha", c.leak_alpha.to_string()),
            ("ct_tau_init", c.ct_tau_init.to_string()),
            (
                "solver",
                format!(
                    "{}:{}",
                    match c.solver.method {
                        Method::Euler => "euler",
                        Method::Rk4 => "rk4",
                    },
                    c.solver.steps_per_unit
                ),
            ),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let mut arrays: Vec<_> = self
            .params
            .iter()
            .map(|(n, t)| (n.to_string(), t.shape(), t.data().iter().map(|v| v.as_f64()).collect()))
            .collect();
        arrays.push((
            "input_mean".to_string(),
            self.input_mean.shape(),
            self.input_mean.data().iter().map(|v| v.as_f64()).collect(),
        ));
        Checkpoint { meta, arrays }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let get = |k: &str| ck.meta(k).ok_or_else(|| bad(0, format!("missing meta key {k}")));
        let num = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| bad(0, format!("bad meta {k}"))) };
        let flt = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(0, format!("bad meta {k}"))) };
        let kind = CellKind::parse(get("kind")?).ok_or_else(|| bad(0, "unknown cell kind"))?;
        let mut cfg = CellConfig::new(kind, num("input_size")?, num("hidden_size")?, num("output_size")?);
        cfg.augment_dims = num("augment_dims")?;
        let (lo, hi) = get("tau_init")?.split_once(',').ok_or_else(|| bad(0, "bad tau_init"))?;
        cfg.tau_init = (
            lo.parse().map_err(|_| bad(0, "bad tau_init"))?,
            hi.parse().map_err(|_| bad(0, "bad tau_init"))?,
        );
        cfg.r_on = flt("r_on")?;
        cfg.leak_alpha = flt("leak_alpha")?;
        cfg.ct_tau_init = flt("ct_tau_init")?;
        let (m, s) = get("solver")?.split_once(':').ok_or_else(|| bad(0, "bad solver"))?;
        let method = match m {
            "euler" => Method::Euler,
            "rk4" => Method::Rk4,
            _ => return Err(bad(0, "bad solver method")),
        };
        cfg.solver = SolverConfig::new(method, s.parse().map_err(|_| bad(0, "bad solver steps"))?)?;

        // Layout comes from a fresh init; values from the file.
        let mut model = Model::init(cfg, 0)?;
        let mut params = ParamSet::default();
        for (name, t) in model.params.iter() {
            let (shape, data) = ck.array(name).ok_or_else(|| bad(0, format!("missing array {name}")))?;
            if *shape != t.shape() {
                return Err(Error::Shape {
                    op: "load_checkpoint",
                    left: t.shape(),
                    right: *shape,
                });
            }
            params.insert(name, Tensor::from_vec(shape[0], shape[1], data.iter().map(|&v| T::lit(v)).collect())?);
        }
        model.params = params;
        if let Some((shape, data)) = ck.array("input_mean") {
            model.input_mean = Tensor::from_vec(shape[0], shape[1], data.iter().map(|&v| T::lit(v)).collect())?;
        }
        Ok(model)
    }
}

pub fn save_checkpoint<T: Scalar>(path: &Path, model: &Model<T>) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), &model.to_checkpoint())
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    Model::from_checkpoint(&read_checkpoint(File::open(path)?)?)
}
