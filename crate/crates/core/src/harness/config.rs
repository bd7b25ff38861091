use crate::autodiff::LossKind;
use crate::data::FeatureMode;
use crate::error::{Error, Result};

/// Hidden sizes the benchmark grid draws from.
pub const HIDDEN_SIZES: [usize; 3] = [32, 64, 128];

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sequence_length: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub loss: LossKind,
    pub hidden_size: usize,
    /// Min-max scale count inputs and targets (metrics are always in counts).
    pub normalize_visitors: bool,
    pub use_external_features: bool,
    pub seed: u64,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
    /// Epoch `e` visits only windows whose index is `e` modulo this value.
    /// 1 visits every window every epoch.
    pub train_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            sequence_length: 30,
            batch_size: 16,
            epochs: 300,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            loss: LossKind::Mse,
            hidden_size: 32,
            normalize_visitors: true,
            use_external_features: false,
            seed: 0,
            clip_norm: 100.0,
            train_stride: 1,
        }
    }
}

impl TrainConfig {
    pub fn features(&self) -> FeatureMode {
        if self.use_external_features {
            FeatureMode::External
        } else {
            FeatureMode::VisitorsOnly
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.sequence_length == 0 || self.batch_size == 0 || self.hidden_size == 0 || self.train_stride == 0 {
            return bad("sequence_length, batch_size, hidden_size and train_stride must be positive");
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return bad("optimizer settings out of range");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be positive");
        }
        if let LossKind::Huber { delta } = self.loss {
            if !(delta > 0.0) {
                return bad("huber delta must be positive");
            }
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || Error::Config(format!("bad value for {key}: {value}"));
        fn num<V: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<V> {
            v.trim().parse().map_err(|_| bad())
        }
        match key {
            "sequence_length" => self.sequence_length = num(value, bad)?,
            "batch_size" => self.batch_size = num(value, bad)?,
            "epochs" => self.epochs = num(value, bad)?,
            "lr" => self.lr = num(value, bad)?,
            "beta1" => self.beta1 = num(value, bad)?,
            "beta2" => self.beta2 = num(value, bad)?,
            "eps" => self.eps = num(value, bad)?,
            "loss" => self.loss = LossKind::parse(value.trim()).ok_or_else(bad)?,
            "huber_delta" => self.loss = LossKind::Huber { delta: num(value, bad)? },
            "hidden_size" => self.hidden_size = num(value, bad)?,
            "normalize_visitors" => self.normalize_visitors = num(value, bad)?,
            "use_external_features" => self.use_external_features = num(value, bad)?,
            "seed" => self.seed = num(value, bad)?,
            "clip_norm" => self.clip_norm = num(value, bad)?,
            "train_stride" => self.train_stride = num(value, bad)?,
            _ => return Err(Error::Config(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }
}

/// Parses flat `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let mut cfg = TrainConfig::default();
        assert_eq!((cfg.sequence_length, cfg.batch_size, cfg.epochs, cfg.lr), (30, 16, 300, 1e-3));
        for (k, v) in parse_key_values("# grid\nepochs = 5\nloss=huber\n\nnormalize_visitors=false\n").unwrap() {
            cfg.set(&k, &v).unwrap();
        }
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.loss, LossKind::HUBER_DEFAULT);
        assert!(!cfg.normalize_visitors);
        assert!(cfg.set("momentum", "0.9").is_err());
        assert!(cfg.set("epochs", "many").is_err());
        assert!(parse_key_values("novalue").is_err());
    }
}
