use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainError;

pub const CONFIG_VERSION: u32 = 1;

/// Base learning rates of the three parameter groups.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rates {
    pub encoder: f64,
    pub decoder: f64,
    pub classifier: f64,
}

impl Default for Rates {
    fn default() -> Self {
        Self { encoder: 1e-3, decoder: 0.2, classifier: 0.5 }
    }
}

/// Step decay: rates are divided by `factor` every `period` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decay {
    pub factor: f64,
    pub period: usize,
}

impl Default for Decay {
    fn default() -> Self {
        Self { factor: 10.0, period: 50 }
    }
}

impl Decay {
    /// Multiplier applied to base rates during epoch `epoch` (0-based).
    pub fn multiplier(&self, epoch: usize) -> f64 {
        let steps = (epoch / self.period) as i32;
        1.0 / self.factor.powi(steps)
    }
}

fn default_batch() -> usize {
    8
}

fn default_true() -> bool {
    true
}

/// Mask-to-structure training run, read from TOML.
///
/// ```toml
/// version = 1
/// epochs = 100
/// seed = 7
/// dataset = "data"
/// checkpoint = "model.imck"
///
/// [rates]
/// encoder = 0.001
/// decoder = 0.2
/// classifier = 0.5
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    /// Also write the checkpoint after every this many epochs; 0 writes
    /// only the final one.
    #[serde(default)]
    pub checkpoint_interval: usize,
    #[serde(default)]
    pub loss_log: Option<PathBuf>,
    #[serde(default)]
    pub rates: Rates,
    #[serde(default)]
    pub decay: Decay,
    #[serde(default = "default_code_dim")]
    pub code_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_true")]
    pub two_layer: bool,
}

fn default_code_dim() -> usize {
    crate::rvnn::CODE_DIM
}

fn default_hidden() -> usize {
    crate::rvnn::HIDDEN_DIM
}

impl TrainConfig {
    pub fn new(dataset: impl Into<PathBuf>, checkpoint: impl Into<PathBuf>, epochs: usize) -> Self {
        Self {
            version: CONFIG_VERSION,
            epochs,
            batch_size: default_batch(),
            seed: 0,
            dataset: dataset.into(),
            checkpoint: checkpoint.into(),
            checkpoint_interval: 0,
            loss_log: None,
            rates: Rates::default(),
            decay: Decay::default(),
            code_dim: default_code_dim(),
            hidden: default_hidden(),
            two_layer: true,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        for (name, r) in [
            ("encoder", self.rates.encoder),
            ("decoder", self.rates.decoder),
            ("classifier", self.rates.classifier),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("{name} rate must be positive, got {r}"));
            }
        }
        if !(self.decay.factor > 1.0 && self.decay.factor.is_finite()) {
            return bad(format!("decay factor must exceed 1, got {}", self.decay.factor));
        }
        if self.decay.period == 0 {
            return bad("decay period must be positive".into());
        }
        if self.code_dim == 0 || self.hidden == 0 {
            return bad("code_dim and hidden must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, TrainError> {
        let c: Self = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })?;
        let mut c = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut c.dataset);
        rebase(&mut c.checkpoint);
        if let Some(l) = c.loss_log.as_mut() {
            rebase(l);
        }
        Ok(c)
    }

    pub fn rvnn(&self) -> crate::rvnn::RvnnConfig {
        crate::rvnn::RvnnConfig {
            code_dim: self.code_dim,
            hidden: self.hidden,
            two_layer: self.two_layer,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = TrainConfig::from_toml("version = 1\nepochs = 3\ndataset = \"d\"\ncheckpoint = \"m.imck\"\n").unwrap();
        assert_eq!(c.batch_size, 8);
        assert_eq!(c.rates, Rates { encoder: 1e-3, decoder: 0.2, classifier: 0.5 });
        assert_eq!(c.decay, Decay { factor: 10.0, period: 50 });
        assert_eq!((c.code_dim, c.hidden), (80, 200));
    }

    #[test]
    fn round_trips() {
        let mut c = TrainConfig::new("data", "out/m.imck", 12);
        c.loss_log = Some("loss.tsv".into());
        c.rates.encoder = 0.01;
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::new("d", "m", 1);
        let cases: Vec<Box<dyn Fn(&mut TrainConfig)>> = vec![
            Box::new(|c| c.version = 2),
            Box::new(|c| c.rates.decoder = 0.0),
            Box::new(|c| c.rates.encoder = f64::NAN),
            Box::new(|c| c.decay.factor = 1.0),
            Box::new(|c| c.decay.period = 0),
            Box::new(|c| c.batch_size = 0),
        ];
        for f in cases {
            let mut c = base.clone();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(TrainConfig::from_toml("version = 1\nepochs = 1\ndataset = \"d\"\ncheckpoint = \"m\"\nfoo = 3\n").is_err());
    }

    #[test]
    fn default_schedule_divides_by_ten_every_fifty() {
        let d = Decay::default();
        for e in [0usize, 1, 49, 50, 99, 100, 149, 150, 237] {
            let want = 1.0 / 10f64.powi((e / 50) as i32);
            assert!((d.multiplier(e) - want).abs() <= 1e-15 * want, "{e}");
        }
    }

    #[test]
    fn load_rebases_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "version = 1\nepochs = 1\ndataset = \"d\"\ncheckpoint = \"/abs/m\"\nloss_log = \"l.tsv\"\n")
            .unwrap();
        let c = TrainConfig::load(&p).unwrap();
        assert_eq!(c.dataset, dir.path().join("d"));
        assert_eq!(c.checkpoint, PathBuf::from("/abs/m"));
        assert_eq!(c.loss_log, Some(dir.path().join("l.tsv")));
    }
}
