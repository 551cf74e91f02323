//! Plain `key = value` settings files and flag/config/default resolution.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cvae::{ClassifierKind, KlReduction, PriorPreset, TrainConfig};
use crate::error::{Error, Result};
use crate::sampler::{CvaeSettings, FilterConfig, OversampleConfig, Strategy};

/// Keys accepted in a config file. They are the long flag names.
pub const KEYS: &[&str] = &[
    "seed",
    "rho",
    "k-knn",
    "k-smote",
    "k-enn",
    "q-easy",
    "q-hard",
    "beta",
    "kl-reduction",
    "epochs",
    "batch",
    "learning-rate",
    "latent-dim",
    "f-eta",
    "prior-preset",
    "label-column",
    "positive-label",
];

/// Parses `key = value` lines. Blank lines and lines starting with `#` are
/// ignored; keys must be known and may appear once.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: n + 1, message };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(err(format!("empty value for `{k}`")));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(format!("duplicate key `{k}`")));
        }
    }
    Ok(out)
}

/// Every tunable, fully resolved. Serialized into run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub seed: u64,
    pub rho: f64,
    pub k_knn: usize,
    pub k_smote: usize,
    pub k_enn: usize,
    pub q_easy: f64,
    pub q_hard: f64,
    pub beta: f64,
    pub kl_reduction: String,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// `None` picks the width from the input dimension.
    pub latent_dim: Option<usize>,
    pub f_eta: String,
    pub prior_preset: String,
    pub label_column: String,
    pub positive_label: String,
}

impl Default for Settings {
    fn default() -> Self {
        let o = OversampleConfig::default();
        let t = TrainConfig::default();
        Self {
            seed: 0,
            rho: o.rho,
            k_knn: o.k_knn,
            k_smote: o.k_smote,
            k_enn: o.k_enn,
            q_easy: o.filter.q_easy,
            q_hard: o.filter.q_hard,
            beta: t.beta,
            kl_reduction: t.kl_reduction.as_str().into(),
            epochs: t.epochs,
            batch: t.batch_size,
            learning_rate: t.learning_rate,
            latent_dim: None,
            f_eta: ClassifierKind::Forest.to_string(),
            prior_preset: PriorPreset::Default.as_str().into(),
            label_column: "class".into(),
            positive_label: "positive".into(),
        }
    }
}

/// Values given on the command line; `None` falls through to the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub rho: Option<f64>,
    pub k_knn: Option<usize>,
    pub k_smote: Option<usize>,
    pub k_enn: Option<usize>,
    pub q_easy: Option<f64>,
    pub q_hard: Option<f64>,
    pub beta: Option<f64>,
    pub kl_reduction: Option<String>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub learning_rate: Option<f64>,
    pub latent_dim: Option<String>,
    pub f_eta: Option<String>,
    pub prior_preset: Option<String>,
    pub label_column: Option<String>,
    pub positive_label: Option<String>,
}

fn pick<T: FromStr>(flag: Option<T>, cfg: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    if let Some(v) = flag {
        return Ok(v);
    }
    match cfg.get(key) {
        Some(s) => s
            .parse()
            .map_err(|e| Error::invalid(format!("config key `{key}`: cannot parse `{s}`: {e}"))),
        None => Ok(default),
    }
}

fn parse_latent_dim(s: &str) -> Result<Option<usize>> {
    if s == "auto" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(h) if h > 0 => Ok(Some(h)),
        _ => Err(Error::invalid(format!(
            "latent dim must be `auto` or a positive integer, got `{s}`"
        ))),
    }
}

impl Settings {
    /// Flags win over the config map, which wins over defaults.
    pub fn resolve(flags: &Overrides, cfg: &BTreeMap<String, String>) -> Result<Self> {
        let d = Settings::default();
        let latent = match (&flags.latent_dim, cfg.get("latent-dim")) {
            (Some(s), _) | (None, Some(s)) => parse_latent_dim(s)?,
            (None, None) => d.latent_dim,
        };
        let s = Self {
            seed: pick(flags.seed, cfg, "seed", d.seed)?,
            rho: pick(flags.rho, cfg, "rho", d.rho)?,
            k_knn: pick(flags.k_knn, cfg, "k-knn", d.k_knn)?,
            k_smote: pick(flags.k_smote, cfg, "k-smote", d.k_smote)?,
            k_enn: pick(flags.k_enn, cfg, "k-enn", d.k_enn)?,
            q_easy: pick(flags.q_easy, cfg, "q-easy", d.q_easy)?,
            q_hard: pick(flags.q_hard, cfg, "q-hard", d.q_hard)?,
            beta: pick(flags.beta, cfg, "beta", d.beta)?,
            kl_reduction: pick(flags.kl_reduction.clone(), cfg, "kl-reduction", d.kl_reduction)?,
            epochs: pick(flags.epochs, cfg, "epochs", d.epochs)?,
            batch: pick(flags.batch, cfg, "batch", d.batch)?,
            learning_rate: pick(flags.learning_rate, cfg, "learning-rate", d.learning_rate)?,
            latent_dim: latent,
            f_eta: pick(flags.f_eta.clone(), cfg, "f-eta", d.f_eta)?,
            prior_preset: pick(flags.prior_preset.clone(), cfg, "prior-preset", d.prior_preset)?,
            label_column: pick(flags.label_column.clone(), cfg, "label-column", d.label_column)?,
            positive_label: pick(flags.positive_label.clone(), cfg, "positive-label", d.positive_label)?,
        };
        s.oversample(Strategy::Smote)?;
        Ok(s)
    }

    /// Builds and validates the library configuration.
    pub fn oversample(&self, strategy: Strategy) -> Result<OversampleConfig> {
        let base = OversampleConfig::default();
        let cfg = OversampleConfig {
            strategy,
            rho: self.rho,
            k_smote: self.k_smote,
            k_knn: self.k_knn,
            k_enn: self.k_enn,
            filter: FilterConfig {
                q_easy: self.q_easy,
                q_hard: self.q_hard,
                ..base.filter
            },
            cvae: CvaeSettings {
                preset: self.prior_preset.parse()?,
                classifier: self.f_eta.parse()?,
                latent_dim: self.latent_dim,
                train: TrainConfig {
                    beta: self.beta,
                    kl_reduction: self.kl_reduction.parse::<KlReduction>()?,
                    learning_rate: self.learning_rate,
                    epochs: self.epochs,
                    batch_size: self.batch,
                    ..base.cvae.train
                },
            },
            ..base
        };
        cfg.validate()?;
        cfg.cvae.train.validate()?;
        Ok(cfg)
    }

    /// Explicit flags that reproduce these settings without a config file.
    pub fn to_flags(&self) -> Vec<String> {
        [
            ("--seed", self.seed.to_string()),
            ("--rho", self.rho.to_string()),
            ("--k-knn", self.k_knn.to_string()),
            ("--k-smote", self.k_smote.to_string()),
            ("--k-enn", self.k_enn.to_string()),
            ("--q-easy", self.q_easy.to_string()),
            ("--q-hard", self.q_hard.to_string()),
            ("--beta", self.beta.to_string()),
            ("--kl-reduction", self.kl_reduction.clone()),
            ("--epochs", self.epochs.to_string()),
            ("--batch", self.batch.to_string()),
            ("--learning-rate", self.learning_rate.to_string()),
            ("--latent-dim", self.latent_dim.map_or("auto".into(), |h| h.to_string())),
            ("--f-eta", self.f_eta.clone()),
            ("--prior-preset", self.prior_preset.clone()),
            ("--label-column", self.label_column.clone()),
            ("--positive-label", self.positive_label.clone()),
        ]
        .into_iter()
        .flat_map(|(k, v)| [k.to_string(), v])
        .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_spacing() {
        let m = parse_config("# tuned\n\nq-easy = 0.8\n  rho=0.5  \n").unwrap();
        assert_eq!(m["q-easy"], "0.8");
        assert_eq!(m["rho"], "0.5");
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_config("rho 1").is_err());
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("rho = 1\nrho = 2").is_err());
        assert!(parse_config("rho =").is_err());
    }

    #[test]
    fn precedence() {
        let cfg = parse_config("q-easy = 0.8\nq-hard = 0.5\nlatent-dim = 3").unwrap();
        let flags = Overrides {
            q_easy: Some(0.7),
            ..Overrides::default()
        };
        let s = Settings::resolve(&flags, &cfg).unwrap();
        assert_eq!((s.q_easy, s.q_hard, s.latent_dim), (0.7, 0.5, Some(3)));
        assert_eq!(s.k_knn, 5);
    }

    #[test]
    fn invalid_values_fail_resolution() {
        let cfg = parse_config("q-hard = 1.5").unwrap();
        assert!(Settings::resolve(&Overrides::default(), &cfg).is_err());
        let cfg = parse_config("f-eta = svm").unwrap();
        assert!(Settings::resolve(&Overrides::default(), &cfg).is_err());
        let cfg = parse_config("epochs = many").unwrap();
        assert!(Settings::resolve(&Overrides::default(), &cfg).is_err());
    }
}
