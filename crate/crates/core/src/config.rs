//! Run configuration: a flat key-value file with `[section]` headers, every
//! key overridable through `JTRANS_`-prefixed environment variables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::neural::{ModelKind, ScoreFn};

/// Environment prefix; `JTRANS_MODEL_KIND=nmt` overrides `model.kind`.
pub const ENV_PREFIX: &str = "JTRANS_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config key `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

/// Where training examples come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusSource {
    /// Generated API entries: `count` samples from `seed`.
    Synthetic { count: usize, seed: u64 },
    /// A `<fqcn>#<method> static=<bool>` entries file.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Redundant,
    Purified,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Redundant => "redundant",
            Variant::Purified => "purified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segmentation {
    Space,
    Bpe { num_merges: usize },
}

impl Segmentation {
    pub fn label(self) -> &'static str {
        match self {
            Segmentation::Space => "space",
            Segmentation::Bpe { .. } => "bpe",
        }
    }
}

/// Source-side stream for the redundant variant: hex unit tokens by default,
/// mnemonic tokens behind a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceStream {
    Units,
    Mnemonic,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_source: CorpusSource,
    pub fractions: [f64; 3],
    pub variant: Variant,
    pub segmentation: Segmentation,
    pub source_stream: SourceStream,
    pub model_kind: ModelKind,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub dropout: f64,
    pub score_fn: ScoreFn,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub train_seed: u64,
    pub p_list: Vec<f64>,
    pub noise_seed: u64,
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            corpus_source: CorpusSource::Synthetic { count: 500, seed: 1 },
            fractions: [0.8, 0.1, 0.1],
            variant: Variant::Purified,
            segmentation: Segmentation::Space,
            source_stream: SourceStream::Units,
            model_kind: ModelKind::Transformer,
            d_model: 64,
            n_heads: 2,
            n_layers: 2,
            d_ff: 128,
            max_len: 512,
            dropout: 0.0,
            score_fn: ScoreFn::Dot,
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            train_seed: 42,
            p_list: crate::noise::DEFAULT_P_LIST.to_vec(),
            noise_seed: 99,
            out_dir: PathBuf::from("runs"),
            run_id: None,
        }
    }
}

/// Parse `[section]` / `key = value` lines into dotted keys. `#` and `;`
/// start comments; blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError::Parse {
                line: line_no,
                msg: format!("unterminated section header `{line}`"),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Parse { line: line_no, msg: "empty key".into() });
        }
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        out.insert(full, value.trim().to_string());
    }
    Ok(out)
}

/// Collect `JTRANS_SECTION_KEY` overrides as dotted keys: the first `_`
/// segment is the section, the rest (lowercased, joined by `_`) is the key.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for (name, value) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let lower = rest.to_ascii_lowercase();
        let dotted = match lower.split_once('_') {
            Some((section, key)) => format!("{section}.{key}"),
            None => lower,
        };
        out.insert(dotted, value);
    }
    out
}

fn invalid(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("cannot parse `{value}`")))
}

impl RunConfig {
    /// Defaults, then the config file (if any), then environment overrides.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        let mut kv = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.display().to_string(),
                source,
            })?;
            kv = parse_kv(&text)?;
        }
        kv.extend(env_overrides(std::env::vars()));
        let mut cfg = RunConfig::default();
        cfg.apply(&kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, kv: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        // corpus source is assembled from up to three cooperating keys
        let mut synth_count = match self.corpus_source {
            CorpusSource::Synthetic { count, .. } => count,
            _ => 500,
        };
        let mut synth_seed = match self.corpus_source {
            CorpusSource::Synthetic { seed, .. } => seed,
            _ => 1,
        };
        let mut manifest: Option<PathBuf> = match &self.corpus_source {
            CorpusSource::Manifest(p) => Some(p.clone()),
            _ => None,
        };
        let mut source_kind: Option<String> = None;

        for (key, value) in kv {
            match key.as_str() {
                "corpus.source" => source_kind = Some(value.clone()),
                "corpus.count" => synth_count = parse_num(key, value)?,
                "corpus.seed" => synth_seed = parse_num(key, value)?,
                "corpus.manifest" => manifest = Some(PathBuf::from(value)),
                "corpus.fractions" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|p| parse_num(key, p.trim()))
                        .collect::<Result<_, _>>()?;
                    if parts.len() != 3 {
                        return Err(invalid(key, "expected three comma-separated fractions"));
                    }
                    self.fractions = [parts[0], parts[1], parts[2]];
                }
                "data.variant" => {
                    self.variant = match value.as_str() {
                        "redundant" => Variant::Redundant,
                        "purified" => Variant::Purified,
                        other => return Err(invalid(key, format!("unknown variant `{other}`"))),
                    }
                }
                "data.segmentation" => {
                    self.segmentation = match value.as_str() {
                        "space" => Segmentation::Space,
                        "bpe" => {
                            let merges = match self.segmentation {
                                Segmentation::Bpe { num_merges } => num_merges,
                                _ => 1000,
                            };
                            Segmentation::Bpe { num_merges: merges }
                        }
                        other => {
                            return Err(invalid(key, format!("unknown segmentation `{other}`")))
                        }
                    }
                }
                "data.bpe_merges" => {
                    let merges = parse_num(key, value)?;
                    self.segmentation = Segmentation::Bpe { num_merges: merges };
                }
                "data.source_stream" => {
                    self.source_stream = match value.as_str() {
                        "units" => SourceStream::Units,
                        "mnemonic" => SourceStream::Mnemonic,
                        other => return Err(invalid(key, format!("unknown stream `{other}`"))),
                    }
                }
                "model.kind" => {
                    self.model_kind = ModelKind::from_label(value)
                        .ok_or_else(|| invalid(key, format!("unknown model `{value}`")))?;
                }
                "model.d_model" => self.d_model = parse_num(key, value)?,
                "model.n_heads" => self.n_heads = parse_num(key, value)?,
                "model.n_layers" => self.n_layers = parse_num(key, value)?,
                "model.d_ff" => self.d_ff = parse_num(key, value)?,
                "model.max_len" => self.max_len = parse_num(key, value)?,
                "model.dropout" => self.dropout = parse_num(key, value)?,
                "model.score_fn" => {
                    self.score_fn = match value.as_str() {
                        "dot" => ScoreFn::Dot,
                        "general" => ScoreFn::General,
                        other => return Err(invalid(key, format!("unknown score fn `{other}`"))),
                    }
                }
                "train.epochs" => self.epochs = parse_num(key, value)?,
                "train.batch_size" => self.batch_size = parse_num(key, value)?,
                "train.lr" => self.lr = parse_num(key, value)?,
                "train.seed" => self.train_seed = parse_num(key, value)?,
                "noise.p_list" => {
                    self.p_list = value
                        .split(',')
                        .map(|p| parse_num(key, p.trim()))
                        .collect::<Result<_, _>>()?;
                }
                "noise.seed" => self.noise_seed = parse_num(key, value)?,
                "out.dir" => self.out_dir = PathBuf::from(value),
                "out.run_id" => self.run_id = Some(value.clone()),
                other => return Err(invalid(other, "unknown key")),
            }
        }

        let kind = source_kind.as_deref().unwrap_or(match &self.corpus_source {
            CorpusSource::Synthetic { .. } => "synthetic",
            CorpusSource::Manifest(_) => "manifest",
        });
        self.corpus_source = match kind {
            "synthetic" => CorpusSource::Synthetic { count: synth_count, seed: synth_seed },
            "manifest" => {
                let path = manifest.ok_or_else(|| {
                    invalid("corpus.manifest", "required when corpus.source = manifest")
                })?;
                CorpusSource::Manifest(path)
            }
            other => {
                return Err(invalid("corpus.source", format!("unknown source `{other}`")))
            }
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let CorpusSource::Synthetic { count, .. } = self.corpus_source {
            if count == 0 {
                return Err(invalid("corpus.count", "must be positive"));
            }
        }
        if let CorpusSource::Manifest(path) = &self.corpus_source {
            if !path.exists() {
                return Err(invalid(
                    "corpus.manifest",
                    format!("`{}` does not exist", path.display()),
                ));
            }
        }
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.fractions.iter().any(|&f| f < 0.0) {
            return Err(invalid("corpus.fractions", "must be nonnegative and sum to 1"));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(invalid("model.d_model", "must be a positive multiple of n_heads"));
        }
        if self.n_layers == 0 || self.d_ff == 0 || self.max_len == 0 {
            return Err(invalid("model", "layer sizes must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid("model.dropout", "must be in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid("train", "epochs and batch_size must be positive"));
        }
        if !(self.lr > 0.0) {
            return Err(invalid("train.lr", "must be positive"));
        }
        if self.p_list.is_empty() || self.p_list.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(invalid("noise.p_list", "probabilities must lie in [0, 1]"));
        }
        if let Segmentation::Bpe { num_merges } = self.segmentation {
            if num_merges == 0 {
                return Err(invalid("data.bpe_merges", "must be positive"));
            }
        }
        Ok(())
    }

    /// Run identifier: explicit `out.run_id`, else derived from the salient
    /// knobs so reruns land in the same directory.
    pub fn effective_run_id(&self) -> String {
        if let Some(id) = &self.run_id {
            return id.clone();
        }
        format!(
            "{}-{}-{}",
            self.model_kind.label(),
            self.variant.label(),
            self.segmentation.label()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let kv = parse_kv(
            "# a comment\n[model]\nkind = nmt\nd_model = 32\n\n[train]\nlr = 0.01\n",
        )
        .unwrap();
        assert_eq!(kv["model.kind"], "nmt");
        assert_eq!(kv["model.d_model"], "32");
        assert_eq!(kv["train.lr"], "0.01");
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = parse_kv("[ok]\nkey = 1\nbroken line\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }));
    }

    #[test]
    fn applies_values() {
        let kv = parse_kv(
            "[corpus]\nsource = synthetic\ncount = 42\nseed = 9\n\
             [data]\nvariant = redundant\nsegmentation = bpe\nbpe_merges = 77\n\
             [model]\nkind = nmt\nscore_fn = general\n[train]\nepochs = 5\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.apply(&kv).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.corpus_source, CorpusSource::Synthetic { count: 42, seed: 9 });
        assert_eq!(cfg.variant, Variant::Redundant);
        assert_eq!(cfg.segmentation, Segmentation::Bpe { num_merges: 77 });
        assert_eq!(cfg.model_kind, ModelKind::Nmt);
        assert_eq!(cfg.score_fn, ScoreFn::General);
        assert_eq!(cfg.epochs, 5);
    }

    #[test]
    fn rejects_unknown_key() {
        let kv = parse_kv("[model]\nwidth = 3\n").unwrap();
        let err = RunConfig::default().apply(&kv).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }

    #[test]
    fn env_override_maps_to_dotted_key() {
        let vars = vec![
            ("JTRANS_MODEL_D_MODEL".to_string(), "16".to_string()),
            ("JTRANS_DATA_VARIANT".to_string(), "redundant".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let kv = env_overrides(vars.into_iter());
        assert_eq!(kv.get("model.d_model").map(String::as_str), Some("16"));
        assert_eq!(kv.get("data.variant").map(String::as_str), Some("redundant"));
        assert_eq!(kv.len(), 2);
    }

    #[test]
    fn validation_catches_bad_fractions() {
        let mut cfg = RunConfig::default();
        cfg.fractions = [0.5, 0.5, 0.5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn validation_catches_head_mismatch() {
        let mut cfg = RunConfig::default();
        cfg.d_model = 10;
        cfg.n_heads = 4;
        assert!(cfg.validate().is_err());
    }
}
