//! Command-line entry point: build, train, eval, noise-sweep, and segcmp
//! over one run configuration. Exit codes: 0 success, 1 configuration or
//! validation error, 2 runtime failure.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jtrans::config::{env_overrides, parse_kv, ConfigError, RunConfig};
use jtrans::pipeline::{
    cmd_build, cmd_eval, cmd_noise_sweep, cmd_segcmp, cmd_train, PipelineError,
};

#[derive(Parser)]
#[command(name = "jtrans", version, about = "Bytecode-to-source translation workbench")]
struct Cli {
    /// Config file (flat key = value with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    cmd: Cmd,
}

/// Flag overrides; each maps onto one config key and wins over the file and
/// the JTRANS_* environment.
#[derive(Args)]
struct Overrides {
    /// corpus.source: synthetic | manifest
    #[arg(long, global = true)]
    source: Option<String>,
    /// corpus.count (synthetic sample count)
    #[arg(long, global = true)]
    count: Option<usize>,
    /// corpus.seed
    #[arg(long, global = true)]
    corpus_seed: Option<u64>,
    /// corpus.manifest (entries file)
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// data.variant: redundant | purified
    #[arg(long, global = true)]
    variant: Option<String>,
    /// data.segmentation: space | bpe
    #[arg(long, global = true)]
    segmentation: Option<String>,
    /// data.bpe_merges
    #[arg(long, global = true)]
    bpe_merges: Option<usize>,
    /// data.source_stream: units | mnemonic
    #[arg(long, global = true)]
    source_stream: Option<String>,
    /// model.kind: transformer | nmt
    #[arg(long, global = true)]
    model: Option<String>,
    /// train.epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// train.batch_size
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// train.lr
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// train.seed
    #[arg(long, global = true)]
    train_seed: Option<u64>,
    /// noise.p_list, comma-separated
    #[arg(long, global = true)]
    p_list: Option<String>,
    /// noise.seed
    #[arg(long, global = true)]
    noise_seed: Option<u64>,
    /// out.dir
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// out.run_id
    #[arg(long, global = true)]
    run_id: Option<String>,
}

impl Overrides {
    fn into_kv(self) -> BTreeMap<String, String> {
        let mut kv = BTreeMap::new();
        let mut put = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                kv.insert(key.to_string(), v);
            }
        };
        put("corpus.source", self.source);
        put("corpus.count", self.count.map(|v| v.to_string()));
        put("corpus.seed", self.corpus_seed.map(|v| v.to_string()));
        put("corpus.manifest", self.manifest.map(|p| p.display().to_string()));
        put("data.variant", self.variant);
        put("data.segmentation", self.segmentation);
        put("data.bpe_merges", self.bpe_merges.map(|v| v.to_string()));
        put("data.source_stream", self.source_stream);
        put("model.kind", self.model);
        put("train.epochs", self.epochs.map(|v| v.to_string()));
        put("train.batch_size", self.batch_size.map(|v| v.to_string()));
        put("train.lr", self.lr.map(|v| v.to_string()));
        put("train.seed", self.train_seed.map(|v| v.to_string()));
        put("noise.p_list", self.p_list);
        put("noise.seed", self.noise_seed.map(|v| v.to_string()));
        put("out.dir", self.out.map(|p| p.display().to_string()));
        put("out.run_id", self.run_id);
        kv
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the parallel corpus (splits, token files, stats report).
    Build,
    /// Train the configured model; writes checkpoint, vocabularies, curve.
    Train,
    /// Decode and score the test split against the trained checkpoint.
    Eval,
    /// Evaluate the clean-trained checkpoint across unit error probabilities.
    NoiseSweep,
    /// Compare space and BPE segmentation on the purified variant.
    Segcmp,
}

fn resolve_config(cli_config: Option<&PathBuf>, flags: BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    let mut kv = BTreeMap::new();
    if let Some(path) = cli_config {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        kv = parse_kv(&text)?;
    }
    kv.extend(env_overrides(std::env::vars()));
    kv.extend(flags);
    let mut cfg = RunConfig::default();
    cfg.apply(&kv)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = resolve_config(cli.config.as_ref(), cli.overrides.into_kv())
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    match cli.cmd {
        Cmd::Build => {
            let dir = cmd_build(&cfg)?;
            println!("corpus written to {}", dir.display());
        }
        Cmd::Train => {
            let outcome = cmd_train(&cfg)?;
            let last = outcome.curve.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {} epochs, final loss {:.4}, checkpoint under {}",
                outcome.curve.len(),
                last,
                outcome.run_dir.display()
            );
        }
        Cmd::Eval => {
            let report = cmd_eval(&cfg)?;
            println!(
                "run {}: BLEU-4 {:.2}%, WER {:.2}% ({} samples)",
                report.run_id,
                report.bleu4_percent,
                report.wer_percent,
                report.per_sample.len()
            );
        }
        Cmd::NoiseSweep => {
            let report = cmd_noise_sweep(&cfg)?;
            println!("run {}: noise sweep", report.run_id);
            println!("p_u,bleu4,wer");
            for row in &report.rows {
                println!("{},{:.2},{:.2}", row.p_u, row.bleu4_percent, row.wer_percent);
            }
        }
        Cmd::Segcmp => {
            let rows = cmd_segcmp(&cfg)?;
            println!("ALGORITHMS,BLEU-4,WER");
            for row in &rows {
                println!("{},{:.2},{:.2}", row.algorithm, row.bleu4_percent, row.wer_percent);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
