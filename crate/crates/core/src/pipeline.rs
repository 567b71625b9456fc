//! End-to-end orchestration: corpus building, dataset assembly, vocabulary
//! and segmentation handling, training, evaluation, noise sweeps, and the
//! CSV/report writers behind every CLI subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::classfile::UnitSequence;
use crate::config::{CorpusSource, RunConfig, Segmentation, SourceStream, Variant};
use crate::corpus::{
    build_corpus, generate_entries, load_entries, read_split_samples, write_corpus,
    CorpusConfig, CorpusError, Split, StoredSample,
};
use crate::metrics::{
    bleu4, corpus_scores, entropy_redundancy, wer, MetricsError,
};
use crate::neural::train::{greedy_decode, train, Pair, TrainConfig};
use crate::neural::{checkpoint, Hyper, ModelParams, NeuralError};
use crate::noise::{inject, sample_seed, NoiseSpec};
use crate::tokenize::{apply_bpe, learn_bpe, MergeTable, TokenizeError, Vocabulary, END_OF_WORD};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    /// Setup problems the operator must fix (CLI exit code 1).
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    /// Whether this is a configuration/validation failure (exit 1) rather
    /// than a runtime failure (exit 2).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            PipelineError::Invalid(_) | PipelineError::Neural(NeuralError::VocabMismatch)
        )
    }
}

pub fn corpus_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("corpus")
}

pub fn run_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join(cfg.effective_run_id())
}

/// Render 2-byte units as lowercase 4-hex-digit tokens.
pub fn units_to_hex_tokens(units: &[u16]) -> Vec<String> {
    units.iter().map(|u| format!("{u:04x}")).collect()
}

/// One aligned source/target token pair, still in token (not id) space.
#[derive(Debug, Clone)]
pub struct TokenPair {
    pub id: String,
    pub src: Vec<String>,
    pub tgt: Vec<String>,
}

/// Project a stored sample onto the configured variant and source stream.
pub fn assemble_pair(
    sample: &StoredSample,
    variant: Variant,
    stream: SourceStream,
) -> TokenPair {
    let (src, tgt) = match variant {
        Variant::Redundant => {
            let src = match stream {
                SourceStream::Units => {
                    units_to_hex_tokens(&UnitSequence::from_bytes(&sample.class_bytes).units)
                }
                SourceStream::Mnemonic => sample.mnemonic_tokens.clone(),
            };
            (src, sample.source_tokens.clone())
        }
        Variant::Purified => (
            sample.purified_bytecode_tokens.clone(),
            sample.purified_source_tokens.clone(),
        ),
    };
    TokenPair { id: sample.id.clone(), src, tgt }
}

pub fn load_split_pairs(
    dir: &Path,
    split: Split,
    cfg: &RunConfig,
) -> Result<Vec<TokenPair>, PipelineError> {
    let samples = read_split_samples(dir, split)?;
    if samples.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "no {} samples under {} — run `build` first",
            split.label(),
            dir.display()
        )));
    }
    Ok(samples
        .iter()
        .map(|s| assemble_pair(s, cfg.variant, cfg.source_stream))
        .collect())
}

/// Segmentation stage: identity for space tokens, learned merges for BPE.
pub struct Segmenter {
    tables: Option<(MergeTable, MergeTable)>,
}

impl Segmenter {
    pub fn identity() -> Segmenter {
        Segmenter { tables: None }
    }

    /// Learn merge tables from the training split, one per side.
    pub fn learn(seg: Segmentation, train_pairs: &[TokenPair]) -> Segmenter {
        let Segmentation::Bpe { num_merges } = seg else {
            return Segmenter::identity();
        };
        let freq_of = |side: fn(&TokenPair) -> &Vec<String>| {
            let mut freq = std::collections::HashMap::new();
            for pair in train_pairs {
                for token in side(pair) {
                    *freq.entry(token.clone()).or_insert(0usize) += 1;
                }
            }
            freq
        };
        let src_table = learn_bpe(&freq_of(|p| &p.src), num_merges);
        let tgt_table = learn_bpe(&freq_of(|p| &p.tgt), num_merges);
        Segmenter { tables: Some((src_table, tgt_table)) }
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        if let Some((src, tgt)) = &self.tables {
            src.save(&dir.join("src.bpe"))?;
            tgt.save(&dir.join("tgt.bpe"))?;
        }
        Ok(())
    }

    pub fn load(seg: Segmentation, dir: &Path) -> Result<Segmenter, PipelineError> {
        if !matches!(seg, Segmentation::Bpe { .. }) {
            return Ok(Segmenter::identity());
        }
        let src = MergeTable::load(&dir.join("src.bpe"))?;
        let tgt = MergeTable::load(&dir.join("tgt.bpe"))?;
        Ok(Segmenter { tables: Some((src, tgt)) })
    }

    fn segment(table: Option<&MergeTable>, tokens: &[String]) -> Vec<String> {
        match table {
            None => tokens.to_vec(),
            Some(t) => tokens.iter().flat_map(|tok| apply_bpe(t, tok)).collect(),
        }
    }

    pub fn seg_src(&self, tokens: &[String]) -> Vec<String> {
        Self::segment(self.tables.as_ref().map(|(s, _)| s), tokens)
    }

    pub fn seg_tgt(&self, tokens: &[String]) -> Vec<String> {
        Self::segment(self.tables.as_ref().map(|(_, t)| t), tokens)
    }

    /// Invert target-side segmentation: subword symbols back to words.
    pub fn unseg_tgt(&self, symbols: &[String]) -> Vec<String> {
        if self.tables.is_none() {
            return symbols.to_vec();
        }
        let mut words = Vec::new();
        let mut current = String::new();
        for sym in symbols {
            match sym.strip_suffix(END_OF_WORD) {
                Some(stem) => {
                    current.push_str(stem);
                    words.push(std::mem::take(&mut current));
                }
                None => current.push_str(sym),
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        words
    }
}

fn hyper_from(cfg: &RunConfig, src_vocab: usize, tgt_vocab: usize) -> Hyper {
    Hyper {
        kind: cfg.model_kind,
        d_model: cfg.d_model,
        n_heads: cfg.n_heads,
        n_layers: cfg.n_layers,
        d_ff: cfg.d_ff,
        src_vocab,
        tgt_vocab,
        max_len: cfg.max_len,
        dropout: cfg.dropout,
        score_fn: cfg.score_fn,
        positional: true,
    }
}

fn encode_src(vocab: &Vocabulary, tokens: &[String]) -> Vec<u32> {
    vocab.encode(tokens)
}

fn encode_tgt(vocab: &Vocabulary, tokens: &[String]) -> Vec<u32> {
    tokens.iter().map(|t| vocab.id(t)).collect()
}

/// Build training pairs in id space after segmentation.
fn to_id_pairs(
    pairs: &[TokenPair],
    seg: &Segmenter,
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Vec<Pair> {
    pairs
        .iter()
        .map(|p| Pair {
            src: encode_src(src_vocab, &seg.seg_src(&p.src)),
            tgt: encode_tgt(tgt_vocab, &seg.seg_tgt(&p.tgt)),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// build

fn stream_stats(label: &str, tokens: &[String], out: &mut String) {
    match entropy_redundancy(tokens) {
        Ok(rep) => {
            out.push_str(&format!(
                "{label}.entropy_bits={:.4}\n{label}.vocab_size={}\n{label}.redundancy={:.4}\n",
                rep.entropy_bits, rep.vocab_size, rep.redundancy
            ));
        }
        Err(e) => out.push_str(&format!("{label}.error={e}\n")),
    }
}

pub fn cmd_build(cfg: &RunConfig) -> Result<PathBuf, PipelineError> {
    let entries = match &cfg.corpus_source {
        CorpusSource::Synthetic { count, seed } => generate_entries(*count, *seed),
        CorpusSource::Manifest(path) => load_entries(path)?,
    };
    let corpus_cfg = CorpusConfig {
        fractions: cfg.fractions,
        seed: match cfg.corpus_source {
            CorpusSource::Synthetic { seed, .. } => seed,
            _ => CorpusConfig::default().seed,
        },
    };
    let (triples, manifest) = build_corpus(&entries, &corpus_cfg)?;
    let dir = corpus_dir(cfg);
    fs::create_dir_all(&dir)?;
    write_corpus(&dir, &triples, &manifest)?;

    // Table-1-shaped stats: one row per stream kind, plus purified variants.
    let mut bytecode = Vec::new();
    let mut mnemonic = Vec::new();
    let mut source = Vec::new();
    let mut p_bytecode = Vec::new();
    let mut p_source = Vec::new();
    let mut unit_total = 0usize;
    for t in &triples {
        bytecode.extend(units_to_hex_tokens(&t.file_units().units));
        mnemonic.extend(t.mnemonic_tokens.iter().cloned());
        source.extend(t.source_tokens.iter().cloned());
        p_bytecode.extend(t.purified_bytecode_tokens.iter().cloned());
        p_source.extend(t.purified_source_tokens.iter().cloned());
        unit_total += t.file_units().units.len();
    }
    let mut stats = String::new();
    stats.push_str(&format!("samples={}\n", triples.len()));
    stats.push_str(&format!(
        "mean_unit_length={:.2}\n",
        unit_total as f64 / triples.len() as f64
    ));
    stream_stats("bytecode", &bytecode, &mut stats);
    stream_stats("mnemonic", &mnemonic, &mut stats);
    stream_stats("source", &source, &mut stats);
    stream_stats("purified_bytecode", &p_bytecode, &mut stats);
    stream_stats("purified_source", &p_source, &mut stats);
    fs::write(dir.join("stats.txt"), stats)?;
    Ok(dir)
}

// ---------------------------------------------------------------------------
// train

pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub curve: Vec<f64>,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome, PipelineError> {
    let corpus = corpus_dir(cfg);
    let train_pairs = load_split_pairs(&corpus, Split::Train, cfg)?;
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir)?;

    let seg = Segmenter::learn(cfg.segmentation, &train_pairs);
    seg.save(&dir)?;

    let src_stream: Vec<Vec<String>> = train_pairs.iter().map(|p| seg.seg_src(&p.src)).collect();
    let tgt_stream: Vec<Vec<String>> = train_pairs.iter().map(|p| seg.seg_tgt(&p.tgt)).collect();
    let src_vocab = Vocabulary::build(src_stream.iter(), 1)?;
    let tgt_vocab = Vocabulary::build(tgt_stream.iter(), 1)?;
    src_vocab.save(&dir.join("src.vocab"))?;
    tgt_vocab.save(&dir.join("tgt.vocab"))?;

    let id_pairs = to_id_pairs(&train_pairs, &seg, &src_vocab, &tgt_vocab);
    let hyper = hyper_from(cfg, src_vocab.size(), tgt_vocab.size());
    let mut params = ModelParams::init(hyper, cfg.train_seed);
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        seed: cfg.train_seed,
    };
    let curve = train(&mut params, &id_pairs, &train_cfg)?;

    checkpoint::save(
        &dir.join("model.ckpt"),
        &params,
        src_vocab.content_hash(),
        tgt_vocab.content_hash(),
    )?;
    let mut csv = String::from("epoch,loss\n");
    for (i, loss) in curve.iter().enumerate() {
        csv.push_str(&format!("{},{:.6}\n", i + 1, loss));
    }
    fs::write(dir.join("curve.csv"), csv)?;
    Ok(TrainOutcome { run_dir: dir, curve })
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, Clone)]
pub struct SampleScore {
    pub id: String,
    pub wer: f64,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_len: usize,
    pub bleu: f64,
}

#[derive(Debug, Clone)]
pub struct UepRow {
    pub p_u: f64,
    pub bleu4_percent: f64,
    pub wer_percent: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub run_id: String,
    pub bleu4_percent: f64,
    pub wer_percent: f64,
    pub rows: Vec<UepRow>,
    pub per_sample: Vec<SampleScore>,
}

struct LoadedModel {
    params: ModelParams,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    seg: Segmenter,
}

fn load_model(cfg: &RunConfig) -> Result<LoadedModel, PipelineError> {
    let dir = run_dir(cfg);
    let ckpt_path = dir.join("model.ckpt");
    if !ckpt_path.exists() {
        return Err(PipelineError::Invalid(format!(
            "no checkpoint at {} — run `train` first",
            ckpt_path.display()
        )));
    }
    let ck = checkpoint::load(&ckpt_path)?;
    let src_vocab = Vocabulary::load(&dir.join("src.vocab"))?;
    let tgt_vocab = Vocabulary::load(&dir.join("tgt.vocab"))?;
    if ck.src_vocab_hash != src_vocab.content_hash()
        || ck.tgt_vocab_hash != tgt_vocab.content_hash()
    {
        return Err(NeuralError::VocabMismatch.into());
    }
    let seg = Segmenter::load(cfg.segmentation, &dir)?;
    Ok(LoadedModel { params: ck.params, src_vocab, tgt_vocab, seg })
}

/// Greedy-decode every pair and score against references in word space.
fn score_pairs(
    model: &LoadedModel,
    pairs: &[TokenPair],
) -> Result<(Vec<SampleScore>, f64, f64), PipelineError> {
    let decoded: Vec<(String, Vec<String>, Vec<String>)> = pairs
        .par_iter()
        .map(|pair| -> Result<_, PipelineError> {
            let src_ids = encode_src(&model.src_vocab, &model.seg.seg_src(&pair.src));
            let max_out = model.params.hyper.max_len.min(4 * pair.tgt.len() + 8);
            let out_ids = greedy_decode(&model.params, &src_ids, max_out)?;
            let symbols = model.tgt_vocab.decode(&out_ids);
            let candidate = model.seg.unseg_tgt(&symbols);
            Ok((pair.id.clone(), pair.tgt.clone(), candidate))
        })
        .collect::<Result<_, _>>()?;

    let mut per_sample = Vec::with_capacity(decoded.len());
    let mut score_input = Vec::with_capacity(decoded.len());
    for (id, reference, candidate) in &decoded {
        let w = wer(reference, candidate)?;
        let b = bleu4(reference, candidate);
        per_sample.push(SampleScore {
            id: id.clone(),
            wer: w.wer,
            substitutions: w.substitutions,
            insertions: w.insertions,
            deletions: w.deletions,
            reference_len: w.reference_len,
            bleu: b.bleu,
        });
        score_input.push((reference.clone(), candidate.clone()));
    }
    let agg = corpus_scores(&score_input)?;
    Ok((per_sample, agg.bleu.bleu * 100.0, agg.wer * 100.0))
}

fn write_per_sample_csv(dir: &Path, scores: &[SampleScore]) -> Result<(), PipelineError> {
    let mut csv = String::from("id,wer,S,I,D,N,bleu\n");
    for s in scores {
        csv.push_str(&format!(
            "{},{:.4},{},{},{},{},{:.4}\n",
            s.id, s.wer, s.substitutions, s.insertions, s.deletions, s.reference_len, s.bleu
        ));
    }
    fs::write(dir.join("per_sample.csv"), csv)?;
    Ok(())
}

fn write_report(dir: &Path, report: &EvalReport) -> Result<(), PipelineError> {
    let mut text = String::new();
    text.push_str(&format!("run_id={}\n", report.run_id));
    text.push_str(&format!("bleu4_percent={:.2}\n", report.bleu4_percent));
    text.push_str(&format!("wer_percent={:.2}\n", report.wer_percent));
    fs::write(dir.join("report.txt"), text)?;
    if !report.rows.is_empty() {
        let mut csv = String::from("p_u,bleu4,wer\n");
        for row in &report.rows {
            csv.push_str(&format!(
                "{},{:.2},{:.2}\n",
                row.p_u, row.bleu4_percent, row.wer_percent
            ));
        }
        fs::write(dir.join("noise_curve.csv"), csv)?;
    }
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    let model = load_model(cfg)?;
    let pairs = load_split_pairs(&corpus_dir(cfg), Split::Test, cfg)?;
    let (per_sample, bleu_pct, wer_pct) = score_pairs(&model, &pairs)?;
    let dir = run_dir(cfg);
    let report = EvalReport {
        run_id: cfg.effective_run_id(),
        bleu4_percent: bleu_pct,
        wer_percent: wer_pct,
        rows: Vec::new(),
        per_sample,
    };
    write_per_sample_csv(&dir, &report.per_sample)?;
    write_report(&dir, &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// noise sweep

/// Corrupt each test sample's unit stream at probability `p` and rebuild the
/// hex-token source side.
fn corrupt_pairs(samples: &[StoredSample], p: f64, seed: u64) -> Vec<TokenPair> {
    samples
        .iter()
        .map(|s| {
            let units = UnitSequence::from_bytes(&s.class_bytes).units;
            let spec = NoiseSpec { seed: sample_seed(seed, &s.id), ..NoiseSpec::new(p, seed) };
            let (noisy, _) = inject(&units, &spec);
            TokenPair {
                id: s.id.clone(),
                src: units_to_hex_tokens(&noisy),
                tgt: s.source_tokens.clone(),
            }
        })
        .collect()
}

pub fn cmd_noise_sweep(cfg: &RunConfig) -> Result<EvalReport, PipelineError> {
    if cfg.variant != Variant::Redundant || cfg.source_stream != SourceStream::Units {
        return Err(PipelineError::Invalid(
            "noise-sweep corrupts bytecode units: requires data.variant = redundant \
             and data.source_stream = units"
                .into(),
        ));
    }
    let model = load_model(cfg)?;
    let samples = read_split_samples(&corpus_dir(cfg), Split::Test)?;
    if samples.is_empty() {
        return Err(PipelineError::Invalid("empty test split — run `build` first".into()));
    }

    let mut p_list: Vec<f64> = cfg.p_list.clone();
    if !p_list.contains(&0.0) {
        p_list.push(0.0);
    }
    p_list.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p_list.dedup();

    let mut rows = Vec::with_capacity(p_list.len());
    let mut clean = None;
    for &p in &p_list {
        let pairs = corrupt_pairs(&samples, p, cfg.noise_seed);
        let (per_sample, bleu_pct, wer_pct) = score_pairs(&model, &pairs)?;
        if p == 0.0 {
            clean = Some((per_sample, bleu_pct, wer_pct));
        }
        rows.push(UepRow { p_u: p, bleu4_percent: bleu_pct, wer_percent: wer_pct });
    }
    let (per_sample, bleu_pct, wer_pct) = clean.expect("p = 0 row always present");

    let dir = run_dir(cfg);
    let report = EvalReport {
        run_id: cfg.effective_run_id(),
        bleu4_percent: bleu_pct,
        wer_percent: wer_pct,
        rows,
        per_sample,
    };
    write_per_sample_csv(&dir, &report.per_sample)?;
    write_report(&dir, &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// segmentation comparison

#[derive(Debug, Clone)]
pub struct SegcmpRow {
    pub algorithm: String,
    pub bleu4_percent: f64,
    pub wer_percent: f64,
}

/// Train and evaluate the configured model on the purified variant under
/// space and BPE segmentation; the Table-4-shaped two-row comparison.
pub fn cmd_segcmp(cfg: &RunConfig) -> Result<Vec<SegcmpRow>, PipelineError> {
    let merges = match cfg.segmentation {
        Segmentation::Bpe { num_merges } => num_merges,
        Segmentation::Space => 1000,
    };
    let mut rows = Vec::with_capacity(2);
    for seg in [Segmentation::Space, Segmentation::Bpe { num_merges: merges }] {
        let mut sub = cfg.clone();
        sub.variant = Variant::Purified;
        sub.segmentation = seg;
        sub.run_id = Some(format!("{}-segcmp-{}", cfg.effective_run_id(), seg.label()));
        cmd_train(&sub)?;
        let report = cmd_eval(&sub)?;
        rows.push(SegcmpRow {
            algorithm: seg.label().to_string(),
            bleu4_percent: report.bleu4_percent,
            wer_percent: report.wer_percent,
        });
    }
    let mut csv = String::from("ALGORITHMS,BLEU-4,WER\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{:.2},{:.2}\n",
            row.algorithm, row.bleu4_percent, row.wer_percent
        ));
    }
    let dir = run_dir(cfg);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("segcmp.csv"), csv)?;
    Ok(rows)
}
