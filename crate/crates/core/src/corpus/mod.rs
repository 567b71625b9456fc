//! Parallel triple synthesis: templated source, mini-compiled bytecode,
//! disassembled mnemonic, plus purified variants and seeded splits.

mod compile;
mod io;
mod purify;
mod synth;
mod template;

pub use compile::mini_compile;
pub use io::{load_entries, read_manifest, read_split_samples, write_corpus, StoredSample};
pub use purify::{purify, SOURCE_KEYWORDS};
pub use synth::generate_entries;
pub use template::{render_source, SourceRender};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classfile::{self, ClassFileError, UnitSequence};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid identifier `{0}`")]
    InvalidIdentifier(String),
    #[error("empty corpus: no entries supplied")]
    EmptyCorpus,
    #[error("split fractions {0:?} do not sum to 1")]
    BadFractions([f64; 3]),
    #[error("entry `{id}`: {source}")]
    ClassFile {
        id: String,
        #[source]
        source: ClassFileError,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One callable API method, the seed of one corpus sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ApiEntry {
    /// Dot-separated fully qualified class name.
    pub class_fqn: String,
    pub method_name: String,
    pub is_static: bool,
}

impl ApiEntry {
    pub fn new(class_fqn: &str, method_name: &str, is_static: bool) -> Result<Self, CorpusError> {
        for seg in class_fqn.split('.') {
            validate_identifier(seg)?;
        }
        validate_identifier(method_name)?;
        Ok(ApiEntry {
            class_fqn: class_fqn.to_owned(),
            method_name: method_name.to_owned(),
            is_static,
        })
    }

    /// Stable sample key derived from content, not position.
    pub fn id(&self) -> String {
        format!(
            "{}__{}__{}",
            self.class_fqn.replace('.', "_"),
            self.method_name,
            if self.is_static { "s" } else { "n" }
        )
    }

    /// Internal (slash) form of the class name.
    pub fn internal_name(&self) -> String {
        self.class_fqn.replace('.', "/")
    }
}

fn validate_identifier(s: &str) -> Result<(), CorpusError> {
    let mut chars = s.chars();
    let ok_head = |c: char| c.is_ascii_alphabetic() || c == '_' || c == '$';
    let ok_tail = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '$';
    match chars.next() {
        Some(c) if ok_head(c) && chars.all(ok_tail) => Ok(()),
        _ => Err(CorpusError::InvalidIdentifier(s.to_owned())),
    }
}

/// Aligned bytecode/mnemonic/source sample with purified variants.
#[derive(Debug, Clone)]
pub struct ParallelTriple {
    pub id: String,
    pub class_bytes: Vec<u8>,
    pub bytecode_units: UnitSequence,
    pub mnemonic_tokens: Vec<String>,
    pub source_text: String,
    pub source_tokens: Vec<String>,
    pub purified_bytecode_tokens: Vec<String>,
    pub purified_source_tokens: Vec<String>,
}

impl ParallelTriple {
    /// Whole-class-file 2-byte units (header and constant pool included).
    pub fn file_units(&self) -> UnitSequence {
        UnitSequence::from_bytes(&self.class_bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub fn from_label(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitManifest {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub assignment: BTreeMap<String, Split>,
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusConfig {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig { fractions: [0.8, 0.1, 0.1], seed: 7 }
    }
}

/// Build one triple: render, mini-compile, parse, disassemble, purify.
pub fn build_triple(entry: &ApiEntry) -> Result<ParallelTriple, CorpusError> {
    let id = entry.id();
    let rendered = render_source(entry)?;
    let class_bytes = mini_compile(entry)?;
    let cls = classfile::parse_class(&class_bytes)
        .map_err(|source| CorpusError::ClassFile { id: id.clone(), source })?;
    let mnemonic = classfile::disassemble(&cls, 0)
        .map_err(|source| CorpusError::ClassFile { id: id.clone(), source })?;
    let bytecode_units = cls.code_units();
    let (purified_bytecode_tokens, purified_source_tokens) =
        purify(&cls, &rendered.tokens);
    Ok(ParallelTriple {
        id,
        class_bytes,
        bytecode_units,
        mnemonic_tokens: mnemonic.tokens,
        source_text: rendered.text,
        source_tokens: rendered.tokens,
        purified_bytecode_tokens,
        purified_source_tokens,
    })
}

/// Build the full corpus plus a seeded split assignment. Per-entry work runs
/// on parallel workers; results are collected in entry order.
pub fn build_corpus(
    entries: &[ApiEntry],
    config: &CorpusConfig,
) -> Result<(Vec<ParallelTriple>, SplitManifest), CorpusError> {
    if entries.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let sum: f64 = config.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadFractions(config.fractions));
    }

    let triples: Vec<ParallelTriple> = entries
        .par_iter()
        .map(build_triple)
        .collect::<Result<_, _>>()?;

    let manifest = assign_splits(&triples, config);
    Ok((triples, manifest))
}

fn assign_splits(triples: &[ParallelTriple], config: &CorpusConfig) -> SplitManifest {
    let mut ids: Vec<&str> = triples.iter().map(|t| t.id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    let n_train = (n as f64 * config.fractions[0]).round() as usize;
    let n_dev = ((n as f64 * config.fractions[1]).round() as usize).min(n - n_train);
    let mut assignment = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_dev {
            Split::Dev
        } else {
            Split::Test
        };
        assignment.insert((*id).to_owned(), split);
    }
    SplitManifest { seed: config.seed, fractions: config.fractions, assignment }
}
