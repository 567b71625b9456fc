//! Workbench for treating Java decompilation as statistical machine translation.
//!
//! The pipeline: synthesize a parallel bytecode/mnemonic/source corpus from
//! method-call templates, optionally purify it down to identifier lexicon,
//! train desk-scale attention seq2seq and Transformer models, inject
//! salt-and-pepper noise into the bytecode units, and score everything with
//! WER, BLEU-4 and entropy/redundancy reports.

pub mod classfile;
pub mod config;
pub mod corpus;
pub mod metrics;
pub mod neural;
pub mod noise;
pub mod pipeline;
pub mod tokenize;
