//! Vocabularies and word segmentation: space delimiter or BPE subwords.

mod bpe;

pub use bpe::{apply_bpe, join_subwords, learn_bpe, MergeTable, END_OF_WORD};

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("empty corpus: no token streams supplied")]
    EmptyCorpus,
    #[error("{path}:{line}: malformed vocabulary line")]
    BadVocabLine { path: String, line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;

const RESERVED: &[&str] = &["<pad>", "<bos>", "<eos>", "<unk>"];

/// Token/id bijection with fixed reserved symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_of: HashMap<String, u32>,
    token_of: Vec<String>,
}

impl Vocabulary {
    /// Build from token streams: tokens with frequency >= `min_count`,
    /// ordered by (frequency desc, token asc) after the reserved block.
    pub fn build<'a, I, S>(streams: I, min_count: usize) -> Result<Vocabulary, TokenizeError>
    where
        I: IntoIterator<Item = S>,
        S: IntoIterator<Item = &'a String>,
    {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for stream in streams {
            for token in stream {
                any = true;
                *freq.entry(token.as_str()).or_default() += 1;
            }
        }
        if !any {
            return Err(TokenizeError::EmptyCorpus);
        }
        let mut ranked: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Ok(Self::from_ordered_tokens(ranked.into_iter().map(|(t, _)| t.to_owned())))
    }

    fn from_ordered_tokens(tokens: impl IntoIterator<Item = String>) -> Vocabulary {
        let mut token_of: Vec<String> = RESERVED.iter().map(|s| (*s).to_owned()).collect();
        for t in tokens {
            if !RESERVED.contains(&t.as_str()) {
                token_of.push(t);
            }
        }
        let id_of = token_of
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { id_of, token_of }
    }

    pub fn size(&self) -> usize {
        self.token_of.len()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.id_of.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.id_of.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.token_of.get(id as usize).map(String::as_str)
    }

    /// Wrap with BOS/EOS; unknown tokens map to UNK.
    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS_ID);
        ids.extend(tokens.iter().map(|t| self.id(t)));
        ids.push(EOS_ID);
        ids
    }

    /// Strip reserved ids; inverse of `encode` for in-vocabulary input.
    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter()
            .filter(|&&id| id > UNK_ID)
            .filter_map(|&id| self.token(id).map(str::to_owned))
            .collect()
    }

    /// Stable content hash, used to pair checkpoints with their vocabulary.
    pub fn content_hash(&self) -> u64 {
        // FNV-1a over the ordered token list.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.token_of {
            for b in t.as_bytes().iter().chain(&[0u8]) {
                h ^= *b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
        h
    }

    /// Write "token<TAB>id" lines.
    pub fn save(&self, path: &Path) -> Result<(), TokenizeError> {
        let mut out = String::new();
        for (i, t) in self.token_of.iter().enumerate() {
            out.push_str(&format!("{t}\t{i}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, TokenizeError> {
        let text = fs::read_to_string(path)?;
        let display = path.display().to_string();
        let mut pairs: Vec<(String, u32)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let Some((token, id)) = line.rsplit_once('\t') else {
                return Err(TokenizeError::BadVocabLine { path: display, line: lineno + 1 });
            };
            let id: u32 = id
                .parse()
                .map_err(|_| TokenizeError::BadVocabLine { path: display.clone(), line: lineno + 1 })?;
            pairs.push((token.to_owned(), id));
        }
        pairs.sort_by_key(|&(_, id)| id);
        Ok(Self::from_ordered_tokens(pairs.into_iter().map(|(t, _)| t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn frequency_then_lexicographic_ordering() {
        let streams = vec![stream(&["a", "b", "a"])];
        let v = Vocabulary::build(streams.iter().map(|s| s.iter()), 1).unwrap();
        assert_eq!(v.size(), 6);
        assert!(v.id("a") < v.id("b"));
        assert_eq!(v.id("a"), 4);
    }

    #[test]
    fn min_count_filters() {
        let streams = vec![stream(&["a", "b", "a"])];
        let v = Vocabulary::build(streams.iter().map(|s| s.iter()), 2).unwrap();
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), UNK_ID);
    }

    #[test]
    fn empty_corpus_rejected() {
        let streams: Vec<Vec<String>> = vec![];
        assert!(matches!(
            Vocabulary::build(streams.iter().map(|s| s.iter()), 1),
            Err(TokenizeError::EmptyCorpus)
        ));
    }

    #[test]
    fn encode_decode_round_trip() {
        let streams = vec![stream(&["x", "y", "z"])];
        let v = Vocabulary::build(streams.iter().map(|s| s.iter()), 1).unwrap();
        let tokens = stream(&["y", "x", "z"]);
        let ids = v.encode(&tokens);
        assert_eq!(ids[0], BOS_ID);
        assert_eq!(*ids.last().unwrap(), EOS_ID);
        assert_eq!(v.decode(&ids), tokens);
    }

    #[test]
    fn unknown_becomes_unk_and_decode_strips_reserved() {
        let streams = vec![stream(&["x"])];
        let v = Vocabulary::build(streams.iter().map(|s| s.iter()), 1).unwrap();
        let ids = v.encode(&stream(&["nope"]));
        assert!(ids.contains(&UNK_ID));
        assert_eq!(v.decode(&[BOS_ID, 4, EOS_ID]).len(), 1);
    }

    #[test]
    fn save_load_round_trip() {
        let streams = vec![stream(&["alpha", "beta", "alpha"])];
        let v = Vocabulary::build(streams.iter().map(|s| s.iter()), 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.tsv");
        v.save(&path).unwrap();
        let loaded = Vocabulary::load(&path).unwrap();
        assert_eq!(loaded, v);
        assert_eq!(loaded.content_hash(), v.content_hash());
    }
}
