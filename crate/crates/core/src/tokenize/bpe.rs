//! Byte-pair encoding: learn merges from a word frequency map, replay them
//! greedily at segmentation time.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::TokenizeError;

/// End-of-word marker, fused onto a word's final character. Never emitted
/// into model output text.
pub const END_OF_WORD: &str = "</w>";

/// Ordered merge list; application order equals learned order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MergeTable {
    pub merges: Vec<(String, String)>,
}

impl MergeTable {
    pub fn num_merges(&self) -> usize {
        self.merges.len()
    }

    /// One merge per line, "left right", order significant.
    pub fn save(&self, path: &Path) -> Result<(), TokenizeError> {
        let mut out = String::new();
        for (l, r) in &self.merges {
            out.push_str(&format!("{l} {r}\n"));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MergeTable, TokenizeError> {
        let text = fs::read_to_string(path)?;
        let merges = text
            .lines()
            .filter_map(|l| l.split_once(' '))
            .map(|(l, r)| (l.to_owned(), r.to_owned()))
            .collect();
        Ok(MergeTable { merges })
    }
}

fn initial_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i + 1 == n {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Learn up to `num_merges` merges. Each step merges the most frequent
/// adjacent symbol pair; ties break on lexicographically smallest pair;
/// stops early once no pair occurs at least twice.
pub fn learn_bpe(word_freq: &HashMap<String, usize>, num_merges: usize) -> MergeTable {
    let mut words: Vec<(Vec<String>, usize)> = {
        let mut ordered: Vec<(&String, &usize)> = word_freq.iter().collect();
        ordered.sort_by_key(|(w, _)| w.as_str());
        ordered
            .into_iter()
            .filter(|(w, _)| !w.is_empty())
            .map(|(w, &c)| (initial_symbols(w), c))
            .collect()
    };

    let mut table = MergeTable::default();
    for _ in 0..num_merges {
        let mut pair_counts: HashMap<(&str, &str), usize> = HashMap::new();
        for (symbols, count) in &words {
            for pair in symbols.windows(2) {
                *pair_counts.entry((&pair[0], &pair[1])).or_default() += count;
            }
        }
        let best = pair_counts
            .into_iter()
            .filter(|&(_, c)| c >= 2)
            .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let Some(((left, right), _)) = best else { break };
        let merge = (left.to_owned(), right.to_owned());
        for (symbols, _) in &mut words {
            merge_in_place(symbols, &merge);
        }
        table.merges.push(merge);
    }
    table
}

fn merge_in_place(symbols: &mut Vec<String>, merge: &(String, String)) {
    let mut i = 0;
    while i + 1 < symbols.len() {
        if symbols[i] == merge.0 && symbols[i + 1] == merge.1 {
            let right = symbols.remove(i + 1);
            symbols[i].push_str(&right);
        } else {
            i += 1;
        }
    }
}

/// Segment one token by replaying merges in learned order. Concatenating the
/// output (minus the end-of-word marker) reproduces the token exactly.
pub fn apply_bpe(table: &MergeTable, token: &str) -> Vec<String> {
    if token.is_empty() {
        return Vec::new();
    }
    let mut symbols = initial_symbols(token);
    for merge in &table.merges {
        merge_in_place(&mut symbols, merge);
    }
    symbols
}

/// Inverse of segmentation: strip the marker and rejoin.
pub fn join_subwords(symbols: &[String]) -> String {
    let joined: String = symbols.concat();
    joined.replace(END_OF_WORD, "")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freq(pairs: &[(&str, usize)]) -> HashMap<String, usize> {
        pairs.iter().map(|(w, c)| (w.to_string(), *c)).collect()
    }

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // "aa" occurs 4 times across the two words, strictly most frequent.
        let table = learn_bpe(&freq(&[("aaab", 1), ("aaac", 1)]), 1);
        assert_eq!(table.merges, vec![("a".to_owned(), "a".to_owned())]);
    }

    #[test]
    fn zero_merges_gives_character_split() {
        let table = learn_bpe(&freq(&[("abc", 5)]), 0);
        assert!(table.merges.is_empty());
        assert_eq!(apply_bpe(&table, "abc"), ["a", "b", "c</w>"]);
    }

    #[test]
    fn single_merge_replay() {
        let table = MergeTable { merges: vec![("a".into(), "b".into())] };
        assert_eq!(apply_bpe(&table, "abc"), ["ab", "c</w>"]);
    }

    #[test]
    fn stops_when_no_pair_repeats() {
        // Every adjacent pair occurs exactly once: nothing to merge.
        let table = learn_bpe(&freq(&[("abcd", 1)]), 10);
        assert!(table.merges.is_empty());
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // (a,b), (b,a) and (a,b</w>) all occur twice: (a,b) is smallest.
        let table = learn_bpe(&freq(&[("abab", 2)]), 1);
        assert_eq!(table.merges[0], ("a".to_owned(), "b".to_owned()));
    }

    #[test]
    fn isolated_character_with_unique_neighbors_never_merges() {
        // "K" sits between different neighbors in every word; no learned
        // merge may contain it.
        let words = freq(&[("Kale", 1), ("moKit", 1), ("zuK", 1), ("tete", 4)]);
        let table = learn_bpe(&words, 20);
        assert!(!table.merges.is_empty());
        for (l, r) in &table.merges {
            assert!(!l.contains('K') && !r.contains('K'), "merge ({l},{r}) contains K");
        }
    }

    #[test]
    fn round_trip_losslessness() {
        let table = learn_bpe(&freq(&[("javax", 3), ("swing", 3), ("JMenuItem", 2)]), 50);
        for token in ["javax", "swing", "JMenuItem", "unseenWord", "K"] {
            let symbols = apply_bpe(&table, token);
            assert_eq!(join_subwords(&symbols), token);
        }
    }

    #[test]
    fn merge_table_file_round_trip() {
        let table = learn_bpe(&freq(&[("aaab", 2), ("aabb", 2)]), 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("merges.txt");
        table.save(&path).unwrap();
        assert_eq!(MergeTable::load(&path).unwrap(), table);
    }
}
