//! Corpus on-disk layout.
//!
//! Entry manifest: one entry per line, `<fqcn>#<method> static=<true|false>`.
//! Corpus directory: `manifest.txt` plus one directory per split holding
//! `<id>.bytes` (raw class file) and `.mnem` / `.src` / `.psrc` / `.pbyte`
//! token files (space-separated, newline-terminated).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{ApiEntry, CorpusError, ParallelTriple, Split, SplitManifest};

/// Parse an entry manifest. Blank lines are skipped; duplicates are removed
/// preserving first occurrence.
pub fn load_entries(path: &Path) -> Result<Vec<ApiEntry>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let display = path.display().to_string();
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse {
            path: display.clone(),
            line: lineno + 1,
            message,
        };
        let (fqcn_method, static_part) = line
            .split_once(' ')
            .ok_or_else(|| parse_err("expected `<fqcn>#<method> static=<bool>`".into()))?;
        let (fqcn, method) = fqcn_method
            .split_once('#')
            .ok_or_else(|| parse_err("expected `#` between class and method".into()))?;
        let is_static = match static_part.trim() {
            "static=true" => true,
            "static=false" => false,
            other => return Err(parse_err(format!("bad static flag `{other}`"))),
        };
        let entry = ApiEntry::new(fqcn, method, is_static)
            .map_err(|e| parse_err(e.to_string()))?;
        if seen.insert(entry.clone()) {
            entries.push(entry);
        }
    }
    Ok(entries)
}

fn write_tokens(path: &Path, tokens: &[String]) -> std::io::Result<()> {
    let mut line = tokens.join(" ");
    line.push('\n');
    fs::write(path, line)
}

fn read_tokens(path: &Path) -> std::io::Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.split_whitespace().map(str::to_owned).collect())
}

/// Write triples and the split manifest under `dir`.
pub fn write_corpus(
    dir: &Path,
    triples: &[ParallelTriple],
    manifest: &SplitManifest,
) -> Result<(), CorpusError> {
    for split in [Split::Train, Split::Dev, Split::Test] {
        fs::create_dir_all(dir.join(split.label()))?;
    }
    for triple in triples {
        let split = manifest
            .assignment
            .get(&triple.id)
            .copied()
            .unwrap_or(Split::Train);
        let base = dir.join(split.label());
        fs::write(base.join(format!("{}.bytes", triple.id)), &triple.class_bytes)?;
        write_tokens(&base.join(format!("{}.mnem", triple.id)), &triple.mnemonic_tokens)?;
        write_tokens(&base.join(format!("{}.src", triple.id)), &triple.source_tokens)?;
        write_tokens(&base.join(format!("{}.psrc", triple.id)), &triple.purified_source_tokens)?;
        write_tokens(&base.join(format!("{}.pbyte", triple.id)), &triple.purified_bytecode_tokens)?;
    }

    let mut kv = String::new();
    kv.push_str(&format!("seed={}\n", manifest.seed));
    kv.push_str(&format!(
        "fractions={},{},{}\n",
        manifest.fractions[0], manifest.fractions[1], manifest.fractions[2]
    ));
    for (id, split) in &manifest.assignment {
        kv.push_str(&format!("sample.{}={}\n", id, split.label()));
    }
    fs::write(dir.join("manifest.txt"), kv)?;
    Ok(())
}

/// One sample read back from disk.
#[derive(Debug, Clone)]
pub struct StoredSample {
    pub id: String,
    pub class_bytes: Vec<u8>,
    pub mnemonic_tokens: Vec<String>,
    pub source_tokens: Vec<String>,
    pub purified_source_tokens: Vec<String>,
    pub purified_bytecode_tokens: Vec<String>,
}

/// Read the manifest under `dir`.
pub fn read_manifest(dir: &Path) -> Result<SplitManifest, CorpusError> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path)?;
    let display = path.display().to_string();
    let mut seed = 0u64;
    let mut fractions = [0.0f64; 3];
    let mut assignment = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let parse_err = |message: String| CorpusError::Parse {
            path: display.clone(),
            line: lineno + 1,
            message,
        };
        let Some((key, value)) = line.split_once('=') else { continue };
        if key == "seed" {
            seed = value.parse().map_err(|_| parse_err("bad seed".into()))?;
        } else if key == "fractions" {
            let parts: Vec<f64> = value
                .split(',')
                .map(|p| p.parse())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err("bad fractions".into()))?;
            if parts.len() != 3 {
                return Err(parse_err("expected three fractions".into()));
            }
            fractions.copy_from_slice(&parts);
        } else if let Some(id) = key.strip_prefix("sample.") {
            let split = Split::from_label(value)
                .ok_or_else(|| parse_err(format!("bad split label `{value}`")))?;
            assignment.insert(id.to_owned(), split);
        }
    }
    Ok(SplitManifest { seed, fractions, assignment })
}

/// Read every sample of one split, in manifest (id-sorted) order.
pub fn read_split_samples(dir: &Path, split: Split) -> Result<Vec<StoredSample>, CorpusError> {
    let manifest = read_manifest(dir)?;
    let base = dir.join(split.label());
    let mut samples = Vec::new();
    for (id, s) in &manifest.assignment {
        if *s != split {
            continue;
        }
        samples.push(StoredSample {
            id: id.clone(),
            class_bytes: fs::read(base.join(format!("{id}.bytes")))?,
            mnemonic_tokens: read_tokens(&base.join(format!("{id}.mnem")))?,
            source_tokens: read_tokens(&base.join(format!("{id}.src")))?,
            purified_source_tokens: read_tokens(&base.join(format!("{id}.psrc")))?,
            purified_bytecode_tokens: read_tokens(&base.join(format!("{id}.pbyte")))?,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, generate_entries, CorpusConfig};

    #[test]
    fn manifest_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entries.txt");
        let text = "javax.swing.JMenu#isTopLevelMenu static=false\n\n\
                    java.lang.Math#random static=true\n\
                    javax.swing.JMenu#isTopLevelMenu static=false\n";
        fs::write(&path, text).unwrap();
        let entries = load_entries(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].class_fqn, "javax.swing.JMenu");
        assert_eq!(entries[0].method_name, "isTopLevelMenu");
        assert!(!entries[0].is_static);
    }

    #[test]
    fn empty_file_yields_empty_list() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        fs::write(&path, "").unwrap();
        assert!(load_entries(&path).unwrap().is_empty());
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "a.B#c static=true\nnot a manifest line\n").unwrap();
        let err = load_entries(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let entries = generate_entries(20, 3);
        let config = CorpusConfig { fractions: [0.8, 0.1, 0.1], seed: 3 };
        let (triples, manifest) = build_corpus(&entries, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &triples, &manifest).unwrap();

        let read_back = read_manifest(dir.path()).unwrap();
        assert_eq!(read_back.assignment, manifest.assignment);
        assert_eq!(read_back.seed, manifest.seed);

        let train = read_split_samples(dir.path(), Split::Train).unwrap();
        assert_eq!(train.len(), 16);
        let original: std::collections::HashMap<_, _> =
            triples.iter().map(|t| (t.id.clone(), t)).collect();
        for s in &train {
            let t = original[&s.id];
            assert_eq!(s.class_bytes, t.class_bytes);
            assert_eq!(s.source_tokens, t.source_tokens);
            assert_eq!(s.purified_bytecode_tokens, t.purified_bytecode_tokens);
        }
    }
}
