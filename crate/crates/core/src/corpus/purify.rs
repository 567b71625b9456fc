//! Purification: strip structural tokens, keep identifier lexicon.

use std::collections::HashSet;

use crate::classfile::{ParsedClass, PoolEntry};

/// Structural tokens the templates introduce on the source side.
pub const SOURCE_KEYWORDS: &[&str] =
    &["class", "public", "static", "void", "function", "obj", "new", "."];

/// Purify one sample.
///
/// Source side: distinct identifier tokens in first-occurrence order, with
/// structural keywords dropped. Bytecode side: the Utf8 pool strings
/// transitively referenced by code instructions, split on name separators,
/// in pool order.
pub fn purify(cls: &ParsedClass, source_tokens: &[String]) -> (Vec<String>, Vec<String>) {
    (purified_bytecode(cls), purified_source(source_tokens))
}

fn purified_source(source_tokens: &[String]) -> Vec<String> {
    let keywords: HashSet<&str> = SOURCE_KEYWORDS.iter().copied().collect();
    let mut seen = HashSet::new();
    source_tokens
        .iter()
        .filter(|t| !keywords.contains(t.as_str()))
        .filter(|t| seen.insert(t.as_str()))
        .cloned()
        .collect()
}

fn purified_bytecode(cls: &ParsedClass) -> Vec<String> {
    let referenced = code_referenced_utf8_indices(cls);
    let mut out = Vec::new();
    for (idx, entry) in cls.constant_pool.iter().enumerate() {
        if !referenced.contains(&(idx as u16)) {
            continue;
        }
        if let PoolEntry::Utf8 { text, .. } = entry {
            out.extend(
                text.split(['/', '.', ';', '(', ')'])
                    .filter(|s| !s.is_empty())
                    .map(str::to_owned),
            );
        }
    }
    out
}

/// Utf8 pool indices reachable from instruction operands, via Class,
/// String, Fieldref/Methodref and NameAndType indirection.
fn code_referenced_utf8_indices(cls: &ParsedClass) -> HashSet<u16> {
    let mut utf8s = HashSet::new();
    let mut visit = vec![];
    for method in &cls.methods {
        let Some(code_attr) = &method.code else { continue };
        let code = &code_attr.code;
        let mut pc = 0usize;
        while pc < code.len() {
            let Some((_, kind)) = crate::classfile::opcode_info(code[pc]) else { break };
            let operands = &code[pc + 1..(pc + 1 + kind.len()).min(code.len())];
            match kind {
                crate::classfile::OperandKind::PoolIdx1 if !operands.is_empty() => {
                    visit.push(operands[0] as u16)
                }
                crate::classfile::OperandKind::PoolIdx2
                | crate::classfile::OperandKind::PoolIdx2Count
                | crate::classfile::OperandKind::PoolIdx2Dims
                    if operands.len() >= 2 =>
                {
                    visit.push(u16::from_be_bytes([operands[0], operands[1]]))
                }
                _ => {}
            }
            pc += 1 + kind.len();
        }
    }
    let mut seen = HashSet::new();
    while let Some(idx) = visit.pop() {
        if !seen.insert(idx) {
            continue;
        }
        match cls.constant_pool.get(idx as usize) {
            Some(PoolEntry::Utf8 { .. }) => {
                utf8s.insert(idx);
            }
            Some(PoolEntry::Class { name_index }) => visit.push(*name_index),
            Some(PoolEntry::String { utf8_index }) => visit.push(*utf8_index),
            Some(PoolEntry::Fieldref { class_index, name_and_type_index })
            | Some(PoolEntry::Methodref { class_index, name_and_type_index }) => {
                visit.push(*class_index);
                visit.push(*name_and_type_index);
            }
            Some(PoolEntry::NameAndType { name_index, descriptor_index }) => {
                visit.push(*name_index);
                visit.push(*descriptor_index);
            }
            _ => {}
        }
    }
    utf8s
}
