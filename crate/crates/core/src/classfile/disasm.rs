//! Instruction decoding with pool references flattened to text tokens.

use super::opcodes::{opcode_info, OperandKind};
use super::{ClassFileError, ParsedClass, PoolEntry};

/// Where a mnemonic token came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenOrigin {
    Opcode,
    PoolText,
    Immediate,
}

/// Disassembled method body: one token group per instruction, opcode name
/// first, operand text after.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnemonicStream {
    pub tokens: Vec<String>,
    pub provenance: Vec<TokenOrigin>,
    /// Token index starting each instruction, for line-oriented rendering.
    pub instruction_starts: Vec<usize>,
}

impl MnemonicStream {
    fn push(&mut self, token: String, origin: TokenOrigin) {
        self.tokens.push(token);
        self.provenance.push(origin);
    }

    /// One instruction per line, tokens space-separated.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for (i, &start) in self.instruction_starts.iter().enumerate() {
            let end = self
                .instruction_starts
                .get(i + 1)
                .copied()
                .unwrap_or(self.tokens.len());
            out.push_str(&self.tokens[start..end].join(" "));
            out.push('\n');
        }
        out
    }
}

/// Split an internal-form or dotted name on package separators:
/// "javax/swing/JMenuItem" -> ["javax", "swing", "JMenuItem"].
pub fn flatten_name(name: &str) -> Vec<String> {
    name.split(['/', '.'])
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Disassemble one method into a mnemonic token stream.
pub fn disassemble(cls: &ParsedClass, method_index: usize) -> Result<MnemonicStream, ClassFileError> {
    let method = cls.methods.get(method_index).ok_or(ClassFileError::MethodIndexOutOfRange {
        index: method_index,
        count: cls.methods.len(),
    })?;
    let code = &method
        .code
        .as_ref()
        .ok_or(ClassFileError::NoCode { index: method_index })?
        .code;

    let mut stream = MnemonicStream {
        tokens: Vec::new(),
        provenance: Vec::new(),
        instruction_starts: Vec::new(),
    };

    let mut pc = 0usize;
    while pc < code.len() {
        let op = code[pc];
        let (name, kind) =
            opcode_info(op).ok_or(ClassFileError::UnknownOpcode { offset: pc, byte: op })?;
        let operand_len = kind.len();
        if pc + 1 + operand_len > code.len() {
            return Err(ClassFileError::TruncatedInput { offset: pc, reading: "instruction operands" });
        }
        stream.instruction_starts.push(stream.tokens.len());
        stream.push(name.to_owned(), TokenOrigin::Opcode);
        let operands = &code[pc + 1..pc + 1 + operand_len];
        emit_operands(cls, kind, operands, &mut stream)?;
        pc += 1 + operand_len;
    }
    Ok(stream)
}

fn emit_operands(
    cls: &ParsedClass,
    kind: OperandKind,
    operands: &[u8],
    stream: &mut MnemonicStream,
) -> Result<(), ClassFileError> {
    match kind {
        OperandKind::None => {}
        OperandKind::PoolIdx1 => emit_pool_ref(cls, operands[0] as u16, stream)?,
        OperandKind::PoolIdx2 => {
            emit_pool_ref(cls, u16::from_be_bytes([operands[0], operands[1]]), stream)?
        }
        OperandKind::PoolIdx2Count => {
            emit_pool_ref(cls, u16::from_be_bytes([operands[0], operands[1]]), stream)?;
            stream.push(operands[2].to_string(), TokenOrigin::Immediate);
        }
        OperandKind::PoolIdx2Dims => {
            emit_pool_ref(cls, u16::from_be_bytes([operands[0], operands[1]]), stream)?;
            stream.push(operands[2].to_string(), TokenOrigin::Immediate);
        }
        OperandKind::Imm1 => stream.push((operands[0] as i8).to_string(), TokenOrigin::Immediate),
        OperandKind::Imm2 => stream.push(
            i16::from_be_bytes([operands[0], operands[1]]).to_string(),
            TokenOrigin::Immediate,
        ),
        OperandKind::Local1 | OperandKind::ArrayType => {
            stream.push(operands[0].to_string(), TokenOrigin::Immediate)
        }
        OperandKind::Iinc => {
            stream.push(operands[0].to_string(), TokenOrigin::Immediate);
            stream.push((operands[1] as i8).to_string(), TokenOrigin::Immediate);
        }
        OperandKind::Branch2 => stream.push(
            i16::from_be_bytes([operands[0], operands[1]]).to_string(),
            TokenOrigin::Immediate,
        ),
        OperandKind::Branch4 => stream.push(
            i32::from_be_bytes([operands[0], operands[1], operands[2], operands[3]]).to_string(),
            TokenOrigin::Immediate,
        ),
    }
    Ok(())
}

/// Flatten a pool reference to text tokens. Class and member names split on
/// package separators so the mnemonic vocabulary matches the source side.
fn emit_pool_ref(
    cls: &ParsedClass,
    index: u16,
    stream: &mut MnemonicStream,
) -> Result<(), ClassFileError> {
    let entry = cls
        .constant_pool
        .get(index as usize)
        .ok_or(ClassFileError::DanglingPoolRef { index, context: "instruction operand" })?;
    match entry {
        PoolEntry::Class { name_index } => {
            for seg in flatten_name(cls.utf8(*name_index)?) {
                stream.push(seg, TokenOrigin::PoolText);
            }
        }
        PoolEntry::Fieldref { class_index, name_and_type_index }
        | PoolEntry::Methodref { class_index, name_and_type_index } => {
            for seg in flatten_name(cls.class_name(*class_index)?) {
                stream.push(seg, TokenOrigin::PoolText);
            }
            let (name_index, _descriptor) = match cls.constant_pool.get(*name_and_type_index as usize)
            {
                Some(PoolEntry::NameAndType { name_index, descriptor_index }) => {
                    (*name_index, *descriptor_index)
                }
                _ => {
                    return Err(ClassFileError::DanglingPoolRef {
                        index: *name_and_type_index,
                        context: "expected NameAndType",
                    })
                }
            };
            stream.push(cls.utf8(name_index)?.to_owned(), TokenOrigin::PoolText);
        }
        PoolEntry::String { utf8_index } => {
            stream.push(format!("\"{}\"", cls.utf8(*utf8_index)?), TokenOrigin::PoolText);
        }
        PoolEntry::NameAndType { name_index, .. } => {
            stream.push(cls.utf8(*name_index)?.to_owned(), TokenOrigin::PoolText);
        }
        PoolEntry::Utf8 { text, .. } => stream.push(text.clone(), TokenOrigin::PoolText),
        PoolEntry::Integer(v) => stream.push(v.to_string(), TokenOrigin::PoolText),
        PoolEntry::Float(v) => stream.push(v.to_string(), TokenOrigin::PoolText),
        PoolEntry::Long(v) => stream.push(v.to_string(), TokenOrigin::PoolText),
        PoolEntry::Double(v) => stream.push(v.to_string(), TokenOrigin::PoolText),
        PoolEntry::Unusable => {
            return Err(ClassFileError::DanglingPoolRef { index, context: "unusable slot" })
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::parse_class;

    #[test]
    fn flatten_splits_both_separators() {
        assert_eq!(flatten_name("javax/swing/JMenuItem"), ["javax", "swing", "JMenuItem"]);
        assert_eq!(flatten_name("java.lang.String"), ["java", "lang", "String"]);
    }

    /// Hand-built class: pool has one Utf8 "Code" entry; single method whose
    /// code is the lone `return` opcode.
    fn single_return_class() -> Vec<u8> {
        let mut b: Vec<u8> = Vec::new();
        b.extend(0xCAFEBABEu32.to_be_bytes());
        b.extend(0u16.to_be_bytes()); // minor
        b.extend(55u16.to_be_bytes()); // major
        b.extend(2u16.to_be_bytes()); // cp count (1 real entry)
        b.push(1); // Utf8
        b.extend(4u16.to_be_bytes());
        b.extend(b"Code");
        b.extend(0u16.to_be_bytes()); // access
        b.extend(0u16.to_be_bytes()); // this_class (unresolvable, unused here)
        b.extend(0u16.to_be_bytes()); // super
        b.extend(0u16.to_be_bytes()); // interfaces
        b.extend(0u16.to_be_bytes()); // fields
        b.extend(1u16.to_be_bytes()); // methods
        b.extend(9u16.to_be_bytes()); // flags
        b.extend(0u16.to_be_bytes()); // name idx
        b.extend(0u16.to_be_bytes()); // desc idx
        b.extend(1u16.to_be_bytes()); // attr count
        b.extend(1u16.to_be_bytes()); // attr name idx -> "Code"
        let code_attr: Vec<u8> = {
            let mut a = Vec::new();
            a.extend(1u16.to_be_bytes()); // max_stack
            a.extend(1u16.to_be_bytes()); // max_locals
            a.extend(1u32.to_be_bytes()); // code_length
            a.push(0xb1); // return
            a.extend(0u16.to_be_bytes()); // exception table
            a.extend(0u16.to_be_bytes()); // attrs
            a
        };
        b.extend((code_attr.len() as u32).to_be_bytes());
        b.extend(code_attr);
        b
    }

    #[test]
    fn single_return_disassembles() {
        let cls = parse_class(&single_return_class()).unwrap();
        let stream = disassemble(&cls, 0).unwrap();
        assert_eq!(stream.tokens, ["return"]);
        assert_eq!(stream.provenance, [TokenOrigin::Opcode]);
        assert_eq!(stream.render_lines(), "return\n");
    }

    #[test]
    fn unknown_opcode_reports_offset_and_byte() {
        let mut bytes = single_return_class();
        // The single code byte sits 1 (return) from the end of code body,
        // which is followed by 4 bytes of exception/attr counts.
        let idx = bytes.len() - 5;
        assert_eq!(bytes[idx], 0xb1);
        bytes[idx] = 0xba; // invokedynamic, outside the table
        let cls = parse_class(&bytes).unwrap();
        let err = disassemble(&cls, 0).unwrap_err();
        assert_eq!(err, ClassFileError::UnknownOpcode { offset: 0, byte: 0xba });
    }

    #[test]
    fn method_index_out_of_range() {
        let cls = parse_class(&single_return_class()).unwrap();
        assert!(matches!(
            disassemble(&cls, 5),
            Err(ClassFileError::MethodIndexOutOfRange { index: 5, count: 1 })
        ));
    }
}
