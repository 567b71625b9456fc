//! Fixed-length JVM instruction table.
//!
//! Covers every standard opcode with a statically known encoding length.
//! `tableswitch`, `lookupswitch` and `wide` are variable-length and reported
//! as unsupported by the disassembler.

/// How an instruction's operand bytes are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    /// No operand bytes.
    None,
    /// One-byte constant-pool index (`ldc`).
    PoolIdx1,
    /// Two-byte constant-pool index.
    PoolIdx2,
    /// Two-byte pool index followed by `count, 0` (`invokeinterface`).
    PoolIdx2Count,
    /// Two-byte pool index followed by one dimension byte (`multianewarray`).
    PoolIdx2Dims,
    /// Signed immediate, one byte (`bipush`).
    Imm1,
    /// Signed immediate, two bytes (`sipush`).
    Imm2,
    /// Local variable index, one byte.
    Local1,
    /// Local index + signed increment (`iinc`).
    Iinc,
    /// Two-byte branch offset.
    Branch2,
    /// Four-byte branch offset (`goto_w`, `jsr_w`).
    Branch4,
    /// Primitive array type code (`newarray`).
    ArrayType,
}

impl OperandKind {
    /// Operand length in bytes (excluding the opcode byte itself).
    pub fn len(self) -> usize {
        match self {
            OperandKind::None => 0,
            OperandKind::PoolIdx1 | OperandKind::Imm1 | OperandKind::Local1 | OperandKind::ArrayType => 1,
            OperandKind::PoolIdx2 | OperandKind::Imm2 | OperandKind::Branch2 | OperandKind::Iinc => 2,
            OperandKind::PoolIdx2Dims => 3,
            OperandKind::PoolIdx2Count | OperandKind::Branch4 => 4,
        }
    }
}

/// Name and operand layout for `op`, or `None` for opcodes outside the
/// fixed-length table.
pub fn opcode_info(op: u8) -> Option<(&'static str, OperandKind)> {
    use OperandKind::*;
    let entry = match op {
        0x00 => ("nop", None),
        0x01 => ("aconst_null", None),
        0x02 => ("iconst_m1", None),
        0x03 => ("iconst_0", None),
        0x04 => ("iconst_1", None),
        0x05 => ("iconst_2", None),
        0x06 => ("iconst_3", None),
        0x07 => ("iconst_4", None),
        0x08 => ("iconst_5", None),
        0x09 => ("lconst_0", None),
        0x0a => ("lconst_1", None),
        0x0b => ("fconst_0", None),
        0x0c => ("fconst_1", None),
        0x0d => ("fconst_2", None),
        0x0e => ("dconst_0", None),
        0x0f => ("dconst_1", None),
        0x10 => ("bipush", Imm1),
        0x11 => ("sipush", Imm2),
        0x12 => ("ldc", PoolIdx1),
        0x13 => ("ldc_w", PoolIdx2),
        0x14 => ("ldc2_w", PoolIdx2),
        0x15 => ("iload", Local1),
        0x16 => ("lload", Local1),
        0x17 => ("fload", Local1),
        0x18 => ("dload", Local1),
        0x19 => ("aload", Local1),
        0x1a => ("iload_0", None),
        0x1b => ("iload_1", None),
        0x1c => ("iload_2", None),
        0x1d => ("iload_3", None),
        0x1e => ("lload_0", None),
        0x1f => ("lload_1", None),
        0x20 => ("lload_2", None),
        0x21 => ("lload_3", None),
        0x22 => ("fload_0", None),
        0x23 => ("fload_1", None),
        0x24 => ("fload_2", None),
        0x25 => ("fload_3", None),
        0x26 => ("dload_0", None),
        0x27 => ("dload_1", None),
        0x28 => ("dload_2", None),
        0x29 => ("dload_3", None),
        0x2a => ("aload_0", None),
        0x2b => ("aload_1", None),
        0x2c => ("aload_2", None),
        0x2d => ("aload_3", None),
        0x2e => ("iaload", None),
        0x2f => ("laload", None),
        0x30 => ("faload", None),
        0x31 => ("daload", None),
        0x32 => ("aaload", None),
        0x33 => ("baload", None),
        0x34 => ("caload", None),
        0x35 => ("saload", None),
        0x36 => ("istore", Local1),
        0x37 => ("lstore", Local1),
        0x38 => ("fstore", Local1),
        0x39 => ("dstore", Local1),
        0x3a => ("astore", Local1),
        0x3b => ("istore_0", None),
        0x3c => ("istore_1", None),
        0x3d => ("istore_2", None),
        0x3e => ("istore_3", None),
        0x3f => ("lstore_0", None),
        0x40 => ("lstore_1", None),
        0x41 => ("lstore_2", None),
        0x42 => ("lstore_3", None),
        0x43 => ("fstore_0", None),
        0x44 => ("fstore_1", None),
        0x45 => ("fstore_2", None),
        0x46 => ("fstore_3", None),
        0x47 => ("dstore_0", None),
        0x48 => ("dstore_1", None),
        0x49 => ("dstore_2", None),
        0x4a => ("dstore_3", None),
        0x4b => ("astore_0", None),
        0x4c => ("astore_1", None),
        0x4d => ("astore_2", None),
        0x4e => ("astore_3", None),
        0x4f => ("iastore", None),
        0x50 => ("lastore", None),
        0x51 => ("fastore", None),
        0x52 => ("dastore", None),
        0x53 => ("aastore", None),
        0x54 => ("bastore", None),
        0x55 => ("castore", None),
        0x56 => ("sastore", None),
        0x57 => ("pop", None),
        0x58 => ("pop2", None),
        0x59 => ("dup", None),
        0x5a => ("dup_x1", None),
        0x5b => ("dup_x2", None),
        0x5c => ("dup2", None),
        0x5d => ("dup2_x1", None),
        0x5e => ("dup2_x2", None),
        0x5f => ("swap", None),
        0x60 => ("iadd", None),
        0x61 => ("ladd", None),
        0x62 => ("fadd", None),
        0x63 => ("dadd", None),
        0x64 => ("isub", None),
        0x65 => ("lsub", None),
        0x66 => ("fsub", None),
        0x67 => ("dsub", None),
        0x68 => ("imul", None),
        0x69 => ("lmul", None),
        0x6a => ("fmul", None),
        0x6b => ("dmul", None),
        0x6c => ("idiv", None),
        0x6d => ("ldiv", None),
        0x6e => ("fdiv", None),
        0x6f => ("ddiv", None),
        0x70 => ("irem", None),
        0x71 => ("lrem", None),
        0x72 => ("frem", None),
        0x73 => ("drem", None),
        0x74 => ("ineg", None),
        0x75 => ("lneg", None),
        0x76 => ("fneg", None),
        0x77 => ("dneg", None),
        0x78 => ("ishl", None),
        0x79 => ("lshl", None),
        0x7a => ("ishr", None),
        0x7b => ("lshr", None),
        0x7c => ("iushr", None),
        0x7d => ("lushr", None),
        0x7e => ("iand", None),
        0x7f => ("land", None),
        0x80 => ("ior", None),
        0x81 => ("lor", None),
        0x82 => ("ixor", None),
        0x83 => ("lxor", None),
        0x84 => ("iinc", Iinc),
        0x85 => ("i2l", None),
        0x86 => ("i2f", None),
        0x87 => ("i2d", None),
        0x88 => ("l2i", None),
        0x89 => ("l2f", None),
        0x8a => ("l2d", None),
        0x8b => ("f2i", None),
        0x8c => ("f2l", None),
        0x8d => ("f2d", None),
        0x8e => ("d2i", None),
        0x8f => ("d2l", None),
        0x90 => ("d2f", None),
        0x91 => ("i2b", None),
        0x92 => ("i2c", None),
        0x93 => ("i2s", None),
        0x94 => ("lcmp", None),
        0x95 => ("fcmpl", None),
        0x96 => ("fcmpg", None),
        0x97 => ("dcmpl", None),
        0x98 => ("dcmpg", None),
        0x99 => ("ifeq", Branch2),
        0x9a => ("ifne", Branch2),
        0x9b => ("iflt", Branch2),
        0x9c => ("ifge", Branch2),
        0x9d => ("ifgt", Branch2),
        0x9e => ("ifle", Branch2),
        0x9f => ("if_icmpeq", Branch2),
        0xa0 => ("if_icmpne", Branch2),
        0xa1 => ("if_icmplt", Branch2),
        0xa2 => ("if_icmpge", Branch2),
        0xa3 => ("if_icmpgt", Branch2),
        0xa4 => ("if_icmple", Branch2),
        0xa5 => ("if_acmpeq", Branch2),
        0xa6 => ("if_acmpne", Branch2),
        0xa7 => ("goto", Branch2),
        0xa8 => ("jsr", Branch2),
        0xa9 => ("ret", Local1),
        0xac => ("ireturn", None),
        0xad => ("lreturn", None),
        0xae => ("freturn", None),
        0xaf => ("dreturn", None),
        0xb0 => ("areturn", None),
        0xb1 => ("return", None),
        0xb2 => ("getstatic", PoolIdx2),
        0xb3 => ("putstatic", PoolIdx2),
        0xb4 => ("getfield", PoolIdx2),
        0xb5 => ("putfield", PoolIdx2),
        0xb6 => ("invokevirtual", PoolIdx2),
        0xb7 => ("invokespecial", PoolIdx2),
        0xb8 => ("invokestatic", PoolIdx2),
        0xb9 => ("invokeinterface", PoolIdx2Count),
        0xbb => ("new", PoolIdx2),
        0xbc => ("newarray", ArrayType),
        0xbd => ("anewarray", PoolIdx2),
        0xbe => ("arraylength", None),
        0xbf => ("athrow", None),
        0xc0 => ("checkcast", PoolIdx2),
        0xc1 => ("instanceof", PoolIdx2),
        0xc2 => ("monitorenter", None),
        0xc3 => ("monitorexit", None),
        0xc5 => ("multianewarray", PoolIdx2Dims),
        0xc6 => ("ifnull", Branch2),
        0xc7 => ("ifnonnull", Branch2),
        0xc8 => ("goto_w", Branch4),
        0xc9 => ("jsr_w", Branch4),
        _ => return Option::None,
    };
    Some(entry)
}

/// True when `name` is a mnemonic in the supported table.
pub fn is_known_mnemonic(name: &str) -> bool {
    (0u8..=0xc9).any(|op| opcode_info(op).map(|(n, _)| n == name).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variable_length_opcodes_absent() {
        assert!(opcode_info(0xaa).is_none()); // tableswitch
        assert!(opcode_info(0xab).is_none()); // lookupswitch
        assert!(opcode_info(0xc4).is_none()); // wide
        assert!(opcode_info(0xba).is_none()); // invokedynamic (out of scope)
    }

    #[test]
    fn operand_lengths() {
        assert_eq!(opcode_info(0xb1).unwrap().1.len(), 0);
        assert_eq!(opcode_info(0x12).unwrap().1.len(), 1);
        assert_eq!(opcode_info(0xb8).unwrap().1.len(), 2);
        assert_eq!(opcode_info(0xb9).unwrap().1.len(), 4);
        assert_eq!(opcode_info(0xc5).unwrap().1.len(), 3);
        assert_eq!(opcode_info(0xc8).unwrap().1.len(), 4);
    }

    #[test]
    fn mnemonic_lookup() {
        assert!(is_known_mnemonic("invokevirtual"));
        assert!(!is_known_mnemonic("tableswitch"));
    }
}
