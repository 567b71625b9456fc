//! Java class-file parsing and bytecode disassembly.
//!
//! Decodes the constant pool and method code attributes of a class file,
//! exposes the code as big-endian 2-byte units (the noise model's substrate),
//! and flattens instructions into mnemonic token streams with pool references
//! resolved to text.

mod disasm;
mod opcodes;

pub use disasm::{disassemble, MnemonicStream, TokenOrigin};
pub use opcodes::{is_known_mnemonic, opcode_info, OperandKind};

use thiserror::Error;

pub const CLASS_MAGIC: u32 = 0xCAFE_BABE;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassFileError {
    #[error("bad magic at offset {offset}: expected 0xCAFEBABE, found {found:#010x}")]
    BadMagic { offset: usize, found: u32 },
    #[error("truncated input at offset {offset} while reading {reading}")]
    TruncatedInput { offset: usize, reading: &'static str },
    #[error("unsupported constant pool tag {tag} at offset {offset}")]
    UnsupportedPoolTag { offset: usize, tag: u8 },
    #[error("unknown opcode {byte:#04x} at code offset {offset}")]
    UnknownOpcode { offset: usize, byte: u8 },
    #[error("dangling constant pool reference #{index}: {context}")]
    DanglingPoolRef { index: u16, context: &'static str },
    #[error("method index {index} out of range (class has {count} methods)")]
    MethodIndexOutOfRange { index: usize, count: usize },
    #[error("method {index} has no Code attribute")]
    NoCode { index: usize },
}

/// One constant-pool slot. The pool is 1-indexed; slot 0 and the phantom
/// slot after each Long/Double are `Unusable`.
#[derive(Debug, Clone, PartialEq)]
pub enum PoolEntry {
    Utf8 {
        /// Decoded text; when `malformed`, a lossy rendering of `raw`.
        text: String,
        raw: Vec<u8>,
        malformed: bool,
    },
    Integer(i32),
    Float(f32),
    Long(i64),
    Double(f64),
    Class { name_index: u16 },
    String { utf8_index: u16 },
    Fieldref { class_index: u16, name_and_type_index: u16 },
    Methodref { class_index: u16, name_and_type_index: u16 },
    NameAndType { name_index: u16, descriptor_index: u16 },
    Unusable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawAttribute {
    pub name_index: u16,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeAttribute {
    pub max_stack: u16,
    pub max_locals: u16,
    pub code: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodInfo {
    pub access_flags: u16,
    pub name_index: u16,
    pub descriptor_index: u16,
    pub code: Option<CodeAttribute>,
    /// Attributes other than Code, kept opaque.
    pub attributes: Vec<RawAttribute>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedClass {
    pub magic: u32,
    pub minor_version: u16,
    pub major_version: u16,
    /// 1-indexed: `constant_pool[0]` is `Unusable`.
    pub constant_pool: Vec<PoolEntry>,
    pub access_flags: u16,
    pub this_class: u16,
    pub super_class: u16,
    pub methods: Vec<MethodInfo>,
    /// The original input, kept for whole-file unit extraction.
    pub raw_bytes: Vec<u8>,
}

/// A code body regrouped into big-endian 2-byte units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSequence {
    pub units: Vec<u16>,
    /// Number of zero pad bytes appended (0 or 1 per contributing body).
    pub pad_count: usize,
}

impl UnitSequence {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut units = Vec::with_capacity((bytes.len() + 1) / 2);
        for chunk in bytes.chunks(2) {
            let hi = chunk[0] as u16;
            let lo = *chunk.get(1).unwrap_or(&0) as u16;
            units.push(hi << 8 | lo);
        }
        UnitSequence { units, pad_count: bytes.len() % 2 }
    }

    pub fn concat(parts: impl IntoIterator<Item = UnitSequence>) -> Self {
        let mut out = UnitSequence { units: Vec::new(), pad_count: 0 };
        for p in parts {
            out.units.extend(p.units);
            out.pad_count += p.pad_count;
        }
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, reading: &'static str) -> Result<&'a [u8], ClassFileError> {
        if self.pos + n > self.bytes.len() {
            return Err(ClassFileError::TruncatedInput { offset: self.pos, reading });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, reading: &'static str) -> Result<u8, ClassFileError> {
        Ok(self.take(1, reading)?[0])
    }

    fn u16(&mut self, reading: &'static str) -> Result<u16, ClassFileError> {
        let s = self.take(2, reading)?;
        Ok(u16::from_be_bytes([s[0], s[1]]))
    }

    fn u32(&mut self, reading: &'static str) -> Result<u32, ClassFileError> {
        let s = self.take(4, reading)?;
        Ok(u32::from_be_bytes([s[0], s[1], s[2], s[3]]))
    }
}

/// Parse a class file. Total over arbitrary input: returns a value or a
/// typed error, never panics.
pub fn parse_class(bytes: &[u8]) -> Result<ParsedClass, ClassFileError> {
    let mut r = Reader::new(bytes);
    let magic = r.u32("magic")?;
    if magic != CLASS_MAGIC {
        return Err(ClassFileError::BadMagic { offset: 0, found: magic });
    }
    let minor_version = r.u16("minor_version")?;
    let major_version = r.u16("major_version")?;

    let cp_count = r.u16("constant_pool_count")?;
    let mut constant_pool = vec![PoolEntry::Unusable];
    while constant_pool.len() < cp_count as usize {
        let tag_offset = r.pos;
        let tag = r.u8("pool tag")?;
        let entry = match tag {
            1 => {
                let len = r.u16("Utf8 length")? as usize;
                let raw = r.take(len, "Utf8 payload")?.to_vec();
                match decode_modified_utf8(&raw) {
                    Some(text) => PoolEntry::Utf8 { text, raw, malformed: false },
                    None => PoolEntry::Utf8 {
                        text: String::from_utf8_lossy(&raw).into_owned(),
                        raw,
                        malformed: true,
                    },
                }
            }
            3 => PoolEntry::Integer(r.u32("Integer payload")? as i32),
            4 => PoolEntry::Float(f32::from_bits(r.u32("Float payload")?)),
            5 => {
                let hi = r.u32("Long payload")? as u64;
                let lo = r.u32("Long payload")? as u64;
                PoolEntry::Long((hi << 32 | lo) as i64)
            }
            6 => {
                let hi = r.u32("Double payload")? as u64;
                let lo = r.u32("Double payload")? as u64;
                PoolEntry::Double(f64::from_bits(hi << 32 | lo))
            }
            7 => PoolEntry::Class { name_index: r.u16("Class name index")? },
            8 => PoolEntry::String { utf8_index: r.u16("String utf8 index")? },
            9 => PoolEntry::Fieldref {
                class_index: r.u16("Fieldref class index")?,
                name_and_type_index: r.u16("Fieldref name_and_type index")?,
            },
            10 => PoolEntry::Methodref {
                class_index: r.u16("Methodref class index")?,
                name_and_type_index: r.u16("Methodref name_and_type index")?,
            },
            12 => PoolEntry::NameAndType {
                name_index: r.u16("NameAndType name index")?,
                descriptor_index: r.u16("NameAndType descriptor index")?,
            },
            _ => return Err(ClassFileError::UnsupportedPoolTag { offset: tag_offset, tag }),
        };
        let two_slots = matches!(entry, PoolEntry::Long(_) | PoolEntry::Double(_));
        constant_pool.push(entry);
        if two_slots {
            constant_pool.push(PoolEntry::Unusable);
        }
    }

    let access_flags = r.u16("access_flags")?;
    let this_class = r.u16("this_class")?;
    let super_class = r.u16("super_class")?;

    let ifc_count = r.u16("interfaces_count")?;
    for _ in 0..ifc_count {
        r.u16("interface index")?;
    }

    // Fields are retained only structurally (names live in the pool).
    let field_count = r.u16("fields_count")?;
    for _ in 0..field_count {
        r.u16("field access_flags")?;
        r.u16("field name_index")?;
        r.u16("field descriptor_index")?;
        skip_attributes(&mut r)?;
    }

    let method_count = r.u16("methods_count")?;
    let mut methods = Vec::with_capacity(method_count.min(1024) as usize);
    for _ in 0..method_count {
        let access_flags = r.u16("method access_flags")?;
        let name_index = r.u16("method name_index")?;
        let descriptor_index = r.u16("method descriptor_index")?;
        let attr_count = r.u16("method attributes_count")?;
        let mut code = None;
        let mut attributes = Vec::new();
        for _ in 0..attr_count {
            let attr_name_index = r.u16("attribute name_index")?;
            let attr_len = r.u32("attribute length")? as usize;
            let data = r.take(attr_len, "attribute body")?.to_vec();
            let is_code = matches!(
                lookup_utf8(&constant_pool, attr_name_index),
                Some(name) if name == "Code"
            );
            if is_code && code.is_none() {
                code = Some(parse_code_attribute(&data)?);
            } else {
                attributes.push(RawAttribute { name_index: attr_name_index, data });
            }
        }
        methods.push(MethodInfo { access_flags, name_index, descriptor_index, code, attributes });
    }

    // Trailing class attributes and any extra bytes are retained via raw_bytes.
    Ok(ParsedClass {
        magic,
        minor_version,
        major_version,
        constant_pool,
        access_flags,
        this_class,
        super_class,
        methods,
        raw_bytes: bytes.to_vec(),
    })
}

fn skip_attributes(r: &mut Reader) -> Result<(), ClassFileError> {
    let count = r.u16("attributes_count")?;
    for _ in 0..count {
        r.u16("attribute name_index")?;
        let len = r.u32("attribute length")? as usize;
        r.take(len, "attribute body")?;
    }
    Ok(())
}

fn parse_code_attribute(data: &[u8]) -> Result<CodeAttribute, ClassFileError> {
    let mut r = Reader::new(data);
    let max_stack = r.u16("Code max_stack")?;
    let max_locals = r.u16("Code max_locals")?;
    let code_length = r.u32("Code code_length")? as usize;
    let code = r.take(code_length, "Code body")?.to_vec();
    // Exception table and nested attributes are not interpreted.
    Ok(CodeAttribute { max_stack, max_locals, code })
}

fn lookup_utf8(pool: &[PoolEntry], index: u16) -> Option<&str> {
    match pool.get(index as usize) {
        Some(PoolEntry::Utf8 { text, .. }) => Some(text),
        _ => None,
    }
}

/// Decode JVM modified UTF-8. Returns `None` on any malformed byte sequence.
fn decode_modified_utf8(raw: &[u8]) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let b = raw[i];
        if b == 0 || b == 0xf0 || b >= 0xf5 {
            return None; // embedded NUL and 4-byte forms are invalid here
        }
        if b < 0x80 {
            out.push(b as char);
            i += 1;
        } else if b & 0xe0 == 0xc0 {
            let b2 = *raw.get(i + 1)?;
            if b2 & 0xc0 != 0x80 {
                return None;
            }
            let cp = ((b as u32 & 0x1f) << 6) | (b2 as u32 & 0x3f);
            out.push(char::from_u32(cp)?);
            i += 2;
        } else if b & 0xf0 == 0xe0 {
            let b2 = *raw.get(i + 1)?;
            let b3 = *raw.get(i + 2)?;
            if b2 & 0xc0 != 0x80 || b3 & 0xc0 != 0x80 {
                return None;
            }
            let cp = ((b as u32 & 0x0f) << 12) | ((b2 as u32 & 0x3f) << 6) | (b3 as u32 & 0x3f);
            // Surrogate pairs are passed through lossily as replacement chars.
            out.push(char::from_u32(cp).unwrap_or('\u{fffd}'));
            i += 3;
        } else {
            return None;
        }
    }
    Some(out)
}

impl ParsedClass {
    /// Resolved text of the Utf8 entry at `index`.
    pub fn utf8(&self, index: u16) -> Result<&str, ClassFileError> {
        lookup_utf8(&self.constant_pool, index)
            .ok_or(ClassFileError::DanglingPoolRef { index, context: "expected Utf8" })
    }

    /// Internal-form name ("java/lang/String") of the Class entry at `index`.
    pub fn class_name(&self, index: u16) -> Result<&str, ClassFileError> {
        match self.constant_pool.get(index as usize) {
            Some(PoolEntry::Class { name_index }) => self.utf8(*name_index),
            _ => Err(ClassFileError::DanglingPoolRef { index, context: "expected Class" }),
        }
    }

    /// Name of this class in internal form.
    pub fn this_class_name(&self) -> Result<&str, ClassFileError> {
        self.class_name(self.this_class)
    }

    /// Code of every method as concatenated 2-byte units, each method body
    /// padded independently to an even byte count.
    pub fn code_units(&self) -> UnitSequence {
        UnitSequence::concat(
            self.methods
                .iter()
                .filter_map(|m| m.code.as_ref())
                .map(|c| UnitSequence::from_bytes(&c.code)),
        )
    }

    /// The entire class file as 2-byte units.
    pub fn file_units(&self) -> UnitSequence {
        UnitSequence::from_bytes(&self.raw_bytes)
    }
}

/// Which byte span feeds the model's bytecode side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnitScope {
    /// Only method Code attribute bodies.
    #[default]
    CodeOnly,
    /// The whole class file, header and constant pool included.
    WholeFile,
}

/// Unit extraction under the configured scope.
pub fn code_as_units(cls: &ParsedClass, scope: UnitScope) -> UnitSequence {
    match scope {
        UnitScope::CodeOnly => cls.code_units(),
        UnitScope::WholeFile => cls.file_units(),
    }
}
