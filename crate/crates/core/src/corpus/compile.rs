//! Built-in mini-compiler: emits a structurally valid class file for either
//! call template without invoking an external JDK.

use std::collections::HashMap;

use super::{ApiEntry, CorpusError};

const ACC_PUBLIC: u16 = 0x0001;
const ACC_SUPER: u16 = 0x0020;
const ACC_STATIC: u16 = 0x0008;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum PoolKey {
    Utf8(String),
    Class(String),
    NameAndType(String, String),
    Methodref(String, String, String),
}

/// Constant pool with insertion-order dedup: the first reference to a key
/// fixes its index.
#[derive(Default)]
struct PoolBuilder {
    bytes: Vec<u8>,
    count: u16,
    index: HashMap<PoolKey, u16>,
}

impl PoolBuilder {
    fn intern(&mut self, key: PoolKey) -> u16 {
        if let Some(&idx) = self.index.get(&key) {
            return idx;
        }
        match key.clone() {
            PoolKey::Utf8(s) => {
                self.bytes.push(1);
                self.bytes.extend((s.len() as u16).to_be_bytes());
                self.bytes.extend(s.as_bytes());
            }
            PoolKey::Class(name) => {
                let name_idx = self.utf8(&name);
                self.bytes.push(7);
                self.bytes.extend(name_idx.to_be_bytes());
            }
            PoolKey::NameAndType(name, desc) => {
                let n = self.utf8(&name);
                let d = self.utf8(&desc);
                self.bytes.push(12);
                self.bytes.extend(n.to_be_bytes());
                self.bytes.extend(d.to_be_bytes());
            }
            PoolKey::Methodref(class, name, desc) => {
                let c = self.class(&class);
                let nt = self.intern(PoolKey::NameAndType(name, desc));
                self.bytes.push(10);
                self.bytes.extend(c.to_be_bytes());
                self.bytes.extend(nt.to_be_bytes());
            }
        }
        self.count += 1;
        self.index.insert(key, self.count);
        self.count
    }

    fn utf8(&mut self, s: &str) -> u16 {
        self.intern(PoolKey::Utf8(s.to_owned()))
    }

    fn class(&mut self, internal_name: &str) -> u16 {
        self.intern(PoolKey::Class(internal_name.to_owned()))
    }

    fn methodref(&mut self, class: &str, name: &str, desc: &str) -> u16 {
        self.intern(PoolKey::Methodref(class.to_owned(), name.to_owned(), desc.to_owned()))
    }
}

/// Compile one entry into class-file bytes. Deterministic for a fixed entry.
pub fn mini_compile(entry: &ApiEntry) -> Result<Vec<u8>, CorpusError> {
    let entry = ApiEntry::new(&entry.class_fqn, &entry.method_name, entry.is_static)?;
    let target = entry.internal_name();

    let mut pool = PoolBuilder::default();
    let this_class = pool.class(&target);
    let super_class = pool.class("java/lang/Object");
    let fn_name = pool.utf8("function");
    let fn_desc = pool.utf8("()V");
    let code_attr_name = pool.utf8("Code");

    let (code, max_stack, max_locals) = if entry.is_static {
        let mref = pool.methodref(&target, &entry.method_name, "()V");
        let mut code = vec![0xb8]; // invokestatic
        code.extend(mref.to_be_bytes());
        code.push(0xb1); // return
        (code, 1u16, 0u16)
    } else {
        let init = pool.methodref(&target, "<init>", "()V");
        let mref = pool.methodref(&target, &entry.method_name, "()V");
        let mut code = vec![0xbb]; // new
        code.extend(this_class.to_be_bytes());
        code.push(0x59); // dup
        code.push(0xb7); // invokespecial <init>
        code.extend(init.to_be_bytes());
        code.push(0x4b); // astore_0
        code.push(0x2a); // aload_0
        code.push(0xb6); // invokevirtual
        code.extend(mref.to_be_bytes());
        code.push(0xb1); // return
        (code, 2u16, 1u16)
    };

    let mut file = Vec::with_capacity(128 + pool.bytes.len());
    file.extend(0xCAFE_BABEu32.to_be_bytes());
    file.extend(0u16.to_be_bytes()); // minor
    file.extend(52u16.to_be_bytes()); // major (Java 8 format, pre-module)
    file.extend((pool.count + 1).to_be_bytes());
    file.extend(&pool.bytes);
    file.extend((ACC_PUBLIC | ACC_SUPER).to_be_bytes());
    file.extend(this_class.to_be_bytes());
    file.extend(super_class.to_be_bytes());
    file.extend(0u16.to_be_bytes()); // interfaces
    file.extend(0u16.to_be_bytes()); // fields
    file.extend(1u16.to_be_bytes()); // methods
    file.extend((ACC_PUBLIC | ACC_STATIC).to_be_bytes());
    file.extend(fn_name.to_be_bytes());
    file.extend(fn_desc.to_be_bytes());
    file.extend(1u16.to_be_bytes()); // attribute count
    file.extend(code_attr_name.to_be_bytes());
    let attr_len = 2 + 2 + 4 + code.len() + 2 + 2;
    file.extend((attr_len as u32).to_be_bytes());
    file.extend(max_stack.to_be_bytes());
    file.extend(max_locals.to_be_bytes());
    file.extend((code.len() as u32).to_be_bytes());
    file.extend(&code);
    file.extend(0u16.to_be_bytes()); // exception table
    file.extend(0u16.to_be_bytes()); // code attributes
    file.extend(0u16.to_be_bytes()); // class attributes
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::{disassemble, parse_class};

    #[test]
    fn static_code_pattern() {
        let entry = ApiEntry::new("a.B", "c", true).unwrap();
        let bytes = mini_compile(&entry).unwrap();
        let cls = parse_class(&bytes).unwrap();
        let code = &cls.methods[0].code.as_ref().unwrap().code;
        assert_eq!(code[0], 0xb8);
        assert_eq!(*code.last().unwrap(), 0xb1);
        assert_eq!(code.len(), 4);
    }

    #[test]
    fn instance_code_pattern() {
        let entry = ApiEntry::new("javax.swing.JMenuItem", "enable", false).unwrap();
        let bytes = mini_compile(&entry).unwrap();
        let cls = parse_class(&bytes).unwrap();
        let code = &cls.methods[0].code.as_ref().unwrap().code;
        assert_eq!(code[0], 0xbb);
        assert_eq!(code[3], 0x59);
        assert_eq!(code.len(), 13);
    }

    #[test]
    fn round_trip_this_class_and_version() {
        let entry = ApiEntry::new("javax.swing.JMenu", "isTopLevelMenu", false).unwrap();
        let bytes = mini_compile(&entry).unwrap();
        assert_eq!(&bytes[..4], &[0xca, 0xfe, 0xba, 0xbe]);
        let cls = parse_class(&bytes).unwrap();
        assert_eq!(cls.major_version, 52);
        assert_eq!(cls.this_class_name().unwrap(), "javax/swing/JMenu");
    }

    #[test]
    fn static_disassembly_is_invokestatic_return() {
        let entry = ApiEntry::new("a.B", "c", true).unwrap();
        let cls = parse_class(&mini_compile(&entry).unwrap()).unwrap();
        let stream = disassemble(&cls, 0).unwrap();
        assert_eq!(stream.tokens, ["invokestatic", "a", "B", "c", "return"]);
    }

    #[test]
    fn deterministic_bytes() {
        let entry = ApiEntry::new("java.util.Random", "nextInt", false).unwrap();
        assert_eq!(mini_compile(&entry).unwrap(), mini_compile(&entry).unwrap());
    }
}
