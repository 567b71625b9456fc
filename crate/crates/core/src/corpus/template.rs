//! Source rendering for the two method-call templates.
//!
//! Template S (static method):
//! ```java
//! class <Class> {
//!     public static void function() {
//!         <Class>.<method>();
//!     }
//! }
//! ```
//!
//! Template N (instance method):
//! ```java
//! class <Class> {
//!     public static void function() {
//!         <Class> obj = new <Class>();
//!         obj.<method>();
//!     }
//! }
//! ```
//!
//! Token streams flatten punctuation and package separators to spaces; a
//! terminal "." token closes every sample.

use super::{ApiEntry, CorpusError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceRender {
    pub text: String,
    pub tokens: Vec<String>,
}

/// Render an entry into source text plus its flattened token stream.
pub fn render_source(entry: &ApiEntry) -> Result<SourceRender, CorpusError> {
    // ApiEntry construction already validated identifiers; re-validate so the
    // operation stands alone over hand-built values.
    let checked = ApiEntry::new(&entry.class_fqn, &entry.method_name, entry.is_static)?;

    let segs: Vec<&str> = checked.class_fqn.split('.').collect();
    let method = checked.method_name.as_str();

    let mut tokens: Vec<String> = Vec::new();
    let push_all = |ts: &mut Vec<String>, words: &[&str]| {
        ts.extend(words.iter().map(|w| (*w).to_owned()));
    };
    push_all(&mut tokens, &["class"]);
    push_all(&mut tokens, &segs);
    push_all(&mut tokens, &[method]);
    push_all(&mut tokens, &["public", "static", "void", "function"]);
    if checked.is_static {
        push_all(&mut tokens, &segs);
        push_all(&mut tokens, &[method]);
    } else {
        push_all(&mut tokens, &segs);
        push_all(&mut tokens, &["obj", "new"]);
        push_all(&mut tokens, &segs);
        push_all(&mut tokens, &["obj", method]);
    }
    tokens.push(".".to_owned());

    let fqcn = &checked.class_fqn;
    let body = if checked.is_static {
        format!("        {fqcn}.{method}();")
    } else {
        format!("        {fqcn} obj = new {fqcn}();\n        obj.{method}();")
    };
    let text = format!(
        "class {fqcn} {{\n    public static void function() {{\n{body}\n    }}\n}}\n"
    );
    Ok(SourceRender { text, tokens })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(entry: &ApiEntry) -> Vec<String> {
        render_source(entry).unwrap().tokens
    }

    #[test]
    fn instance_template_matches_reference_shape() {
        let entry = ApiEntry::new("javax.swing.JMenuItem", "enable", false).unwrap();
        let expected: Vec<&str> = "class javax swing JMenuItem enable public static void function \
                                   javax swing JMenuItem obj new javax swing JMenuItem obj enable ."
            .split_whitespace()
            .collect();
        assert_eq!(toks(&entry), expected);
    }

    #[test]
    fn instance_template_ends_with_method_then_period() {
        let entry = ApiEntry::new("java.lang.StringBuilder", "reverse", false).unwrap();
        let t = toks(&entry);
        assert_eq!(&t[t.len() - 3..], ["obj", "reverse", "."]);
    }

    #[test]
    fn static_template_minimal() {
        let entry = ApiEntry::new("a.B", "c", true).unwrap();
        let expected: Vec<&str> = "class a B c public static void function a B c ."
            .split_whitespace()
            .collect();
        assert_eq!(toks(&entry), expected);
    }

    #[test]
    fn text_compiles_shape() {
        let entry = ApiEntry::new("a.B", "c", true).unwrap();
        let r = render_source(&entry).unwrap();
        assert!(r.text.contains("a.B.c();"));
        assert!(r.text.contains("public static void function()"));
    }
}
