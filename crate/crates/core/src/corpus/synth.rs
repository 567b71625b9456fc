//! Synthetic API entry generation, standing in for the crawled API listing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use super::ApiEntry;

const PACKAGES: &[&str] = &[
    "java.lang",
    "java.util",
    "java.io",
    "java.net",
    "java.nio.file",
    "java.time",
    "java.text",
    "java.security",
    "java.awt.event",
    "javax.swing",
    "javax.swing.tree",
    "javax.sound.midi",
];

const CLASSES: &[&str] = &[
    "JMenuItem", "JMenu", "StringBuilder", "DefaultTreeCellRenderer", "KeyEvent", "Sequencer",
    "Random", "Scanner", "Vector", "HashMap", "TreeSet", "BitSet", "Buffer", "Channel",
    "Formatter", "Calendar", "Duration", "Instant", "Signature", "Cipher", "Socket", "Proxy",
    "Inflater", "Deflater", "Observable", "Timer", "Toolkit", "Component", "Container",
    "GridLayout", "BorderFactory", "ButtonGroup", "ColorChooser", "FileDialog", "Clipboard",
    "Robot", "TrayIcon", "SplashScreen", "Desktop", "Taskbar",
];

const METHODS: &[&str] = &[
    "enable", "disable", "reverse", "clear", "reset", "start", "stop", "close", "open", "flush",
    "isTopLevelMenu", "getRegisteredKeyStrokes", "getKeyModifiersText", "toFront", "toBack",
    "validate", "invalidate", "revalidate", "repaint", "pack", "show", "hide", "dispose",
    "notify", "notifyAll", "interrupt", "yield_", "run", "destroy", "refresh", "rewind",
    "compact", "mark", "trimToSize", "ensureCapacity", "firstKey", "lastKey", "pollFirst",
    "pollLast", "descendingIterator", "getClass", "hashCode", "intern", "strip", "chars",
    "lines", "codePoints", "normalize", "negate", "abs",
];

/// Deterministically sample `count` distinct entries from the name pools.
pub fn generate_entries(count: usize, seed: u64) -> Vec<ApiEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    let capacity = PACKAGES.len() * CLASSES.len() * METHODS.len();
    while out.len() < count.min(capacity) {
        let pkg = *PACKAGES.choose(&mut rng).unwrap();
        let cls = *CLASSES.choose(&mut rng).unwrap();
        let method = *METHODS.choose(&mut rng).unwrap();
        if !seen.insert((pkg, cls, method)) {
            continue;
        }
        let is_static = rng.gen_bool(0.5);
        out.push(ApiEntry::new(&format!("{pkg}.{cls}"), method, is_static).expect("pool names are valid identifiers"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_distinct() {
        let a = generate_entries(500, 42);
        let b = generate_entries(500, 42);
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        let ids: HashSet<String> = a.iter().map(|e| e.id()).collect();
        assert_eq!(ids.len(), 500);
    }

    #[test]
    fn different_seed_differs() {
        assert_ne!(generate_entries(50, 1), generate_entries(50, 2));
    }
}
