//! LP-safe identifiers. Every byte outside `[A-Za-z0-9]` (underscore
//! included) becomes `_hhx`, so an escaped id never contains `__` and names
//! split unambiguously on the `__` separator.

use std::fmt::Write;

pub const SEP: &str = "__";

pub fn escape(id: &str) -> String {
    if id.is_empty() {
        return "_x".to_string();
    }
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() {
            out.push(b as char);
        } else {
            write!(out, "_{b:02x}x").unwrap();
        }
    }
    out
}

pub fn unescape(text: &str) -> Option<String> {
    if text == "_x" {
        return Some(String::new());
    }
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b.is_ascii_alphanumeric() {
            out.push(b);
            i += 1;
        } else if b == b'_' && bytes.get(i + 3) == Some(&b'x') {
            let hex = std::str::from_utf8(&bytes[i + 1..i + 3]).ok()?;
            if !hex.bytes().all(|h| matches!(h, b'0'..=b'9' | b'a'..=b'f')) {
                return None;
            }
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 4;
        } else {
            return None;
        }
    }
    String::from_utf8(out).ok()
}

/// `prefix__id1__id2...` with every id escaped.
pub fn compose(prefix: &str, ids: &[&str]) -> String {
    let mut out = prefix.to_string();
    for id in ids {
        out.push_str(SEP);
        out.push_str(&escape(id));
    }
    out
}

/// Inverse of [`compose`]: the prefix and the unescaped ids.
pub fn decompose(name: &str) -> Option<(String, Vec<String>)> {
    let mut parts = name.split(SEP);
    let prefix = parts.next()?.to_string();
    let ids = parts.map(unescape).collect::<Option<Vec<_>>>()?;
    Some((prefix, ids))
}
