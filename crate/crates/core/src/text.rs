//! Token rules shared by the corpus index, the lexical graph and the query pool.

use alloc::string::String;
use alloc::vec::Vec;

/// Lowercases `text` and splits it on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Canonical form of a term: its tokens joined by single spaces.
///
/// `"Expo_2013"`, `"expo 2013"` and `" EXPO-2013 "` all map to `"expo 2013"`.
pub fn normalize_term(text: &str) -> String {
    tokenize(text).join(" ")
}
