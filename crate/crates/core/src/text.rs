//! Shared tokenizer and suffix-stripping helpers.

/// Lowercases, splits on whitespace and peels leading/trailing ASCII
/// punctuation off each chunk as separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let chars: Vec<char> = lower.chars().collect();
        let start = chars.iter().take_while(|c| c.is_ascii_punctuation()).count();
        if start == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let end = chars.len() - chars.iter().rev().take_while(|c| c.is_ascii_punctuation()).count();
        out.extend(chars[..start].iter().map(|c| c.to_string()));
        out.push(chars[start..end].iter().collect());
        out.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    out
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ")
}

/// Crude stemmer: strips one of `ing`, `ed`, `es`, `s` when at least three
/// characters remain.
pub fn stem(token: &str) -> String {
    for suffix in ["ing", "ed", "es", "s"] {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.chars().count() >= 3 && !(suffix == "s" && base.ends_with('s')) {
                return base.to_string();
            }
        }
    }
    token.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("A man, runs."), ["a", "man", ",", "runs", "."]);
        assert_eq!(tokenize("  (Hello)  don't ... "), ["(", "hello", ")", "don't", ".", ".", "."]);
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn stems_shared_forms() {
        assert_eq!(stem("wrestling"), stem("wrestles"));
        assert_eq!(stem("singing"), "sing");
        assert_eq!(stem("sings"), "sing");
        assert_eq!(stem("glass"), "glass");
        assert_eq!(stem("is"), "is");
    }
}
