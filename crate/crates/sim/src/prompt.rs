//! Lexical prompt matching against scene tags.

/// Lowercases, drops punctuation and collapses whitespace.
pub fn normalize(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchStrength {
    None,
    /// Prompt appears in the tag as a run of whole words.
    Word,
    /// Prompt equals the tag.
    Exact,
}

/// Both arguments must already be normalized.
pub fn match_strength(prompt: &str, tag: &str) -> MatchStrength {
    if prompt.is_empty() || tag.is_empty() {
        return MatchStrength::None;
    }
    if prompt == tag {
        return MatchStrength::Exact;
    }
    let p: Vec<&str> = prompt.split(' ').collect();
    let t: Vec<&str> = tag.split(' ').collect();
    if t.windows(p.len()).any(|w| w == p.as_slice()) {
        MatchStrength::Word
    } else {
        MatchStrength::None
    }
}
