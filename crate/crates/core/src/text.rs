//! Tokenizers shared by the relevance and metrics stages.

/// Lowercases and splits on every non-alphanumeric character, dropping empty tokens.
///
/// This is the ROUGE tokenizer: `"EGFR-mutant tumors."` becomes
/// `["egfr", "mutant", "tumors"]`.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Tokens used for TF-IDF vectorization: [`word_tokens`] minus single-character tokens.
pub fn index_tokens(text: &str) -> Vec<String> {
    word_tokens(text)
        .into_iter()
        .filter(|t| t.chars().count() > 1)
        .collect()
}

/// Collapses every whitespace run to one space and trims both ends.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// FNV-1a over the UTF-8 bytes. Used wherever a stable, documented string hash is needed.
pub fn fnv1a64(s: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    s.bytes().fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}
