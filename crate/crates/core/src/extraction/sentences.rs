//! Rule-based sentence boundaries for article prose.

/// Lowercased tokens that end in a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al.", "fig.", "figs.", "vs.", "e.g.", "i.e.", "cf.", "ca.", "approx.", "eq.", "eqs.", "ref.", "refs.", "no.",
    "nos.", "vol.", "pp.", "p.", "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "sp.", "spp.", "resp.", "suppl.", "tab.",
    "inc.", "ltd.", "co.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.",
    "dec.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

/// Splits `text` into trimmed sentences.
///
/// A boundary is a `.`, `!` or `?` (optionally followed by closing quotes or
/// brackets), then whitespace, then an uppercase letter or digit. A period
/// does not split after a known abbreviation.
/// Line breaks are paragraph breaks and always split.
pub fn split_sentences(text: &str) -> Vec<String> {
    text.split('\n').flat_map(split_paragraph).collect()
}

fn split_paragraph(para: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = para.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && CLOSERS.contains(&chars[end].1) {
                end += 1;
            }
            let mut next = end;
            while next < chars.len() && chars[next].1.is_whitespace() {
                next += 1;
            }
            let spaced = next > end;
            let opens = next < chars.len() && {
                let n = chars[next].1;
                n.is_uppercase() || n.is_ascii_digit()
            };
            if spaced && opens && !(c == '.' && is_abbreviation(para, start, pos)) {
                let byte_end = chars.get(end).map_or(para.len(), |(b, _)| *b);
                push_trimmed(&mut out, &para[start..byte_end]);
                start = chars[next].0;
                i = next;
                continue;
            }
        }
        i += 1;
    }
    push_trimmed(&mut out, &para[start..]);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

/// Whether the word ending at the period at byte `dot` is an abbreviation.
fn is_abbreviation(para: &str, sentence_start: usize, dot: usize) -> bool {
    let head = &para[sentence_start..=dot];
    let word = head
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or_default()
        .trim_start_matches(['(', '[', '"', '\'']);
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_split() {
        assert_eq!(split_sentences("A b. C d."), vec!["A b.", "C d."]);
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(split_sentences("Smith et al. found X."), vec!["Smith et al. found X."]);
        assert_eq!(
            split_sentences("See Fig. 2 for details. Tumors vs. Controls differed."),
            vec!["See Fig. 2 for details.", "Tumors vs. Controls differed."]
        );
    }

    #[test]
    fn needs_capital_or_digit() {
        assert_eq!(
            split_sentences("pH was 7.4 in all. mice survived."),
            vec!["pH was 7.4 in all. mice survived."]
        );
        assert_eq!(
            split_sentences("It rose! 25 patients died? Yes."),
            vec!["It rose!", "25 patients died?", "Yes."]
        );
    }

    #[test]
    fn closing_quotes_stay_attached() {
        assert_eq!(
            split_sentences("He said \"stop.\" Then left."),
            vec!["He said \"stop.\"", "Then left."]
        );
    }

    #[test]
    fn newline_is_a_boundary() {
        assert_eq!(split_sentences("Methods\nWe did X."), vec!["Methods", "We did X."]);
        assert!(split_sentences("").is_empty());
        assert!(split_sentences(" \n ").is_empty());
    }

    #[test]
    fn single_letter_before_period_splits() {
        assert_eq!(
            split_sentences("Levels of vitamin C. Next came D."),
            vec!["Levels of vitamin C.", "Next came D."]
        );
    }
}
