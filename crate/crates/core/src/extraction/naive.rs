//! A small rule-based extractor for offline runs and tests.
//!
//! Recall is far below a real OpenIE system. Per clause it finds the first
//! verb-like token that has something before it; the subject is everything
//! before the verb and the object everything after it, up to the clause end or
//! a subordinating conjunction. Adverbs, negation and auxiliary chains are
//! folded into the relation ("was significantly associated with").

use std::collections::HashSet;
use std::sync::OnceLock;

use super::Extraction;

/// Irregular and otherwise common verb forms matched verbatim.
const VERB_FORMS: &[&str] = &[
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "am",
    "has",
    "have",
    "had",
    "having",
    "does",
    "do",
    "did",
    "can",
    "could",
    "may",
    "might",
    "must",
    "shall",
    "should",
    "will",
    "would",
    "became",
    "become",
    "becomes",
    "began",
    "begins",
    "binds",
    "bind",
    "bound",
    "brought",
    "brings",
    "came",
    "comes",
    "found",
    "finds",
    "gave",
    "given",
    "gives",
    "got",
    "grew",
    "grown",
    "grows",
    "held",
    "holds",
    "kept",
    "keeps",
    "knew",
    "known",
    "led",
    "leads",
    "left",
    "lost",
    "loses",
    "made",
    "makes",
    "meant",
    "means",
    "met",
    "meets",
    "ran",
    "runs",
    "saw",
    "seen",
    "sees",
    "sent",
    "sends",
    "set",
    "sets",
    "showed",
    "shown",
    "shows",
    "spread",
    "spreads",
    "stood",
    "stands",
    "struck",
    "strikes",
    "took",
    "taken",
    "takes",
    "told",
    "tells",
    "thought",
    "thinks",
    "underwent",
    "undergoes",
    "undergone",
    "went",
    "goes",
    "gone",
    "won",
    "wrote",
    "written",
    "writes",
    "arose",
    "arisen",
    "arises",
    "drove",
    "driven",
    "drives",
    "fell",
    "fallen",
    "falls",
    "felt",
    "feels",
    "hid",
    "hidden",
    "hides",
    "rose",
    "risen",
    "rises",
    "sought",
    "seeks",
    "spoke",
    "spoken",
    "speaks",
    "chose",
    "chosen",
    "chooses",
    "withdrew",
    "withdrawn",
    "overcame",
    "overcome",
    "overcomes",
    "forgot",
    "forgotten",
    "understood",
    "understands",
    "undertook",
    "undertaken",
    "mediates",
    "confers",
    "conferred",
    "encodes",
    "encoded",
    "harbors",
    "harbored",
    "harbours",
    "exhibits",
    "exhibited",
];

/// Stems recognised with `-s`, `-es`, `-ed`, `-d` and `-ing` endings (plus
/// `-ies`/`-ied` for stems in `y` and doubled final consonants).
const VERB_STEMS: &[&str] = &[
    "accelerate",
    "accompany",
    "achieve",
    "activate",
    "affect",
    "aggravate",
    "alter",
    "amplify",
    "analyze",
    "appear",
    "assess",
    "associate",
    "attenuate",
    "block",
    "cause",
    "characterize",
    "cleave",
    "compare",
    "complicate",
    "confirm",
    "contain",
    "contribute",
    "control",
    "correlate",
    "cure",
    "damage",
    "decrease",
    "define",
    "delay",
    "demonstrate",
    "depend",
    "derive",
    "detect",
    "determine",
    "develop",
    "diagnose",
    "differ",
    "diminish",
    "disrupt",
    "down-regulate",
    "downregulate",
    "elevate",
    "eliminate",
    "enable",
    "encode",
    "enhance",
    "enrich",
    "evaluate",
    "evoke",
    "exacerbate",
    "exceed",
    "exhibit",
    "express",
    "facilitate",
    "form",
    "generate",
    "identify",
    "impair",
    "improve",
    "include",
    "increase",
    "indicate",
    "induce",
    "influence",
    "inhibit",
    "initiate",
    "interact",
    "involve",
    "kill",
    "lack",
    "limit",
    "link",
    "localize",
    "lower",
    "maintain",
    "mediate",
    "metastasize",
    "modify",
    "modulate",
    "mutate",
    "need",
    "observe",
    "occur",
    "phosphorylate",
    "predict",
    "prevent",
    "produce",
    "prolong",
    "promote",
    "protect",
    "provide",
    "recruit",
    "reduce",
    "regulate",
    "relate",
    "release",
    "remain",
    "repress",
    "require",
    "resist",
    "respond",
    "restore",
    "result",
    "reveal",
    "sensitize",
    "signal",
    "stimulate",
    "stop",
    "suggest",
    "suppress",
    "surround",
    "target",
    "trigger",
    "treat",
    "up-regulate",
    "upregulate",
    "use",
    "yield",
];

/// Stems whose bare form is more often a noun than a verb in article prose.
const NOUN_LIKE_STEMS: &[&str] = &[
    "control", "damage", "decrease", "delay", "form", "increase", "lack", "link", "need", "release", "result",
    "signal", "stop", "target", "trigger", "use", "yield", "cure",
];

const SUBORDINATORS: &[&str] = &[
    "because", "although", "though", "whereas", "while", "which", "that", "when", "whenever", "unless", "since", "if",
    "where",
];

const PREPOSITIONS: &[&str] = &[
    "with", "to", "in", "by", "of", "for", "from", "on", "into", "as", "than", "against",
];

const MODIFIERS: &[&str] = &[
    "not",
    "also",
    "often",
    "still",
    "further",
    "then",
    "frequently",
    "rarely",
];

fn verb_forms() -> &'static HashSet<&'static str> {
    static FORMS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    FORMS.get_or_init(|| VERB_FORMS.iter().copied().collect())
}

fn verb_stems() -> &'static HashSet<&'static str> {
    static STEMS: OnceLock<HashSet<&'static str>> = OnceLock::new();
    STEMS.get_or_init(|| VERB_STEMS.iter().copied().collect())
}

/// Whether a lowercased word looks like a verb form.
pub fn is_verb_like(word: &str) -> bool {
    if verb_forms().contains(word) {
        return true;
    }
    let stems = verb_stems();
    if stems.contains(word) {
        return !NOUN_LIKE_STEMS.contains(&word);
    }
    stem_candidates(word).iter().any(|c| stems.contains(c.as_str()))
}

fn stem_candidates(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    let undouble = |base: &str| -> Option<String> {
        let b = base.as_bytes();
        (b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2]).then(|| base[..base.len() - 1].to_string())
    };
    if let Some(base) = word.strip_suffix("ing") {
        out.push(base.to_string());
        out.push(format!("{base}e"));
        out.extend(undouble(base));
    }
    if let Some(base) = word.strip_suffix("ied") {
        out.push(format!("{base}y"));
    }
    if let Some(base) = word.strip_suffix("ies") {
        out.push(format!("{base}y"));
    }
    if let Some(base) = word.strip_suffix("ed") {
        out.push(base.to_string());
        out.push(format!("{base}e"));
        out.extend(undouble(base));
    }
    if let Some(base) = word.strip_suffix("es") {
        out.push(base.to_string());
    }
    if let Some(base) = word.strip_suffix('s') {
        out.push(base.to_string());
    }
    out
}

/// A whitespace-delimited word with edge punctuation removed; `start..end` is
/// the byte span of the stripped word in the clause.
#[derive(Debug, Clone, Copy)]
struct Word<'a> {
    text: &'a str,
    start: usize,
    end: usize,
}

const LEADING: &[char] = &['(', '[', '{', '"', '\'', '\u{201c}', '\u{2018}'];
const TRAILING: &[char] = &[
    '.', ',', ';', ':', '!', '?', ')', ']', '}', '"', '\'', '\u{201d}', '\u{2019}',
];

fn words(clause: &str) -> Vec<Word<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in clause.split_inclusive(char::is_whitespace) {
        let trimmed = raw.trim_end();
        let lead = trimmed.len() - trimmed.trim_start_matches(LEADING).len();
        let core = trimmed.trim_start_matches(LEADING).trim_end_matches(TRAILING);
        if core.chars().any(char::is_alphanumeric) {
            let start = offset + lead;
            out.push(Word {
                text: core,
                start,
                end: start + core.len(),
            });
        }
        offset += raw.len();
    }
    out
}

fn clauses(sentence: &str) -> Vec<&str> {
    sentence.split("; ").flat_map(|part| part.split(", and ")).collect()
}

/// Clause text from the first to the last word, extended over closing
/// brackets that balance an opening one inside the span.
fn span<'a>(clause: &'a str, words: &[Word]) -> &'a str {
    let (Some(first), Some(last)) = (words.first(), words.last()) else {
        return "";
    };
    let mut end = last.end;
    for (open, close) in [('(', ')'), ('[', ']')] {
        let text = &clause[first.start..end];
        let unbalanced = text.matches(open).count().saturating_sub(text.matches(close).count());
        for _ in 0..unbalanced {
            if clause[end..].starts_with(close) {
                end += close.len_utf8();
            }
        }
    }
    &clause[first.start..end]
}

fn lower(w: &Word) -> String {
    w.text.to_lowercase()
}

fn is_modifier(w: &Word) -> bool {
    let l = lower(w);
    MODIFIERS.contains(&l.as_str()) || (l.len() > 4 && l.ends_with("ly"))
}

fn extract_clause(clause: &str) -> Option<Extraction> {
    let ws = words(clause);
    let verb = (1..ws.len()).find(|&i| is_verb_like(&lower(&ws[i])))?;

    // Pull preceding adverbs into the relation.
    let mut rel_start = verb;
    while rel_start > 1 && is_modifier(&ws[rel_start - 1]) {
        rel_start -= 1;
    }
    // Extend over auxiliary chains, modifiers between verbs, and one preposition.
    let mut rel_end = verb + 1;
    loop {
        let mut j = rel_end;
        while j < ws.len() && is_modifier(&ws[j]) {
            j += 1;
        }
        if j < ws.len() && j + 1 < ws.len() && is_verb_like(&lower(&ws[j])) {
            rel_end = j + 1;
        } else {
            break;
        }
    }
    if rel_end + 1 < ws.len() && PREPOSITIONS.contains(&lower(&ws[rel_end]).as_str()) {
        rel_end += 1;
    }

    let object_end = (rel_end..ws.len())
        .find(|&i| SUBORDINATORS.contains(&lower(&ws[i]).as_str()))
        .unwrap_or(ws.len());

    let subject = span(clause, &ws[..rel_start]);
    let relation = span(clause, &ws[rel_start..rel_end]);
    let object = span(clause, &ws[rel_end..object_end]);
    if subject.is_empty() || relation.is_empty() || object.is_empty() {
        return None;
    }
    Some(Extraction {
        subject: subject.to_string(),
        relation: relation.to_string(),
        object: object.to_string(),
        confidence: 1.0,
    })
}

/// At most one extraction per clause (clauses split on `", and "` and `"; "`),
/// each with confidence 1.0.
pub fn naive_extract(sentence: &str) -> Vec<Extraction> {
    clauses(sentence).into_iter().filter_map(extract_clause).collect()
}
