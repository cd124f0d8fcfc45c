//! Script-statistics language gate.

use serde::{Deserialize, Serialize};

use crate::script::{is_han, is_latin_letter};
use crate::vectorize::Language;

pub const UNSUPPORTED_NOTICE: &str = "Sorry, I do not understand this language.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LanguageTag {
    English,
    Chinese,
    CodeSwitched,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    pub tag: LanguageTag,
    pub cjk_fraction: f64,
    pub latin_fraction: f64,
    pub notice: Option<String>,
}

/// A whitespace-delimited chunk made mostly of symbols, such as `(ツ)` or
/// `¯\_(ツ)_/¯`. Its letters are decoration and do not count as language.
pub(crate) fn is_symbolic_chunk(chunk: &str) -> bool {
    let mut letters = 0usize;
    let mut symbols = 0usize;
    let mut total = 0usize;
    for c in chunk.chars().filter(|c| !c.is_whitespace()) {
        total += 1;
        if c.is_alphabetic() {
            letters += 1;
        } else if !c.is_alphanumeric() {
            symbols += 1;
        }
    }
    symbols > 0 && letters * 3 <= total
}

/// Letters of `text` outside symbolic chunks.
pub(crate) fn language_letters(text: &str) -> impl Iterator<Item = char> + '_ {
    text.split_whitespace()
        .filter(|chunk| !is_symbolic_chunk(chunk))
        .flat_map(str::chars)
        .filter(|c| c.is_alphabetic())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Script {
    Han,
    Latin,
    Other,
}

fn script_of(c: char) -> Script {
    if is_han(c) {
        Script::Han
    } else if is_latin_letter(c) {
        Script::Latin
    } else {
        Script::Other
    }
}

/// Word-sized units per script: a run of Latin or other letters is one
/// word, a run of Han characters counts one unit per two characters.
fn script_units(text: &str) -> (usize, usize, usize) {
    let (mut han, mut latin, mut other) = (0usize, 0usize, 0usize);
    let mut close = |script: Script, len: usize| match script {
        Script::Han => han += len.div_ceil(2),
        Script::Latin => latin += 1,
        Script::Other => other += 1,
    };
    for chunk in text.split_whitespace().filter(|c| !is_symbolic_chunk(c)) {
        let mut run: Option<(Script, usize)> = None;
        for c in chunk.chars() {
            let script = c.is_alphabetic().then(|| script_of(c));
            match (run, script) {
                (Some((s, n)), Some(t)) if s == t => run = Some((s, n + 1)),
                (prev, next) => {
                    if let Some((s, n)) = prev {
                        close(s, n);
                    }
                    run = next.map(|t| (t, 1));
                }
            }
        }
        if let Some((s, n)) = run {
            close(s, n);
        }
    }
    (han, latin, other)
}

/// Classifies `text` by the share of Han and Latin script units among all
/// letter runs. Letters inside symbolic chunks are ignored.
pub fn detect_language(text: &str, threshold: f64) -> LanguageVerdict {
    let (han, latin, other) = script_units(text);
    let units = han + latin + other;
    if units == 0 {
        return LanguageVerdict {
            tag: LanguageTag::English,
            cjk_fraction: 0.0,
            latin_fraction: 0.0,
            notice: None,
        };
    }
    let cjk_fraction = han as f64 / units as f64;
    let latin_fraction = latin as f64 / units as f64;
    let tag = match (cjk_fraction >= threshold, latin_fraction >= threshold) {
        (true, true) => LanguageTag::CodeSwitched,
        (true, false) => LanguageTag::Chinese,
        (false, true) => LanguageTag::English,
        (false, false) => LanguageTag::Unsupported,
    };
    LanguageVerdict {
        tag,
        cjk_fraction,
        latin_fraction,
        notice: (tag == LanguageTag::Unsupported).then(|| UNSUPPORTED_NOTICE.to_string()),
    }
}

/// Maximal runs of one script: Han letters go to Chinese, every other
/// letter to English, and non-letters stay with the run they follow.
pub fn script_runs(text: &str) -> Vec<(Language, &str)> {
    // (language, start, end); `end` trails the last letter until the next run begins
    let mut runs: Vec<(Language, usize, usize)> = Vec::new();
    for (i, c) in text.char_indices() {
        if !c.is_alphabetic() {
            continue;
        }
        let lang = if is_han(c) { Language::Zh } else { Language::En };
        match runs.last_mut() {
            Some((l, _, end)) if *l == lang => *end = i + c.len_utf8(),
            Some((_, _, end)) => {
                *end = i;
                runs.push((lang, i, i + c.len_utf8()));
            }
            None => runs.push((lang, 0, i + c.len_utf8())),
        }
    }
    if let Some((_, _, end)) = runs.last_mut() {
        *end = text.len();
    }
    runs.into_iter().map(|(l, s, e)| (l, &text[s..e])).collect()
}
