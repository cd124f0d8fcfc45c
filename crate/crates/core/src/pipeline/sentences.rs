//! Sentence splitting for long-message handling.

use crate::script::{is_han, is_sentence_terminator};

fn is_closing_quote(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '」' | '』' | '）' | '》')
}

fn is_wide_terminator(c: char) -> bool {
    matches!(c, '。' | '！' | '？' | '…')
}

/// Splits `text` into trimmed sentences.
///
/// A sentence ends after a run of terminators plus any closing quotes.
/// ASCII terminators only end a sentence before whitespace, a Han
/// character or the end of text, so `3.14` and `example.com` stay whole.
/// An ellipsis followed by a lowercase letter continues the sentence.
/// Pieces without any alphanumeric character are dropped.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !(is_sentence_terminator(chars[i]) || chars[i] == '…') {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && (is_sentence_terminator(chars[i]) || chars[i] == '…') {
            i += 1;
        }
        while i < chars.len() && is_closing_quote(chars[i]) {
            i += 1;
        }
        let run = &chars[run_start..i];
        let wide = run.iter().any(|&c| is_wide_terminator(c) && c != '…');
        let next = chars[i..].iter().copied().find(|c| !c.is_whitespace());
        let boundary = if wide {
            true
        } else {
            let at_break = i == chars.len() || chars[i].is_whitespace() || is_han(chars[i]);
            let ellipsis = run.iter().filter(|&&c| c == '.').count() >= 2 || run.contains(&'…');
            at_break && !(ellipsis && next.is_some_and(char::is_lowercase))
        };
        if boundary {
            push_sentence(&mut out, &chars[start..i]);
            start = i;
        }
    }
    push_sentence(&mut out, &chars[start..]);
    out
}

fn push_sentence(out: &mut Vec<String>, piece: &[char]) {
    let s: String = piece.iter().collect();
    let s = s.trim();
    if s.chars().any(char::is_alphanumeric) {
        out.push(s.to_string());
    }
}
