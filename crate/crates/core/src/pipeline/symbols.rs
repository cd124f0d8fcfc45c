//! Emoticon and emoji lexicon, and the scan that separates symbols from text.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::script::{is_emoji, is_emoji_modifier};
use crate::taxonomy::Category;

use super::language::{is_symbolic_chunk, language_letters};

const BUILTIN_LEXICON: &str = include_str!("../../data/emoticon_lexicon.json");

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconFile {
    emoticons: BTreeMap<String, Category>,
    emoji: BTreeMap<String, Category>,
}

/// Emoticon strings and emoji codepoints mapped to categories.
#[derive(Debug, Clone)]
pub struct SymbolLexicon {
    /// Longest first, so `>:(` wins over `:(`.
    emoticons: Vec<(Vec<char>, Category)>,
    emoji: HashMap<char, Category>,
}

/// Result of separating symbols from the words of a message.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolScan {
    /// The text with emoji and lexicon emoticons replaced by spaces.
    pub residual: String,
    /// One entry per matched lexicon symbol.
    pub votes: Vec<Category>,
    /// Emoji, emoticons and symbolic chunks found, matched or not.
    pub symbol_count: usize,
    /// Letters left in the residual outside symbolic chunks.
    pub has_letters: bool,
}

impl SymbolScan {
    /// True when the message is made of symbols alone.
    pub fn is_symbol_only(&self) -> bool {
        self.symbol_count > 0 && !self.has_letters
    }

    /// Most frequent voted category, earlier categories winning ties.
    pub fn majority(&self) -> Option<Category> {
        let counts = self.vote_counts();
        let best = counts.iter().copied().max()?;
        (best > 0).then(|| Category::ALL[counts.iter().position(|&n| n == best).expect("max is present")])
    }

    pub fn vote_counts(&self) -> [usize; 7] {
        let mut counts = [0usize; 7];
        for c in &self.votes {
            counts[c.index()] += 1;
        }
        counts
    }
}

impl SymbolLexicon {
    pub fn new(emoticons: BTreeMap<String, Category>, emoji: BTreeMap<String, Category>) -> Result<Self> {
        let mut list = Vec::with_capacity(emoticons.len());
        for (e, c) in emoticons {
            if e.is_empty() || e.chars().any(char::is_whitespace) {
                return Err(Error::Schema(format!("emoticon {e:?} must be non-empty without whitespace")));
            }
            list.push((e.chars().collect::<Vec<_>>(), c));
        }
        list.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        let mut map = HashMap::with_capacity(emoji.len());
        for (hex, c) in emoji {
            let ch = u32::from_str_radix(hex.trim_start_matches("U+"), 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| Error::Schema(format!("emoji key {hex:?} is not a codepoint in hex")))?;
            map.insert(ch, c);
        }
        Ok(SymbolLexicon {
            emoticons: list,
            emoji: map,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: LexiconFile = serde_json::from_str(json).map_err(|e| Error::Schema(format!("emoticon lexicon: {e}")))?;
        Self::new(file.emoticons, file.emoji)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&json)
    }

    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_LEXICON).expect("built-in lexicon is valid")
    }

    pub fn emoji_category(&self, c: char) -> Option<Category> {
        self.emoji.get(&c).copied()
    }

    /// Emoticon starting at `chars[i]`. Emoticons that begin or end with an
    /// alphanumeric character must not touch another alphanumeric one, so
    /// `XD` is found in `lol XD` but not in `XDR`.
    fn emoticon_at(&self, chars: &[char], i: usize) -> Option<(usize, Category)> {
        self.emoticons.iter().find_map(|(e, c)| {
            let end = i + e.len();
            if end > chars.len() || chars[i..end] != e[..] {
                return None;
            }
            let first_ok = !e[0].is_alphanumeric() || i == 0 || !chars[i - 1].is_alphanumeric();
            let last_ok = !e[e.len() - 1].is_alphanumeric() || end == chars.len() || !chars[end].is_alphanumeric();
            (first_ok && last_ok).then_some((e.len(), *c))
        })
    }

    pub fn scan(&self, text: &str) -> SymbolScan {
        let chars: Vec<char> = text.chars().collect();
        let mut residual = String::with_capacity(text.len());
        let mut votes = Vec::new();
        let mut symbol_count = 0;
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if is_emoji(c) {
                if !is_emoji_modifier(c) {
                    symbol_count += 1;
                    votes.extend(self.emoji_category(c));
                }
                residual.push(' ');
                i += 1;
            } else if let Some((len, category)) = self.emoticon_at(&chars, i) {
                symbol_count += 1;
                votes.push(category);
                residual.push(' ');
                i += len;
            } else {
                residual.push(c);
                i += 1;
            }
        }
        symbol_count += residual.split_whitespace().filter(|w| is_symbolic_chunk(w)).count();
        let has_letters = language_letters(&residual).next().is_some();
        SymbolScan {
            residual,
            votes,
            symbol_count,
            has_letters,
        }
    }
}

impl Default for SymbolLexicon {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emoji_hit() {
        let s = SymbolLexicon::builtin().scan("😀");
        assert_eq!(s.votes, [Category::Joy]);
        assert!(s.is_symbol_only());
        assert_eq!(s.majority(), Some(Category::Joy));
    }

    #[test]
    fn smugshrug_is_symbol_only_without_votes() {
        let s = SymbolLexicon::builtin().scan("¯\\_(ツ)_/¯");
        assert!(s.votes.is_empty());
        assert!(s.is_symbol_only());
        assert_eq!(s.majority(), None);
    }

    #[test]
    fn mixed_text_keeps_words() {
        let s = SymbolLexicon::builtin().scan("great 😀");
        assert!(!s.is_symbol_only());
        assert_eq!(s.residual.trim(), "great");
    }

    #[test]
    fn longest_emoticon_wins_and_boundaries_hold() {
        let lex = SymbolLexicon::builtin();
        assert_eq!(lex.scan(">:(").votes, [Category::Anger]);
        assert_eq!(lex.scan("lol XD").votes, [Category::Joy]);
        assert!(lex.scan("XDR").votes.is_empty());
        assert!(lex.scan("pizzzza").votes.is_empty());
        assert_eq!(lex.scan("ok:)").votes, [Category::Joy]);
    }

    #[test]
    fn modifiers_are_not_separate_symbols() {
        let s = SymbolLexicon::builtin().scan("\u{2764}\u{FE0F}");
        assert_eq!(s.symbol_count, 1);
        assert_eq!(s.votes, [Category::Joy]);
    }

    #[test]
    fn majority_ties_follow_category_order() {
        let s = SymbolLexicon::builtin().scan(":( :) 😭 😀");
        assert_eq!(s.vote_counts()[Category::Joy.index()], 2);
        assert_eq!(s.majority(), Some(Category::Joy));
    }

    #[test]
    fn bad_lexicon_rejected() {
        assert!(SymbolLexicon::from_json(r#"{"emoticons": {"a b": "Joy"}, "emoji": {}}"#).is_err());
        assert!(SymbolLexicon::from_json(r#"{"emoticons": {}, "emoji": {"ZZZZ": "Joy"}}"#).is_err());
        assert!(SymbolLexicon::from_json(r#"{"emoticons": {}, "emoji": {"1F600": "Bliss"}}"#).is_err());
    }

    #[test]
    fn plain_text_has_no_symbols() {
        let s = SymbolLexicon::builtin().scan("");
        assert_eq!(s.symbol_count, 0);
        assert!(!s.is_symbol_only());
    }
}
