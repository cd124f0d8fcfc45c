use crate::script::is_han;

use super::Language;

/// Splits text into lookup tokens.
///
/// English text is lowercased, split on whitespace, and stripped of
/// leading and trailing non-alphanumeric characters (internal apostrophes
/// survive). Chinese text yields overlapping character bigrams over each
/// run of Han characters; a run of length one yields the single character.
pub fn tokenize(text: &str, language: Language) -> Vec<String> {
    match language {
        Language::En => tokenize_en(text),
        Language::Zh => tokenize_zh(text),
    }
}

fn tokenize_en(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .map(str::to_owned)
        .collect()
}

fn tokenize_zh(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut run: Vec<char> = Vec::new();
    let mut flush = |run: &mut Vec<char>| {
        match run.len() {
            0 => {}
            1 => tokens.push(run[0].to_string()),
            _ => tokens.extend(run.windows(2).map(|w| w.iter().collect::<String>())),
        }
        run.clear();
    };
    for c in text.chars() {
        if is_han(c) {
            run.push(c);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn english_rules() {
        assert_eq!(tokenize("Hi, How are you?", Language::En), ["hi", "how", "are", "you"]);
        assert_eq!(tokenize("", Language::En), Vec::<String>::new());
        assert_eq!(
            tokenize("'I'm still jetlagged, haha...'", Language::En),
            ["i'm", "still", "jetlagged", "haha"]
        );
        assert_eq!(tokenize("  ... !!  ", Language::En), Vec::<String>::new());
    }

    #[test]
    fn chinese_rules() {
        assert_eq!(tokenize("好的", Language::Zh), ["好的"]);
        assert_eq!(tokenize("整天腦袋", Language::Zh), ["整天", "天腦", "腦袋"]);
        assert_eq!(tokenize("好!那", Language::Zh), ["好", "那"]);
        assert_eq!(tokenize("abc", Language::Zh), Vec::<String>::new());
    }

    proptest! {
        #[test]
        fn english_tokenize_is_idempotent(text in "\\PC{0,60}") {
            let once = tokenize(&text, Language::En);
            let twice = tokenize(&once.join(" "), Language::En);
            prop_assert_eq!(once, twice);
        }
    }
}
