//! Desk-scale synthetic data: word vectors, labeled posts in English and
//! Chinese, and the bundles trained on them.
//!
//! Every cue word of a fine label is placed near that label's direction
//! plus its category's direction, so averaged post vectors are linearly
//! separable by label. Everything is derived from one seed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classify::{train_bundle, LabeledCorpus, LabeledText, LinearModelBundle, TrainConfig};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::message::Message;
use crate::taxonomy::{Category, ColorMap, CompactionMap};
use crate::vectorize::{EmbeddingTable, Language, VectorFormat};

pub const FIXTURE_DIM: usize = 300;
pub const POSTS_PER_LABEL: usize = 50;
/// Training timestamp written into fixture bundles, so output is reproducible.
pub const FIXTURE_TRAINED_AT: i64 = 1_500_000_000_000;

pub const EN_EMBEDDINGS_FILE: &str = "embeddings_en.bin";
pub const ZH_EMBEDDINGS_FILE: &str = "embeddings_zh.bin";
pub const EN_BUNDLE_FILE: &str = "intro.bundle";
pub const ZH_BUNDLE_FILE: &str = "intro_zh.bundle";
pub const EN_CORPUS_FILE: &str = "corpus_en.jsonl";
pub const ZH_CORPUS_FILE: &str = "corpus_zh.jsonl";
pub const INTRO_SCRIPT_FILE: &str = "intro_script.jsonl";
pub const CHAT_LOG_FILE: &str = "chat_log.jsonl";
/// Size of the chat log written with the fixture.
pub const CHAT_LOG_MESSAGES: usize = 2_000;

/// Cue words per fine label: English words, then Chinese words.
const CUES: &[(&str, &[&str], &[&str])] = &[
    ("accomplished", &["accomplished", "achieved", "finished", "proud"], &["成就", "完成"]),
    ("aggravated", &["aggravated", "irritated", "ugh"], &["惱火", "氣人"]),
    ("amused", &["amused", "funny", "lol", "hilarious"], &["好笑", "搞笑"]),
    ("annoyed", &["annoyed", "annoying", "bothered"], &["煩躁", "討厭"]),
    ("anxious", &["anxious", "nervous", "worried"], &["焦慮", "緊張"]),
    ("awake", &["awake", "insomnia", "sleepless"], &["清醒", "失眠"]),
    ("blah", &["blah", "meh", "whatever"], &["普通", "隨便"]),
    ("blank", &["blank", "zoned", "numb"], &["空空", "發呆"]),
    ("bored", &["bored", "boring", "dull"], &["無聊", "乏味"]),
    ("bouncy", &["bouncy", "energetic", "lively"], &["活潑", "蹦跳"]),
    ("busy", &["busy", "working", "deadline"], &["忙碌", "加班"]),
    ("calm", &["calm", "peaceful", "relaxed"], &["平靜", "放鬆"]),
    ("cheerful", &["cheerful", "hi", "hello", "hey"], &["愉快", "你好"]),
    ("chipper", &["chipper", "perky", "sunny"], &["爽朗", "陽光"]),
    ("cold", &["cold", "freezing", "chilly"], &["好冷", "寒冷"]),
    ("confused", &["confused", "puzzled", "unsure"], &["困惑", "迷惘"]),
    ("contemplative", &["contemplative", "pondering", "reflecting"], &["沉思", "思考"]),
    ("content", &["content", "satisfied", "comfy"], &["滿足", "知足"]),
    ("crappy", &["crappy", "awful", "lousy"], &["糟糕", "很爛"]),
    ("crazy", &["crazy", "insane", "wild"], &["瘋狂", "抓狂"]),
    ("creative", &["creative", "drawing", "ideas"], &["創意", "畫畫"]),
    ("curious", &["curious", "wonder", "wondering"], &["好奇", "疑問"]),
    ("depressed", &["depressed", "hopeless", "gloomy"], &["憂鬱", "絕望"]),
    ("drained", &["drained", "worn", "spent"], &["虛脫", "耗盡"]),
    ("ecstatic", &["ecstatic", "thrilled", "amazing"], &["狂喜", "超棒"]),
    ("excited", &["excited", "cant", "wait"], &["興奮", "期待"]),
    ("exhausted", &["exhausted", "exhausting", "overworked"], &["累壞", "累死"]),
    ("frustrated", &["frustrated", "stuck", "useless"], &["挫折", "卡住"]),
    ("good", &["good", "great", "nice", "lunch"], &["很好", "午餐"]),
    ("happy", &["happy", "glad", "yay"], &["開心", "高興"]),
    ("hopeful", &["hopeful", "hope", "wish"], &["希望", "盼望"]),
    ("hungry", &["hungry", "starving", "snack"], &["好餓", "肚子"]),
    ("lonely", &["lonely", "alone", "miss"], &["孤單", "寂寞"]),
    ("loved", &["loved", "love", "hug"], &["被愛", "愛你"]),
    ("okay", &["okay", "ok", "alright"], &["還好", "可以"]),
    ("pissed off", &["pissed", "furious", "angry"], &["氣死", "憤怒"]),
    ("sad", &["sad", "cry", "crying", "unhappy"], &["難過", "傷心"]),
    ("sick", &["sick", "fever", "flu"], &["生病", "發燒"]),
    ("sleepy", &["sleepy", "sleep", "nap", "yawn"], &["想睡", "睏了"]),
    ("tired", &["tired", "weary", "fatigue"], &["疲倦", "好累"]),
];

const EN_FILLERS: &[&str] = &[
    "i", "feel", "today", "and", "all", "day", "just", "honestly", "been", "since", "this", "morning", "so", "right",
    "now", "my", "was", "kind", "of", "really", "with", "friends", "what", "a", "evening", "it", "is", "that", "we",
    "are", "how", "you", "to", "want", "grab", "together", "see", "later", "am", "the", "feeling", "something",
    "tomorrow", "at", "work", "home", "after", "class", "again", "very",
];

const ZH_FILLERS: &[&str] = &[
    "今天", "真的", "覺得", "我們", "一起", "現在", "有點", "整天", "朋友", "晚上", "非常", "因為", "什麼",
    "感覺", "已經", "時候", "腦袋", "明天", "工作", "回家",
];

const EN_TEMPLATES: &[&str] = &[
    "i feel {0} today",
    "{0} and {1} all day",
    "just {0} honestly",
    "been {0} since this morning",
    "so {0} right now",
    "my day was {0} and kind of {1}",
    "{0} {1} {0}",
    "really {0} with my friends",
    "what a {0} evening",
    "it is {0} that we are {1}",
    "how are you feeling, {0}?",
    "want to grab something {0} together",
    "see you later, {0} at work",
    "i am {0} after class again",
    "very {0} at home tomorrow",
];

const ZH_TEMPLATES: &[&str] = &[
    "今天{0}",
    "{0}，真的{1}",
    "覺得{0}",
    "我們一起{0}",
    "現在有點{0}",
    "整天{0}{1}",
    "朋友{0}",
    "晚上{0}，非常{1}",
    "因為{0}，什麼都{1}",
    "感覺已經{0}",
];

/// The messages of the greeting walkthrough: a greeting, a lunch
/// suggestion, then a tired message, in one direct conversation.
pub const INTRO_SCRIPT: &[(&str, &str)] = &[
    ("Hi, How are you?", "Joy"),
    ("Want to grab lunch together tomorrow?", "Joy"),
    ("I am so tired and sleepy today", "Tired"),
];

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn cues(language: Language) -> impl Iterator<Item = (&'static str, &'static [&'static str])> {
    CUES.iter().map(move |&(label, en, zh)| {
        (
            label,
            match language {
                Language::En => en,
                Language::Zh => zh,
            },
        )
    })
}

/// Word vectors for the cue words and fillers of one language.
pub fn synthetic_embeddings(seed: u64, language: Language, map: &CompactionMap) -> Result<EmbeddingTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ language_salt(language));
    let category_dirs: Vec<Vec<f64>> = Category::ALL.iter().map(|_| unit(&mut rng, FIXTURE_DIM)).collect();
    let mut entries = Vec::new();
    for (label, words) in cues(language) {
        let category = map
            .category_of(label)
            .ok_or_else(|| Error::Schema(format!("fixture label {label:?} is not in the compaction map")))?;
        let label_dir = unit(&mut rng, FIXTURE_DIM);
        for word in words {
            let noise = unit(&mut rng, FIXTURE_DIM);
            let v = (0..FIXTURE_DIM)
                .map(|k| (0.6 * category_dirs[category.index()][k] + label_dir[k] + 0.35 * noise[k]) as f32)
                .collect();
            entries.push((word.to_string(), v));
        }
    }
    let fillers = match language {
        Language::En => EN_FILLERS,
        Language::Zh => ZH_FILLERS,
    };
    for word in fillers {
        let noise = unit(&mut rng, FIXTURE_DIM);
        entries.push((word.to_string(), noise.iter().map(|x| (0.8 * x) as f32).collect()));
    }
    EmbeddingTable::new(FIXTURE_DIM, language, entries)
}

fn language_salt(language: Language) -> u64 {
    match language {
        Language::En => 0x656e,
        Language::Zh => 0x7a68,
    }
}

/// `POSTS_PER_LABEL` templated posts per fine label with seeded noise:
/// stray vocabulary words, out-of-vocabulary typos and varied punctuation.
pub fn synthetic_corpus(seed: u64, language: Language, map: &CompactionMap) -> Result<LabeledCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ language_salt(language) ^ 0xC0_4B05);
    let all_words: Vec<&str> = cues(language)
        .flat_map(|(_, w)| w.iter().copied())
        .chain(match language {
            Language::En => EN_FILLERS.iter().copied(),
            Language::Zh => ZH_FILLERS.iter().copied(),
        })
        .collect();
    let templates = match language {
        Language::En => EN_TEMPLATES,
        Language::Zh => ZH_TEMPLATES,
    };
    let mut records = Vec::with_capacity(CUES.len() * POSTS_PER_LABEL);
    for (label, words) in cues(language) {
        for _ in 0..POSTS_PER_LABEL {
            let template = templates.choose(&mut rng).expect("templates are non-empty");
            let a = words.choose(&mut rng).expect("every label has cue words");
            let b = words.choose(&mut rng).expect("every label has cue words");
            let mut text = template.replace("{0}", a).replace("{1}", b);
            let sep = if language == Language::En { " " } else { "" };
            if rng.random_bool(0.3) {
                let stray = all_words.choose(&mut rng).expect("vocabulary is non-empty");
                text = format!("{text}{sep}{stray}");
            }
            if language == Language::En {
                if rng.random_bool(0.2) {
                    text = format!("{text} {a}{}", ["x", "zz", "q"].choose(&mut rng).expect("non-empty"));
                }
                if rng.random_bool(0.3) {
                    let mut c = text.chars();
                    text = c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default();
                }
                text.push_str(["", "", "!", "?", "..."].choose(&mut rng).expect("non-empty"));
            } else {
                text.push_str(["", "。", "！", "？"].choose(&mut rng).expect("non-empty"));
            }
            records.push(LabeledText {
                text,
                label: label.to_string(),
            });
        }
    }
    LabeledCorpus::new(records, map)
}

/// Everything `make-fixture` produces.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub seed: u64,
    pub en_table: EmbeddingTable,
    pub zh_table: EmbeddingTable,
    pub en_corpus: LabeledCorpus,
    pub zh_corpus: LabeledCorpus,
    pub en_bundle: LinearModelBundle,
    pub zh_bundle: LinearModelBundle,
    pub en_report: EvalReport,
    pub zh_report: EvalReport,
}

pub fn fixture_train_config(seed: u64) -> TrainConfig {
    let mut config = TrainConfig {
        split_seed: seed,
        trained_at: FIXTURE_TRAINED_AT,
        ..Default::default()
    };
    config.sgd.seed = seed;
    config
}

pub fn make_fixture(seed: u64) -> Result<Fixture> {
    let map = CompactionMap::builtin();
    let config = fixture_train_config(seed);
    let build = |language: Language, hint: &str| -> Result<(EmbeddingTable, LabeledCorpus, LinearModelBundle, EvalReport)> {
        let table = synthetic_embeddings(seed, language, &map)?;
        let corpus = synthetic_corpus(seed, language, &map)?;
        let bundle = train_bundle(&corpus, &table, &map, &config)?.bundle.with_embeddings_hint(hint);
        let mut report = evaluate(&bundle, &table, &corpus, &map, config.split_seed, config.train_ratio)?;
        report.fixture_id = Some(format!("synthetic-{}-seed{seed}", language_tag(language)));
        Ok((table, corpus, bundle, report))
    };
    let (en_table, en_corpus, en_bundle, en_report) = build(Language::En, EN_EMBEDDINGS_FILE)?;
    let (zh_table, zh_corpus, zh_bundle, zh_report) = build(Language::Zh, ZH_EMBEDDINGS_FILE)?;
    Ok(Fixture {
        seed,
        en_table,
        zh_table,
        en_corpus,
        zh_corpus,
        en_bundle,
        zh_bundle,
        en_report,
        zh_report,
    })
}

fn language_tag(language: Language) -> &'static str {
    match language {
        Language::En => "en",
        Language::Zh => "zh",
    }
}

/// The walkthrough conversation as chat-log messages, one minute apart.
pub fn intro_script_messages() -> Vec<Message> {
    INTRO_SCRIPT
        .iter()
        .enumerate()
        .map(|(i, (text, _))| Message {
            id: format!("intro-{}", i + 1),
            conversation_id: "intro".into(),
            sender_id: "friend".into(),
            sender_name: "Friend".into(),
            timestamp: 1_500_000_000_000 + 60_000 * i as i64,
            text: (*text).into(),
            is_group: false,
            conversation_name: None,
        })
        .collect()
}

/// A chat log of `n` messages for replay and analytics runs: conversations
/// of 2 to 6 participants (roughly a fifth of them groups), gaps that
/// straddle the 5-minute session timeout, and texts drawn from the
/// synthetic corpora plus some emoji, blank and unsupported-language lines.
pub fn synthetic_chat_log(seed: u64, n: usize) -> Result<Vec<Message>> {
    let map = CompactionMap::builtin();
    let en = synthetic_corpus(seed, Language::En, &map)?;
    let zh = synthetic_corpus(seed, Language::Zh, &map)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10_6106);
    let users = (n / 20).max(6);
    let conversations: Vec<(Vec<usize>, bool)> = (0..(n / 50).max(1))
        .map(|_| {
            let group = rng.random_bool(0.22);
            let size = if group { rng.random_range(3..=6) } else { 2 };
            let members = rand::seq::index::sample(&mut rng, users, size).into_vec();
            (members, group)
        })
        .collect();
    let mut clocks = vec![1_500_000_000_000i64; conversations.len()];
    let mut messages = Vec::with_capacity(n);
    for i in 0..n {
        let c = rng.random_range(0..conversations.len());
        let (members, group) = &conversations[c];
        clocks[c] += match rng.random_range(0..100) {
            0..70 => rng.random_range(5_000..240_000),
            70..88 => rng.random_range(240_000..360_000),
            88..90 => 300_000,
            _ => rng.random_range(600_000..10_800_000),
        };
        let sender = members[rng.random_range(0..members.len())];
        let text = match rng.random_range(0..100) {
            0..80 => en.records()[rng.random_range(0..en.len())].text.clone(),
            80..90 => zh.records()[rng.random_range(0..zh.len())].text.clone(),
            90..95 => ["😀", "😢 😢", ":)", "😡", "😴 zzz", "¯\\_(ツ)_/¯"][rng.random_range(0..6)].to_string(),
            95..98 => ["Привет, как дела?", "Γεια σου", "こんにちは"][rng.random_range(0..3)].to_string(),
            _ => String::new(),
        };
        messages.push(Message {
            id: format!("log-{i}"),
            conversation_id: format!("conv-{c}"),
            sender_id: format!("user-{sender}"),
            sender_name: format!("User {sender}"),
            timestamp: clocks[c],
            text,
            is_group: *group,
            conversation_name: group.then(|| format!("Group {c}")),
        });
    }
    messages.sort_by_key(|m| m.timestamp);
    Ok(messages)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::file(path, e))
}

impl Fixture {
    /// Writes every fixture file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        self.en_table.save(&dir.join(EN_EMBEDDINGS_FILE), VectorFormat::Binary)?;
        self.zh_table.save(&dir.join(ZH_EMBEDDINGS_FILE), VectorFormat::Binary)?;
        self.en_corpus.save(&dir.join(EN_CORPUS_FILE))?;
        self.zh_corpus.save(&dir.join(ZH_CORPUS_FILE))?;
        self.en_bundle.save(&dir.join(EN_BUNDLE_FILE))?;
        self.zh_bundle.save(&dir.join(ZH_BUNDLE_FILE))?;
        write_json(&dir.join("eval_en.json"), &self.en_report)?;
        write_json(&dir.join("eval_zh.json"), &self.zh_report)?;
        let map = CompactionMap::builtin();
        fs::write(dir.join("compaction_map.json"), map.to_json()).map_err(|e| Error::file(dir, e))?;
        fs::write(dir.join("color_map.json"), ColorMap::default().to_json()).map_err(|e| Error::file(dir, e))?;
        let mut script = String::new();
        for m in intro_script_messages() {
            script.push_str(&serde_json::to_string(&m)?);
            script.push('\n');
        }
        fs::write(dir.join(INTRO_SCRIPT_FILE), script).map_err(|e| Error::file(dir, e))?;
        let mut log = String::new();
        for m in synthetic_chat_log(self.seed, CHAT_LOG_MESSAGES)? {
            log.push_str(&serde_json::to_string(&m)?);
            log.push('\n');
        }
        fs::write(dir.join(CHAT_LOG_FILE), log).map_err(|e| Error::file(dir, e))?;
        let checksums: BTreeMap<&str, String> = [
            (EN_BUNDLE_FILE, self.en_bundle.checksum()),
            (ZH_BUNDLE_FILE, self.zh_bundle.checksum()),
            (EN_EMBEDDINGS_FILE, self.en_table.checksum()),
            (ZH_EMBEDDINGS_FILE, self.zh_table.checksum()),
        ]
        .into_iter()
        .collect();
        write_json(&dir.join("checksums.json"), &checksums)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cue_table_covers_every_label_once() {
        let map = CompactionMap::builtin();
        let labels: Vec<&str> = CUES.iter().map(|c| c.0).collect();
        let expected: Vec<&str> = map.labels().iter().map(String::as_str).collect();
        assert_eq!(labels, expected);
    }

    #[test]
    fn corpus_has_fifty_posts_per_label() {
        let map = CompactionMap::builtin();
        for language in [Language::En, Language::Zh] {
            let c = synthetic_corpus(7, language, &map).unwrap();
            assert!(c.counts().values().all(|&n| n == POSTS_PER_LABEL));
            assert_eq!(c.len(), 40 * POSTS_PER_LABEL);
        }
    }

    #[test]
    fn embeddings_are_seeded() {
        let map = CompactionMap::builtin();
        let a = synthetic_embeddings(7, Language::En, &map).unwrap();
        let b = synthetic_embeddings(7, Language::En, &map).unwrap();
        let c = synthetic_embeddings(8, Language::En, &map).unwrap();
        assert_eq!(a.checksum(), b.checksum());
        assert_ne!(a.checksum(), c.checksum());
        assert_eq!(a.dim(), FIXTURE_DIM);
    }

    #[test]
    fn chat_log_is_seeded_and_valid() {
        let a = synthetic_chat_log(3, 1_000).unwrap();
        assert_eq!(a, synthetic_chat_log(3, 1_000).unwrap());
        assert_eq!(a.len(), 1_000);
        assert!(a.iter().all(|m| m.validate().is_ok()));
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        let groups = a.iter().filter(|m| m.is_group).count();
        assert!(groups > 0 && groups < a.len());
        assert!(a.iter().filter(|m| m.is_group).all(|m| m.conversation_name.is_some()));
    }
}
