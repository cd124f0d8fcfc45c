#![allow(dead_code)]

use std::path::Path;
use std::sync::OnceLock;

use emocue_core::fixture::{make_fixture, Fixture};
use emocue_core::pipeline::SymbolLexicon;
use emocue_core::{Annotator, ColorMap, CompactionMap, Message, PipelineConfig};
use emocue_service::{Engine, ServerFrame, Subscription};

pub fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| make_fixture(7).unwrap())
}

pub fn annotator_with(config: PipelineConfig) -> Annotator {
    let f = fixture();
    Annotator::new(config, CompactionMap::builtin(), ColorMap::default(), SymbolLexicon::builtin())
        .unwrap()
        .with_language(f.en_table.clone(), f.en_bundle.clone())
        .unwrap()
        .with_language(f.zh_table.clone(), f.zh_bundle.clone())
        .unwrap()
}

pub fn annotator() -> Annotator {
    annotator_with(PipelineConfig::default())
}

pub fn engine() -> Engine {
    Engine::in_memory(annotator())
}

pub fn msg(id: &str, conv: &str, sender: &str, ts: i64, text: &str, group: bool) -> Message {
    Message {
        id: id.into(),
        conversation_id: conv.into(),
        sender_id: sender.into(),
        sender_name: sender.to_uppercase(),
        timestamp: ts,
        text: text.into(),
        is_group: group,
        conversation_name: group.then(|| format!("{conv} group")),
    }
}

pub fn write_log(path: &Path, messages: &[Message]) {
    let mut out = String::new();
    for m in messages {
        out.push_str(&serde_json::to_string(m).unwrap());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

/// Frames already queued for a subscriber.
pub fn drain(sub: &mut Subscription) -> Vec<ServerFrame> {
    let mut out = Vec::new();
    while let Ok(text) = sub.frames.try_recv() {
        out.push(serde_json::from_str(&text).unwrap());
    }
    out
}

/// The scripted three-sender group conversation: emoji-only texts, so the
/// categories follow from the lexicon alone, with two late arrivals and
/// one timestamp tie.
pub const GROUP_SCRIPT: [(&str, i64, &str); 12] = [
    ("ann", 1_000, "😀"),
    ("bo", 2_000, "😢"),
    ("cy", 3_000, "😡"),
    ("ann", 4_000, "😴"),
    ("bo", 5_000, "😀"),
    ("cy", 3_500, "😱"),
    ("ann", 6_000, "🤔"),
    ("bo", 2_500, "😡"),
    ("cy", 7_000, "😢"),
    ("ann", 7_000, "😀"),
    ("bo", 8_000, "😐"),
    ("cy", 9_000, "Привет"),
];

pub fn group_script() -> Vec<Message> {
    GROUP_SCRIPT
        .iter()
        .enumerate()
        .map(|(i, (sender, ts, text))| msg(&format!("g{}", i + 1), "trip", sender, *ts, text, true))
        .collect()
}
