use std::collections::{BTreeMap, BTreeSet, HashMap};

use emocue_core::analytics::{
    corpus_stats, familiarity, segment_sessions, ChatLog, FamiliarityBand, FamiliarityOptions, LogEntry, Session,
};
use emocue_core::{Annotation, Category, ColorMap, CompactScores, FeedbackTier, Message};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn msg(id: usize, conv: &str, sender: &str, ts: i64, group: bool) -> Message {
    Message {
        id: format!("m{id}"),
        conversation_id: conv.into(),
        sender_id: sender.into(),
        sender_name: sender.to_uppercase(),
        timestamp: ts,
        text: String::new(),
        is_group: group,
        conversation_name: None,
    }
}

fn random_stream(rng: &mut ChaCha8Rng, n: usize, conversations: usize) -> Vec<Message> {
    (0..n)
        .map(|i| {
            let conv = format!("c{}", rng.random_range(0..conversations));
            // gaps cluster around the 5-minute timeout, exact hits included
            let ts = rng.random_range(1..4_000i64) * 150_000 + rng.random_range(0..3) * 50_000;
            msg(i, &conv, "u", ts, false)
        })
        .collect()
}

/// Two messages share a session iff no gap between consecutive messages
/// of their conversation, anywhere between them, exceeds the timeout.
fn same_session_oracle(sorted: &[&Message], i: usize, j: usize, timeout: i64) -> bool {
    let (lo, hi) = (i.min(j), i.max(j));
    (lo..hi).all(|k| sorted[k + 1].timestamp - sorted[k].timestamp <= timeout)
}

fn check_against_oracle(messages: &[Message], timeout: i64) {
    let sessions = segment_sessions(messages, timeout);
    let session_of: HashMap<&str, usize> = sessions
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.message_ids.iter().map(move |id| (id.as_str(), k)))
        .collect();
    assert_eq!(session_of.len(), messages.len(), "every message in exactly one session");
    let mut by_conv: BTreeMap<&str, Vec<&Message>> = BTreeMap::new();
    for m in messages {
        by_conv.entry(&m.conversation_id).or_default().push(m);
    }
    for stream in by_conv.values_mut() {
        stream.sort_by_key(|m| m.timestamp);
        for i in 0..stream.len() {
            for j in i..stream.len() {
                let same = session_of[stream[i].id.as_str()] == session_of[stream[j].id.as_str()];
                assert_eq!(same, same_session_oracle(stream, i, j, timeout));
            }
        }
    }
}

fn check_properties(messages: &[Message], timeout: i64) -> Vec<Session> {
    let sessions = segment_sessions(messages, timeout);
    let ts: HashMap<&str, i64> = messages.iter().map(|m| (m.id.as_str(), m.timestamp)).collect();
    for s in &sessions {
        let times: Vec<i64> = s.message_ids.iter().map(|id| ts[id.as_str()]).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1] && w[1] - w[0] <= timeout));
        assert_eq!((s.start_ts, s.end_ts), (times[0], *times.last().unwrap()));
    }
    for pair in sessions.windows(2) {
        if pair[0].conversation_id == pair[1].conversation_id {
            assert!(pair[1].start_ts - pair[0].end_ts > timeout);
        }
    }
    // concatenated sessions reproduce each conversation's time-ordered sequence
    let mut by_conv: BTreeMap<&str, Vec<&Message>> = BTreeMap::new();
    for m in messages {
        by_conv.entry(&m.conversation_id).or_default().push(m);
    }
    for (conv, stream) in by_conv.iter_mut() {
        stream.sort_by_key(|m| m.timestamp);
        let expected: Vec<&str> = stream.iter().map(|m| m.id.as_str()).collect();
        let got: Vec<&str> = sessions
            .iter()
            .filter(|s| s.conversation_id == *conv)
            .flat_map(|s| s.message_ids.iter().map(String::as_str))
            .collect();
        assert_eq!(got, expected);
    }
    sessions
}

#[test]
fn thousand_messages_match_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let messages = random_stream(&mut rng, 1000, 10);
    check_against_oracle(&messages, 300_000);
    check_properties(&messages, 300_000);
}

#[test]
fn timeout_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..50 {
        let messages = random_stream(&mut rng, 80, 3);
        let mut last = usize::MAX;
        for timeout in [0, 60_000, 150_000, 300_000, 450_000, 1_000_000] {
            let n = check_properties(&messages, timeout).len();
            assert!(n <= last);
            last = n;
        }
    }
}

fn annotation_for(id: &str, category: Category) -> Annotation {
    let mut compact = CompactScores([0.0; 7]);
    compact.set(category, 1.0);
    Annotation {
        message_id: id.into(),
        raw_scores: BTreeMap::new(),
        compact_scores: compact,
        category,
        color: ColorMap::default().hex(category).into(),
        confidence: 0.5,
        feedback_tier: FeedbackTier::Tentative,
        flags: BTreeSet::new(),
        segments: None,
        notice: None,
        unsmoothed_category: None,
    }
}

fn random_log(rng: &mut ChaCha8Rng, n: usize) -> ChatLog {
    let entries = random_stream(rng, n, 40)
        .into_iter()
        .map(|mut message| {
            message.is_group = message.conversation_id.len() % 2 == 0 && rng.random_bool(0.7);
            let annotation = rng
                .random_bool(0.8)
                .then(|| annotation_for(&message.id, Category::ALL[rng.random_range(0..7)]));
            LogEntry { message, annotation }
        })
        .collect();
    ChatLog {
        entries,
        skipped: rng.random_range(0..5),
    }
}

#[test]
fn stats_equal_a_second_pass_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    let log = random_log(&mut rng, 10_000);
    let stats = corpus_stats(&log, 300_000);

    let mut total = 0;
    let mut group = 0;
    let mut annotated = 0;
    let mut per_category: BTreeMap<Category, usize> = BTreeMap::new();
    for e in &log.entries {
        total += 1;
        group += usize::from(e.message.is_group);
        if let Some(a) = &e.annotation {
            annotated += 1;
            *per_category.entry(a.category).or_default() += 1;
        }
    }
    assert_eq!(stats.total_messages, total);
    assert_eq!(stats.group_messages, group);
    assert_eq!(stats.group_message_fraction, group as f64 / total as f64);
    assert_eq!(stats.annotated_messages, annotated);
    for c in Category::ALL {
        assert_eq!(stats.category_counts[&c], per_category.get(&c).copied().unwrap_or(0));
    }
    assert_eq!(stats.skipped_records, log.skipped);
}

#[test]
fn stats_are_additive_over_conversation_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let log = random_log(&mut rng, 2_000);
    let whole = corpus_stats(&log, 300_000);
    let (a, b): (Vec<LogEntry>, Vec<LogEntry>) =
        log.entries.iter().cloned().partition(|e| e.message.conversation_id.ends_with(['1', '3', '5']));
    let mut left = ChatLog::from_entries(a);
    left.skipped = log.skipped;
    let merged = corpus_stats(&left, 300_000).merge(&corpus_stats(&ChatLog::from_entries(b), 300_000));
    assert_eq!(merged, whole);
}

#[test]
fn familiarity_matches_pairwise_recount_and_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let users = ["ann", "bo", "cy", "di", "ed"];
    let mut messages = Vec::new();
    for c in 0..30 {
        let group = c % 4 == 0;
        let members: Vec<&str> = if group {
            users.to_vec()
        } else {
            let a = users[rng.random_range(0..5)];
            let b = users[rng.random_range(0..5)];
            vec![a, b]
        };
        for _ in 0..rng.random_range(1..40) {
            let sender = members[rng.random_range(0..members.len())];
            let id = messages.len();
            messages.push(msg(id, &format!("c{c}"), sender, rng.random_range(1..10_000_000), group));
        }
    }
    let log = ChatLog::from_messages(messages.clone());
    let opts = FamiliarityOptions::default();
    for a in users {
        for b in users {
            if a == b {
                continue;
            }
            // recount: conversations with no group message where both speak
            let mut expected = 0;
            for c in 0..30 {
                let conv: Vec<&Message> = messages.iter().filter(|m| m.conversation_id == format!("c{c}")).collect();
                let both = conv.iter().any(|m| m.sender_id == a) && conv.iter().any(|m| m.sender_id == b);
                if both && !conv.iter().any(|m| m.is_group) {
                    expected += conv.iter().filter(|m| m.sender_id == a || m.sender_id == b).count();
                }
            }
            let r = familiarity(&log, a, b, &opts);
            assert_eq!(r.message_count, expected, "{a}/{b}");
            assert_eq!(r, familiarity(&log, b, a, &opts));
            assert_eq!(r.band == FamiliarityBand::High, expected >= 100);
        }
    }
}
