//! Plain-text renderings for terminals.

use std::fmt::Write;

use emocue_core::analytics::{CorpusStats, FamiliarityReport, Session};
use emocue_core::eval::EvalReport;
use emocue_core::Annotation;
use emocue_service::ReplaySummary;

pub fn annotation(a: &Annotation) -> String {
    let mut s = format!(
        "{} {} confidence {:.3} {:?}",
        a.category, a.color, a.confidence, a.feedback_tier
    );
    if !a.flags.is_empty() {
        let flags: Vec<String> = a.flags.iter().map(|f| format!("{f:?}")).collect();
        write!(s, " [{}]", flags.join(", ")).unwrap();
    }
    if let Some(notice) = &a.notice {
        write!(s, " {notice}").unwrap();
    }
    s.push('\n');
    s
}

pub fn eval(r: &EvalReport) -> String {
    let mut s = format!(
        "macro AUC {:.4} over {} labels (seed {}, {} train / {} test)\n",
        r.macro_auc,
        r.per_label_auc.len(),
        r.split.seed,
        r.split.train_size,
        r.split.test_size
    );
    for (label, auc) in &r.per_label_auc {
        writeln!(s, "  {label:<14} {auc:.4}").unwrap();
    }
    writeln!(s, "category       precision  recall  support").unwrap();
    for (c, m) in &r.per_category {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        writeln!(s, "  {:<12} {:>9} {:>7} {:>8}", c.name(), fmt(m.precision), fmt(m.recall), m.support).unwrap();
    }
    s
}

pub fn sessions(sessions: &[Session]) -> String {
    let mut s = format!("{} sessions\n", sessions.len());
    for x in sessions {
        let who = x.sender_id.as_deref().map(|id| format!(" {id}")).unwrap_or_default();
        writeln!(
            s,
            "  {}{} {}..{} {} messages",
            x.conversation_id,
            who,
            x.start_ts,
            x.end_ts,
            x.message_ids.len()
        )
        .unwrap();
    }
    s
}

pub fn stats(st: &CorpusStats) -> String {
    let mut s = String::new();
    writeln!(s, "messages            {}", st.total_messages).unwrap();
    writeln!(s, "sessions            {}", st.total_sessions).unwrap();
    writeln!(
        s,
        "group messages      {} ({:.2}%)",
        st.group_messages,
        100.0 * st.group_message_fraction
    )
    .unwrap();
    writeln!(s, "annotated           {}", st.annotated_messages).unwrap();
    writeln!(s, "skipped records     {}", st.skipped_records).unwrap();
    for (c, n) in &st.category_counts {
        writeln!(s, "  {:<16}  {n}", c.name()).unwrap();
    }
    s
}

pub fn familiarity(reports: &[FamiliarityReport]) -> String {
    let mut s = String::new();
    for r in reports {
        writeln!(
            s,
            "{} / {}: {} messages, {} sessions, {:?}",
            r.pair.0, r.pair.1, r.message_count, r.session_count, r.band
        )
        .unwrap();
    }
    if reports.is_empty() {
        s.push_str("no eligible pairs\n");
    }
    s
}

pub fn replay(r: &ReplaySummary) -> String {
    let mut s = stats(&r.stats);
    writeln!(
        s,
        "ingested {}, duplicates {}, failed {}, skipped {}",
        r.ingested, r.duplicates, r.failed, r.skipped_count
    )
    .unwrap();
    writeln!(
        s,
        "annotation latency p50 {:.3} ms, p95 {:.3} ms; wall {:.0} ms",
        r.latency_p50_ms, r.latency_p95_ms, r.wall_ms
    )
    .unwrap();
    s
}
