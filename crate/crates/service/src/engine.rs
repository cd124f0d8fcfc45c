//! The ingest path shared by HTTP, the stream endpoint and replay:
//! annotate, update cue state, persist, broadcast.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant};

use emocue_core::analytics::{corpus_stats, ChatLog, CorpusStats, LogEntry};
use emocue_core::pipeline::ConversationSessions;
use emocue_core::{Annotation, Annotator, Category, Message};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};

use crate::error::{Result, ServiceError};
use crate::persist::LogWriter;
use crate::wire::{ConversationCueState, Cue, NotificationPayload, ServerFrame};

/// Reply to an ingest request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ingested {
    pub annotation: Annotation,
    pub payload: NotificationPayload,
    /// Set when the message id had already been ingested; nothing changed.
    pub duplicate: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplaySpeed {
    #[default]
    Max,
    /// Replays timestamp gaps divided by this factor.
    RealtimeFactor(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRequest {
    pub path: PathBuf,
    #[serde(default)]
    pub speed: ReplaySpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    /// Statistics of the replayed messages with the annotations they got.
    pub stats: CorpusStats,
    pub ingested: usize,
    pub duplicates: usize,
    pub failed: usize,
    pub skipped_count: usize,
    pub annotation_counts: BTreeMap<Category, usize>,
    /// Per-message annotation latency, pipeline only.
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
    /// Per-message latency of the whole ingest path.
    pub ingest_p95_ms: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub languages: Vec<String>,
    pub conversations: usize,
    pub messages: usize,
    pub recovered: usize,
    pub log_path: Option<PathBuf>,
}

struct Conversation {
    sessions: ConversationSessions,
    cue: Option<ConversationCueState>,
}

struct Subscriber {
    id: u64,
    user: Option<String>,
    tx: UnboundedSender<Arc<str>>,
}

/// A live stream of serialized [`ServerFrame`]s.
pub struct Subscription {
    pub id: u64,
    pub frames: UnboundedReceiver<Arc<str>>,
}

pub struct Engine {
    annotator: Arc<Annotator>,
    conversations: RwLock<HashMap<String, Arc<Mutex<Conversation>>>>,
    seen: Mutex<HashMap<String, Ingested>>,
    log: Option<Mutex<LogWriter>>,
    subscribers: Mutex<Vec<Subscriber>>,
    next_subscriber: AtomicU64,
    recovered: usize,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn millis(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

/// Nearest-rank percentile of an ascending slice; 0 when empty.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

impl Engine {
    /// An engine that keeps everything in memory.
    pub fn in_memory(annotator: Annotator) -> Self {
        Engine {
            annotator: Arc::new(annotator),
            conversations: RwLock::default(),
            seen: Mutex::default(),
            log: None,
            subscribers: Mutex::default(),
            next_subscriber: AtomicU64::new(1),
            recovered: 0,
        }
    }

    /// An engine persisting to `log_path`. Records already in the log are
    /// folded back in: their stored annotations restore cue state and
    /// duplicate detection, and the messages are re-run through the
    /// pipeline to rebuild sender smoothing state.
    pub fn open(annotator: Annotator, log_path: &Path) -> Result<Self> {
        let (writer, existing) = LogWriter::open(log_path)?;
        let mut engine = Engine::in_memory(annotator);
        engine.log = Some(Mutex::new(writer));
        engine.recovered = engine.restore(existing);
        if engine.recovered > 0 {
            tracing::info!(records = engine.recovered, path = %log_path.display(), "recovered annotated log");
        }
        Ok(engine)
    }

    fn restore(&self, log: ChatLog) -> usize {
        let smoothed = self.annotator.config().smooth_notifications;
        let mut restored = 0;
        for LogEntry { message, annotation } in log.entries {
            let Some(annotation) = annotation else { continue };
            if lock(&self.seen).contains_key(&message.id) {
                continue;
            }
            let slot = self.conversation(&message.conversation_id);
            let mut conv = lock(&slot);
            let _ = self.annotator.annotate(&message, &mut conv.sessions);
            self.record_cue(&mut conv, &message, &annotation);
            let payload = NotificationPayload::new(&message, &annotation, self.annotator.colors(), smoothed);
            lock(&self.seen).insert(
                message.id.clone(),
                Ingested {
                    annotation,
                    payload,
                    duplicate: false,
                },
            );
            restored += 1;
        }
        restored
    }

    pub fn annotator(&self) -> &Annotator {
        &self.annotator
    }

    fn conversation(&self, id: &str) -> Arc<Mutex<Conversation>> {
        if let Some(c) = self.conversations.read().unwrap_or_else(|e| e.into_inner()).get(id) {
            return c.clone();
        }
        self.conversations
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .entry(id.to_string())
            .or_insert_with(|| {
                Arc::new(Mutex::new(Conversation {
                    sessions: ConversationSessions::new(id),
                    cue: None,
                }))
            })
            .clone()
    }

    fn record_cue(&self, conv: &mut Conversation, message: &Message, annotation: &Annotation) {
        let cue = Cue::of(message, annotation, self.annotator.colors());
        match &mut conv.cue {
            Some(state) => state.apply(&message.sender_id, cue),
            None => conv.cue = Some(ConversationCueState::new(&message.conversation_id, &message.sender_id, cue)),
        }
    }

    pub fn ingest(&self, message: Message) -> Result<Ingested> {
        self.ingest_timed(message).map(|(i, _)| i)
    }

    /// Like [`Engine::ingest`], also returning the time spent in the
    /// pipeline (`None` for duplicates).
    pub fn ingest_timed(&self, message: Message) -> Result<(Ingested, Option<Duration>)> {
        message.validate().map_err(|e| ServiceError::Invalid(e.to_string()))?;
        if let Some(stored) = self.stored(&message.id) {
            return Ok((stored, None));
        }
        let slot = self.conversation(&message.conversation_id);
        let mut conv = lock(&slot);
        // a concurrent request for the same conversation may have won
        if let Some(stored) = self.stored(&message.id) {
            return Ok((stored, None));
        }

        let before = conv.sessions.clone();
        let started = Instant::now();
        let annotated = self.annotator.annotate(&message, &mut conv.sessions);
        let elapsed = started.elapsed();
        let annotation = match annotated {
            Ok(a) => a,
            Err(e) => {
                conv.sessions = before;
                return Err(e.into());
            }
        };
        let entry = LogEntry {
            message,
            annotation: Some(annotation),
        };
        if let Some(log) = &self.log {
            if let Err(e) = lock(log).append(&entry) {
                conv.sessions = before;
                return Err(e);
            }
        }
        let LogEntry { message, annotation } = entry;
        let annotation = annotation.expect("set above");

        self.record_cue(&mut conv, &message, &annotation);
        let payload = NotificationPayload::new(
            &message,
            &annotation,
            self.annotator.colors(),
            self.annotator.config().smooth_notifications,
        );
        let ingested = Ingested {
            annotation,
            payload,
            duplicate: false,
        };
        lock(&self.seen).insert(message.id.clone(), ingested.clone());
        let state = conv.cue.as_ref().expect("recorded above");
        self.broadcast(&message.sender_id, &ingested.payload, state);
        Ok((ingested, Some(elapsed)))
    }

    fn stored(&self, id: &str) -> Option<Ingested> {
        lock(&self.seen).get(id).map(|s| Ingested {
            duplicate: true,
            ..s.clone()
        })
    }

    fn broadcast(&self, sender_id: &str, payload: &NotificationPayload, state: &ConversationCueState) {
        let mut subs = lock(&self.subscribers);
        if subs.is_empty() {
            return;
        }
        let notification: Arc<str> = to_json(&ServerFrame::Notification {
            payload: payload.clone(),
        });
        let update: Arc<str> = to_json(&ServerFrame::cue_update(state));
        subs.retain(|s| {
            // no affective feedback on one's own messages
            let own = s.user.as_deref() == Some(sender_id);
            (own || s.tx.send(notification.clone()).is_ok()) && s.tx.send(update.clone()).is_ok()
        });
    }

    /// Registers a stream subscriber. `user` identifies the subscriber's
    /// own messages, which produce no notification frame for them.
    pub fn subscribe(&self, user: Option<String>) -> Subscription {
        let id = self.next_subscriber.fetch_add(1, Ordering::Relaxed);
        let (tx, frames) = unbounded_channel();
        lock(&self.subscribers).push(Subscriber { id, user, tx });
        Subscription { id, frames }
    }

    pub fn unsubscribe(&self, id: u64) {
        lock(&self.subscribers).retain(|s| s.id != id);
    }

    pub fn subscriber_count(&self) -> usize {
        lock(&self.subscribers).len()
    }

    pub fn state(&self, conversation_id: &str) -> Result<ConversationCueState> {
        let slot = self
            .conversations
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(conversation_id)
            .cloned();
        slot.and_then(|s| lock(&s).cue.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("conversation {conversation_id:?}")))
    }

    pub fn conversation_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .conversations
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .iter()
            .filter(|(_, c)| lock(c).cue.is_some())
            .map(|(id, _)| id.clone())
            .collect();
        ids.sort();
        ids
    }

    pub fn health(&self) -> Health {
        let languages = [("en", emocue_core::vectorize::Language::En), ("zh", emocue_core::vectorize::Language::Zh)]
            .into_iter()
            .filter(|(_, l)| self.annotator.has_language(*l))
            .map(|(n, _)| n.to_string())
            .collect();
        Health {
            status: "ok".into(),
            languages,
            conversations: self.conversation_ids().len(),
            messages: lock(&self.seen).len(),
            recovered: self.recovered,
            log_path: self.log.as_ref().map(|l| lock(l).path().to_path_buf()),
        }
    }

    /// Feeds a log through [`Engine::ingest`] in timestamp order.
    pub fn replay(&self, path: &Path, speed: ReplaySpeed) -> Result<ReplaySummary> {
        let log = ChatLog::load(path)?;
        self.replay_log(log, speed)
    }

    pub fn replay_log(&self, log: ChatLog, speed: ReplaySpeed) -> Result<ReplaySummary> {
        if let ReplaySpeed::RealtimeFactor(f) = speed {
            if !(f.is_finite() && f > 0.0) {
                return Err(ServiceError::Invalid(format!("realtime factor must be positive, got {f}")));
            }
        }
        let started = Instant::now();
        let mut messages: Vec<Message> = log.entries.into_iter().map(|e| e.message).collect();
        messages.sort_by_key(|m| m.timestamp);

        let mut entries = Vec::with_capacity(messages.len());
        let (mut ingested, mut duplicates, mut failed) = (0, 0, 0);
        let mut annotate_ms = Vec::with_capacity(messages.len());
        let mut ingest_ms = Vec::with_capacity(messages.len());
        let mut previous_ts: Option<i64> = None;
        for message in messages {
            if let (ReplaySpeed::RealtimeFactor(f), Some(prev)) = (speed, previous_ts) {
                let gap = (message.timestamp - prev).max(0) as f64 / f;
                std::thread::sleep(Duration::from_secs_f64(gap / 1000.0));
            }
            previous_ts = Some(message.timestamp);
            let t = Instant::now();
            match self.ingest_timed(message.clone()) {
                Ok((result, pipeline)) => {
                    ingest_ms.push(millis(t.elapsed()));
                    match pipeline {
                        Some(d) => {
                            annotate_ms.push(millis(d));
                            ingested += 1;
                        }
                        None => duplicates += 1,
                    }
                    entries.push(LogEntry {
                        message,
                        annotation: Some(result.annotation),
                    });
                }
                Err(e) => {
                    tracing::warn!(id = %message.id, error = %e, "replay record failed");
                    failed += 1;
                    entries.push(LogEntry {
                        message,
                        annotation: None,
                    });
                }
            }
        }
        let mut replayed = ChatLog::from_entries(entries);
        replayed.skipped = log.skipped;
        let stats = corpus_stats(&replayed, self.annotator.config().session_timeout_ms);
        annotate_ms.sort_by(f64::total_cmp);
        ingest_ms.sort_by(f64::total_cmp);
        Ok(ReplaySummary {
            annotation_counts: stats.category_counts.clone(),
            stats,
            ingested,
            duplicates,
            failed,
            skipped_count: log.skipped,
            latency_p50_ms: percentile(&annotate_ms, 0.5),
            latency_p95_ms: percentile(&annotate_ms, 0.95),
            ingest_p95_ms: percentile(&ingest_ms, 0.95),
            wall_ms: millis(started.elapsed()),
        })
    }
}

fn to_json(frame: &ServerFrame) -> Arc<str> {
    serde_json::to_string(frame).expect("frames serialize").into()
}
