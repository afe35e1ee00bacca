//! In-process publish/subscribe with a retained per-topic log.
//!
//! Every topic keeps its full history, so a subscriber can start from any
//! sequence number and replay without gaps. Sequences start at 0 and grow by
//! one per message on each topic.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const TOPIC_TRANSITIONS: &str = "transitions";
pub const TOPIC_SYMBOLS: &str = "symbols";
pub const TOPIC_SIM: &str = "sim";
pub const TOPIC_RUNS: &str = "runs";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: String,
    pub payload: Value,
    pub sequence: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
}

#[derive(Debug, Default)]
struct Inner {
    topics: BTreeMap<String, Vec<BusMessage>>,
}

#[derive(Debug, Default)]
struct Shared {
    inner: Mutex<Inner>,
    changed: Condvar,
}

/// Cloning yields another handle to the same bus.
#[derive(Clone, Debug, Default)]
pub struct Bus {
    shared: Arc<Shared>,
    auto_create: bool,
}

impl Bus {
    /// Subscribing to a topic nobody has published on is an error.
    pub fn new() -> Self {
        Self::default()
    }

    /// Subscribing creates missing topics.
    pub fn auto_create() -> Self {
        Self {
            shared: Arc::default(),
            auto_create: true,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.shared.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn publish(&self, topic: &str, payload: Value) -> u64 {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        let mut inner = self.lock();
        let log = inner.topics.entry(topic.to_string()).or_default();
        let sequence = log.len() as u64;
        log.push(BusMessage {
            topic: topic.to_string(),
            payload,
            sequence,
            timestamp,
        });
        drop(inner);
        self.shared.changed.notify_all();
        sequence
    }

    pub fn topics(&self) -> Vec<String> {
        self.lock().topics.keys().cloned().collect()
    }

    /// Sequence the next message on `topic` will get.
    pub fn next_sequence(&self, topic: &str) -> u64 {
        self.lock().topics.get(topic).map_or(0, |l| l.len() as u64)
    }

    /// Messages on `topic` with sequence ≥ `from`, in order.
    pub fn read(&self, topic: &str, from: u64) -> Result<Vec<BusMessage>, BusError> {
        let inner = self.lock();
        match inner.topics.get(topic) {
            Some(log) => Ok(log.iter().skip(from as usize).cloned().collect()),
            None if self.auto_create => Ok(Vec::new()),
            None => Err(BusError::UnknownTopic(topic.to_string())),
        }
    }

    pub fn subscribe(&self, topic: &str, from: u64) -> Result<Subscription, BusError> {
        {
            let mut inner = self.lock();
            if !inner.topics.contains_key(topic) {
                if !self.auto_create {
                    return Err(BusError::UnknownTopic(topic.to_string()));
                }
                inner.topics.insert(topic.to_string(), Vec::new());
            }
        }
        Ok(Subscription {
            bus: self.clone(),
            topic: topic.to_string(),
            next: from,
        })
    }
}

/// Cursor over one topic. Each message is yielded exactly once, in sequence
/// order.
#[derive(Debug)]
pub struct Subscription {
    bus: Bus,
    topic: String,
    next: u64,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Sequence of the next message this subscription will yield.
    pub fn position(&self) -> u64 {
        self.next
    }

    /// Everything published since the last call, without blocking.
    pub fn drain(&mut self) -> Vec<BusMessage> {
        let out = self.bus.read(&self.topic, self.next).unwrap_or_default();
        self.next += out.len() as u64;
        out
    }

    /// Like `drain`, but waits up to `timeout` for at least one message.
    pub fn wait(&mut self, timeout: Duration) -> Vec<BusMessage> {
        let shared = &self.bus.shared;
        let guard = shared.inner.lock().unwrap_or_else(|e| e.into_inner());
        let next = self.next as usize;
        let (guard, _) = shared
            .changed
            .wait_timeout_while(guard, timeout, |inner| {
                inner.topics.get(&self.topic).is_none_or(|l| l.len() <= next)
            })
            .unwrap_or_else(|e| e.into_inner());
        drop(guard);
        self.drain()
    }
}

impl Iterator for Subscription {
    type Item = BusMessage;

    /// Non-blocking: `None` once caught up.
    fn next(&mut self) -> Option<BusMessage> {
        let msg = self.bus.read(&self.topic, self.next).ok()?.into_iter().next()?;
        self.next += 1;
        Some(msg)
    }
}
