//! Server-sent events over a run's log.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use futures::stream::{self, Stream, StreamExt};
use serde_json::json;

use crate::{Run, RunStatus};

/// Events sent per wake-up.
const BATCH: usize = 512;

enum Cursor {
    At(usize),
    Done,
}

/// Log events from index `from` on, each with its index as the SSE id and
/// its `kind` as the SSE event name, then one `end` event carrying the
/// final status.
pub(crate) fn sse(run: Arc<Run>, from: usize) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let rx = run.tick.subscribe();
    let batches = stream::unfold((run, rx, Cursor::At(from)), |(run, mut rx, cursor)| async move {
        let Cursor::At(mut at) = cursor else {
            return None;
        };
        loop {
            rx.borrow_and_update();
            let (batch, tail) = {
                let log = run.log.lock().unwrap();
                at = at.min(log.events.len());
                let end = (at + BATCH).min(log.events.len());
                let batch: Vec<SseEvent> = log.events[at..end]
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        SseEvent::default()
                            .id((at + i).to_string())
                            .event(e.kind())
                            .json_data(e)
                            .expect("event serializes")
                    })
                    .collect();
                at = end;
                let tail = (log.status != RunStatus::Running && at == log.events.len())
                    .then(|| json!({ "status": log.status, "events": at, "error": log.failure }));
                (batch, tail)
            };
            if let Some(tail) = tail {
                let mut batch = batch;
                batch.push(SseEvent::default().event("end").json_data(tail).expect("status serializes"));
                return Some((batch, (run, rx, Cursor::Done)));
            }
            if !batch.is_empty() {
                return Some((batch, (run, rx, Cursor::At(at))));
            }
            if rx.changed().await.is_err() {
                return None;
            }
        }
    });
    let events = batches.flat_map(|b| stream::iter(b.into_iter().map(Ok)));
    Sse::new(events).keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
}
