use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Simulated time in seconds. Always finite and non-negative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    pub fn new(seconds: f64) -> Result<Self> {
        if seconds.is_finite() && seconds >= 0.0 {
            Ok(SimTime(seconds))
        } else {
            Err(Error::InvalidInput(format!("invalid simulation time {seconds}")))
        }
    }

    /// # Panics
    /// On negative or non-finite input.
    pub fn from_secs(seconds: f64) -> Self {
        Self::new(seconds).expect("simulation time must be finite and non-negative")
    }

    pub fn secs(self) -> f64 {
        self.0
    }
}

impl Eq for SimTime {}

impl Ord for SimTime {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for SimTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.0)
    }
}

/// Payloads carried by the queue. The engine only needs to recognise the
/// end-of-run marker.
pub trait EventPayload: Clone {
    fn simulation_end() -> Self;
    fn is_simulation_end(&self) -> bool;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event<P> {
    pub at: SimTime,
    pub seq: u64,
    pub kind: P,
}

impl<P> Event<P> {
    fn key(&self) -> (SimTime, u64) {
        (self.at, self.seq)
    }
}

// Min-heap adapter over `(at, seq)`.
struct Entry<P>(Event<P>);

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.0.key() == other.0.key()
    }
}
impl<P> Eq for Entry<P> {}
impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.key().cmp(&self.0.key())
    }
}

/// Ordered record of processed events.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog<P> {
    pub events: Vec<Event<P>>,
    /// Number of events handled, also when individual events were not kept.
    pub processed: usize,
}

impl<P> Default for EventLog<P> {
    fn default() -> Self {
        Self {
            events: Vec::new(),
            processed: 0,
        }
    }
}

impl<P: fmt::Debug> EventLog<P> {
    /// Hex SHA-256 over the textual form of every recorded event.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for e in &self.events {
            hasher.update(format!("{:?}|{}|{:?}\n", e.at.secs(), e.seq, e.kind).as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// A handler failure, with everything processed before it.
#[derive(Debug)]
pub struct RunFault<P, E> {
    pub log: EventLog<P>,
    pub event: Event<P>,
    pub source: E,
}

impl<P: fmt::Debug, E: fmt::Display> fmt::Display for RunFault<P, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "handler failed at {} on {:?} after {} events: {}",
            self.event.at, self.event.kind, self.log.processed, self.source
        )
    }
}

pub struct EventQueue<P> {
    heap: BinaryHeap<Entry<P>>,
    now: SimTime,
    next_seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
        }
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues `kind` at `at` and returns the sequence number assigned to it.
    pub fn schedule(&mut self, at: SimTime, kind: P) -> Result<u64> {
        if at < self.now {
            return Err(Error::ScheduleInPast {
                at: at.secs(),
                now: self.now.secs(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry(Event { at, seq, kind }));
        Ok(seq)
    }

    pub fn schedule_in(&mut self, delay: f64, kind: P) -> Result<u64> {
        let at = SimTime::new(self.now.secs() + delay)?;
        self.schedule(at, kind)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.at)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn pop(&mut self) -> Option<Event<P>> {
        let Entry(event) = self.heap.pop()?;
        self.now = event.at;
        Some(event)
    }
}

impl<P: EventPayload> EventQueue<P> {
    /// Processes every event with `at <= t_end` in `(at, seq)` order. Events
    /// past the horizon stay queued and are not logged. On return the clock
    /// reads `t_end`.
    ///
    /// With `record == false` only the processed count is kept.
    pub fn run_until<E, F>(
        &mut self,
        t_end: SimTime,
        record: bool,
        mut handler: F,
    ) -> std::result::Result<EventLog<P>, RunFault<P, Error>>
    where
        F: FnMut(&mut EventQueue<P>, &Event<P>) -> std::result::Result<(), E>,
        E: Into<Error>,
    {
        let mut log = EventLog::default();
        let has_end = self
            .heap
            .iter()
            .any(|e| e.0.kind.is_simulation_end() && e.0.at == t_end);
        if !has_end {
            return Err(RunFault {
                log,
                event: Event {
                    at: t_end,
                    seq: u64::MAX,
                    kind: P::simulation_end(),
                },
                source: Error::MissingEndEvent(t_end.secs()),
            });
        }
        while self.peek_time().is_some_and(|t| t <= t_end) {
            let event = self.pop().expect("peeked");
            if let Err(e) = handler(self, &event) {
                return Err(RunFault {
                    log,
                    event,
                    source: e.into(),
                });
            }
            log.processed += 1;
            if record {
                log.events.push(event);
            }
        }
        self.now = t_end;
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug, PartialEq)]
    enum Ev {
        Tag(&'static str),
        End,
    }

    impl EventPayload for Ev {
        fn simulation_end() -> Self {
            Ev::End
        }
        fn is_simulation_end(&self) -> bool {
            matches!(self, Ev::End)
        }
    }

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    #[test]
    fn earlier_event_dequeued_first() {
        let mut q = EventQueue::new();
        q.schedule(t(5.0), Ev::Tag("five")).unwrap();
        q.schedule(t(3.0), Ev::Tag("three")).unwrap();
        assert_eq!(q.pop().unwrap().kind, Ev::Tag("three"));
        assert_eq!(q.pop().unwrap().kind, Ev::Tag("five"));
    }

    #[test]
    fn ties_follow_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(t(3.0), Ev::Tag("A")).unwrap();
        q.schedule(t(3.0), Ev::Tag("B")).unwrap();
        assert_eq!(q.pop().unwrap().kind, Ev::Tag("A"));
        assert_eq!(q.pop().unwrap().kind, Ev::Tag("B"));
    }

    #[test]
    fn scheduling_in_the_past_fails() {
        let mut q = EventQueue::new();
        q.schedule(t(4.0), Ev::Tag("x")).unwrap();
        q.pop();
        assert!(matches!(
            q.schedule(t(2.0), Ev::Tag("late")),
            Err(Error::ScheduleInPast { .. })
        ));
    }

    #[test]
    fn lone_end_event() {
        let mut q = EventQueue::new();
        q.schedule(t(60.0), Ev::End).unwrap();
        let log = q
            .run_until(t(60.0), true, |_, _| Ok::<(), Error>(()))
            .unwrap();
        assert_eq!(log.events.len(), 1);
        assert_eq!(log.events[0].kind, Ev::End);
        assert_eq!(log.events[0].at, t(60.0));
        assert_eq!(q.now(), t(60.0));
    }

    #[test]
    fn events_past_horizon_are_dropped() {
        let mut q = EventQueue::new();
        for s in [1.0, 2.0, 61.0] {
            q.schedule(t(s), Ev::Tag("e")).unwrap();
        }
        q.schedule(t(60.0), Ev::End).unwrap();
        let log = q
            .run_until(t(60.0), true, |_, _| Ok::<(), Error>(()))
            .unwrap();
        let times: Vec<f64> = log.events.iter().map(|e| e.at.secs()).collect();
        assert_eq!(times, vec![1.0, 2.0, 60.0]);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn missing_end_event_is_rejected() {
        let mut q: EventQueue<Ev> = EventQueue::new();
        let err = q
            .run_until(t(10.0), true, |_, _| Ok::<(), Error>(()))
            .unwrap_err();
        assert!(matches!(err.source, Error::MissingEndEvent(_)));
    }

    #[test]
    fn handler_fault_keeps_partial_log() {
        let mut q = EventQueue::new();
        q.schedule(t(1.0), Ev::Tag("ok")).unwrap();
        q.schedule(t(2.0), Ev::Tag("bad")).unwrap();
        q.schedule(t(10.0), Ev::End).unwrap();
        let fault = q
            .run_until(t(10.0), true, |_, e| match e.kind {
                Ev::Tag("bad") => Err(Error::Protocol("boom".into())),
                _ => Ok(()),
            })
            .unwrap_err();
        assert_eq!(fault.log.events.len(), 1);
        assert_eq!(fault.event.kind, Ev::Tag("bad"));
    }

    #[test]
    fn handler_may_schedule_follow_ups() {
        let mut q = EventQueue::new();
        q.schedule(t(1.0), Ev::Tag("seed")).unwrap();
        q.schedule(t(5.0), Ev::End).unwrap();
        let log = q
            .run_until(t(5.0), true, |q, e| {
                if e.kind == Ev::Tag("seed") {
                    q.schedule_in(0.5, Ev::Tag("child"))?;
                }
                Ok::<(), Error>(())
            })
            .unwrap();
        assert_eq!(log.events[1].kind, Ev::Tag("child"));
        assert_eq!(log.events[1].at, t(1.5));
    }

    #[test]
    fn negative_time_rejected() {
        assert!(SimTime::new(-1.0).is_err());
        assert!(SimTime::new(f64::NAN).is_err());
    }
}
