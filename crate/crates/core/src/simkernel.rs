//! Discrete-event clock and scheduler.
//!
//! Events are ordered by `(fire_time, insertion_index)`, so two events
//! scheduled for the same instant fire in the order they were scheduled.
//! Randomness is handed out through [`RngFactory`], which derives an
//! independent stream per component id from a single run seed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SimError;

/// Simulated time in milliseconds since the scenario epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * 1000)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1000.0).round().max(0.0) as u64)
    }

    pub fn from_millis(ms: u64) -> Self {
        SimTime(ms)
    }

    pub fn as_millis(self) -> u64 {
        self.0
    }

    /// Whole seconds, rounded down.
    pub fn as_secs(self) -> u64 {
        self.0 / 1000
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn plus_secs(self, s: u64) -> Self {
        SimTime(self.0 + s * 1000)
    }

    pub fn plus_millis(self, ms: u64) -> Self {
        SimTime(self.0 + ms)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}s", self.0 / 1000, self.0 % 1000)
    }
}

/// Identifier handed back by [`Scheduler::schedule`]; unique for the run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

/// A scheduled event.
#[derive(Clone, Debug)]
pub struct SimEvent<P> {
    pub fire_time: SimTime,
    pub target: String,
    pub payload: P,
    pub insertion_index: u64,
}

impl<P> SimEvent<P> {
    pub fn id(&self) -> EventId {
        EventId(self.insertion_index)
    }
}

impl<P> PartialEq for SimEvent<P> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_time == other.fire_time && self.insertion_index == other.insertion_index
    }
}

impl<P> Eq for SimEvent<P> {}

impl<P> PartialOrd for SimEvent<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for SimEvent<P> {
    // Reversed so that BinaryHeap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_time, other.insertion_index).cmp(&(self.fire_time, self.insertion_index))
    }
}

/// The simulation clock: current time plus the pending event queue.
#[derive(Debug)]
pub struct Scheduler<P> {
    now: SimTime,
    next_index: u64,
    pending: BinaryHeap<SimEvent<P>>,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Self {
            now: SimTime::ZERO,
            next_index: 0,
            pending: BinaryHeap::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn pending(&self) -> impl Iterator<Item = &SimEvent<P>> {
        self.pending.iter()
    }

    pub fn schedule(&mut self, at: SimTime, target: impl Into<String>, payload: P) -> Result<EventId, SimError> {
        if at < self.now {
            return Err(SimError::PastSchedule { at, now: self.now });
        }
        let insertion_index = self.next_index;
        self.next_index += 1;
        self.pending.push(SimEvent {
            fire_time: at,
            target: target.into(),
            payload,
            insertion_index,
        });
        Ok(EventId(insertion_index))
    }

    /// Pops the next event with `fire_time <= t_end`, advancing `now` to it.
    pub fn pop_due(&mut self, t_end: SimTime) -> Option<SimEvent<P>> {
        match self.pending.peek() {
            Some(ev) if ev.fire_time <= t_end => {
                let ev = self.pending.pop().expect("peeked");
                self.now = ev.fire_time;
                Some(ev)
            }
            _ => None,
        }
    }

    /// Moves the clock forward to `t` without processing anything.
    ///
    /// Fails if an event earlier than `t` is still pending.
    pub fn advance_to(&mut self, t: SimTime) -> Result<(), SimError> {
        if t < self.now {
            return Err(SimError::PastHorizon {
                t_end: t,
                now: self.now,
            });
        }
        if let Some(ev) = self.pending.peek() {
            if ev.fire_time < t {
                return Err(SimError::PastHorizon {
                    t_end: t,
                    now: ev.fire_time,
                });
            }
        }
        self.now = t;
        Ok(())
    }

    /// Processes every event with `fire_time <= t_end` in order, then sets
    /// `now = t_end`. Handlers may schedule further events; those inside the
    /// horizon are processed in the same call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> Result<usize, SimError>
    where
        F: FnMut(&mut Self, SimEvent<P>),
    {
        if t_end < self.now {
            return Err(SimError::PastHorizon { t_end, now: self.now });
        }
        let mut processed = 0;
        while let Some(ev) = self.pop_due(t_end) {
            handler(self, ev);
            processed += 1;
        }
        self.now = t_end;
        Ok(processed)
    }
}

/// Derives per-component random streams from one run seed.
///
/// Each stream depends only on `(seed, component id)`, so adding a component
/// never perturbs the draws of the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngFactory {
    seed: u64,
}

impl RngFactory {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&self, component: &str) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(component.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }
}
