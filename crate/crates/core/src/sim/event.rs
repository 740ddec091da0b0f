use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    TxGenerated(usize),
    EndorseComplete(usize),
    OrderTimerFired { epoch: u64 },
    BlockDelivered(usize),
    BlockValidated(usize),
}

impl EventKind {
    // Same-instant ordering: orderer arrivals precede a timer expiring at that
    // instant, so a block that fills exactly on the deadline is cut by size.
    fn rank(self) -> u8 {
        match self {
            EventKind::TxGenerated(_) => 0,
            EventKind::EndorseComplete(_) => 1,
            EventKind::OrderTimerFired { .. } => 2,
            EventKind::BlockDelivered(_) => 3,
            EventKind::BlockValidated(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Event {
    fn key(&self) -> (f64, u8, u64) {
        (self.time, self.kind.rank(), self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that `BinaryHeap` pops the earliest event.
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ra, sa) = self.key();
        let (tb, rb, sb) = other.key();
        tb.total_cmp(&ta).then(rb.cmp(&ra)).then(sb.cmp(&sa))
    }
}

/// Min-queue of events keyed by `(time, kind rank, seq)`.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn schedule(&mut self, time: f64, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
