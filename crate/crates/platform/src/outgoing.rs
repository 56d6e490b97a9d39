//! The bounded outgoing queue every sending channel drains to the wire.
//!
//! Pushes never block: a full queue drops the newest payload and counts
//! it, because `add_message` returns nothing and must not stall the
//! caller. A payload stays accounted as pending from push until the
//! writer finishes putting it on the wire, so "pending == 0" means the
//! kernel has everything.

use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use chanplat_core::ChannelStats;

pub struct OutgoingQueue {
    inner: Mutex<Inner>,
    ready: Condvar,
}

struct Inner {
    queue: VecDeque<Vec<u8>>,
    capacity: usize,
    dropped: u64,
    in_flight: bool,
    stopped: bool,
}

impl OutgoingQueue {
    pub fn new(capacity: usize) -> OutgoingQueue {
        OutgoingQueue {
            inner: Mutex::new(Inner {
                queue: VecDeque::new(),
                capacity: capacity.max(1),
                dropped: 0,
                in_flight: false,
                stopped: false,
            }),
            ready: Condvar::new(),
        }
    }

    /// Non-blocking append. Full queue: drop and count. Stopped queue:
    /// ignore entirely.
    pub fn push(&self, payload: Vec<u8>) {
        let mut inner = self.inner.lock().unwrap();
        if inner.stopped {
            return;
        }
        if inner.queue.len() >= inner.capacity {
            inner.dropped += 1;
            return;
        }
        inner.queue.push_back(payload);
        drop(inner);
        self.ready.notify_one();
    }

    /// Blocks until a payload is available or the queue is stopped.
    /// The payload counts as in flight until [`complete`] is called.
    ///
    /// [`complete`]: OutgoingQueue::complete
    pub fn pop_blocking(&self) -> Option<Vec<u8>> {
        let mut inner = self.inner.lock().unwrap();
        loop {
            if let Some(payload) = inner.queue.pop_front() {
                inner.in_flight = true;
                return Some(payload);
            }
            if inner.stopped {
                return None;
            }
            inner = self.ready.wait(inner).unwrap();
        }
    }

    /// Bounded-wait variant of [`pop_blocking`]; `None` on timeout or
    /// stop. A zero timeout is a pure try-pop.
    ///
    /// [`pop_blocking`]: OutgoingQueue::pop_blocking
    pub fn pop_timeout(&self, timeout: Duration) -> Option<Vec<u8>> {
        let deadline = std::time::Instant::now() + timeout;
        let mut inner = self.inner.lock().unwrap();
        loop {
            if let Some(payload) = inner.queue.pop_front() {
                inner.in_flight = true;
                return Some(payload);
            }
            if inner.stopped {
                return None;
            }
            let now = std::time::Instant::now();
            if now >= deadline {
                return None;
            }
            let (guard, _) = self.ready.wait_timeout(inner, deadline - now).unwrap();
            inner = guard;
        }
    }

    /// Marks the in-flight payload as fully written.
    pub fn complete(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.in_flight = false;
    }

    /// Stops the queue and discards whatever is still in it.
    pub fn stop(&self) {
        let mut inner = self.inner.lock().unwrap();
        inner.stopped = true;
        inner.queue.clear();
        inner.in_flight = false;
        drop(inner);
        self.ready.notify_all();
    }

    pub fn stats(&self) -> ChannelStats {
        let inner = self.inner.lock().unwrap();
        ChannelStats {
            pending: inner.queue.len() + inner.in_flight as usize,
            capacity: inner.capacity,
            dropped: inner.dropped,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use std::time::Instant;

    #[test]
    fn fifo_order() {
        let q = OutgoingQueue::new(8);
        q.push(b"a".to_vec());
        q.push(b"b".to_vec());
        assert_eq!(q.pop_blocking().unwrap(), b"a");
        q.complete();
        assert_eq!(q.pop_blocking().unwrap(), b"b");
        q.complete();
    }

    #[test]
    fn overflow_drops_newest_and_counts() {
        let q = OutgoingQueue::new(1024);
        for i in 0..1025u32 {
            q.push(i.to_le_bytes().to_vec());
        }
        let stats = q.stats();
        assert_eq!(stats.dropped, 1);
        assert_eq!(stats.pending, 1024);
        // The survivor set is the oldest 1024 messages.
        assert_eq!(q.pop_blocking().unwrap(), 0u32.to_le_bytes());
    }

    #[test]
    fn push_is_fast_even_when_full() {
        let q = OutgoingQueue::new(4);
        for _ in 0..4 {
            q.push(vec![0u8; 16]);
        }
        let start = Instant::now();
        for _ in 0..1000 {
            q.push(vec![0u8; 16]);
        }
        assert!(start.elapsed() < Duration::from_millis(100));
        assert_eq!(q.stats().dropped, 1000);
    }

    #[test]
    fn pending_includes_in_flight() {
        let q = OutgoingQueue::new(4);
        q.push(b"x".to_vec());
        assert_eq!(q.stats().pending, 1);
        let _ = q.pop_blocking().unwrap();
        assert_eq!(q.stats().pending, 1, "popped but not completed");
        q.complete();
        assert_eq!(q.stats().pending, 0);
    }

    #[test]
    fn stop_unblocks_and_discards() {
        let q = Arc::new(OutgoingQueue::new(4));
        let q2 = Arc::clone(&q);
        let waiter = std::thread::spawn(move || q2.pop_blocking());
        std::thread::sleep(Duration::from_millis(50));
        q.stop();
        assert_eq!(waiter.join().unwrap(), None);
        q.push(b"late".to_vec());
        assert_eq!(q.stats().pending, 0);
        assert_eq!(q.stats().dropped, 0, "pushes after stop have no effect");
    }

    #[test]
    fn pop_timeout_expires() {
        let q = OutgoingQueue::new(4);
        let start = Instant::now();
        assert_eq!(q.pop_timeout(Duration::from_millis(30)), None);
        assert!(start.elapsed() >= Duration::from_millis(25));
        assert_eq!(q.pop_timeout(Duration::ZERO), None);
        q.push(b"y".to_vec());
        assert_eq!(q.pop_timeout(Duration::ZERO).unwrap(), b"y");
    }
}
