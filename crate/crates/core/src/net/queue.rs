use std::sync::atomic::{AtomicU64, Ordering};

use crossbeam::queue::ArrayQueue;

/// Bounded multi-producer queue that evicts the oldest entry when full.
#[derive(Debug)]
pub struct DropOldestQueue<T> {
    inner: ArrayQueue<T>,
    evicted: AtomicU64,
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            inner: ArrayQueue::new(capacity.max(1)),
            evicted: AtomicU64::new(0),
        }
    }

    pub fn push(&self, item: T) {
        if self.inner.force_push(item).is_some() {
            self.evicted.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub fn pop(&self) -> Option<T> {
        self.inner.pop()
    }

    pub fn drain(&self) -> Vec<T> {
        std::iter::from_fn(|| self.inner.pop()).collect()
    }

    pub fn len(&self) -> usize {
        self.inner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.is_empty()
    }

    pub fn evicted(&self) -> u64 {
        self.evicted.load(Ordering::Relaxed)
    }
}
