//! Shared vector of adjoint values indexed by identifier.
//!
//! Resizing takes the exclusive side of a reader-writer lock, every other use
//! takes the shared side. Values are stored as `AtomicU64` bit patterns so that
//! the same storage serves both atomic (compare-and-swap) increments and plain
//! relaxed load/store increments.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::lock_api::ArcRwLockReadGuard;
use parking_lot::{RawRwLock, RwLock};

use crate::ids::Identifier;

pub(crate) type UseGuard = ArcRwLockReadGuard<RawRwLock, Vec<AtomicU64>>;

#[derive(Debug)]
pub struct AdjointVector {
    data: Arc<RwLock<Vec<AtomicU64>>>,
    shared_acquisitions: AtomicUsize,
    exclusive_acquisitions: AtomicUsize,
}

impl Default for AdjointVector {
    fn default() -> Self {
        Self::new()
    }
}

impl AdjointVector {
    pub fn new() -> Self {
        Self {
            data: Arc::new(RwLock::new(vec![AtomicU64::new(0)])),
            shared_acquisitions: AtomicUsize::new(0),
            exclusive_acquisitions: AtomicUsize::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.data.read_recursive().len()
    }

    /// Number of shared-lock acquisitions so far.
    pub fn shared_acquisitions(&self) -> usize {
        self.shared_acquisitions.load(Ordering::Relaxed)
    }

    /// Number of exclusive-lock acquisitions (resizes) so far.
    pub fn exclusive_acquisitions(&self) -> usize {
        self.exclusive_acquisitions.load(Ordering::Relaxed)
    }

    /// Grows to at least `n` entries; never shrinks. Growth is geometric
    /// (factor 1.5) so repeated small requests do not reallocate each time.
    pub fn resize(&self, n: usize) {
        if self.data.read_recursive().len() >= n {
            return;
        }
        self.exclusive_acquisitions.fetch_add(1, Ordering::Relaxed);
        let mut data = self.data.write();
        let cap = data.len();
        if cap >= n {
            return;
        }
        let target = n.max(cap + cap / 2);
        data.resize_with(target, || AtomicU64::new(0));
    }

    pub(crate) fn acquire_shared(&self) -> UseGuard {
        self.shared_acquisitions.fetch_add(1, Ordering::Relaxed);
        self.data.read_arc_recursive()
    }

    pub fn reset(&self) {
        let data = self.data.read_recursive();
        for v in data.iter() {
            v.store(0, Ordering::Relaxed);
        }
    }

    /// True iff every entry is exactly zero.
    pub fn is_zero(&self) -> bool {
        let data = self.data.read_recursive();
        data.iter().all(|v| v.load(Ordering::Relaxed) == 0)
    }

    /// Locked, bounds-checked read used by the unoptimized management path.
    pub fn get_locked(&self, id: Identifier) -> f64 {
        if id <= 0 {
            return 0.0;
        }
        self.shared_acquisitions.fetch_add(1, Ordering::Relaxed);
        let data = self.data.read();
        data.get(id as usize)
            .map(|v| f64::from_bits(v.load(Ordering::Relaxed)))
            .unwrap_or(0.0)
    }

    /// Locked write with implicit resize, used by the unoptimized path.
    pub fn set_locked(&self, id: Identifier, value: f64) {
        if id <= 0 {
            return;
        }
        if self.data.read().len() <= id as usize {
            self.resize(id as usize + 1);
        }
        self.shared_acquisitions.fetch_add(1, Ordering::Relaxed);
        let data = self.data.read();
        data[id as usize].store(value.to_bits(), Ordering::Relaxed);
    }

    /// Locked increment with implicit resize, used by the unoptimized path.
    pub fn add_locked(&self, id: Identifier, value: f64) {
        if id <= 0 {
            return;
        }
        if self.data.read().len() <= id as usize {
            self.resize(id as usize + 1);
        }
        self.shared_acquisitions.fetch_add(1, Ordering::Relaxed);
        let data = self.data.read();
        let slot = &data[id as usize];
        let cur = f64::from_bits(slot.load(Ordering::Relaxed));
        slot.store((cur + value).to_bits(), Ordering::Relaxed);
    }
}

/// Unlocked view of the adjoint values, valid while a shared guard is held.
#[derive(Clone, Copy)]
pub struct AdjointSlice<'a> {
    values: &'a [AtomicU64],
}

impl<'a> AdjointSlice<'a> {
    pub(crate) fn new(values: &'a [AtomicU64]) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, id: Identifier) -> f64 {
        f64::from_bits(self.values[id as usize].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, id: Identifier, v: f64) {
        self.values[id as usize].store(v.to_bits(), Ordering::Relaxed);
    }

    /// Plain read-modify-write. Races with concurrent increments lose updates.
    #[inline]
    pub fn add(&self, id: Identifier, v: f64) {
        let slot = &self.values[id as usize];
        let cur = f64::from_bits(slot.load(Ordering::Relaxed));
        slot.store((cur + v).to_bits(), Ordering::Relaxed);
    }

    #[inline]
    pub fn add_atomic(&self, id: Identifier, v: f64) {
        let slot = &self.values[id as usize];
        let mut cur = slot.load(Ordering::Relaxed);
        loop {
            let new = (f64::from_bits(cur) + v).to_bits();
            match slot.compare_exchange_weak(cur, new, Ordering::Relaxed, Ordering::Relaxed) {
                Ok(_) => break,
                Err(actual) => cur = actual,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_never_shrinks_and_preserves() {
        let v = AdjointVector::new();
        v.resize(10);
        assert!(v.capacity() >= 10);
        v.set_locked(3, 7.0);
        v.resize(5);
        assert!(v.capacity() >= 10);
        v.resize(100);
        assert_eq!(v.get_locked(3), 7.0);
        assert_eq!(v.get_locked(99), 0.0);
    }

    #[test]
    fn growth_is_geometric() {
        let v = AdjointVector::new();
        v.resize(100);
        v.resize(101);
        assert_eq!(v.capacity(), 150);
    }

    #[test]
    fn atomic_adds_from_threads_are_exact() {
        let v = AdjointVector::new();
        v.resize(4);
        let g = v.acquire_shared();
        let s = AdjointSlice::new(&g);
        std::thread::scope(|sc| {
            for _ in 0..4 {
                sc.spawn(|| {
                    for _ in 0..1000 {
                        s.add_atomic(2, 1.0);
                    }
                });
            }
        });
        assert_eq!(s.get(2), 4000.0);
    }

    #[test]
    fn locked_access_resizes_implicitly() {
        let v = AdjointVector::new();
        v.set_locked(50, 1.5);
        assert!(v.capacity() > 50);
        v.add_locked(50, 1.0);
        assert_eq!(v.get_locked(50), 2.5);
        assert_eq!(v.get_locked(0), 0.0);
    }
}
