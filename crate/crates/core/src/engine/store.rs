use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

/// Shared coordinate vector with per-cell atomic access.
///
/// `committed` counts reserved commit indices, `published` the prefix of them
/// whose writes are complete. A reader that waits for `published >= c` sees
/// every write up to index `c`; later writes may or may not be visible.
#[derive(Debug)]
pub struct CoordinateStore {
    cells: Vec<AtomicU64>,
    started: AtomicU64,
    committed: AtomicU64,
    published: AtomicU64,
    last_commit: Vec<AtomicU64>,
    locks: Vec<AtomicBool>,
}

impl CoordinateStore {
    pub fn new(x0: &[f64]) -> Self {
        CoordinateStore {
            cells: x0.iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
            started: AtomicU64::new(0),
            committed: AtomicU64::new(0),
            published: AtomicU64::new(0),
            last_commit: x0.iter().map(|_| AtomicU64::new(0)).collect(),
            locks: x0.iter().map(|_| AtomicBool::new(false)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn load(&self, k: usize) -> f64 {
        f64::from_bits(self.cells[k].load(Ordering::Acquire))
    }

    #[inline]
    pub fn store(&self, k: usize, v: f64) {
        self.cells[k].store(v.to_bits(), Ordering::Release)
    }

    /// Per-cell reads in index order; not a consistent snapshot under concurrency.
    pub fn snapshot(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.load(k)).collect()
    }

    pub fn started(&self) -> u64 {
        self.started.load(Ordering::SeqCst)
    }

    pub fn committed(&self) -> u64 {
        self.committed.load(Ordering::SeqCst)
    }

    pub fn published(&self) -> u64 {
        self.published.load(Ordering::Acquire)
    }

    pub fn last_commit(&self, k: usize) -> u64 {
        self.last_commit[k].load(Ordering::Acquire)
    }

    pub(crate) fn try_start(&self, seen: u64) -> bool {
        self.started.compare_exchange(seen, seen + 1, Ordering::SeqCst, Ordering::SeqCst).is_ok()
    }

    pub(crate) fn try_reserve(&self, seen: u64) -> bool {
        self.committed.compare_exchange(seen, seen + 1, Ordering::SeqCst, Ordering::SeqCst).is_ok()
    }

    pub(crate) fn publish(&self, t: u64, k: usize) {
        self.last_commit[k].store(t, Ordering::Release);
        self.published.store(t, Ordering::Release);
    }

    pub(crate) fn try_lock(&self, k: usize) -> bool {
        self.locks[k].compare_exchange(false, true, Ordering::Acquire, Ordering::Relaxed).is_ok()
    }

    pub(crate) fn unlock(&self, k: usize) {
        self.locks[k].store(false, Ordering::Release)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_roundtrip_bits() {
        let s = CoordinateStore::new(&[1.5, -0.0, f64::MIN_POSITIVE]);
        assert_eq!(s.snapshot()[1].to_bits(), (-0.0f64).to_bits());
        s.store(0, 2.25);
        assert_eq!(s.load(0), 2.25);
    }

    #[test]
    fn counters_and_locks() {
        let s = CoordinateStore::new(&[0.0; 2]);
        assert!(s.try_start(0));
        assert!(!s.try_start(0));
        assert!(s.try_reserve(0));
        assert!(s.committed() <= s.started());
        s.publish(1, 1);
        assert_eq!(s.last_commit(1), 1);
        assert!(s.try_lock(0));
        assert!(!s.try_lock(0));
        s.unlock(0);
        assert!(s.try_lock(0));
    }
}
