//! Linear (bump) arenas: one per host worker and one per virtual device.
//! Allocation is an O(1) cursor bump; the whole arena is reset between
//! activations instead of freeing individual allocations.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::layout::{SlotBuffer, SlotStore};

pub const DEFAULT_HOST_ARENA_BYTES: usize = 64 * 1024 * 1024;
pub const DEFAULT_DEVICE_ARENA_BYTES: usize = 256 * 1024 * 1024;

/// A fixed-capacity bump arena. The cursor is atomic so tasks sharing a
/// device arena can allocate concurrently.
pub struct Arena {
    store: Arc<SlotStore>,
    capacity: usize,
    cursor: AtomicUsize,
}

/// An allocation: a byte offset into the arena.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocHandle {
    pub offset: usize,
    pub size: usize,
}

impl Arena {
    /// Creates an arena of `capacity` bytes (rounded up to whole slots).
    pub fn new(capacity: usize) -> Self {
        let slots = capacity.div_ceil(8);
        Self {
            store: Arc::new(SlotStore::new(slots)),
            capacity,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn used(&self) -> usize {
        self.cursor.load(Ordering::Relaxed).min(self.capacity)
    }

    /// Bumps the cursor by `size` bytes at `align` alignment and returns the
    /// aligned offset. Exhaustion is surfaced to the caller; there is no
    /// fallback allocation.
    pub fn allocate(&self, size: usize, align: usize) -> Result<AllocHandle> {
        assert!(align.is_power_of_two(), "alignment must be a power of two");
        loop {
            let cur = self.cursor.load(Ordering::Relaxed);
            let start = (cur + align - 1) & !(align - 1);
            let end = match start.checked_add(size) {
                Some(e) => e,
                None => usize::MAX,
            };
            if end > self.capacity {
                return Err(Error::ArenaExhausted {
                    requested: size,
                    remaining: self.capacity.saturating_sub(start.min(self.capacity)),
                });
            }
            if self
                .cursor
                .compare_exchange_weak(cur, end, Ordering::Relaxed, Ordering::Relaxed)
                .is_ok()
            {
                return Ok(AllocHandle { offset: start, size });
            }
        }
    }

    /// Allocates `n` 8-byte slots and returns them as a buffer view sharing
    /// the arena's backing store. Block storage can be carved from device
    /// arenas this way.
    pub fn allocate_slots(&self, n: usize) -> Result<SlotBuffer> {
        let handle = self.allocate(n * 8, 8)?;
        Ok(SlotBuffer::from_store(self.store.clone(), handle.offset / 8, n))
    }

    /// Rewinds the cursor. Caller contract: no live references into the
    /// arena remain.
    pub fn reset(&self) {
        self.cursor.store(0, Ordering::Relaxed);
    }
}

/// Per-worker host arenas plus per-virtual-device arenas.
pub struct MultiarchAllocator {
    host: Vec<Arena>,
    device: Vec<Arena>,
}

impl MultiarchAllocator {
    pub fn new(n_host: usize, n_device: usize) -> Self {
        Self::with_capacities(n_host, DEFAULT_HOST_ARENA_BYTES, n_device, DEFAULT_DEVICE_ARENA_BYTES)
    }

    pub fn with_capacities(
        n_host: usize,
        host_bytes: usize,
        n_device: usize,
        device_bytes: usize,
    ) -> Self {
        Self {
            host: (0..n_host).map(|_| Arena::new(host_bytes)).collect(),
            device: (0..n_device).map(|_| Arena::new(device_bytes)).collect(),
        }
    }

    pub fn host_arena(&self, worker: usize) -> &Arena {
        &self.host[worker]
    }

    pub fn device_arena(&self, device: usize) -> &Arena {
        &self.device[device]
    }

    pub fn n_host(&self) -> usize {
        self.host.len()
    }

    pub fn n_device(&self) -> usize {
        self.device.len()
    }

    pub fn reset_all(&self) {
        for a in &self.host {
            a.reset();
        }
        for a in &self.device {
            a.reset();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn allocations_are_disjoint_and_aligned() {
        let arena = Arena::new(256);
        let mut spans: Vec<(usize, usize)> = Vec::new();
        for (size, align) in [(16usize, 8usize), (16, 8), (3, 1), (8, 64), (1, 2)] {
            let h = arena.allocate(size, align).unwrap();
            assert_eq!(h.offset % align, 0);
            for (s, e) in &spans {
                assert!(h.offset >= *e || h.offset + size <= *s, "overlap");
            }
            spans.push((h.offset, h.offset + size));
        }
        // second 16-byte allocation starts at least 16 past the first
        assert!(spans[1].0 >= spans[0].0 + 16);
    }

    #[test]
    fn zero_size_allocation() {
        let arena = Arena::new(64);
        let a = arena.allocate(0, 8).unwrap();
        let b = arena.allocate(0, 8).unwrap();
        assert_eq!(a.offset, b.offset);
        assert_eq!(arena.used(), 0);
    }

    #[test]
    fn exhaustion_boundary() {
        let arena = Arena::new(64);
        arena.allocate(64, 1).unwrap();
        match arena.allocate(1, 1) {
            Err(Error::ArenaExhausted { requested: 1, remaining: 0 }) => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn reset_reuses_space() {
        let arena = Arena::new(128);
        let first = arena.allocate(32, 8).unwrap();
        arena.reset();
        let again = arena.allocate(32, 8).unwrap();
        assert_eq!(first.offset, again.offset);
        // reset on a fresh arena is a no-op
        let fresh = Arena::new(128);
        fresh.reset();
        assert_eq!(fresh.used(), 0);
    }

    #[test]
    fn allocate_reset_cycles_keep_constant_footprint() {
        let arena = Arena::new(4096);
        for _ in 0..1_000_000 {
            arena.allocate(64, 8).unwrap();
            arena.reset();
        }
        assert_eq!(arena.used(), 0);
        assert_eq!(arena.capacity(), 4096);
    }

    #[test]
    fn concurrent_allocations_are_disjoint() {
        use std::sync::Mutex;
        let arena = Arc::new(Arena::new(1 << 20));
        let spans = Arc::new(Mutex::new(Vec::new()));
        let mut handles = Vec::new();
        for _ in 0..4 {
            let arena = arena.clone();
            let spans = spans.clone();
            handles.push(std::thread::spawn(move || {
                for _ in 0..200 {
                    let h = arena.allocate(24, 8).unwrap();
                    spans.lock().unwrap().push((h.offset, h.offset + 24));
                }
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        let mut spans = spans.lock().unwrap().clone();
        spans.sort();
        for w in spans.windows(2) {
            assert!(w[0].1 <= w[1].0, "overlapping allocations");
        }
    }
}
