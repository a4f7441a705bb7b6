//! Cost instrumentation for the table representations.
//!
//! Dense operations count every cell they read or write; sparse operations
//! count entry reads and writes the same way. The counters are thread-local
//! so concurrent runs do not mix, and they measure the operation cost model
//! (work linear in cells/entries touched), not wall time. Conversions used
//! for testing and convergence checks are deliberately not counted.

use std::cell::Cell;

thread_local! {
    static DENSE_CELLS: Cell<u64> = const { Cell::new(0) };
    static SPARSE_ENTRIES: Cell<u64> = const { Cell::new(0) };
}

pub fn reset() {
    DENSE_CELLS.with(|c| c.set(0));
    SPARSE_ENTRIES.with(|c| c.set(0));
}

pub fn dense_cells() -> u64 {
    DENSE_CELLS.with(|c| c.get())
}

pub fn sparse_entries() -> u64 {
    SPARSE_ENTRIES.with(|c| c.get())
}

pub(crate) fn count_dense(n: u64) {
    DENSE_CELLS.with(|c| c.set(c.get().wrapping_add(n)));
}

pub(crate) fn count_sparse(n: u64) {
    SPARSE_ENTRIES.with(|c| c.set(c.get().wrapping_add(n)));
}
