use std::cmp::Ordering;

/// Max-heap entry: a function's representative time at its current rung.
/// Equal times pop the lower function index first; indices follow name
/// order, so ties resolve lexicographically.
#[derive(Clone, Copy, Debug)]
pub(crate) struct HeapEntry {
    pub time: f64,
    pub function: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then_with(|| other.function.cmp(&self.function))
    }
}
