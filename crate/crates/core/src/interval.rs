//! Finite sets of integers stored as sorted, disjoint, inclusive ranges.
//! Used to enumerate feasible outcomes exactly so sampling is uniform and
//! rejection-free.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub(crate) struct IntervalSet {
    ranges: Vec<(i64, i64)>,
}

impl IntervalSet {
    pub fn range(lo: i64, hi: i64) -> Self {
        let ranges = if lo <= hi { vec![(lo, hi)] } else { Vec::new() };
        IntervalSet { ranges }
    }

    pub fn from_points(points: impl IntoIterator<Item = i64>) -> Self {
        let mut pts: Vec<i64> = points.into_iter().collect();
        pts.sort_unstable();
        pts.dedup();
        let mut ranges: Vec<(i64, i64)> = Vec::new();
        for p in pts {
            match ranges.last_mut() {
                Some((_, hi)) if *hi + 1 == p => *hi = p,
                _ => ranges.push((p, p)),
            }
        }
        IntervalSet { ranges }
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.ranges.iter().map(|(lo, hi)| (hi - lo + 1) as u64).sum()
    }

    pub fn contains(&self, x: i64) -> bool {
        let i = self.ranges.partition_point(|&(_, hi)| hi < x);
        self.ranges.get(i).is_some_and(|&(lo, _)| lo <= x)
    }

    /// The `k`-th smallest element.
    pub fn nth(&self, mut k: u64) -> Option<i64> {
        for &(lo, hi) in &self.ranges {
            let len = (hi - lo + 1) as u64;
            if k < len {
                return Some(lo + k as i64);
            }
            k -= len;
        }
        None
    }

    /// Removes `[lo, hi]`.
    pub fn remove(&mut self, lo: i64, hi: i64) {
        if lo > hi {
            return;
        }
        let mut out = Vec::with_capacity(self.ranges.len() + 1);
        for &(a, b) in &self.ranges {
            if b < lo || a > hi {
                out.push((a, b));
                continue;
            }
            if a < lo {
                out.push((a, lo - 1));
            }
            if b > hi {
                out.push((hi + 1, b));
            }
        }
        self.ranges = out;
    }

    /// Keeps only `[lo, hi]`.
    pub fn clamp(&mut self, lo: i64, hi: i64) {
        self.remove(i64::MIN, lo.saturating_sub(1));
        self.remove(hi.saturating_add(1), i64::MAX);
    }

    pub fn retain_points(&self, points: impl IntoIterator<Item = i64>) -> Self {
        IntervalSet::from_points(points.into_iter().filter(|&p| self.contains(p)))
    }
}
