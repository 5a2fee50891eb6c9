//! Order-fixed reductions.
//!
//! Per-partition partials are merged pairwise in ascending partition order,
//! so the combination tree depends only on the number of partials and never
//! on which worker produced them.

use alloc::vec::Vec;

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KahanSum {
    sum: f64,
    /// Running compensation: the low-order bits lost from `sum`, negated.
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    /// Folds another accumulator into this one, carrying both compensations.
    pub fn merge(mut self, other: KahanSum) -> KahanSum {
        self.add(other.sum);
        self.add(-other.comp);
        self
    }

    pub fn value(&self) -> f64 {
        self.sum - self.comp
    }
}

impl Extend<f64> for KahanSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::new();
        k.extend(iter);
        k
    }
}

/// Merges partials pairwise, level by level: `(p0 p1) (p2 p3) ...`, an odd
/// tail carried up unchanged. Returns `None` for no partials.
pub fn tree_merge<T>(partials: Vec<T>, mut merge: impl FnMut(T, T) -> T) -> Option<T> {
    let mut level = partials;
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => merge(a, b),
                None => a,
            });
        }
        level = next;
    }
    level.pop()
}

/// Associative, commutative combiners accepted by map-reduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    /// Kahan-compensated within a partition.
    Sum,
    Min,
    Max,
}

/// Partial state of a [`Combine`] reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Partial {
    Sum(KahanSum),
    Min(f64),
    Max(f64),
}

impl Combine {
    pub fn identity(self) -> Partial {
        match self {
            Combine::Sum => Partial::Sum(KahanSum::new()),
            Combine::Min => Partial::Min(f64::INFINITY),
            Combine::Max => Partial::Max(f64::NEG_INFINITY),
        }
    }

    pub fn fold<I: IntoIterator<Item = f64>>(self, values: I) -> Partial {
        let mut p = self.identity();
        for v in values {
            p.push(v);
        }
        p
    }

    /// Merges partials in tree order; an empty list yields the identity
    /// (0.0 for sums).
    pub fn finish(self, partials: Vec<Partial>) -> f64 {
        tree_merge(partials, Partial::merge).unwrap_or(self.identity()).value()
    }
}

impl Partial {
    pub fn push(&mut self, v: f64) {
        match self {
            Partial::Sum(k) => k.add(v),
            Partial::Min(m) => *m = m.min(v),
            Partial::Max(m) => *m = m.max(v),
        }
    }

    pub fn merge(self, other: Partial) -> Partial {
        match (self, other) {
            (Partial::Sum(a), Partial::Sum(b)) => Partial::Sum(a.merge(b)),
            (Partial::Min(a), Partial::Min(b)) => Partial::Min(a.min(b)),
            (Partial::Max(a), Partial::Max(b)) => Partial::Max(a.max(b)),
            _ => panic!("merging partials of different combiners"),
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Partial::Sum(k) => k.value(),
            Partial::Min(m) | Partial::Max(m) => *m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        let naive = (0..10_000).fold(1.0, |acc, _| acc + 1e-16);
        assert_eq!(naive, 1.0);
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn tree_shape_is_pairwise() {
        let s = tree_merge(
            vec!["a", "b", "c", "d", "e"]
                .into_iter()
                .map(alloc::string::String::from)
                .collect(),
            |a, b| alloc::format!("({a}{b})"),
        );
        assert_eq!(s.as_deref(), Some("(((ab)(cd))e)"));
        assert_eq!(tree_merge(Vec::<u8>::new(), |a, _| a), None);
    }

    #[test]
    fn combine_identities() {
        assert_eq!(Combine::Sum.finish(vec![]), 0.0);
        assert_eq!(Combine::Sum.finish(vec![Combine::Sum.fold([1.0, -1.0, 2.5])]), 2.5);
        assert_eq!(
            Combine::Max.finish(vec![Combine::Max.fold([1.0, 3.0]), Combine::Max.fold([2.0])]),
            3.0
        );
        assert_eq!(
            Combine::Min.finish(vec![Combine::Min.fold([1.0, 3.0]), Combine::Min.fold([-2.0])]),
            -2.0
        );
    }
}
