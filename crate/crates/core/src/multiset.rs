use std::collections::BTreeMap;

/// Finite multiset with an optional cap `k` on every count.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundedMultiset<T: Ord> {
    entries: BTreeMap<T, u64>,
    bound: Option<u64>,
}

impl<T: Ord> Default for BoundedMultiset<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Ord> BoundedMultiset<T> {
    pub fn new() -> Self {
        BoundedMultiset {
            entries: BTreeMap::new(),
            bound: None,
        }
    }

    pub fn with_bound(k: u64) -> Self {
        BoundedMultiset {
            entries: BTreeMap::new(),
            bound: Some(k),
        }
    }

    pub fn bound(&self) -> Option<u64> {
        self.bound
    }

    /// Adds `count` copies of `x`, saturating at the bound.
    pub fn insert_n(&mut self, x: T, count: u64) {
        if count == 0 || self.bound == Some(0) {
            return;
        }
        let slot = self.entries.entry(x).or_insert(0);
        *slot += count;
        if let Some(k) = self.bound {
            *slot = (*slot).min(k);
        }
    }

    pub fn insert(&mut self, x: T) {
        self.insert_n(x, 1);
    }

    pub fn count(&self, x: &T) -> u64 {
        self.entries.get(x).copied().unwrap_or(0)
    }

    /// Distinct elements with their counts, in ascending element order.
    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> {
        self.entries.iter().map(|(x, &c)| (x, c))
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn total(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn k_project(&self, k: u64) -> Self
    where
        T: Clone,
    {
        let entries = self
            .entries
            .iter()
            .filter(|_| k > 0)
            .map(|(x, &c)| (x.clone(), c.min(k)))
            .collect();
        BoundedMultiset {
            entries,
            bound: Some(k),
        }
    }

    pub fn map<U: Ord>(&self, f: impl Fn(&T) -> U) -> BoundedMultiset<U> {
        let mut out = BoundedMultiset {
            entries: BTreeMap::new(),
            bound: self.bound,
        };
        for (x, c) in self.iter() {
            out.insert_n(f(x), c);
        }
        out
    }
}

impl<T: Ord> FromIterator<T> for BoundedMultiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = BoundedMultiset::new();
        for x in iter {
            m.insert(x);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(pairs: &[(&'static str, u64)]) -> BoundedMultiset<&'static str> {
        let mut m = BoundedMultiset::new();
        for &(x, c) in pairs {
            m.insert_n(x, c);
        }
        m
    }

    #[test]
    fn projection_caps_counts() {
        let p = ms(&[("x", 5), ("y", 1)]).k_project(3);
        assert_eq!(p.count(&"x"), 3);
        assert_eq!(p.count(&"y"), 1);
        assert_eq!(p.bound(), Some(3));
    }

    #[test]
    fn projection_to_zero_empties() {
        assert!(ms(&[("x", 5), ("y", 1)]).k_project(0).is_empty());
    }

    #[test]
    fn projection_at_bound_is_identity_on_counts() {
        assert_eq!(ms(&[("x", 2)]).k_project(2).count(&"x"), 2);
    }

    #[test]
    fn bounded_insert_saturates() {
        let mut m = BoundedMultiset::with_bound(2);
        for _ in 0..5 {
            m.insert(7u8);
        }
        assert_eq!(m.count(&7), 2);
    }

    proptest! {
        #[test]
        fn projection_idempotent(xs in proptest::collection::vec(0u8..5, 0..30), k in 0u64..6) {
            let m: BoundedMultiset<u8> = xs.into_iter().collect();
            let once = m.k_project(k);
            prop_assert_eq!(once.k_project(k), once);
        }
    }
}
