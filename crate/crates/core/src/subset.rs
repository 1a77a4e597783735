//! Ground sets and subsets of them.
//!
//! A [`Subset`] is a bitset over element positions, so ground sets are limited
//! to 64 elements. That is far beyond what any of the enumeration-based
//! routines in this crate can handle anyway.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub const MAX_ELEMENTS: usize = 64;

/// Subset of a ground set, stored as a bitmask over element positions.
///
/// The total order is lexicographic on the ascending list of positions, so
/// `{} < {0} < {0,1} < {0,2} < {1}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Subset(u64);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u64) -> Self {
        Subset(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn singleton(i: usize) -> Self {
        assert!(i < MAX_ELEMENTS, "element index {i} out of range");
        Subset(1 << i)
    }

    /// The set `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_ELEMENTS);
        if n == MAX_ELEMENTS {
            Subset(u64::MAX)
        } else {
            Subset((1u64 << n) - 1)
        }
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().fold(Subset::EMPTY, |s, i| s.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_ELEMENTS && self.0 & (1 << i) != 0
    }

    pub fn with(self, i: usize) -> Self {
        Subset(self.0 | Subset::singleton(i).0)
    }

    pub fn without(self, i: usize) -> Self {
        Subset(self.0 & !Subset::singleton(i).0)
    }

    pub fn union(self, other: Subset) -> Self {
        Subset(self.0 | other.0)
    }

    pub fn intersection(self, other: Subset) -> Self {
        Subset(self.0 & other.0)
    }

    pub fn difference(self, other: Subset) -> Self {
        Subset(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn intersects(self, other: Subset) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest position in the set.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> SubsetIter {
        SubsetIter(self.0)
    }

    /// All subsets of `{0, .., n-1}` in bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = Subset> {
        assert!(
            n < MAX_ELEMENTS,
            "cannot enumerate all subsets of {n} elements"
        );
        (0..(1u64 << n)).map(Subset)
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let mask = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == mask {
                None
            } else {
                Some((cur.wrapping_sub(mask)) & mask)
            };
            Some(Subset(cur))
        })
    }
}

pub struct SubsetIter(u64);

impl Iterator for SubsetIter {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl IntoIterator for Subset {
    type Item = usize;
    type IntoIter = SubsetIter;

    fn into_iter(self) -> SubsetIter {
        self.iter()
    }
}

impl FromIterator<usize> for Subset {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Subset::from_indices(iter)
    }
}

impl Ord for Subset {
    fn cmp(&self, other: &Self) -> Ordering {
        let diff = self.0 ^ other.0;
        if diff == 0 {
            return Ordering::Equal;
        }
        let d = diff.trailing_zeros();
        let above = |bits: u64| if d == 63 { 0 } else { bits >> (d + 1) };
        if self.0 & (1 << d) != 0 {
            // `self` has the smaller element at the first difference unless
            // `other` ends right there.
            if above(other.0) != 0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        } else if above(self.0) != 0 {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

impl PartialOrd for Subset {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Ordered list of named elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundSet {
    elements: Vec<String>,
    index: HashMap<String, usize>,
}

impl GroundSet {
    pub fn new<I, S>(elements: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let elements: Vec<String> = elements.into_iter().map(Into::into).collect();
        if elements.len() > MAX_ELEMENTS {
            return Err(Error::ScaleExceeded {
                what: format!("ground set of {} elements", elements.len()),
                limit: MAX_ELEMENTS,
            });
        }
        let mut index = HashMap::with_capacity(elements.len());
        for (i, name) in elements.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate element {name:?}")));
            }
        }
        Ok(GroundSet { elements, index })
    }

    /// Ground set `e0, e1, ...` of the given size.
    pub fn numbered(n: usize) -> Self {
        GroundSet::new((0..n).map(|i| format!("e{i}"))).expect("numbered ground set")
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[String] {
        &self.elements
    }

    pub fn name(&self, i: usize) -> &str {
        &self.elements[i]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn full(&self) -> Subset {
        Subset::full(self.len())
    }

    pub fn subset<I, S>(&self, names: I) -> Result<Subset>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = Subset::EMPTY;
        for name in names {
            let name = name.as_ref();
            let i = self
                .position(name)
                .ok_or_else(|| Error::InvalidInput(format!("unknown element {name:?}")))?;
            set = set.with(i);
        }
        Ok(set)
    }

    pub fn names(&self, set: Subset) -> Vec<String> {
        set.iter().map(|i| self.elements[i].clone()).collect()
    }

    pub fn display(&self, set: Subset) -> String {
        format!("{{{}}}", self.names(set).join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn as_vec(s: Subset) -> Vec<usize> {
        s.iter().collect()
    }

    #[test]
    fn lexicographic_order_examples() {
        let sets = [
            Subset::EMPTY,
            Subset::from_indices([0]),
            Subset::from_indices([0, 1]),
            Subset::from_indices([0, 1, 5]),
            Subset::from_indices([0, 2]),
            Subset::from_indices([1]),
            Subset::from_indices([63]),
        ];
        for w in sets.windows(2) {
            assert!(w[0] < w[1], "{:?} < {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn subsets_of_mask() {
        let s = Subset::from_indices([1, 3]);
        let all: Vec<_> = s.subsets().collect();
        assert_eq!(all.len(), 4);
        assert!(all.iter().all(|t| t.is_subset_of(s)));
        assert_eq!(Subset::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn ground_set_rejects_duplicates() {
        assert!(GroundSet::new(["a", "b", "a"]).is_err());
        let g = GroundSet::new(["a", "b", "c"]).unwrap();
        assert_eq!(g.display(g.subset(["c", "a"]).unwrap()), "{a, c}");
        assert!(g.subset(["z"]).is_err());
    }

    proptest! {
        #[test]
        fn order_matches_vec_order(a in any::<u64>(), b in any::<u64>()) {
            let (x, y) = (Subset::from_bits(a), Subset::from_bits(b));
            prop_assert_eq!(x.cmp(&y), as_vec(x).cmp(&as_vec(y)));
        }

        #[test]
        fn set_algebra(a in any::<u64>(), b in any::<u64>()) {
            let (x, y) = (Subset::from_bits(a), Subset::from_bits(b));
            prop_assert_eq!(x.union(y).len() + x.intersection(y).len(), x.len() + y.len());
            prop_assert!(x.difference(y).is_subset_of(x));
            prop_assert!(!x.difference(y).intersects(y));
        }
    }
}
