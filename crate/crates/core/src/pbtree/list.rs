use std::fmt;

use super::{Bookmark, PTree};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("position {pos} out of range for list of length {len}")]
pub struct RangeError {
    pub pos: usize,
    pub len: usize,
}

/// Immutable list keyed by dense positions `0..len`. Positional inserts and
/// removals renumber every later element, so they cost O(N).
pub struct PList<V> {
    tree: PTree<usize, V>,
}

impl<V> Clone for PList<V> {
    fn clone(&self) -> Self {
        PList { tree: self.tree.clone() }
    }
}

impl<V> Default for PList<V> {
    fn default() -> Self {
        PList { tree: PTree::new() }
    }
}

impl<V: Clone> PList<V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn get(&self, pos: usize) -> Option<&V> {
        self.tree.get(&pos)
    }

    #[must_use]
    pub fn push(&self, v: V) -> Self {
        PList { tree: self.tree.add(self.len(), v) }
    }

    pub fn set(&self, pos: usize, v: V) -> Result<Self, RangeError> {
        self.check(pos, self.len())?;
        Ok(PList { tree: self.tree.add(pos, v) })
    }

    pub fn insert_at(&self, pos: usize, v: V) -> Result<Self, RangeError> {
        self.check(pos, self.len() + 1)?;
        let mut items: Vec<V> = self.iter().cloned().collect();
        items.insert(pos, v);
        Ok(items.into_iter().collect())
    }

    pub fn remove_at(&self, pos: usize) -> Result<Self, RangeError> {
        self.check(pos, self.len())?;
        Ok(self
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, v)| v.clone())
            .collect())
    }

    fn check(&self, pos: usize, bound: usize) -> Result<(), RangeError> {
        if pos < bound {
            Ok(())
        } else {
            Err(RangeError { pos, len: self.len() })
        }
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &V> + ExactSizeIterator {
        let v: Vec<&V> = self.tree.values().collect();
        v.into_iter()
    }

    pub fn first(&self) -> Option<Bookmark<usize, V>> {
        self.tree.first()
    }

    pub fn last(&self) -> Option<Bookmark<usize, V>> {
        self.tree.last()
    }

    /// Backing keys, exposed for density checks.
    #[doc(hidden)]
    pub fn positions(&self) -> Vec<usize> {
        self.tree.keys().copied().collect()
    }
}

impl<V: Clone> FromIterator<V> for PList<V> {
    fn from_iter<I: IntoIterator<Item = V>>(iter: I) -> Self {
        let tree = iter.into_iter().enumerate().fold(PTree::new(), |t, (i, v)| t.add(i, v));
        PList { tree }
    }
}

impl<V: fmt::Debug + Clone> fmt::Debug for PList<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

impl<V: PartialEq + Clone> PartialEq for PList<V> {
    fn eq(&self, other: &Self) -> bool {
        self.tree == other.tree
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn remove_renumbers() {
        let l: PList<char> = "abc".chars().collect();
        let r = l.remove_at(1).unwrap();
        assert_eq!(r.iter().collect::<String>(), "ac");
        assert_eq!(r.get(1), Some(&'c'));
        assert_eq!(r.positions(), vec![0, 1]);
        assert_eq!(l.len(), 3);
    }

    #[test]
    fn remove_last_element() {
        let l = PList::new().push('a');
        assert!(l.remove_at(0).unwrap().is_empty());
    }

    #[test]
    fn out_of_range() {
        let l: PList<i32> = (0..3).collect();
        assert_eq!(l.remove_at(3), Err(RangeError { pos: 3, len: 3 }));
        assert!(l.insert_at(4, 9).is_err());
        assert!(l.insert_at(3, 9).is_ok());
    }

    proptest! {
        #[test]
        fn matches_vec_oracle(ops in proptest::collection::vec((any::<bool>(), any::<u8>(), any::<i32>()), 0..200)) {
            let mut l = PList::new();
            let mut v: Vec<i32> = Vec::new();
            for (ins, p, x) in ops {
                if ins || v.is_empty() {
                    let pos = p as usize % (v.len() + 1);
                    v.insert(pos, x);
                    l = l.insert_at(pos, x).unwrap();
                } else {
                    let pos = p as usize % v.len();
                    v.remove(pos);
                    l = l.remove_at(pos).unwrap();
                }
                prop_assert_eq!(l.positions(), (0..v.len()).collect::<Vec<_>>());
            }
            prop_assert_eq!(l.iter().copied().collect::<Vec<_>>(), v);
        }
    }
}
