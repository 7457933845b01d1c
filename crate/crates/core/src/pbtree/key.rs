use std::cmp::Ordering;
use std::fmt;

use crate::numeric::Decimal;

use super::PTree;

/// Index key. Keys of different kinds are not comparable; the checked
/// operations on `PTree<Key, _>` reject them instead of inventing an order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Key {
    Num(Decimal),
    Str(String),
    /// Compared lexicographically; a proper prefix sorts first.
    Tuple(Vec<Key>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Num,
    Str,
    Tuple,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot compare {left:?} key with {right:?} key")]
pub struct KeyError {
    pub left: KeyKind,
    pub right: KeyKind,
}

impl Key {
    pub fn kind(&self) -> KeyKind {
        match self {
            Key::Num(_) => KeyKind::Num,
            Key::Str(_) => KeyKind::Str,
            Key::Tuple(_) => KeyKind::Tuple,
        }
    }

    pub fn int(i: i64) -> Key {
        Key::Num(Decimal::from(i))
    }

    pub fn str(s: impl Into<String>) -> Key {
        Key::Str(s.into())
    }

    pub fn try_cmp(&self, other: &Key) -> Result<Ordering, KeyError> {
        match (self, other) {
            (Key::Num(a), Key::Num(b)) => Ok(a.cmp(b)),
            (Key::Str(a), Key::Str(b)) => Ok(a.cmp(b)),
            (Key::Tuple(a), Key::Tuple(b)) => {
                for (x, y) in a.iter().zip(b) {
                    match x.try_cmp(y)? {
                        Ordering::Equal => continue,
                        o => return Ok(o),
                    }
                }
                Ok(a.len().cmp(&b.len()))
            }
            _ => Err(KeyError { left: self.kind(), right: other.kind() }),
        }
    }

    /// True if `prefix` is this tuple's leading part (or equals it).
    pub fn has_prefix(&self, prefix: &Key) -> bool {
        match (self, prefix) {
            (Key::Tuple(a), Key::Tuple(p)) => {
                p.len() <= a.len() && a.iter().zip(p).all(|(x, y)| x == y)
            }
            _ => self == prefix,
        }
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Total order for tree placement. Cross-kind comparisons only arise when a
/// caller bypasses the checked operations; they fall back to kind rank.
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.try_cmp(other).unwrap_or_else(|e| (e.left as u8).cmp(&(e.right as u8)))
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Num(d) => write!(f, "{d}"),
            Key::Str(s) => write!(f, "{s:?}"),
            Key::Tuple(t) => {
                write!(f, "(")?;
                for (i, k) in t.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{k}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl<V: Clone> PTree<Key, V> {
    fn check_against(&self, key: &Key) -> Result<(), KeyError> {
        match self.first() {
            Some(b) => b.key().try_cmp(key).map(|_| ()),
            None => Ok(()),
        }
    }

    /// `add` that refuses keys whose kind differs from the keys already
    /// stored.
    pub fn try_add(&self, key: Key, value: V) -> Result<Self, KeyError> {
        self.check_against(&key)?;
        Ok(self.add(key, value))
    }

    pub fn try_get(&self, key: &Key) -> Result<Option<&V>, KeyError> {
        self.check_against(key)?;
        Ok(self.get(key))
    }

    /// Entries whose key starts with `prefix`, in key order.
    pub fn prefix_iter<'a>(&'a self, prefix: &'a Key) -> impl Iterator<Item = (Key, V)> + 'a {
        let mut cur = self.seek(prefix);
        std::iter::from_fn(move || {
            let b = cur.take()?;
            if !b.key().has_prefix(prefix) {
                return None;
            }
            let item = (b.key().clone(), b.value().clone());
            cur = b.next();
            Some(item)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_kind_is_an_error() {
        assert!(Key::int(1).try_cmp(&Key::str("a")).is_err());
        let t = PTree::new().add(Key::int(1), ());
        assert!(t.try_add(Key::str("x"), ()).is_err());
        assert!(t.try_get(&Key::str("x")).is_err());
        assert!(t.try_add(Key::int(2), ()).is_ok());
    }

    #[test]
    fn tuples_order_lexicographically() {
        let a = Key::Tuple(vec![Key::int(1), Key::str("b")]);
        let b = Key::Tuple(vec![Key::int(1), Key::str("c")]);
        let p = Key::Tuple(vec![Key::int(1)]);
        assert!(a < b);
        assert!(p < a);
        assert!(a.has_prefix(&p));
        assert!(!Key::Tuple(vec![Key::int(2)]).has_prefix(&p));
    }

    #[test]
    fn prefix_scan_over_composite_keys() {
        let mut t = PTree::new();
        for parent in 1..=3i64 {
            for row in 0..4i64 {
                t = t.add(Key::Tuple(vec![Key::int(parent), Key::int(parent * 100 + row)]), row);
            }
        }
        let p = Key::Tuple(vec![Key::int(2)]);
        let rows: Vec<i64> = t.prefix_iter(&p).map(|(_, v)| v).collect();
        assert_eq!(rows, vec![0, 1, 2, 3]);
    }
}
