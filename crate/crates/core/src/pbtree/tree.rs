use std::borrow::Borrow;
use std::cell::Cell;
use std::fmt;
use std::sync::Arc;

/// Default branching parameter: non-root nodes hold between 8 and 16
/// children (or leaf entries).
pub const DEFAULT_ORDER: usize = 8;

thread_local! {
    static NODES_BUILT: Cell<u64> = const { Cell::new(0) };
}

/// Number of tree nodes constructed on the current thread so far.
///
/// Test hook for structural-sharing measurements: take the difference
/// around an operation.
pub fn nodes_built() -> u64 {
    NODES_BUILT.with(|c| c.get())
}

enum Node<K, V> {
    Leaf(Vec<(K, V)>),
    /// `keys[i]` is the smallest key stored under `children[i]`.
    Inner { keys: Vec<K>, children: Vec<Arc<Node<K, V>>> },
}

fn build<K, V>(node: Node<K, V>) -> Arc<Node<K, V>> {
    NODES_BUILT.with(|c| c.set(c.get() + 1));
    Arc::new(node)
}

impl<K, V> Node<K, V> {
    fn width(&self) -> usize {
        match self {
            Node::Leaf(e) => e.len(),
            Node::Inner { children, .. } => children.len(),
        }
    }

    fn min_key(&self) -> &K {
        match self {
            Node::Leaf(e) => &e[0].0,
            Node::Inner { keys, .. } => &keys[0],
        }
    }
}

/// Immutable ordered map. Every update returns a new tree that shares all
/// untouched nodes with the old one; the old tree stays valid.
pub struct PTree<K, V> {
    root: Option<Arc<Node<K, V>>>,
    count: usize,
    order: usize,
}

impl<K, V> Clone for PTree<K, V> {
    fn clone(&self) -> Self {
        PTree { root: self.root.clone(), count: self.count, order: self.order }
    }
}

impl<K, V> Default for PTree<K, V> {
    fn default() -> Self {
        PTree::new()
    }
}

enum Grown<K, V> {
    One(Arc<Node<K, V>>),
    Two(Arc<Node<K, V>>, Arc<Node<K, V>>),
}

impl<K, V> PTree<K, V> {
    pub fn new() -> Self {
        Self::with_order(DEFAULT_ORDER)
    }

    /// # Panics
    /// If `order < 2`.
    pub fn with_order(order: usize) -> Self {
        assert!(order >= 2, "branching parameter must be at least 2");
        PTree { root: None, count: 0, order }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Levels from root to leaf; 0 for an empty tree.
    pub fn depth(&self) -> usize {
        let mut d = 0;
        let mut cur = self.root.as_deref();
        while let Some(n) = cur {
            d += 1;
            cur = match n {
                Node::Leaf(_) => None,
                Node::Inner { children, .. } => Some(&children[0]),
            };
        }
        d
    }

    pub fn iter(&self) -> Iter<'_, K, V> {
        let mut it = Iter { stack: Vec::new(), remaining: self.count };
        if let Some(r) = &self.root {
            it.descend_left(r);
        }
        it
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.iter().map(|(k, _)| k)
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.iter().map(|(_, v)| v)
    }

    /// True if both trees share the same root node.
    pub fn ptr_eq(&self, other: &Self) -> bool {
        match (&self.root, &other.root) {
            (None, None) => true,
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    /// Addresses of every node reachable from the root. Test hook for
    /// structural-sharing checks.
    #[doc(hidden)]
    pub fn node_addresses(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<&Arc<Node<K, V>>> = self.root.iter().collect();
        while let Some(n) = stack.pop() {
            out.push(Arc::as_ptr(n) as *const () as usize);
            if let Node::Inner { children, .. } = n.as_ref() {
                stack.extend(children.iter());
            }
        }
        out
    }

    pub fn first(&self) -> Option<Bookmark<K, V>> {
        let root = self.root.clone()?;
        let mut path = Vec::new();
        Bookmark::descend(&mut path, root, false);
        Some(Bookmark { path })
    }

    pub fn last(&self) -> Option<Bookmark<K, V>> {
        let root = self.root.clone()?;
        let mut path = Vec::new();
        Bookmark::descend(&mut path, root, true);
        Some(Bookmark { path })
    }
}

impl<K: Ord + Clone, V: Clone> PTree<K, V> {
    /// Build a tree from key-ordered entries by repeated insertion.
    pub fn from_sorted(entries: impl IntoIterator<Item = (K, V)>) -> Self {
        entries.into_iter().fold(PTree::new(), |t, (k, v)| t.add(k, v))
    }

    pub fn get<Q>(&self, key: &Q) -> Option<&V>
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let mut node = self.root.as_deref()?;
        loop {
            match node {
                Node::Leaf(entries) => {
                    return entries
                        .binary_search_by(|(k, _)| k.borrow().cmp(key))
                        .ok()
                        .map(|i| &entries[i].1);
                }
                Node::Inner { keys, children } => {
                    node = &children[child_index(keys, key)];
                }
            }
        }
    }

    pub fn contains_key<Q>(&self, key: &Q) -> bool
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        self.get(key).is_some()
    }

    /// Insert or replace. Replacing keeps the count unchanged.
    #[must_use]
    pub fn add(&self, key: K, value: V) -> Self {
        let Some(root) = &self.root else {
            return PTree {
                root: Some(build(Node::Leaf(vec![(key, value)]))),
                count: 1,
                order: self.order,
            };
        };
        let (grown, added) = insert(root, key, value, self.order);
        let root = match grown {
            Grown::One(n) => n,
            Grown::Two(a, b) => build(Node::Inner {
                keys: vec![a.min_key().clone(), b.min_key().clone()],
                children: vec![a, b],
            }),
        };
        PTree { root: Some(root), count: self.count + added as usize, order: self.order }
    }

    /// Remove `key`. Removing an absent key returns a tree sharing the
    /// input's root.
    #[must_use]
    pub fn remove<Q>(&self, key: &Q) -> Self
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let Some(root) = &self.root else {
            return self.clone();
        };
        let Some(new_root) = remove(root, key, self.order) else {
            return self.clone();
        };
        let root = match new_root.as_ref() {
            Node::Leaf(e) if e.is_empty() => None,
            Node::Inner { children, .. } if children.len() == 1 => Some(children[0].clone()),
            _ => Some(new_root),
        };
        PTree { root, count: self.count - 1, order: self.order }
    }

    /// Bookmark at the first entry whose key is `>= key`.
    pub fn seek<Q>(&self, key: &Q) -> Option<Bookmark<K, V>>
    where
        K: Borrow<Q>,
        Q: Ord + ?Sized,
    {
        let mut path = Vec::new();
        let mut node = self.root.clone()?;
        loop {
            let next = match node.as_ref() {
                Node::Leaf(entries) => {
                    let i = entries.partition_point(|(k, _)| k.borrow() < key);
                    path.push((node.clone(), i));
                    break;
                }
                Node::Inner { keys, children } => {
                    let i = child_index(keys, key);
                    path.push((node.clone(), i));
                    children[i].clone()
                }
            };
            node = next;
        }
        let bm = Bookmark { path };
        if bm.index() < bm.leaf().len() {
            Some(bm)
        } else {
            bm.climb_next()
        }
    }

    /// Verify the B-tree shape: ordering, separator keys, fill bounds and
    /// count. Returns a description of the first violation.
    #[doc(hidden)]
    pub fn check_shape(&self) -> Result<(), String> {
        let Some(root) = &self.root else {
            return if self.count == 0 { Ok(()) } else { Err("empty root with count".into()) };
        };
        let mut leaves = 0usize;
        let mut depth = None;
        check_node(root, true, self.order, 1, &mut depth, &mut leaves)?;
        if leaves != self.count {
            return Err(format!("count {} but {} leaf entries", self.count, leaves));
        }
        let keys: Vec<&K> = self.keys().collect();
        if keys.windows(2).any(|w| w[0] >= w[1]) {
            return Err("keys not strictly ascending".into());
        }
        Ok(())
    }
}

fn check_node<K: Ord, V>(
    node: &Node<K, V>,
    is_root: bool,
    order: usize,
    level: usize,
    depth: &mut Option<usize>,
    leaves: &mut usize,
) -> Result<(), String> {
    let w = node.width();
    if !is_root && (w < order || w > 2 * order) {
        return Err(format!("node width {w} outside [{order}, {}]", 2 * order));
    }
    if is_root && (w == 0 || w > 2 * order) {
        return Err(format!("root width {w}"));
    }
    match node {
        Node::Leaf(e) => {
            *leaves += e.len();
            match depth {
                Some(d) if *d != level => return Err("leaves at different depths".into()),
                _ => *depth = Some(level),
            }
        }
        Node::Inner { keys, children } => {
            if is_root && children.len() < 2 {
                return Err("inner root with a single child".into());
            }
            if keys.len() != children.len() {
                return Err("separator count mismatch".into());
            }
            for (k, c) in keys.iter().zip(children) {
                if k != c.min_key() {
                    return Err("separator is not the child's minimum".into());
                }
                check_node(c, false, order, level + 1, depth, leaves)?;
            }
        }
    }
    Ok(())
}

fn child_index<K: Borrow<Q>, Q: Ord + ?Sized>(keys: &[K], key: &Q) -> usize {
    keys.partition_point(|k| k.borrow() <= key).saturating_sub(1)
}

fn split_leaf<K: Clone, V>(mut entries: Vec<(K, V)>, order: usize) -> Grown<K, V> {
    if entries.len() <= 2 * order {
        return Grown::One(build(Node::Leaf(entries)));
    }
    let right = entries.split_off(entries.len() / 2);
    Grown::Two(build(Node::Leaf(entries)), build(Node::Leaf(right)))
}

fn split_inner<K: Clone, V>(
    mut keys: Vec<K>,
    mut children: Vec<Arc<Node<K, V>>>,
    order: usize,
) -> Grown<K, V> {
    if children.len() <= 2 * order {
        return Grown::One(build(Node::Inner { keys, children }));
    }
    let at = children.len() / 2;
    let rk = keys.split_off(at);
    let rc = children.split_off(at);
    Grown::Two(
        build(Node::Inner { keys, children }),
        build(Node::Inner { keys: rk, children: rc }),
    )
}

fn insert<K: Ord + Clone, V: Clone>(
    node: &Arc<Node<K, V>>,
    key: K,
    value: V,
    order: usize,
) -> (Grown<K, V>, bool) {
    match node.as_ref() {
        Node::Leaf(entries) => {
            let mut e = entries.clone();
            match e.binary_search_by(|(k, _)| k.cmp(&key)) {
                Ok(i) => {
                    e[i].1 = value;
                    (Grown::One(build(Node::Leaf(e))), false)
                }
                Err(i) => {
                    e.insert(i, (key, value));
                    (split_leaf(e, order), true)
                }
            }
        }
        Node::Inner { keys, children } => {
            let i = child_index(keys, &key);
            let (grown, added) = insert(&children[i], key, value, order);
            let mut keys = keys.clone();
            let mut children = children.clone();
            match grown {
                Grown::One(c) => {
                    keys[i] = c.min_key().clone();
                    children[i] = c;
                }
                Grown::Two(a, b) => {
                    keys[i] = a.min_key().clone();
                    keys.insert(i + 1, b.min_key().clone());
                    children[i] = a;
                    children.insert(i + 1, b);
                }
            }
            (split_inner(keys, children, order), added)
        }
    }
}

/// Returns `None` when the key is absent. The returned node may be
/// under-full; the caller rebalances it against a sibling.
fn remove<K, V, Q>(node: &Arc<Node<K, V>>, key: &Q, order: usize) -> Option<Arc<Node<K, V>>>
where
    K: Ord + Clone + Borrow<Q>,
    V: Clone,
    Q: Ord + ?Sized,
{
    match node.as_ref() {
        Node::Leaf(entries) => {
            let i = entries.binary_search_by(|(k, _)| k.borrow().cmp(key)).ok()?;
            let mut e = entries.clone();
            e.remove(i);
            Some(build(Node::Leaf(e)))
        }
        Node::Inner { keys, children } => {
            let i = child_index(keys, key);
            let child = remove(&children[i], key, order)?;
            let mut keys = keys.clone();
            let mut children = children.clone();
            if child.width() >= order {
                keys[i] = child.min_key().clone();
                children[i] = child;
            } else {
                // Rebalance with a neighbour: merge if the pair fits in one
                // node, otherwise split the pair evenly.
                let (l, r) = if i > 0 { (i - 1, i) } else { (i, i + 1) };
                let (left, right) =
                    if l == i { (child, children[r].clone()) } else { (children[l].clone(), child) };
                let merged = merge_pair(&left, &right, order);
                keys.remove(r);
                children.remove(r);
                match merged {
                    Grown::One(n) => {
                        keys[l] = n.min_key().clone();
                        children[l] = n;
                    }
                    Grown::Two(a, b) => {
                        keys[l] = a.min_key().clone();
                        keys.insert(r, b.min_key().clone());
                        children[l] = a;
                        children.insert(r, b);
                    }
                }
            }
            Some(build(Node::Inner { keys, children }))
        }
    }
}

fn merge_pair<K: Clone, V: Clone>(left: &Node<K, V>, right: &Node<K, V>, order: usize) -> Grown<K, V> {
    match (left, right) {
        (Node::Leaf(a), Node::Leaf(b)) => {
            let all: Vec<(K, V)> = a.iter().chain(b.iter()).cloned().collect();
            split_leaf(all, order)
        }
        (Node::Inner { keys: ka, children: ca }, Node::Inner { keys: kb, children: cb }) => {
            let keys = ka.iter().chain(kb.iter()).cloned().collect();
            let children = ca.iter().chain(cb.iter()).cloned().collect();
            split_inner(keys, children, order)
        }
        _ => unreachable!("siblings at different levels"),
    }
}

impl<K: PartialEq, V: PartialEq> PartialEq for PTree<K, V> {
    fn eq(&self, other: &Self) -> bool {
        self.count == other.count && (self.ptr_eq(other) || self.iter().eq(other.iter()))
    }
}

impl<K: Eq, V: Eq> Eq for PTree<K, V> {}

impl<K: fmt::Debug, V: fmt::Debug> fmt::Debug for PTree<K, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

impl<K: Ord + Clone, V: Clone> FromIterator<(K, V)> for PTree<K, V> {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        iter.into_iter().fold(PTree::new(), |t, (k, v)| t.add(k, v))
    }
}

impl<'a, K, V> IntoIterator for &'a PTree<K, V> {
    type Item = (&'a K, &'a V);
    type IntoIter = Iter<'a, K, V>;

    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

pub struct Iter<'a, K, V> {
    stack: Vec<(&'a Node<K, V>, usize)>,
    remaining: usize,
}

impl<'a, K, V> Iter<'a, K, V> {
    fn descend_left(&mut self, mut node: &'a Node<K, V>) {
        loop {
            self.stack.push((node, 0));
            match node {
                Node::Leaf(_) => return,
                Node::Inner { children, .. } => node = &children[0],
            }
        }
    }
}

impl<'a, K, V> Iterator for Iter<'a, K, V> {
    type Item = (&'a K, &'a V);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (node, idx) = self.stack.last_mut()?;
            let node: &'a Node<K, V> = node;
            match node {
                Node::Leaf(e) => {
                    if *idx < e.len() {
                        *idx += 1;
                        self.remaining -= 1;
                        let (k, v) = &e[*idx - 1];
                        return Some((k, v));
                    }
                    self.stack.pop();
                }
                Node::Inner { children, .. } => {
                    if *idx + 1 < children.len() {
                        *idx += 1;
                        let c = &children[*idx];
                        self.descend_left(c);
                    } else {
                        self.stack.pop();
                    }
                }
            }
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl<K, V> ExactSizeIterator for Iter<'_, K, V> {}

/// A position in one fixed version of a tree. Stepping never observes
/// later versions, since the bookmark holds its own path of shared nodes.
pub struct Bookmark<K, V> {
    path: Vec<(Arc<Node<K, V>>, usize)>,
}

impl<K, V> Clone for Bookmark<K, V> {
    fn clone(&self) -> Self {
        Bookmark { path: self.path.clone() }
    }
}

impl<K: fmt::Debug, V: fmt::Debug> fmt::Debug for Bookmark<K, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bookmark").field("key", self.key()).field("value", self.value()).finish()
    }
}

/// Direction for [`Bookmark::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl<K, V> Bookmark<K, V> {
    fn descend(path: &mut Vec<(Arc<Node<K, V>>, usize)>, mut node: Arc<Node<K, V>>, rightmost: bool) {
        loop {
            let i = if rightmost { node.width() - 1 } else { 0 };
            let next = match node.as_ref() {
                Node::Leaf(_) => None,
                Node::Inner { children, .. } => Some(children[i].clone()),
            };
            path.push((node, i));
            match next {
                Some(n) => node = n,
                None => return,
            }
        }
    }

    fn leaf(&self) -> &[(K, V)] {
        match self.path.last().map(|(n, _)| n.as_ref()) {
            Some(Node::Leaf(e)) => e,
            _ => unreachable!("bookmark path ends in a leaf"),
        }
    }

    fn index(&self) -> usize {
        self.path.last().map(|(_, i)| *i).unwrap_or(0)
    }

    pub fn key(&self) -> &K {
        &self.leaf()[self.index()].0
    }

    pub fn value(&self) -> &V {
        &self.leaf()[self.index()].1
    }

    pub fn entry(&self) -> (&K, &V) {
        let (k, v) = &self.leaf()[self.index()];
        (k, v)
    }

    pub fn step(&self, dir: Direction) -> Option<Self> {
        match dir {
            Direction::Forward => self.next(),
            Direction::Backward => self.prev(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&self) -> Option<Self> {
        let i = self.index();
        if i + 1 < self.leaf().len() {
            let mut path = self.path.clone();
            path.last_mut().unwrap().1 = i + 1;
            return Some(Bookmark { path });
        }
        self.climb_next()
    }

    fn climb_next(&self) -> Option<Self> {
        let mut path = self.path.clone();
        path.pop();
        while let Some((node, i)) = path.pop() {
            if i + 1 < node.width() {
                let child = match node.as_ref() {
                    Node::Inner { children, .. } => children[i + 1].clone(),
                    Node::Leaf(_) => unreachable!(),
                };
                path.push((node, i + 1));
                Self::descend(&mut path, child, false);
                return Some(Bookmark { path });
            }
        }
        None
    }

    pub fn prev(&self) -> Option<Self> {
        let i = self.index();
        if i > 0 {
            let mut path = self.path.clone();
            path.last_mut().unwrap().1 = i - 1;
            return Some(Bookmark { path });
        }
        let mut path = self.path.clone();
        path.pop();
        while let Some((node, i)) = path.pop() {
            if i > 0 {
                let child = match node.as_ref() {
                    Node::Inner { children, .. } => children[i - 1].clone(),
                    Node::Leaf(_) => unreachable!(),
                };
                path.push((node, i - 1));
                Self::descend(&mut path, child, true);
                return Some(Bookmark { path });
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn build_seq(n: i64) -> PTree<i64, i64> {
        (1..=n).fold(PTree::new(), |t, k| t.add(k, k * 10))
    }

    #[test]
    fn singleton_and_replace() {
        let t = PTree::new().add(5, "a");
        assert_eq!(t.len(), 1);
        assert_eq!(t.get(&5), Some(&"a"));
        let t2 = t.add(5, "b");
        assert_eq!(t2.len(), 1);
        assert_eq!(t2.get(&5), Some(&"b"));
        assert_eq!(t.get(&5), Some(&"a"));
    }

    #[test]
    fn remove_singleton_and_absent() {
        let t = PTree::new().add(5, "a");
        assert!(t.remove(&5).is_empty());
        let t = build_seq(100);
        let same = t.remove(&1000);
        assert!(same.ptr_eq(&t));
        assert_eq!(same, t);
    }

    #[test]
    fn get_on_empty() {
        let t: PTree<i64, i64> = PTree::new();
        assert_eq!(t.get(&1), None);
        assert!(t.first().is_none());
        assert!(t.seek(&0).is_none());
    }

    #[test]
    fn seek_finds_next_key() {
        let t = PTree::new().add(1, ()).add(3, ()).add(5, ());
        assert_eq!(*t.seek(&2).unwrap().key(), 3);
        assert_eq!(*t.seek(&5).unwrap().key(), 5);
        assert!(t.seek(&6).is_none());
    }

    #[test]
    fn seek_crosses_leaf_boundaries() {
        let t = build_seq(1000);
        for k in 0..=1000 {
            let want = if k < 1 { 1 } else { k };
            assert_eq!(*t.seek(&k).unwrap().key(), want);
        }
        let sparse: PTree<i64, ()> = (0..500).map(|k| (k * 2, ())).collect();
        for k in 0..998 {
            assert_eq!(*sparse.seek(&k).unwrap().key(), k + (k % 2));
        }
    }

    #[test]
    fn step_past_last_is_absent() {
        let t = build_seq(3);
        let last = t.last().unwrap();
        assert!(last.next().is_none());
        assert!(t.first().unwrap().prev().is_none());
    }

    #[test]
    fn forward_then_backward_walk_mirror() {
        let t = build_seq(2000);
        let mut fwd = Vec::new();
        let mut b = t.first();
        while let Some(bm) = b {
            fwd.push(*bm.key());
            b = bm.step(Direction::Forward);
        }
        let mut back = Vec::new();
        let mut b = t.last();
        while let Some(bm) = b {
            back.push(*bm.key());
            b = bm.step(Direction::Backward);
        }
        back.reverse();
        assert_eq!(fwd, back);
        assert_eq!(fwd, (1..=2000).collect::<Vec<_>>());
    }

    #[test]
    fn bookmark_ignores_newer_versions() {
        let t = build_seq(50);
        let mut bm = t.seek(&10).unwrap();
        let t2 = t.add(11_000, 0).add(25, -1).remove(&30);
        let mut seen = vec![*bm.key()];
        while let Some(n) = bm.next() {
            seen.push(*n.key());
            assert_eq!(*n.value(), n.key() * 10);
            bm = n;
        }
        assert_eq!(seen, (10..=50).collect::<Vec<_>>());
        assert_eq!(t2.get(&25), Some(&-1));
    }

    #[test]
    fn interleaved_adds_do_not_disturb_walk() {
        let mut cur = build_seq(300);
        let snapshot: Vec<i64> = cur.keys().copied().collect();
        let mut bm = cur.first();
        let mut walked = Vec::new();
        let mut extra = 10_000;
        while let Some(b) = bm {
            walked.push(*b.key());
            if extra < 10_100 {
                cur = cur.add(extra, 0).add(-extra, 0);
                extra += 1;
            }
            bm = b.next();
        }
        assert_eq!(walked, snapshot);
        assert_eq!(cur.len(), 300 + 200);
    }

    #[test]
    fn sequential_insert_structural_sharing() {
        let t = build_seq(10_000);
        let before: Vec<(i64, i64)> = t.iter().map(|(k, v)| (*k, *v)).collect();
        let n0 = nodes_built();
        let t2 = t.add(10_001, 0);
        let built = nodes_built() - n0;
        assert!(built <= 7, "built {built} nodes");
        let old: std::collections::HashSet<usize> = t.node_addresses().into_iter().collect();
        let fresh = t2.node_addresses().into_iter().filter(|a| !old.contains(a)).count();
        assert_eq!(fresh as u64, built);
        let after: Vec<(i64, i64)> = t.iter().map(|(k, v)| (*k, *v)).collect();
        assert_eq!(before, after);
        t2.check_shape().unwrap();
    }

    #[test]
    fn remove_half_matches_oracle() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut t: PTree<i64, i64> = PTree::new();
        let mut oracle = BTreeMap::new();
        for k in 0..10_000 {
            t = t.add(k, k);
            oracle.insert(k, k);
        }
        let mut keys: Vec<i64> = (0..10_000).collect();
        keys.shuffle(&mut rng);
        for k in &keys[..5000] {
            t = t.remove(k);
            oracle.remove(k);
        }
        t.check_shape().unwrap();
        assert!(t.iter().map(|(k, v)| (*k, *v)).eq(oracle.into_iter()));
        for k in 0..10_000 {
            assert_eq!(t.get(&k).is_some(), !keys[..5000].contains(&k));
        }
    }

    #[derive(Debug, Clone)]
    enum Op {
        Add(u16, u32),
        Remove(u16),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            3 => (any::<u16>(), any::<u32>()).prop_map(|(k, v)| Op::Add(k % 2000, v)),
            2 => any::<u16>().prop_map(|k| Op::Remove(k % 2000)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matches_ordered_map_oracle(ops in proptest::collection::vec(op(), 1..600), order in 2usize..6) {
            let mut t = PTree::with_order(order);
            let mut oracle = BTreeMap::new();
            for op in ops {
                let before: Vec<(u16, u32)> = t.iter().map(|(k, v)| (*k, *v)).collect();
                let prev = t.clone();
                t = match op {
                    Op::Add(k, v) => { oracle.insert(k, v); t.add(k, v) }
                    Op::Remove(k) => { oracle.remove(&k); t.remove(&k) }
                };
                // persistence: the previous version is unaffected
                let after: Vec<(u16, u32)> = prev.iter().map(|(k, v)| (*k, *v)).collect();
                prop_assert_eq!(before, after);
                prop_assert!(t.check_shape().is_ok(), "{:?}", t.check_shape());
            }
            prop_assert!(t.iter().map(|(k, v)| (*k, *v)).eq(oracle.iter().map(|(k, v)| (*k, *v))));
        }

        #[test]
        fn add_builds_few_nodes(keys in proptest::collection::vec(any::<u32>(), 1..3000), extra in any::<u32>()) {
            let t: PTree<u32, ()> = keys.iter().map(|k| (*k, ())).collect();
            let old: std::collections::HashSet<usize> = t.node_addresses().into_iter().collect();
            let t2 = t.add(extra, ());
            let fresh = t2.node_addresses().into_iter().filter(|a| !old.contains(a)).count();
            // one copy per level on the path, plus one node per split, plus a new root
            prop_assert!(fresh <= 2 * t.depth() + 1);
        }
    }
}
