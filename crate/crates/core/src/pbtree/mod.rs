//! Shareable ordered structures: [`PTree`], a persistent B-tree with
//! path-copying updates, and [`PList`], a dense positional list on top of it.
//! Traversal goes through [`Bookmark`]s bound to one tree version.

mod key;
mod list;
mod tree;

pub use key::{Key, KeyError, KeyKind};
pub use list::{PList, RangeError};
pub use tree::{nodes_built, Bookmark, Direction, Iter, PTree, DEFAULT_ORDER};
