use std::fmt;

use serde::Serialize;

const UNIT: i64 = 1 << 60;

/// 64-bit identity of every database object, log record and row.
///
/// The value alone decides what kind of identity it is: committed file
/// positions sit below `4·2^60`, transaction and session temporaries in
/// `[4·2^60, 6·2^60)`, compiled objects in `[6·2^60, 7·2^60)` and query
/// instances above `7·2^60`. Negative values are built-in.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Uid(pub i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UidRange {
    Builtin,
    Committed,
    Transaction,
    Session,
    Compiled,
    Heap,
}

impl Uid {
    pub const TRANSACTION_BASE: i64 = 4 * UNIT;
    pub const SESSION_BASE: i64 = 5 * UNIT;
    pub const COMPILED_BASE: i64 = 6 * UNIT;
    pub const HEAP_BASE: i64 = 7 * UNIT;

    pub const INTEGER: Uid = Uid(-1);
    pub const NUMERIC: Uid = Uid(-2);
    pub const REAL: Uid = Uid(-3);
    pub const CHAR: Uid = Uid(-4);
    pub const BOOLEAN: Uid = Uid(-5);
    pub const DATE: Uid = Uid(-6);
    /// Pseudo role/user standing for everybody.
    pub const PUBLIC: Uid = Uid(-20);
    /// Author of the bootstrap transaction.
    pub const SYSTEM: Uid = Uid(-30);
    pub const NONE: Uid = Uid(-99);

    pub fn range(self) -> UidRange {
        match self.0 {
            v if v < 0 => UidRange::Builtin,
            v if v < Self::TRANSACTION_BASE => UidRange::Committed,
            v if v < Self::SESSION_BASE => UidRange::Transaction,
            v if v < Self::COMPILED_BASE => UidRange::Session,
            v if v < Self::HEAP_BASE => UidRange::Compiled,
            _ => UidRange::Heap,
        }
    }

    pub fn is_committed(self) -> bool {
        self.range() == UidRange::Committed
    }

    pub fn is_temporary(self) -> bool {
        self.range() == UidRange::Transaction
    }

    pub fn is_builtin(self) -> bool {
        self.0 < 0
    }

    pub fn is_heap(self) -> bool {
        self.range() == UidRange::Heap
    }

    pub fn temp(n: i64) -> Uid {
        Uid(Self::TRANSACTION_BASE + n)
    }

    pub fn heap(n: i64) -> Uid {
        Uid(Self::HEAP_BASE + n)
    }
}

impl fmt::Debug for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.range() {
            UidRange::Builtin | UidRange::Committed => write!(f, "#{}", self.0),
            UidRange::Transaction => write!(f, "#t{}", self.0 - Self::TRANSACTION_BASE),
            UidRange::Session => write!(f, "#s{}", self.0 - Self::SESSION_BASE),
            UidRange::Compiled => write!(f, "#c{}", self.0 - Self::COMPILED_BASE),
            UidRange::Heap => write!(f, "#h{}", self.0 - Self::HEAP_BASE),
        }
    }
}

impl fmt::Display for Uid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_are_decidable() {
        assert_eq!(Uid(0).range(), UidRange::Committed);
        assert_eq!(Uid(4 * UNIT - 1).range(), UidRange::Committed);
        assert_eq!(Uid(4 * UNIT).range(), UidRange::Transaction);
        assert_eq!(Uid(5 * UNIT).range(), UidRange::Session);
        assert_eq!(Uid(6 * UNIT).range(), UidRange::Compiled);
        assert_eq!(Uid(7 * UNIT - 1).range(), UidRange::Compiled);
        assert_eq!(Uid(7 * UNIT).range(), UidRange::Heap);
        assert_eq!(Uid(i64::MAX).range(), UidRange::Heap);
        assert_eq!(Uid::INTEGER.range(), UidRange::Builtin);
    }
}
