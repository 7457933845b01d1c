use crate::pbtree::{Key, PTree};
use crate::physlog::{Domain, IndexKind, MetaItem, Uid, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum ObjectKind {
    Table,
    Column,
    Index,
    View,
    RestView,
    Role,
    User,
    Domain,
}

/// A schema object as installed from its defining physical and any later
/// alterations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaObject {
    pub uid: Uid,
    pub name: String,
    /// User who committed the definition.
    pub owner: Uid,
    /// Role in force when it was defined; bodies run under this role.
    pub definer: Uid,
    /// Latest definition-affecting physical.
    pub schema_key: Uid,
    pub metadata: Vec<MetaItem>,
    pub detail: Detail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Detail {
    Table(TableDef),
    Column(ColumnDef),
    Index(IndexDef),
    View(ViewDef),
    RestView(RestViewDef),
    Role,
    User { password: Option<String> },
    Domain(Domain),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TableDef {
    /// Column uids in declaration order.
    pub columns: Vec<Uid>,
    pub indexes: Vec<Uid>,
    pub primary: Option<Uid>,
    pub checks: Vec<CheckDef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckDef {
    pub name: String,
    pub source: String,
    pub definer: Uid,
    pub pos: Uid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub table: Uid,
    pub seq: u32,
    pub domain: Domain,
    pub domain_uid: Uid,
    pub not_null: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexDef {
    pub table: Uid,
    pub columns: Vec<Uid>,
    pub kind: IndexKind,
}

impl IndexDef {
    pub fn is_unique(&self) -> bool {
        matches!(self.kind, IndexKind::Primary | IndexKind::Unique)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDef {
    pub columns: Vec<String>,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestViewDef {
    pub columns: Vec<(String, Domain)>,
    pub using: Option<Uid>,
}

impl SchemaObject {
    pub fn kind(&self) -> ObjectKind {
        match self.detail {
            Detail::Table(_) => ObjectKind::Table,
            Detail::Column(_) => ObjectKind::Column,
            Detail::Index(_) => ObjectKind::Index,
            Detail::View(_) => ObjectKind::View,
            Detail::RestView(_) => ObjectKind::RestView,
            Detail::Role => ObjectKind::Role,
            Detail::User { .. } => ObjectKind::User,
            Detail::Domain(_) => ObjectKind::Domain,
        }
    }

    pub fn table(&self) -> Option<&TableDef> {
        match &self.detail {
            Detail::Table(t) => Some(t),
            _ => None,
        }
    }

    pub fn column(&self) -> Option<&ColumnDef> {
        match &self.detail {
            Detail::Column(c) => Some(c),
            _ => None,
        }
    }

    pub fn index(&self) -> Option<&IndexDef> {
        match &self.detail {
            Detail::Index(i) => Some(i),
            _ => None,
        }
    }

    /// First metadata item with this word.
    pub fn meta(&self, word: &str) -> Option<&MetaItem> {
        self.metadata.iter().find(|m| m.word.eq_ignore_ascii_case(word))
    }

    /// String argument of a metadata word such as `URL`.
    pub fn meta_arg(&self, word: &str) -> Option<&str> {
        self.meta(word).and_then(|m| m.arg.as_deref())
    }
}

/// One table row. Its uid is the position of the Record that created it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub uid: Uid,
    /// Position of the latest Record or Update for this row.
    pub last_change: Uid,
    pub fields: PTree<Uid, Value>,
}

impl Row {
    pub fn get(&self, column: Uid) -> Value {
        self.fields.get(&column).cloned().unwrap_or(Value::Null)
    }
}

/// Rows of one table and its index trees. Unique indexes map the key tuple
/// to the row; other indexes append the row uid to the tuple.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TableData {
    pub rows: PTree<Uid, Row>,
    pub indexes: PTree<Uid, PTree<Key, Uid>>,
    /// Latest physical that changed any row.
    pub last_change: Uid,
}

/// Key tuple of `row` under `columns`, or `None` if any part is NULL.
pub fn key_of(row: &Row, columns: &[Uid]) -> Option<Key> {
    let mut parts = Vec::with_capacity(columns.len());
    for c in columns {
        parts.push(row.get(*c).to_key()?);
    }
    Some(Key::Tuple(parts))
}

/// Key tuple from values, or `None` if any is NULL.
pub fn key_of_values(values: &[Value]) -> Option<Key> {
    values.iter().map(|v| v.to_key()).collect::<Option<Vec<_>>>().map(Key::Tuple)
}

/// Index entry key for a row: the key itself for unique indexes, the key
/// extended with the row uid otherwise.
pub fn entry_key(def: &IndexDef, key: Key, row: Uid) -> Key {
    if def.is_unique() {
        key
    } else {
        let Key::Tuple(mut parts) = key else { unreachable!("index keys are tuples") };
        parts.push(Key::int(row.0));
        Key::Tuple(parts)
    }
}
