//! Physical records and their wire format.
//!
//! Layout of one record: a kind tag byte (`0xA1..=0xB0`), an unsigned
//! LEB128 body length, then the body. Inside the body, counts and lengths
//! are unsigned LEB128, uids and scales are zigzag LEB128, strings are
//! length-prefixed UTF-8, Integers are a sign byte plus big-endian magnitude
//! bytes, and Reals are an Integer mantissa followed by a zigzag exponent.

use std::collections::HashMap;

use chrono::NaiveDate;
use num_bigint::{BigInt, Sign};

use super::value::{date_from_days, days_from_ce};
use super::{Domain, Uid, Value};
use crate::error::{Error, Result};
use crate::numeric::Decimal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Kind {
    Transaction = 0xA1,
    Table,
    Column,
    Record,
    Update,
    Delete,
    Index,
    View,
    RestView,
    Role,
    User,
    Grant,
    Metadata,
    Domain,
    Drop,
    Alter,
}

impl Kind {
    fn from_tag(tag: u8) -> Option<Kind> {
        use Kind::*;
        const ALL: [Kind; 16] = [
            Transaction, Table, Column, Record, Update, Delete, Index, View, RestView, Role, User,
            Grant, Metadata, Domain, Drop, Alter,
        ];
        ALL.get(tag.checked_sub(0xA1)? as usize).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum FkAction {
    Cascade,
    Restrict,
    SetNull,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum IndexKind {
    Primary,
    Unique,
    /// `refers` is the referenced table's primary or unique index.
    Foreign { refers: Uid, on_delete: FkAction, on_update: FkAction },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub enum AlterChange {
    Rename(String),
    AddCheck { name: String, source: String },
    ViewSource(String),
}

/// One metadata word with its optional string argument and identifiers,
/// e.g. `URL 'http://..'`, `ETAG`, `PIE(CUST,CUSTSALES)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, serde::Serialize)]
pub struct MetaItem {
    pub word: String,
    pub arg: Option<String>,
    pub ids: Vec<String>,
}

impl MetaItem {
    pub fn flag(word: &str) -> Self {
        MetaItem { word: word.to_string(), arg: None, ids: vec![] }
    }

    pub fn with_arg(word: &str, arg: impl Into<String>) -> Self {
        MetaItem { word: word.to_string(), arg: Some(arg.into()), ids: vec![] }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize)]
pub struct Privileges(pub u8);

impl Privileges {
    pub const SELECT: Privileges = Privileges(1);
    pub const INSERT: Privileges = Privileges(2);
    pub const UPDATE: Privileges = Privileges(4);
    pub const DELETE: Privileges = Privileges(8);
    /// Use of a role.
    pub const USAGE: Privileges = Privileges(16);
    pub const OWNERSHIP: Privileges = Privileges(32);
    pub const ALL: Privileges = Privileges(1 | 2 | 4 | 8);

    pub fn contains(self, other: Privileges) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn union(self, other: Privileges) -> Privileges {
        Privileges(self.0 | other.0)
    }

    pub fn minus(self, other: Privileges) -> Privileges {
        Privileges(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl std::fmt::Debug for Privileges {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names = [
            (Self::SELECT, "SELECT"),
            (Self::INSERT, "INSERT"),
            (Self::UPDATE, "UPDATE"),
            (Self::DELETE, "DELETE"),
            (Self::USAGE, "USAGE"),
            (Self::OWNERSHIP, "OWNERSHIP"),
        ];
        let set: Vec<&str> = names.iter().filter(|(p, _)| self.contains(*p)).map(|(_, n)| *n).collect();
        write!(f, "{}", set.join("|"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Transaction { user: Uid, role: Uid, timestamp: i64, count: u64 },
    Table { name: String },
    Column { table: Uid, name: String, seq: u32, domain: Uid, not_null: bool },
    Record { table: Uid, fields: Vec<(Uid, Value)> },
    Update { table: Uid, row: Uid, fields: Vec<(Uid, Value)> },
    Delete { table: Uid, row: Uid },
    Index { table: Uid, columns: Vec<Uid>, kind: IndexKind },
    View { name: String, columns: Vec<String>, source: String },
    RestView { name: String, columns: Vec<(String, Uid)>, using: Option<Uid>, url: Option<String> },
    Role { name: String },
    User { name: String, password: Option<String> },
    Grant { privileges: Privileges, object: Uid, grantee: Uid, revoke: bool },
    Metadata { target: Uid, items: Vec<MetaItem> },
    Domain { domain: Domain },
    Drop { target: Uid },
    Alter { target: Uid, change: AlterChange },
}

/// A durable log record. `pos` is its defining position: the file offset
/// once committed, a transaction-temporary uid while staged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Physical {
    pub pos: Uid,
    pub payload: Payload,
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::Transaction { .. } => Kind::Transaction,
            Payload::Table { .. } => Kind::Table,
            Payload::Column { .. } => Kind::Column,
            Payload::Record { .. } => Kind::Record,
            Payload::Update { .. } => Kind::Update,
            Payload::Delete { .. } => Kind::Delete,
            Payload::Index { .. } => Kind::Index,
            Payload::View { .. } => Kind::View,
            Payload::RestView { .. } => Kind::RestView,
            Payload::Role { .. } => Kind::Role,
            Payload::User { .. } => Kind::User,
            Payload::Grant { .. } => Kind::Grant,
            Payload::Metadata { .. } => Kind::Metadata,
            Payload::Domain { .. } => Kind::Domain,
            Payload::Drop { .. } => Kind::Drop,
            Payload::Alter { .. } => Kind::Alter,
        }
    }

    /// Every uid this payload refers to, excluding its own position.
    pub fn references(&self) -> Vec<Uid> {
        let mut out = Vec::new();
        self.visit_clone(&mut |u| {
            out.push(*u);
            Ok(())
        })
        .expect("collecting never fails");
        out
    }

    fn visit_uids(&mut self, f: &mut impl FnMut(&mut Uid) -> Result<()>) -> Result<()> {
        match self {
            Payload::Transaction { user, role, .. } => {
                f(user)?;
                f(role)?;
            }
            Payload::Table { .. } | Payload::Role { .. } | Payload::User { .. } | Payload::Domain { .. } => {}
            Payload::View { .. } => {}
            Payload::Column { table, domain, .. } => {
                f(table)?;
                f(domain)?;
            }
            Payload::Record { table, fields } => {
                f(table)?;
                for (c, _) in fields {
                    f(c)?;
                }
            }
            Payload::Update { table, row, fields } => {
                f(table)?;
                f(row)?;
                for (c, _) in fields {
                    f(c)?;
                }
            }
            Payload::Delete { table, row } => {
                f(table)?;
                f(row)?;
            }
            Payload::Index { table, columns, kind } => {
                f(table)?;
                for c in columns {
                    f(c)?;
                }
                if let IndexKind::Foreign { refers, .. } = kind {
                    f(refers)?;
                }
            }
            Payload::RestView { columns, using, .. } => {
                for (_, d) in columns {
                    f(d)?;
                }
                if let Some(u) = using {
                    f(u)?;
                }
            }
            Payload::Grant { object, grantee, .. } => {
                f(object)?;
                f(grantee)?;
            }
            Payload::Metadata { target, .. } | Payload::Drop { target } | Payload::Alter { target, .. } => {
                f(target)?;
            }
        }
        Ok(())
    }
}

impl Payload {
    fn visit_clone(&self, f: &mut impl FnMut(&mut Uid) -> Result<()>) -> Result<Payload> {
        let mut p = self.clone();
        p.visit_uids(f)?;
        Ok(p)
    }
}

impl Physical {
    pub fn new(pos: Uid, payload: Payload) -> Self {
        Physical { pos, payload }
    }

    pub fn kind(&self) -> Kind {
        self.payload.kind()
    }

    /// Replace every transaction-temporary uid (including `pos`) using
    /// `map`. Committed and built-in uids pass through unchanged.
    pub fn relocate(&self, map: &HashMap<Uid, Uid>) -> Result<Physical> {
        let mut sub = |u: &mut Uid| {
            if u.is_temporary() {
                *u = *map.get(u).ok_or(Error::Relocation(*u))?;
            }
            Ok(())
        };
        let payload = self.payload.visit_clone(&mut sub)?;
        let mut pos = self.pos;
        sub(&mut pos)?;
        Ok(Physical { pos, payload })
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut body = Writer::default();
        body.payload(&self.payload)?;
        let mut out = Vec::with_capacity(body.buf.len() + 4);
        out.push(self.kind() as u8);
        write_uvarint(&mut out, body.buf.len() as u64);
        out.extend_from_slice(&body.buf);
        Ok(out)
    }

    /// Decode the record starting at `pos` within `bytes`, where `bytes[0]`
    /// sits at file offset `base`. Returns the physical and the offset just
    /// past it.
    pub fn decode(bytes: &[u8], base: u64, pos: u64) -> Result<(Physical, u64)> {
        let start = (pos - base) as usize;
        let corrupt = |off: u64, msg: &str| Error::Corruption { offset: off, message: msg.to_string() };
        let tag = *bytes.get(start).ok_or_else(|| corrupt(pos, "truncated record"))?;
        let kind = Kind::from_tag(tag).ok_or_else(|| corrupt(pos, &format!("invalid kind tag 0x{tag:02x}")))?;
        let mut r = Reader { bytes, at: start + 1, base };
        let len = r.uvarint().map_err(|_| corrupt(pos, "bad record length"))? as usize;
        let body_start = r.at;
        let end = body_start.checked_add(len).filter(|e| *e <= bytes.len()).ok_or_else(|| corrupt(pos, "truncated record"))?;
        let mut r = Reader { bytes: &bytes[..end], at: body_start, base };
        let payload = r.payload(kind).map_err(|e| match e {
            Error::Corruption { message, .. } => corrupt(pos, &message),
            other => other,
        })?;
        if r.at != end {
            return Err(corrupt(pos, "record length mismatch"));
        }
        Ok((Physical { pos: Uid(pos as i64), payload }, base + end as u64))
    }
}

pub fn write_uvarint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    ((v >> 1) as i64) ^ -((v & 1) as i64)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u(&mut self, v: u64) {
        write_uvarint(&mut self.buf, v);
    }

    fn i(&mut self, v: i64) {
        self.u(zigzag(v));
    }

    fn uid(&mut self, u: Uid) {
        self.i(u.0);
    }

    fn byte(&mut self, b: u8) {
        self.buf.push(b);
    }

    fn str(&mut self, s: &str) {
        self.u(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn opt_str(&mut self, s: &Option<String>) {
        match s {
            None => self.byte(0),
            Some(s) => {
                self.byte(1);
                self.str(s);
            }
        }
    }

    fn integer(&mut self, i: &BigInt) -> Result<()> {
        Value::Integer(i.clone()).check_bounds()?;
        let (sign, mag) = i.to_bytes_be();
        self.byte(if sign == Sign::Minus { 1 } else { 0 });
        let mag: &[u8] = if i.sign() == Sign::NoSign { &[] } else { &mag };
        self.u(mag.len() as u64);
        self.buf.extend_from_slice(mag);
        Ok(())
    }

    fn value(&mut self, v: &Value) -> Result<()> {
        match v {
            Value::Null => self.byte(0),
            Value::Integer(i) => {
                self.byte(1);
                self.integer(i)?;
            }
            Value::Real(d) => {
                self.byte(2);
                self.integer(d.mantissa())?;
                self.i(d.exponent() as i64);
            }
            Value::Char(s) => {
                self.byte(3);
                self.str(s);
            }
            Value::Boolean(b) => {
                self.byte(4);
                self.byte(*b as u8);
            }
            Value::Date(d) => {
                self.byte(5);
                self.i(days_from_ce(d));
            }
        }
        Ok(())
    }

    fn opt_u32(&mut self, v: Option<u32>) {
        match v {
            None => self.byte(0),
            Some(x) => {
                self.byte(1);
                self.u(x as u64);
            }
        }
    }

    fn domain(&mut self, d: &Domain) {
        match d {
            Domain::Integer => self.byte(1),
            Domain::Numeric { precision, scale } => {
                self.byte(2);
                self.opt_u32(*precision);
                self.opt_u32(*scale);
            }
            Domain::Real => self.byte(3),
            Domain::Char { length } => {
                self.byte(4);
                self.opt_u32(*length);
            }
            Domain::Boolean => self.byte(5),
            Domain::Date => self.byte(6),
        }
    }

    fn fields(&mut self, fields: &[(Uid, Value)]) -> Result<()> {
        self.u(fields.len() as u64);
        for (c, v) in fields {
            self.uid(*c);
            self.value(v)?;
        }
        Ok(())
    }

    fn action(&mut self, a: FkAction) {
        self.byte(match a {
            FkAction::Cascade => 1,
            FkAction::Restrict => 2,
            FkAction::SetNull => 3,
        });
    }

    fn payload(&mut self, p: &Payload) -> Result<()> {
        match p {
            Payload::Transaction { user, role, timestamp, count } => {
                self.uid(*user);
                self.uid(*role);
                self.i(*timestamp);
                self.u(*count);
            }
            Payload::Table { name } | Payload::Role { name } => self.str(name),
            Payload::Column { table, name, seq, domain, not_null } => {
                self.uid(*table);
                self.str(name);
                self.u(*seq as u64);
                self.uid(*domain);
                self.byte(*not_null as u8);
            }
            Payload::Record { table, fields } => {
                self.uid(*table);
                self.fields(fields)?;
            }
            Payload::Update { table, row, fields } => {
                self.uid(*table);
                self.uid(*row);
                self.fields(fields)?;
            }
            Payload::Delete { table, row } => {
                self.uid(*table);
                self.uid(*row);
            }
            Payload::Index { table, columns, kind } => {
                self.uid(*table);
                self.u(columns.len() as u64);
                for c in columns {
                    self.uid(*c);
                }
                match kind {
                    IndexKind::Primary => self.byte(1),
                    IndexKind::Unique => self.byte(2),
                    IndexKind::Foreign { refers, on_delete, on_update } => {
                        self.byte(3);
                        self.uid(*refers);
                        self.action(*on_delete);
                        self.action(*on_update);
                    }
                }
            }
            Payload::View { name, columns, source } => {
                self.str(name);
                self.u(columns.len() as u64);
                for c in columns {
                    self.str(c);
                }
                self.str(source);
            }
            Payload::RestView { name, columns, using, url } => {
                self.str(name);
                self.u(columns.len() as u64);
                for (c, d) in columns {
                    self.str(c);
                    self.uid(*d);
                }
                match using {
                    None => self.byte(0),
                    Some(u) => {
                        self.byte(1);
                        self.uid(*u);
                    }
                }
                self.opt_str(url);
            }
            Payload::User { name, password } => {
                self.str(name);
                self.opt_str(password);
            }
            Payload::Grant { privileges, object, grantee, revoke } => {
                self.byte(privileges.0);
                self.uid(*object);
                self.uid(*grantee);
                self.byte(*revoke as u8);
            }
            Payload::Metadata { target, items } => {
                self.uid(*target);
                self.u(items.len() as u64);
                for m in items {
                    self.str(&m.word);
                    self.opt_str(&m.arg);
                    self.u(m.ids.len() as u64);
                    for id in &m.ids {
                        self.str(id);
                    }
                }
            }
            Payload::Domain { domain } => self.domain(domain),
            Payload::Drop { target } => self.uid(*target),
            Payload::Alter { target, change } => {
                self.uid(*target);
                match change {
                    AlterChange::Rename(n) => {
                        self.byte(1);
                        self.str(n);
                    }
                    AlterChange::AddCheck { name, source } => {
                        self.byte(2);
                        self.str(name);
                        self.str(source);
                    }
                    AlterChange::ViewSource(s) => {
                        self.byte(3);
                        self.str(s);
                    }
                }
            }
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    base: u64,
}

impl Reader<'_> {
    fn fail<T>(&self, msg: &str) -> Result<T> {
        Err(Error::Corruption { offset: self.base + self.at as u64, message: msg.to_string() })
    }

    fn byte(&mut self) -> Result<u8> {
        match self.bytes.get(self.at) {
            Some(b) => {
                self.at += 1;
                Ok(*b)
            }
            None => self.fail("truncated record"),
        }
    }

    fn uvarint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        self.fail("varint too long")
    }

    fn i(&mut self) -> Result<i64> {
        Ok(unzigzag(self.uvarint()?))
    }

    fn uid(&mut self) -> Result<Uid> {
        Ok(Uid(self.i()?))
    }

    fn len(&mut self) -> Result<usize> {
        let n = self.uvarint()? as usize;
        if n > self.bytes.len() - self.at {
            return self.fail("length exceeds record");
        }
        Ok(n)
    }

    fn count(&mut self) -> Result<usize> {
        // every counted element occupies at least one byte
        self.len()
    }

    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        let s = std::str::from_utf8(&self.bytes[self.at..self.at + n]);
        match s {
            Ok(s) => {
                self.at += n;
                Ok(s.to_string())
            }
            Err(_) => self.fail("invalid UTF-8"),
        }
    }

    fn opt_str(&mut self) -> Result<Option<String>> {
        match self.byte()? {
            0 => Ok(None),
            1 => Ok(Some(self.str()?)),
            _ => self.fail("bad option tag"),
        }
    }

    fn flag(&mut self) -> Result<bool> {
        match self.byte()? {
            0 => Ok(false),
            1 => Ok(true),
            _ => self.fail("bad boolean"),
        }
    }

    fn integer(&mut self) -> Result<BigInt> {
        let sign = self.byte()?;
        let n = self.len()?;
        if n > 255 {
            return self.fail("integer too long");
        }
        let mag = &self.bytes[self.at..self.at + n];
        self.at += n;
        let sign = match (sign, n) {
            (0, 0) => return Ok(BigInt::from(0)),
            (0, _) => Sign::Plus,
            (1, _) => Sign::Minus,
            _ => return self.fail("bad sign byte"),
        };
        Ok(BigInt::from_bytes_be(sign, mag))
    }

    fn value(&mut self) -> Result<Value> {
        Ok(match self.byte()? {
            0 => Value::Null,
            1 => Value::Integer(self.integer()?),
            2 => {
                let m = self.integer()?;
                let e = self.i()?;
                let e = i32::try_from(e).or_else(|_| self.fail("scale out of range"))?;
                Value::Real(Decimal::new(m, e))
            }
            3 => Value::Char(self.str()?),
            4 => Value::Boolean(self.flag()?),
            5 => {
                let d = self.i()?;
                let date: Option<NaiveDate> = date_from_days(d);
                Value::Date(date.map_or_else(|| self.fail("bad date"), Ok)?)
            }
            _ => return self.fail("bad value tag"),
        })
    }

    fn opt_u32(&mut self) -> Result<Option<u32>> {
        match self.byte()? {
            0 => Ok(None),
            1 => Ok(Some(self.uvarint()? as u32)),
            _ => self.fail("bad option tag"),
        }
    }

    fn domain(&mut self) -> Result<Domain> {
        Ok(match self.byte()? {
            1 => Domain::Integer,
            2 => Domain::Numeric { precision: self.opt_u32()?, scale: self.opt_u32()? },
            3 => Domain::Real,
            4 => Domain::Char { length: self.opt_u32()? },
            5 => Domain::Boolean,
            6 => Domain::Date,
            _ => return self.fail("bad domain tag"),
        })
    }

    fn fields(&mut self) -> Result<Vec<(Uid, Value)>> {
        let n = self.count()?;
        (0..n).map(|_| Ok((self.uid()?, self.value()?))).collect()
    }

    fn action(&mut self) -> Result<FkAction> {
        Ok(match self.byte()? {
            1 => FkAction::Cascade,
            2 => FkAction::Restrict,
            3 => FkAction::SetNull,
            _ => return self.fail("bad referential action"),
        })
    }

    fn payload(&mut self, kind: Kind) -> Result<Payload> {
        Ok(match kind {
            Kind::Transaction => Payload::Transaction {
                user: self.uid()?,
                role: self.uid()?,
                timestamp: self.i()?,
                count: self.uvarint()?,
            },
            Kind::Table => Payload::Table { name: self.str()? },
            Kind::Role => Payload::Role { name: self.str()? },
            Kind::Column => Payload::Column {
                table: self.uid()?,
                name: self.str()?,
                seq: self.uvarint()? as u32,
                domain: self.uid()?,
                not_null: self.flag()?,
            },
            Kind::Record => Payload::Record { table: self.uid()?, fields: self.fields()? },
            Kind::Update => Payload::Update { table: self.uid()?, row: self.uid()?, fields: self.fields()? },
            Kind::Delete => Payload::Delete { table: self.uid()?, row: self.uid()? },
            Kind::Index => {
                let table = self.uid()?;
                let n = self.count()?;
                let columns = (0..n).map(|_| self.uid()).collect::<Result<_>>()?;
                let kind = match self.byte()? {
                    1 => IndexKind::Primary,
                    2 => IndexKind::Unique,
                    3 => IndexKind::Foreign {
                        refers: self.uid()?,
                        on_delete: self.action()?,
                        on_update: self.action()?,
                    },
                    _ => return self.fail("bad index kind"),
                };
                Payload::Index { table, columns, kind }
            }
            Kind::View => {
                let name = self.str()?;
                let n = self.count()?;
                let columns = (0..n).map(|_| self.str()).collect::<Result<_>>()?;
                Payload::View { name, columns, source: self.str()? }
            }
            Kind::RestView => {
                let name = self.str()?;
                let n = self.count()?;
                let columns = (0..n).map(|_| Ok((self.str()?, self.uid()?))).collect::<Result<_>>()?;
                let using = match self.byte()? {
                    0 => None,
                    1 => Some(self.uid()?),
                    _ => return self.fail("bad option tag"),
                };
                Payload::RestView { name, columns, using, url: self.opt_str()? }
            }
            Kind::User => Payload::User { name: self.str()?, password: self.opt_str()? },
            Kind::Grant => Payload::Grant {
                privileges: Privileges(self.byte()?),
                object: self.uid()?,
                grantee: self.uid()?,
                revoke: self.flag()?,
            },
            Kind::Metadata => {
                let target = self.uid()?;
                let n = self.count()?;
                let items = (0..n)
                    .map(|_| {
                        let word = self.str()?;
                        let arg = self.opt_str()?;
                        let k = self.count()?;
                        let ids = (0..k).map(|_| self.str()).collect::<Result<_>>()?;
                        Ok(MetaItem { word, arg, ids })
                    })
                    .collect::<Result<_>>()?;
                Payload::Metadata { target, items }
            }
            Kind::Domain => Payload::Domain { domain: self.domain()? },
            Kind::Drop => Payload::Drop { target: self.uid()? },
            Kind::Alter => {
                let target = self.uid()?;
                let change = match self.byte()? {
                    1 => AlterChange::Rename(self.str()?),
                    2 => AlterChange::AddCheck { name: self.str()?, source: self.str()? },
                    3 => AlterChange::ViewSource(self.str()?),
                    _ => return self.fail("bad alter kind"),
                };
                Payload::Alter { target, change }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_record_starts_with_tag() {
        let p = Physical::new(Uid(0), Payload::Table { name: "T".into() });
        let b = p.encode().unwrap();
        assert_eq!(b[0], Kind::Table as u8);
        let (q, next) = Physical::decode(&b, 0, 0).unwrap();
        assert_eq!(q, p);
        assert_eq!(next, b.len() as u64);
    }

    #[test]
    fn oversized_integer_is_rejected() {
        let big = BigInt::from(1) << 2040usize;
        let p = Physical::new(
            Uid(0),
            Payload::Record { table: Uid(1), fields: vec![(Uid(2), Value::Integer(big))] },
        );
        assert!(matches!(p.encode(), Err(Error::Encoding(_))));
    }

    #[test]
    fn decode_mid_record_fails() {
        let p = Physical::new(Uid(0), Payload::Table { name: "CUSTOMERS".into() });
        let b = p.encode().unwrap();
        for off in 1..b.len() as u64 {
            let r = Physical::decode(&b, 0, off);
            assert!(matches!(r, Err(Error::Corruption { offset, .. }) if offset == off), "offset {off}: {r:?}");
        }
    }

    #[test]
    fn three_record_log_decodes_in_order() {
        let ps = [
            Payload::Table { name: "T".into() },
            Payload::Column { table: Uid(0), name: "A".into(), seq: 0, domain: Uid::INTEGER, not_null: false },
            Payload::Record { table: Uid(0), fields: vec![(Uid(5), Value::int(1))] },
        ];
        let mut bytes = Vec::new();
        for p in ps.iter() {
            let phys = Physical::new(Uid(bytes.len() as i64), p.clone());
            bytes.extend(phys.encode().unwrap());
        }
        let mut pos = 0u64;
        let mut seen = Vec::new();
        while (pos as usize) < bytes.len() {
            let (p, next) = Physical::decode(&bytes, 0, pos).unwrap();
            assert_eq!(p.pos, Uid(pos as i64));
            seen.push(p.pos.0);
            pos = next;
        }
        assert_eq!(seen.len(), 3);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn relocation_substitutes_temporaries() {
        let t = Uid::temp(1);
        let p = Physical::new(
            Uid::temp(2),
            Payload::Column { table: t, name: "A".into(), seq: 0, domain: Uid::INTEGER, not_null: false },
        );
        let map: HashMap<Uid, Uid> = [(t, Uid(442)), (Uid::temp(2), Uid(450))].into();
        let r = p.relocate(&map).unwrap();
        assert_eq!(r.pos, Uid(450));
        assert!(matches!(r.payload, Payload::Column { table: Uid(442), domain: Uid::INTEGER, .. }));
        let committed = Physical::new(Uid(9), Payload::Delete { table: Uid(1), row: Uid(3) });
        assert_eq!(committed.relocate(&HashMap::new()).unwrap(), committed);
        assert!(matches!(p.relocate(&HashMap::new()), Err(Error::Relocation(_))));
    }

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            Just(Value::Null),
            any::<i64>().prop_map(Value::int),
            proptest::collection::vec(any::<u8>(), 0..40)
                .prop_map(|b| Value::Integer(BigInt::from_bytes_le(Sign::Minus, &b))),
            (any::<i64>(), -20i32..20).prop_map(|(m, e)| Value::Real(Decimal::new(m, e))),
            ".{0,12}".prop_map(Value::Char),
            any::<bool>().prop_map(Value::Boolean),
            (-100_000i64..1_000_000).prop_map(|d| Value::Date(date_from_days(d.abs() + 1).unwrap())),
        ]
    }

    fn arb_uid() -> impl Strategy<Value = Uid> {
        prop_oneof![(0i64..1 << 40).prop_map(Uid), (-40i64..0).prop_map(Uid), (0i64..1000).prop_map(Uid::temp)]
    }

    fn arb_action() -> impl Strategy<Value = FkAction> {
        prop_oneof![Just(FkAction::Cascade), Just(FkAction::Restrict), Just(FkAction::SetNull)]
    }

    fn arb_domain() -> impl Strategy<Value = Domain> {
        prop_oneof![
            Just(Domain::Integer),
            (proptest::option::of(1u32..40), proptest::option::of(0u32..10))
                .prop_map(|(precision, scale)| Domain::Numeric { precision, scale }),
            Just(Domain::Real),
            proptest::option::of(1u32..300).prop_map(|length| Domain::Char { length }),
            Just(Domain::Boolean),
            Just(Domain::Date),
        ]
    }

    fn arb_payload() -> impl Strategy<Value = Payload> {
        let name = "[A-Za-z][A-Za-z0-9_]{0,10}";
        let fields = || proptest::collection::vec((arb_uid(), arb_value()), 0..6);
        prop_oneof![
            (arb_uid(), arb_uid(), any::<i64>(), any::<u64>())
                .prop_map(|(user, role, timestamp, count)| Payload::Transaction { user, role, timestamp, count }),
            name.prop_map(|name| Payload::Table { name }),
            (arb_uid(), name, any::<u32>(), arb_uid(), any::<bool>())
                .prop_map(|(table, name, seq, domain, not_null)| Payload::Column { table, name, seq, domain, not_null }),
            (arb_uid(), fields()).prop_map(|(table, fields)| Payload::Record { table, fields }),
            (arb_uid(), arb_uid(), fields()).prop_map(|(table, row, fields)| Payload::Update { table, row, fields }),
            (arb_uid(), arb_uid()).prop_map(|(table, row)| Payload::Delete { table, row }),
            (
                arb_uid(),
                proptest::collection::vec(arb_uid(), 1..4),
                prop_oneof![
                    Just(IndexKind::Primary),
                    Just(IndexKind::Unique),
                    (arb_uid(), arb_action(), arb_action())
                        .prop_map(|(refers, on_delete, on_update)| IndexKind::Foreign { refers, on_delete, on_update })
                ]
            )
                .prop_map(|(table, columns, kind)| Payload::Index { table, columns, kind }),
            (name, proptest::collection::vec(name, 0..4), ".{0,40}")
                .prop_map(|(name, columns, source)| Payload::View { name, columns, source }),
            (
                name,
                proptest::collection::vec((name, arb_uid()), 0..4),
                proptest::option::of(arb_uid()),
                proptest::option::of(".{0,30}")
            )
                .prop_map(|(name, columns, using, url)| Payload::RestView { name, columns, using, url }),
            name.prop_map(|name| Payload::Role { name }),
            (name, proptest::option::of("[a-f0-9]{8}")).prop_map(|(name, password)| Payload::User { name, password }),
            (any::<u8>(), arb_uid(), arb_uid(), any::<bool>()).prop_map(|(p, object, grantee, revoke)| Payload::Grant {
                privileges: Privileges(p),
                object,
                grantee,
                revoke
            }),
            (arb_uid(), proptest::collection::vec((name, proptest::option::of(".{0,10}"), proptest::collection::vec(name, 0..3)), 0..4))
                .prop_map(|(target, items)| Payload::Metadata {
                    target,
                    items: items.into_iter().map(|(word, arg, ids)| MetaItem { word, arg, ids }).collect()
                }),
            arb_domain().prop_map(|domain| Payload::Domain { domain }),
            arb_uid().prop_map(|target| Payload::Drop { target }),
            (arb_uid(), prop_oneof![
                name.prop_map(|n| AlterChange::Rename(n.to_string())),
                (name, ".{0,20}").prop_map(|(name, source)| AlterChange::AddCheck { name, source }),
                ".{0,20}".prop_map(AlterChange::ViewSource),
            ])
                .prop_map(|(target, change)| Payload::Alter { target, change }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn encode_decode_round_trip(payload in arb_payload(), pos in 0u64..1 << 40) {
            let p = Physical::new(Uid(pos as i64), payload);
            let bytes = p.encode().unwrap();
            prop_assert_eq!(p.encode().unwrap(), bytes.clone());
            let mut file = vec![0u8; 3];
            file.extend_from_slice(&bytes);
            let base = pos.saturating_sub(3);
            let (q, next) = Physical::decode(&file, base, base + 3).unwrap();
            prop_assert_eq!(q.payload, p.payload);
            prop_assert_eq!(q.pos, Uid((base + 3) as i64));
            prop_assert_eq!(next, base + 3 + bytes.len() as u64);
        }
    }
}
