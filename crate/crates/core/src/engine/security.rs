//! Privilege checks. Grants are looked up as grantee → object → actions;
//! a role never holds another role.

use super::schema::ObjectKind;
use super::Database;
use crate::physlog::{Privileges, Uid};

/// Is `user`, acting in `role`, allowed `action` on `object`?
///
/// Allowed when the user owns the object or the database, when `role` is
/// the object's definer, or when the role, the user or PUBLIC holds the
/// action. A column is also covered by privileges on its table.
pub fn check_privilege(db: &Database, user: Uid, role: Uid, object: Uid, action: Privileges) -> bool {
    if user == db.owner && user != Uid::NONE {
        return true;
    }
    let Some(obj) = db.object(object) else {
        return false;
    };
    if obj.owner == user || obj.definer == role {
        return true;
    }
    let holds = |o: Uid| {
        [role, user, Uid::PUBLIC]
            .iter()
            .any(|g| db.privileges.get(&(*g, o)).is_some_and(|p| p.contains(action)))
    };
    if holds(object) {
        return true;
    }
    match obj.column() {
        Some(c) => {
            let t = db.object(c.table);
            t.is_some_and(|t| t.owner == user || t.definer == role) || holds(c.table)
        }
        None => false,
    }
}

/// May `user` act in `role`?
pub fn may_use_role(db: &Database, user: Uid, role: Uid) -> bool {
    if role == Uid::PUBLIC {
        return true;
    }
    if db.object(role).map(|o| o.kind()) != Some(ObjectKind::Role) {
        return false;
    }
    user == db.owner || db.user_roles.contains_key(&(user, role)) || db.user_roles.contains_key(&(Uid::PUBLIC, role))
}

/// The role a user gets when none is named: the database role if usable,
/// else the first granted role.
pub fn default_role_for(db: &Database, user: Uid) -> Option<Uid> {
    if may_use_role(db, user, db.default_role) {
        return Some(db.default_role);
    }
    db.user_roles.keys().find(|(u, _)| *u == user).map(|(_, r)| *r)
}

/// Parse a privilege keyword. REFERENCES means SELECT.
pub fn privilege_named(word: &str) -> Option<Privileges> {
    Some(match word.to_ascii_uppercase().as_str() {
        "SELECT" | "REFERENCES" => Privileges::SELECT,
        "INSERT" => Privileges::INSERT,
        "UPDATE" => Privileges::UPDATE,
        "DELETE" => Privileges::DELETE,
        "USAGE" => Privileges::USAGE,
        "OWNERSHIP" => Privileges::OWNERSHIP,
        "ALL" => Privileges::ALL,
        _ => return None,
    })
}

/// Hash stored for a user's password.
pub fn password_hash(password: &str) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(password.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}
