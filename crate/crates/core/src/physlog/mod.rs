//! Durable representation: uids, typed cell values, physical records and
//! the append-only log file.

mod log;
mod physical;
mod uid;
mod value;

pub use log::{layout, read_file, read_transactions, Committed, Durability, LogFile, FORMAT_VERSION, LOG_START, MAGIC};
pub use physical::{AlterChange, FkAction, IndexKind, Kind, MetaItem, Payload, Physical, Privileges};
pub use uid::{Uid, UidRange};
pub use value::{fits_json_number, Domain, Value, MAX_INTEGER_BITS};
