//! Stream formats, snapshots and reports.

pub mod formats;
pub mod report;
pub mod snapshot;

pub use formats::{InputError, InputMode, Token, TokenReader, U64LeReader};
pub use snapshot::{snapshot_element_kind, snapshot_read, snapshot_write, SnapshotElement, SnapshotError};
