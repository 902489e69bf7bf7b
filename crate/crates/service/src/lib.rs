//! Live-run gateway for a navigation stack: streams snapshots to operators
//! and feeds their commands into the run at tick boundaries.

pub mod protocol;
pub mod rle;
pub mod server;
pub mod session;
pub mod snapshot;

pub use protocol::{parse_envelope, Command, Envelope, RejectCode, Reply, TaskDone};
pub use server::{serve, DEFAULT_PORT};
pub use session::{spawn, CommandSender, Connection, SessionConfig, SessionHandle};
pub use snapshot::{snapshot_state, Snapshot, TaskState, TaskView};
