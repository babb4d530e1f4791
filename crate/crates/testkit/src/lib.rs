//! Test-only support: an independent brute-force uniprocessor scheduler used
//! as the reference oracle, and seeded random task-set generators.
//!
//! Nothing here depends on `mcsched-core`; the oracle re-derives every
//! schedule from first principles one tick at a time.

pub mod gen;
pub mod oracle;

pub use gen::{PeriodicParams, SetGen};
pub use oracle::{OracleJob, OraclePolicy, OracleRun, OracleTask};
