//! File formats, reports and command implementations behind the `blochpaw`
//! binary.
//!
//! Exit statuses: 0 success, 1 I/O failure, 2 invalid input or a failed
//! check, 3 a request the tool refuses (such as a Fock space over the cap).

pub mod commands;
pub mod io;
pub mod report;
