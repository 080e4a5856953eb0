//! Library surface of the command-line front end: the declaration
//! language and the workspace resolver, shared by the binary and tests.

pub mod dsl;
pub mod workspace;
