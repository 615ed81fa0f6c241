//! Settings resolution and command implementations behind the `zeromode` binary.

pub mod commands;
pub mod error;
pub mod settings;
