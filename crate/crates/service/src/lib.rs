//! `deepstreet` command line and the HTTP API behind the designer UI.

pub mod api;
pub mod cli;

pub use api::{router, AppState};
