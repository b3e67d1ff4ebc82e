//! Rule store, HTTP API and command line for event-state trigger-action
//! rules.

pub mod api;
pub mod cli;
pub mod error;
pub mod ops;
pub mod store;
