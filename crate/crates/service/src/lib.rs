//! Command line and HTTP front ends for the `ordlog` engine.

pub mod cli;
pub mod http;
pub mod input;
pub mod store;
pub mod summary;
