pub mod allocate;
pub mod artifact;
pub mod classify;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod engine;
pub mod error;
pub mod sample;
pub mod score;
pub mod store;

pub use error::{Error, Result};
