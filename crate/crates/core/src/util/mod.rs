//! Small shared helpers: stable hashing, counted random draws, binary file IO.

pub mod binio;
pub mod hash;
pub mod rng;

pub use hash::{mix64, stable_hash};
pub use rng::DrawRng;
