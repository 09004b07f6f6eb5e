//! Matrix-language identification for code-switched text.
//!
//! The crate ingests token-tagged bilingual corpora, decides which
//! language supplies the grammatical frame of each code-switched
//! utterance under several competing principles, and measures how those
//! decisions agree with each other and with reference labels.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod lexicon;
pub mod lm;
pub mod mapping;
pub mod metrics;
pub mod p12;
pub mod principles;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
