//! Measure how much a non-topical text classifier (genre, sentiment,
//! authorship) loses when the topics of its test documents differ from those
//! of its training documents, and narrow that gap with topically-controlled
//! synthetic training data.
//!
//! The pipeline:
//!
//! 1. [`corpus`]: ingest labeled documents and normalize them.
//! 2. [`topics`]: fit a topic model (collapsed-Gibbs LDA, or score externally
//!    trained embedding-topic-model parameters) and pick the topic count.
//! 3. [`splits`]: per topic, build balanced on-topic / off-topic training sets,
//!    an off-topic validation set and an on-topic test set.
//! 4. [`keywords`]: extract topic-weighted keyword sequences from documents.
//! 5. [`augment`]: train one keyword-conditioned generator per genre and build
//!    synthetic training documents from target-topic keywords.
//! 6. [`classify`]: train a bag-of-words logistic-regression genre classifier
//!    with validation-based early stopping.
//! 7. [`evaluate`]: macro-F1, paired t-tests, condition grids and ablations.
//!
//! [`synthkit`] builds planted corpora with known topic/genre structure, and
//! [`experiment`] wires everything to a declarative configuration.

pub mod adapter;
pub mod augment;
pub mod cli;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod fsutil;
pub mod keywords;
pub mod seed;
pub mod splits;
pub mod synthkit;
pub mod topics;

pub use error::{Error, Result};
