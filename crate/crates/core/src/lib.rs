//! Legal-judgment prediction toolkit for Arabic personal-status cases.
//!
//! The pipeline runs text through [`artext`] normalization, turns tokens into
//! model inputs with [`features`], trains one of the [`classical`] or
//! [`neural`] classifiers, scores it with [`eval`], and packages the result as
//! a versioned [`app::ModelArtifact`] for the prediction service.

pub mod app;
pub mod artext;
pub mod classical;
pub mod corpus;
pub mod eval;
pub mod features;
pub mod neural;
pub mod numkit;
pub mod pipeline;

pub use numkit::{Matrix, RngState};
