//! Toolkit for imbalance-aware multi-label evaluation and ensembling of
//! black-box models.
//!
//! Models enter only as probability matrices. The crate provides:
//!
//! * [`model_io`]: validated CSV interchange for predictions, labels and features;
//! * [`losses`]: weighted BCE, asymmetric focal loss and their class-weighted
//!   combination, with analytic gradients;
//! * [`metrics`]: tie-corrected AUC, ROC curves and per-class reports;
//! * [`ensemble`]: convex fusion of model outputs with weights found by
//!   differential evolution;
//! * [`synthlab`]: seeded long-tail data, simulated models and a small
//!   linear trainer.

pub mod ensemble;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model_io;
pub mod synthlab;

pub use error::{Error, Result};
