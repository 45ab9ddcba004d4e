//! Decision forests and ReLU networks viewed as partition-and-vote
//! classifiers.
//!
//! Both model families split feature space into convex cells and predict
//! with the class frequencies of the training points that land in a cell.
//! This crate trains both families from scratch, extracts their cells
//! ([`partition`]), and runs a small-sample benchmark ([`bench`]) that
//! records Cohen's kappa, calibration error and fit time along a
//! logarithmic schedule of training-set sizes.

pub mod data;
pub mod forest;
pub mod metrics;
pub mod network;
pub mod seed;
pub mod lp2d;
pub mod partition;
pub mod bench;
pub mod plot;
pub(crate) mod svg;
