//! Reconfigurable distribution feeder toolkit.
//!
//! The pipeline, end to end:
//!
//! 1. [`netcase`] — case files, load blocks, switch configurations, radiality.
//! 2. [`linsolve`] — a dense-basis bounded-variable simplex used everywhere below.
//! 3. [`lpf`] — multi-phase linearized power flow assembled as a linear program.
//! 4. [`reconfig`] — exact branch-and-bound over switch states, restricted
//!    (assignment-fixed) solves, assignment repair, and voltage-bound relaxation.
//! 5. [`neural`] — a from-scratch MLP that predicts which substation should
//!    feed each load block.
//! 6. [`datagen`] — labeled scenario sampling feeding the training pipeline.
//!
//! With the default `parallel` feature, scenario-level work fans out over a
//! rayon pool; the `exec` module provides the sequential fallback used when
//! the feature is disabled (and available for comparison benches regardless).

pub mod datagen;
pub mod exec;
pub mod linsolve;
pub mod lpf;
pub mod netcase;
pub mod neural;
pub mod reconfig;
