//! Link stream analysis for proximity-contact data.

pub mod calendar;
pub mod grouping;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod null_models;
pub mod registry;
pub mod report;
pub mod stream;
pub mod synth;
pub mod temporal;
