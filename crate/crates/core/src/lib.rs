//! Graph-aware co-attention networks for detecting fake stories from a
//! short source tweet and the sequence of users who retweeted it.

pub mod coattention;
pub mod datamodel;
pub mod encoders;
pub mod error;
pub mod explain;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod synthgen;

pub use error::{Error, Result};
