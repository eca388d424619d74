//! Question-answer driven semantic role labeling.

pub mod annotation;
pub mod corpus;
pub mod dataset;
pub mod expand;
pub mod gradsuite;
pub mod grammar;
pub mod metrics;
pub mod nn;
pub mod parser;
pub mod qgen;
pub mod spandet;
pub mod synthetic;
