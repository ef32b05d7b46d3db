//! Traversal-based execution of conjunctive queries over a Web of Linked
//! Data, with prioritized URI lookups, synthetic test Webs and an
//! experiment harness.

pub mod engine;
pub mod harness;
pub mod linkgraph;
pub mod num;
pub mod priority;
pub mod rdf;
pub mod testweb;
pub mod web;

pub use num::Scalar;

pub type ResponseTimes64 = harness::ResponseTimes<f64>;
pub type ResponseTimes32 = harness::ResponseTimes<f32>;
pub type PageRankScores64 = std::collections::HashMap<rdf::Term, f64>;
pub type PageRankScores32 = std::collections::HashMap<rdf::Term, f32>;
