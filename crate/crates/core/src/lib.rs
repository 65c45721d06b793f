//! Retrieval-augmented multiple-choice question answering with three
//! role-prompted agents over one shared model:
//!
//! * [`interpreter`] turns a question into a clinical schema and a first query,
//! * [`explorer`] retrieves in rounds until the evidence is judged sufficient,
//! * [`arbiter`] condenses the evidence into a source-attributed report and
//!   picks the answer.
//!
//! [`harness`] runs datasets through the pipeline and reports accuracy and
//! cost per question.

pub mod arbiter;
pub mod bindings;
pub mod corpus;
pub mod domain;
pub mod explorer;
pub mod harness;
pub mod interpreter;
pub mod llm;
mod stopwatch;

pub use stopwatch::Stopwatch;
