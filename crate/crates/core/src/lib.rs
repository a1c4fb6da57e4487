pub mod cache;
pub mod cli;
pub mod dataset;
pub mod evaluator;
pub mod model;
pub mod pipeline;
pub mod policy;
pub mod prompts;
pub mod run;
pub mod synthetic;
