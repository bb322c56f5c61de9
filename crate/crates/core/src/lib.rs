pub mod catalog;
pub mod dataset;
pub mod evaluator;
mod json_scan;
pub mod litpipe;
pub mod llmclient;
pub mod stats;
pub mod textualize;
pub mod training;
