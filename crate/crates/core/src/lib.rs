pub mod classifiers;
pub mod dataset;
pub mod evaluation;
pub mod monitor;
pub mod synth;
pub mod timeseries;
