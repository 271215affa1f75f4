pub mod baseline;
pub mod circuit;
pub mod cli;
pub mod cut;
pub mod encode;
pub mod error;
pub mod instance;
pub mod partition;
pub mod qaoa;
pub mod sim;
