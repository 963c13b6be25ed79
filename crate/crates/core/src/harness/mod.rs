pub mod config;
pub mod pipeline;
pub mod report;
pub mod suites;

pub use config::*;
pub use pipeline::*;
pub use suites::*;
