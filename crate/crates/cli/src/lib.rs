//! File formats, the `mcpca` command line, and the experiment runners built on
//! [`mcpca_core`].

pub mod commands;
pub mod experiments;
pub mod model_file;
pub mod table;
pub mod threads;

pub use threads::Threaded;
