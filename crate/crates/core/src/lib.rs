pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod topology;
pub mod transceiver;
pub mod powalloc;
pub mod harness;
