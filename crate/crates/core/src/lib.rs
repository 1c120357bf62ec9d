pub mod analysis;
pub mod cli;
pub mod model;
pub mod serde_float;
pub mod sim;
pub mod timescale;
