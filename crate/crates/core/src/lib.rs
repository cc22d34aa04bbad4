pub mod analysis;
pub mod app;
pub mod autoencoder;
pub mod config;
pub mod data;
pub mod ddpm;
pub mod ensemble;
pub mod error;
pub mod nn;
pub mod report;
pub mod subset;

pub use error::{BendError, Result};
