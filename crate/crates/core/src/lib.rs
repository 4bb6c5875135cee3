//! Credit-card fraud detection toolkit: data ingestion, class-imbalance
//! resampling, from-scratch neural networks, tree baselines and an
//! experiment harness.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the default 64-bit precision.

pub mod error;
pub mod experiments;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod resample;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Dataset = ingest::Dataset<f64>;
pub type Network = nn::Network<f64>;
pub type Tensor = nn::Tensor<f64>;
pub type Model = models::Model<f64>;
pub type ModelFile = models::ModelFile<f64>;
pub type ScalerParams = preprocess::ScalerParams<f64>;
pub type Run = experiments::Run<f64>;

pub type Dataset32 = ingest::Dataset<f32>;
pub type Network32 = nn::Network<f32>;
