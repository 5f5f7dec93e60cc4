//! Molecular featurization and classification: SMILES ingestion, graph
//! scattering, 2D image scattering, small graph networks and a logistic head.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what the pipeline and the on-disk
//! formats use.

pub mod error;
pub mod evalhead;
pub mod gnn;
pub mod graphcore;
pub mod gst;
pub mod ingest;
pub mod io;
pub mod linalg;
pub mod metagraph;
pub mod nn;
pub mod scalar;
pub mod scatter2d;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type FeatureMatrix = Matrix<f64>;
pub type GraphMatrices = graphcore::GraphMatrices<f64>;
pub type GgsVector = gst::GgsVector<f64>;
pub type Image = scatter2d::Image<f64>;
pub type MorletBank = scatter2d::MorletBank<f64>;
pub type GinParams = gnn::GinParams<f64>;
pub type MetaGraph = metagraph::MetaGraph<f64>;
pub type SageParams = metagraph::SageParams<f64>;
pub type LogRegModel = evalhead::LogRegModel<f64>;
