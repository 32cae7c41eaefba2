//! Cross-domain crop mapping: a cycle-consistent adversarial domain mapper
//! that moves unlabeled target-domain spectral time series into the source
//! domain, a CNN crop classifier trained on source labels, the raster
//! preprocessing pipeline, synthetic domain-shifted data, and evaluation.

pub mod autodiff;
pub mod benchmark;
mod binio;
pub mod checkpoint;
pub mod classifier;
pub mod conv;
pub mod dataset;
pub mod error;
pub mod gan;
pub mod gradcheck;
pub mod gradsuite;
pub mod metrics;
pub mod networks;
pub mod numfmt;
pub mod optim;
pub mod pnm;
pub mod preprocess;
pub mod render;
pub mod synth;
pub mod tensor;
pub mod tsne;

pub use autodiff::{Activation, Graph, Var};
pub use checkpoint::Checkpoint;
pub use conv::ConvGeometry;
pub use dataset::{LabeledDataset, SampleTensor, BANDS, TIMESTEPS};
pub use error::{Error, Result};
pub use metrics::ConfusionMatrix;
pub use networks::{Network, Role};
pub use optim::{AdamConfig, AdamState};
pub use tensor::Tensor;
