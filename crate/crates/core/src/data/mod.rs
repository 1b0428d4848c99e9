//! Datasets, on-disk formats, manifests and the subsampling protocol.

pub mod dataset;
pub mod manifest;
pub mod subsample;
pub mod tensor;

pub use dataset::{dataset_report, validate_dataset, DatasetReport, FeatureSet, SourceDistribution, Violation};
pub use manifest::{CheckpointEntry, CheckpointManifest};
pub use subsample::{stratified_subsample, subsample_indices, SubsampleSpec};
pub use tensor::{load_labels, load_tensor, read_tensor, save_labels, save_tensor, write_tensor, Tensor, TensorData};
