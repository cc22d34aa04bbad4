//! Datasets, prediction matrices on disk, and artifact persistence.

pub mod artifact;
mod dataset;
mod predictions;

pub use artifact::{load, load_artifact, save, save_artifact, Artifact, ArtifactKind, NamedTensor, Persist};
pub use dataset::{load_csv_dataset, make_blobs, save_csv_dataset, Dataset, Split, TrainTest};
pub use predictions::{load_predictions, save_predictions, LoadedPredictions, TARGET_ID};
