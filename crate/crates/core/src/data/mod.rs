//! Synthetic instance generation and CSV/JSON persistence.

mod csv_io;
mod manifest;
mod synth;

pub use csv_io::{read_csv_from, read_csv_matrix, write_csv_matrix, write_csv_to};
pub use manifest::{load_instance_bundle, write_instance_bundle, InstanceManifest, ManifestPaths};
pub use synth::{
    generate, generate_pca_sample, generate_regression, standardize_columns, Instance,
    InstanceKind, RegressionInstance, SyntheticSpec,
};
