use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{generate, read_csv_matrix, write_csv_matrix, Instance, SyntheticSpec};
use crate::error::Result;
use crate::linalg::DataMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPaths {
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_coeffs: Option<String>,
}

/// JSON description of an instance bundle. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub spec: SyntheticSpec,
    pub paths: ManifestPaths,
    pub seed: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Generates the instance for `spec` and writes `a.csv`, `b.csv`,
/// `true_coeffs.csv` (as applicable) and `manifest.json` into `dir`.
pub fn write_instance_bundle(spec: &SyntheticSpec, dir: &Path) -> Result<PathBuf> {
    let inst = generate(spec)?;
    fs::create_dir_all(dir)?;
    write_csv_matrix(&inst.a, dir.join("a.csv"), None)?;
    let mut paths = ManifestPaths {
        a: "a.csv".into(),
        b: None,
        true_coeffs: None,
    };
    if let Some(b) = &inst.b {
        write_csv_matrix(b, dir.join("b.csv"), None)?;
        paths.b = Some("b.csv".into());
    }
    if let Some(c) = &inst.true_coeffs {
        write_csv_matrix(
            &DataMatrix::column_vector(c)?,
            dir.join("true_coeffs.csv"),
            None,
        )?;
        paths.true_coeffs = Some("true_coeffs.csv".into());
    }
    let manifest = InstanceManifest {
        spec: spec.clone(),
        paths,
        seed: spec.seed,
    };
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(path)
}

pub fn load_instance_bundle(manifest_path: &Path) -> Result<(InstanceManifest, Instance)> {
    let manifest: InstanceManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let a = read_csv_matrix(base.join(&manifest.paths.a), false)?;
    let b = manifest
        .paths
        .b
        .as_ref()
        .map(|p| read_csv_matrix(base.join(p), false))
        .transpose()?;
    let true_coeffs = manifest
        .paths
        .true_coeffs
        .as_ref()
        .map(|p| read_csv_matrix(base.join(p), false).map(DataMatrix::into_values))
        .transpose()?;
    Ok((manifest, Instance { a, b, true_coeffs }))
}
