use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ProblemKind;
use crate::data::{
    generate, load_instance_bundle, read_csv_matrix, standardize_columns, Instance, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;

/// Where an instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceSource {
    /// Generated from a synthetic spec.
    Spec { spec: SyntheticSpec },
    /// Numeric CSV. Regression problems use the last column as the target.
    Csv { path: PathBuf, header: bool },
    /// A manifest written by `generate`.
    Bundle { path: PathBuf },
}

impl InstanceSource {
    /// Interprets a command-line argument: inline JSON spec, CSV file,
    /// manifest (a JSON object with `paths`) or spec file.
    pub fn parse(arg: &str, header: bool) -> Result<Self> {
        let trimmed = arg.trim();
        if trimmed.starts_with('{') {
            return Ok(InstanceSource::Spec {
                spec: serde_json::from_str(trimmed)?,
            });
        }
        let path = Path::new(arg);
        if !path.is_file() {
            return Err(Error::InvalidArgument(format!(
                "instance {arg:?} is neither inline JSON nor an existing file"
            )));
        }
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if is_csv {
            return Ok(InstanceSource::Csv {
                path: path.to_path_buf(),
                header,
            });
        }
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        if value.get("paths").is_some() {
            Ok(InstanceSource::Bundle {
                path: path.to_path_buf(),
            })
        } else {
            Ok(InstanceSource::Spec {
                spec: serde_json::from_value(value)?,
            })
        }
    }

    pub fn spec(&self) -> Option<&SyntheticSpec> {
        match self {
            InstanceSource::Spec { spec } => Some(spec),
            _ => None,
        }
    }

    pub fn load(&self, problem: ProblemKind) -> Result<ProblemData> {
        let instance = match self {
            InstanceSource::Spec { spec } => generate(spec)?,
            InstanceSource::Bundle { path } => load_instance_bundle(path)?.1,
            InstanceSource::Csv { path, header } => {
                let m = read_csv_matrix(path, *header)?;
                if problem.needs_target() {
                    if m.cols() < 2 {
                        return Err(Error::InvalidArgument(
                            "regression CSV needs at least one feature and a target column".into(),
                        ));
                    }
                    let features: Vec<usize> = (0..m.cols() - 1).collect();
                    Instance {
                        a: m.select_columns(&features)?,
                        b: Some(m.select_columns(&[m.cols() - 1])?),
                        true_coeffs: None,
                    }
                } else {
                    Instance {
                        a: m,
                        b: None,
                        true_coeffs: None,
                    }
                }
            }
        };
        ProblemData::from_instance(problem, instance)
    }
}

/// Data in the shape a problem consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    /// Features, or the point cloud for L1-PCA and hyperplane fitting.
    pub a: DataMatrix,
    /// Target column for regression problems.
    pub b: Option<DataMatrix>,
}

impl ProblemData {
    /// Regression problems require `b`. L1-PCA ignores any target, and the
    /// hyperplane fit treats a target as one more coordinate of each point.
    pub fn from_instance(problem: ProblemKind, inst: Instance) -> Result<Self> {
        let Instance { a, b, .. } = inst;
        match problem {
            ProblemKind::Lad | ProblemKind::Subset | ProblemKind::Sphere => {
                let b = b.ok_or_else(|| {
                    Error::InvalidArgument(format!("problem {problem} needs a target column"))
                })?;
                if b.shape() != (a.rows(), 1) {
                    return Err(Error::mismatch("instance target", b.shape(), (a.rows(), 1)));
                }
                Ok(ProblemData { a, b: Some(b) })
            }
            ProblemKind::L1pca => Ok(ProblemData { a, b: None }),
            ProblemKind::Hyperplane => {
                let a = match b {
                    Some(b) => hstack(&a, &b)?,
                    None => a,
                };
                Ok(ProblemData { a, b: None })
            }
        }
    }

    /// Standardizes the feature columns (never the target).
    pub fn standardized(self) -> Result<Self> {
        Ok(ProblemData {
            a: standardize_columns(&self.a)?,
            b: self.b,
        })
    }
}

fn hstack(left: &DataMatrix, right: &DataMatrix) -> Result<DataMatrix> {
    if left.rows() != right.rows() {
        return Err(Error::mismatch("hstack", left.shape(), right.shape()));
    }
    let cols = left.cols() + right.cols();
    let mut values = Vec::with_capacity(left.rows() * cols);
    for i in 0..left.rows() {
        values.extend_from_slice(left.row(i));
        values.extend_from_slice(right.row(i));
    }
    DataMatrix::new(left.rows(), cols, values)
}
