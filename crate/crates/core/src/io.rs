//! JSON schemas for method files and property reports.
//!
//! Coefficients are written as exact strings (`"1/2"`, `"-1/6*sqrt(3)"`), never as
//! floats, so a method read back from disk verifies identically.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::legendre::{BivariatePoly, Scalar, UnivariatePoly};
use crate::method::{CsrkMethod, MethodError};
use crate::verify::{PropertyFlags, PropertyReport, SimplifyingLevels};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Method(#[from] MethodError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFile {
    pub label: String,
    #[serde(rename = "B")]
    pub b: Vec<Scalar>,
    #[serde(rename = "C")]
    pub c: Vec<Scalar>,
    pub alpha: Vec<Vec<Scalar>>,
}

impl From<&CsrkMethod> for MethodFile {
    fn from(m: &CsrkMethod) -> Self {
        Self {
            label: m.label().to_owned(),
            b: m.b().coeffs().to_vec(),
            c: m.c().coeffs().to_vec(),
            alpha: m.alpha().as_rows().to_vec(),
        }
    }
}

impl TryFrom<MethodFile> for CsrkMethod {
    type Error = MethodError;

    fn try_from(f: MethodFile) -> Result<Self, MethodError> {
        CsrkMethod::new(
            f.label,
            BivariatePoly::new(f.alpha),
            UnivariatePoly::new(f.b),
            UnivariatePoly::new(f.c),
        )
    }
}

pub fn method_to_json(m: &CsrkMethod) -> String {
    serde_json::to_string_pretty(&MethodFile::from(m)).expect("method files always serialize")
}

pub fn method_from_json(text: &str) -> Result<CsrkMethod, IoError> {
    let file: MethodFile = serde_json::from_str(text)?;
    Ok(CsrkMethod::try_from(file)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualsJson {
    pub symplectic: Scalar,
    /// Absent when `∫B ≠ 1`.
    pub symmetric: Option<Scalar>,
    pub energy: [Scalar; 3],
}

/// On-disk form of a [`PropertyReport`].
///
/// A `true` flag means the sufficient condition holds exactly; `false` means it
/// fails, which does not by itself prove the method lacks the property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub label: String,
    pub verified_order_direct: u8,
    pub order_residuals: Vec<Scalar>,
    pub breve: SimplifyingLevels,
    pub guaranteed_order: usize,
    pub residuals: ResidualsJson,
    pub flags: PropertyFlags,
    #[serde(rename = "h_bound_per_unit_L")]
    pub h_bound_per_unit_l: f64,
}

impl ReportJson {
    pub fn new(label: &str, r: &PropertyReport) -> Self {
        Self {
            label: label.to_owned(),
            verified_order_direct: r.verified_order_direct,
            order_residuals: r.order_residuals.to_vec(),
            breve: r.breve,
            guaranteed_order: r.guaranteed_order,
            residuals: ResidualsJson {
                symplectic: r.symplectic_residual.clone(),
                symmetric: r.symmetric_residual.clone(),
                energy: r.ep_residuals.clone(),
            },
            flags: r.flags,
            h_bound_per_unit_l: r.h_bound_per_unit_l,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
