use std::fmt;
use std::path::Path;

use csrk::discretize::DiscretizeError;
use csrk::integrate::IntegrateError;
use csrk::io::IoError;
use csrk::method::MethodError;
use serde_json::{json, Value};

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;

/// A failed command, printed to stderr as one JSON object.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub variant: Option<String>,
    pub message: String,
    pub detail: Option<Value>,
}

impl CliError {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            kind,
            variant: None,
            message: message.into(),
            detail: None,
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self::new(EXIT_DOMAIN, "domain", message)
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, "parse", message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new(EXIT_IO, "io", format!("{}: {err}", path.display()))
    }

    fn with_variant<E: fmt::Debug>(mut self, e: &E) -> Self {
        let debug = format!("{e:?}");
        let name: String = debug.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        self.variant = Some(name);
        self
    }

    /// Prefixes the message with the file it came from.
    pub fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }

    pub fn to_json(&self) -> Value {
        let mut err = json!({
            "kind": self.kind,
            "exit_code": self.code,
            "message": self.message,
        });
        if let Some(v) = &self.variant {
            err["variant"] = json!(v);
        }
        if let Some(d) = &self.detail {
            err["detail"] = d.clone();
        }
        json!({ "error": err })
    }
}

impl From<MethodError> for CliError {
    fn from(e: MethodError) -> Self {
        CliError::domain(e.to_string()).with_variant(&e)
    }
}

/// Discretization errors from arguments; errors reading tableau files go through [`tableau_file_error`].
impl From<DiscretizeError> for CliError {
    fn from(e: DiscretizeError) -> Self {
        let code = match e {
            DiscretizeError::Csv(_) => EXIT_IO,
            _ => EXIT_DOMAIN,
        };
        let kind = if code == EXIT_IO { "parse" } else { "domain" };
        CliError::new(code, kind, e.to_string()).with_variant(&e)
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Json(j) => CliError::parse(j.to_string()),
            IoError::Method(m) => CliError::from(m),
        }
    }
}

impl From<IntegrateError> for CliError {
    fn from(e: IntegrateError) -> Self {
        let root = e.root();
        let mut out = match root {
            IntegrateError::NonConvergence { .. } | IntegrateError::NonFinite => {
                CliError::new(EXIT_NON_CONVERGENCE, "non_convergence", e.to_string())
            }
            _ => CliError::domain(e.to_string()),
        }
        .with_variant(root);
        if let IntegrateError::NonConvergence {
            iterations,
            increment,
            advisory_h,
        } = root
        {
            out.detail = Some(json!({
                "iterations": iterations,
                "increment": increment,
                "advisory_h": advisory_h,
            }));
        }
        out
    }
}

pub fn tableau_file_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::parse(e.to_string()).in_file(path)
}
