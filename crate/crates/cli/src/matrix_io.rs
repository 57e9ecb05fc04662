//! Gram matrices on disk as `{dim, entries_re, entries_im}` JSON, row-major.

use crate::error::CliError;
use balmet_core::hermitian::{GramMetric, MatrixRecord};
use std::path::Path;

pub fn read_gram(path: &Path) -> Result<GramMetric, CliError> {
    let field = "initial_metric.path";
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(field, format!("cannot read {}: {e}", path.display())))?;
    let record: MatrixRecord =
        serde_json::from_str(&text).map_err(|e| CliError::validation(field, format!("{}: {e}", path.display())))?;
    record.to_gram().map_err(|e| CliError::from_core(field, e))
}

pub fn to_json(h: &GramMetric) -> String {
    serde_json::to_string_pretty(&MatrixRecord::from(h)).expect("matrix record serializes")
}

pub fn write_gram(path: &Path, h: &GramMetric) -> Result<(), CliError> {
    std::fs::write(path, to_json(h)).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
