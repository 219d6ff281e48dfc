//! Flat `key = value` parameter files.
//!
//! Blank lines and `#` comments are ignored. Keys may appear at top level or
//! under a `[params]` header; any other `[section]` is skipped. Every field of
//! [`ModelParams`] must appear exactly once.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsFileError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown field `{field}`")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: field `{field}` is not a decimal number: `{value}`")]
    BadValue {
        line: usize,
        field: String,
        value: String,
    },
    #[error("line {line}: field `{field}` given twice")]
    Duplicate { line: usize, field: String },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
}

impl ParamsFileError {
    /// The field the error refers to, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ParamsFileError::Syntax { .. } => None,
            ParamsFileError::UnknownField { field, .. }
            | ParamsFileError::BadValue { field, .. }
            | ParamsFileError::Duplicate { field, .. } => Some(field),
            ParamsFileError::MissingField(f) => Some(f),
        }
    }
}

pub fn parse(text: &str) -> Result<ModelParams, ParamsFileError> {
    let mut values: [Option<f64>; 11] = [None; 11];
    let mut in_params = true;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(section) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            in_params = section.trim() == "params";
            continue;
        }
        if !in_params {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ParamsFileError::Syntax {
                line,
                text: content.to_string(),
            })?;
        let (key, value) = (key.trim(), value.trim());
        let slot = ModelParams::FIELD_NAMES
            .iter()
            .position(|f| *f == key)
            .ok_or_else(|| ParamsFileError::UnknownField {
                line,
                field: key.to_string(),
            })?;
        let parsed: f64 = value.parse().map_err(|_| ParamsFileError::BadValue {
            line,
            field: key.to_string(),
            value: value.to_string(),
        })?;
        if values[slot].replace(parsed).is_some() {
            return Err(ParamsFileError::Duplicate {
                line,
                field: key.to_string(),
            });
        }
    }
    let mut params = ModelParams::reference_example();
    for (slot, name) in ModelParams::FIELD_NAMES.iter().enumerate() {
        let v = values[slot].ok_or(ParamsFileError::MissingField(name))?;
        *params.field_mut(name).expect("known field") = v;
    }
    Ok(params)
}

/// A `[params]` block with 17 significant digits per value, which parses
/// back to the identical doubles.
pub fn render(params: &ModelParams) -> String {
    let mut out = String::from("[params]\n");
    for name in ModelParams::FIELD_NAMES {
        let v = params.field(name).expect("known field");
        writeln!(out, "{name} = {v:.16e}").expect("write to string");
    }
    out
}
