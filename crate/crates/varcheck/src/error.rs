//! Crate-wide error type.
//!
//! Errors carry enough context (workbook path, sheet name, 1-based row,
//! document offset) to point the user at the offending input.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("workbook {}: {detail}", path.display())]
    Workbook { path: PathBuf, detail: String },

    #[error("sheet '{sheet}': {detail}")]
    Sheet { sheet: String, detail: String },

    /// `row` is the 1-based row number as a spreadsheet user sees it.
    #[error("sheet '{sheet}' row {row}: {detail}")]
    SheetRow {
        sheet: String,
        row: usize,
        detail: String,
    },

    #[error("document: {detail}")]
    Document { detail: String },

    #[error("configuration '{config}': {source}")]
    InConfig {
        config: String,
        #[source]
        source: Box<Error>,
    },

    #[error("table '{table}' row '{row_id}': placeholder '${token}' matches no column or feature value")]
    UnresolvedToken {
        table: String,
        row_id: String,
        token: String,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    /// Wrap an error with the configuration it occurred under.
    pub fn in_config(self, config: &str) -> Error {
        Error::InConfig {
            config: config.to_string(),
            source: Box::new(self),
        }
    }
}
