//! Spreadsheet-driven variability for annotated model documents.
//!
//! A workbook (one .xlsx file or a directory of .csv sheets) holds
//! configurations, an optional feature model, and annotation tables.
//! This crate validates configurations against the feature model,
//! rewrites annotated regions of a target document (Uppaal XML or any
//! text with `// @Name` comment blocks) for a chosen configuration, and
//! drives an external verifier over the result, collecting everything
//! into console and HTML reports.
//!
//! Modules follow the pipeline: [`workbook`] loads and classifies
//! sheets, [`featmodel`] parses and checks the feature model,
//! [`annotations`] resolves guarded rows into rendered text,
//! [`docrewrite`] splices that text into the document, [`runner`]
//! invokes the verifier, [`report`] renders results, and [`cli`] ties
//! the steps together.

pub mod annotations;
pub mod cli;
pub mod docrewrite;
pub mod error;
pub mod featexpr;
pub mod featmodel;
pub mod report;
pub mod runner;
pub mod workbook;

pub use error::{Error, Result};
