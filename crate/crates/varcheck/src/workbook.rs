//! Workbook loading and sheet classification.
//!
//! A workbook is either an `.xlsx` file or a directory of `.csv` files
//! (one sheet per file). Either way it loads into the same in-memory
//! shape: named sheets holding rectangular grids of trimmed strings.
//! Sheet names route each sheet to its role: `@Configurations` and
//! `@FeatureModel` are reserved, other `@Name` sheets define comment-block
//! annotation tables, `<name>` sheets define XML-element tables, and
//! anything else is ignored.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use calamine::{open_workbook, Data, Reader, Xlsx};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sheet {
    pub name: String,
    /// Rectangular: every row has the same length after normalization.
    pub grid: Vec<Vec<String>>,
}

impl Sheet {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<String>>) -> Sheet {
        Sheet {
            name: name.into(),
            grid: normalize_grid(rows),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.grid.len()
    }

    pub fn n_cols(&self) -> usize {
        self.grid.first().map(|r| r.len()).unwrap_or(0)
    }

    /// Cell content, or "" outside the grid.
    pub fn cell(&self, row: usize, col: usize) -> &str {
        self.grid
            .get(row)
            .and_then(|r| r.get(col))
            .map(|s| s.as_str())
            .unwrap_or("")
    }
}

/// Trim every cell, drop trailing all-empty rows, then pad all rows to the
/// width of the widest row (measured to its last non-empty cell). Leading
/// empty rows and columns survive: position is meaningful, notably in the
/// feature model where the column encodes tree depth.
pub fn normalize_grid(rows: Vec<Vec<String>>) -> Vec<Vec<String>> {
    let mut grid: Vec<Vec<String>> = rows
        .into_iter()
        .map(|row| row.into_iter().map(|c| c.trim().to_string()).collect())
        .collect();
    while grid.last().is_some_and(|row| row.iter().all(|c| c.is_empty())) {
        grid.pop();
    }
    let width = grid
        .iter()
        .map(|row| {
            row.iter()
                .rposition(|c| !c.is_empty())
                .map(|i| i + 1)
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    for row in &mut grid {
        row.truncate(width);
        row.resize(width, String::new());
    }
    grid
}

pub(crate) fn row_is_empty(row: &[String]) -> bool {
    row.iter().all(|c| c.is_empty())
}

/// Spreadsheet-style column label: 0 -> A, 25 -> Z, 26 -> AA.
pub(crate) fn column_label(idx: usize) -> String {
    let mut n = idx + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).unwrap()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workbook {
    pub source_path: PathBuf,
    /// Sheets in workbook order (for CSV directories: file name order).
    pub sheets: Vec<Sheet>,
}

#[derive(Debug, Clone, Default)]
pub struct SheetClassification {
    pub configurations: Option<Sheet>,
    pub feature_model: Option<Sheet>,
    pub at_annotations: Vec<Sheet>,
    pub xml_annotations: Vec<Sheet>,
    pub ignored: Vec<String>,
}

pub fn load_workbook(path: &Path) -> Result<Workbook> {
    let meta = fs::metadata(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let sheets = if meta.is_dir() {
        load_csv_dir(path)?
    } else if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("xlsx"))
    {
        load_xlsx(path)?
    } else {
        return Err(Error::Workbook {
            path: path.to_path_buf(),
            detail: "unsupported format, expected an .xlsx file or a directory of .csv files"
                .into(),
        });
    };
    let mut seen = HashSet::new();
    for sheet in &sheets {
        if !seen.insert(sheet.name.clone()) {
            return Err(Error::Workbook {
                path: path.to_path_buf(),
                detail: format!("duplicate sheet name '{}'", sheet.name),
            });
        }
    }
    Ok(Workbook {
        source_path: path.to_path_buf(),
        sheets,
    })
}

fn load_xlsx(path: &Path) -> Result<Vec<Sheet>> {
    let mut wb: Xlsx<std::io::BufReader<std::fs::File>> =
        open_workbook(path).map_err(|e: calamine::XlsxError| Error::Workbook {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
    let names = wb.sheet_names().to_owned();
    let mut sheets = Vec::with_capacity(names.len());
    for name in names {
        let range = wb.worksheet_range(&name).map_err(|e| Error::Workbook {
            path: path.to_path_buf(),
            detail: format!("sheet '{name}': {e}"),
        })?;
        let mut rows = Vec::new();
        if let Some((end_row, end_col)) = range.end() {
            for r in 0..=end_row {
                let mut row = Vec::with_capacity(end_col as usize + 1);
                for c in 0..=end_col {
                    let text = range
                        .get_value((r, c))
                        .map(cell_text)
                        .unwrap_or_default();
                    row.push(text);
                }
                rows.push(row);
            }
        }
        sheets.push(Sheet::new(name, rows));
    }
    Ok(sheets)
}

/// Cells are compared as text everywhere downstream, so numeric cells must
/// render the way a user typed them: integral floats without a decimal
/// point (spreadsheets store `4` as `4.0`), anything else in shortest
/// round-trip form.
fn cell_text(data: &Data) -> String {
    match data {
        Data::Empty => String::new(),
        Data::String(s) => s.clone(),
        Data::Float(f) => format_number(*f),
        Data::Int(i) => i.to_string(),
        Data::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        Data::DateTime(dt) => format_number(dt.as_f64()),
        Data::DateTimeIso(s) | Data::DurationIso(s) => s.clone(),
        Data::Error(e) => e.to_string(),
    }
}

fn format_number(f: f64) -> String {
    if f.is_finite() && f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{}", f as i64)
    } else {
        format!("{f}")
    }
}

/// Directory of CSV files, one sheet per file, in file name order. A stem
/// wrapped in underscores maps to an XML-element sheet name: `_queries_`
/// loads as `<queries>`, since `<` and `>` are awkward in file names.
fn load_csv_dir(dir: &Path) -> Result<Vec<Sheet>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
        })
        .collect();
    files.sort();
    let mut sheets = Vec::with_capacity(files.len());
    for file in files {
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let name = if stem.len() > 2 && stem.starts_with('_') && stem.ends_with('_') {
            format!("<{}>", &stem[1..stem.len() - 1])
        } else {
            stem
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_path(&file)
            .map_err(|e| Error::Workbook {
                path: file.clone(),
                detail: e.to_string(),
            })?;
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Workbook {
                path: file.clone(),
                detail: e.to_string(),
            })?;
            rows.push(record.iter().map(|c| c.to_string()).collect());
        }
        sheets.push(Sheet::new(name, rows));
    }
    Ok(sheets)
}

/// Route sheets by name. Both reserved roles accept at most one sheet;
/// `@Configuration`/`@Configurations` and `@FeatureModel` match
/// case-insensitively.
pub fn classify_sheets(wb: &Workbook) -> Result<SheetClassification> {
    let mut out = SheetClassification::default();
    for sheet in &wb.sheets {
        let lower = sheet.name.to_lowercase();
        if lower == "@configurations" || lower == "@configuration" {
            if let Some(prev) = &out.configurations {
                return Err(Error::Sheet {
                    sheet: sheet.name.clone(),
                    detail: format!("duplicate configurations sheet, already have '{}'", prev.name),
                });
            }
            out.configurations = Some(sheet.clone());
        } else if lower == "@featuremodel" {
            if let Some(prev) = &out.feature_model {
                return Err(Error::Sheet {
                    sheet: sheet.name.clone(),
                    detail: format!("duplicate feature model sheet, already have '{}'", prev.name),
                });
            }
            out.feature_model = Some(sheet.clone());
        } else if sheet.name.starts_with('@') {
            out.at_annotations.push(sheet.clone());
        } else if sheet.name.len() >= 2 && sheet.name.starts_with('<') && sheet.name.ends_with('>')
        {
            out.xml_annotations.push(sheet.clone());
        } else {
            out.ignored.push(sheet.name.clone());
        }
    }
    Ok(out)
}
