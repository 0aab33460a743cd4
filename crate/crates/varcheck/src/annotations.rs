//! Configuration and annotation tables, row resolution, line rendering.
//!
//! The `@Configurations` sheet names products and marks their features,
//! either with a bare `x` or with an attribute value. Every other
//! annotation sheet is a table: a one-line template in the top-left cell,
//! a header row, then data rows. Rendering a table under a configuration
//! filters rows by their feature guard, resolves identifier overrides,
//! and substitutes `$Column` then `$Feature` placeholders per row.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::featexpr::{eval_expr, ident_prefix_len, parse_expr, FeatureExpr};
use crate::workbook::{column_label, row_is_empty, Sheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `// @Name` comment block in the target document.
    CommentBlock,
    /// `<name>…</name>` element in the target document.
    XmlElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub name: String,
    /// Present key = selected; Some value = attribute, None = plain mark.
    pub features: BTreeMap<String, Option<String>>,
}

impl Configuration {
    pub fn empty(name: impl Into<String>) -> Configuration {
        Configuration {
            name: name.into(),
            features: BTreeMap::new(),
        }
    }

    pub fn selected(&self) -> BTreeSet<String> {
        self.features.keys().cloned().collect()
    }

    pub fn value(&self, feature: &str) -> Option<&str> {
        self.features.get(feature).and_then(|v| v.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// First-column value; repeats drive overriding.
    pub id: String,
    /// One entry per header, empty cells included.
    pub cells: BTreeMap<String, String>,
    pub guard: FeatureExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTable {
    /// Block name without the sheet-name decoration: `@Limits` -> `Limits`.
    pub target: String,
    pub kind: BlockKind,
    pub template: String,
    /// Non-empty header cells, left to right. The first is the identifier
    /// column; one literally named `Features` guards rows.
    pub headers: Vec<String>,
    pub rows: Vec<Row>,
}

impl AnnotationTable {
    /// Name as it appears in the workbook and in the target document.
    pub fn display_name(&self) -> String {
        match self.kind {
            BlockKind::CommentBlock => format!("@{}", self.target),
            BlockKind::XmlElement => format!("<{}>", self.target),
        }
    }
}

pub fn parse_configurations(s: &Sheet) -> Result<Vec<Configuration>> {
    let Some(header) = s.grid.first() else {
        return Ok(Vec::new());
    };
    let mut seen_features: BTreeSet<&String> = BTreeSet::new();
    for name in header.iter().skip(1) {
        if !name.is_empty() && !seen_features.insert(name) {
            return Err(Error::Sheet {
                sheet: s.name.clone(),
                detail: format!("duplicate feature name '{name}' in header row"),
            });
        }
    }
    let mut out: Vec<Configuration> = Vec::new();
    let mut seen_names: BTreeSet<String> = BTreeSet::new();
    for (r, row) in s.grid.iter().enumerate().skip(1) {
        if row_is_empty(row) {
            continue;
        }
        let row_no = r + 1;
        let name = row[0].clone();
        if name.is_empty() {
            return Err(Error::SheetRow {
                sheet: s.name.clone(),
                row: row_no,
                detail: "configuration row has no name".into(),
            });
        }
        if !seen_names.insert(name.clone()) {
            return Err(Error::SheetRow {
                sheet: s.name.clone(),
                row: row_no,
                detail: format!("duplicate configuration name '{name}'"),
            });
        }
        let mut features: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (c, cell) in row.iter().enumerate().skip(1) {
            if cell.is_empty() {
                continue;
            }
            let feature = &header[c];
            if feature.is_empty() {
                return Err(Error::SheetRow {
                    sheet: s.name.clone(),
                    row: row_no,
                    detail: format!(
                        "value '{cell}' in column {} has no feature name in the header row",
                        column_label(c)
                    ),
                });
            }
            let value = if cell.eq_ignore_ascii_case("x") {
                None
            } else {
                Some(cell.clone())
            };
            features.insert(feature.clone(), value);
        }
        out.push(Configuration { name, features });
    }
    Ok(out)
}

pub fn parse_annotation_sheet(s: &Sheet) -> Result<AnnotationTable> {
    let (kind, target) = if let Some(rest) = s.name.strip_prefix('@') {
        (BlockKind::CommentBlock, rest.to_string())
    } else if s.name.len() >= 2 && s.name.starts_with('<') && s.name.ends_with('>') {
        (BlockKind::XmlElement, s.name[1..s.name.len() - 1].to_string())
    } else {
        return Err(Error::Sheet {
            sheet: s.name.clone(),
            detail: "not an annotation sheet name (expected '@Name' or '<name>')".into(),
        });
    };
    if target.is_empty() {
        return Err(Error::Sheet {
            sheet: s.name.clone(),
            detail: "annotation sheet name has an empty target".into(),
        });
    }
    let template = s.cell(0, 0).to_string();
    if template.is_empty() {
        return Err(Error::Sheet {
            sheet: s.name.clone(),
            detail: "missing template in row 1, column A".into(),
        });
    }
    let header_row = s.grid.get(1).filter(|r| !row_is_empty(r)).ok_or_else(|| {
        Error::Sheet {
            sheet: s.name.clone(),
            detail: "missing header row (row 2)".into(),
        }
    })?;
    let mut header_cols: Vec<(usize, String)> = Vec::new();
    for (c, name) in header_row.iter().enumerate() {
        if name.is_empty() {
            continue;
        }
        if header_cols.iter().any(|(_, n)| n == name) {
            return Err(Error::Sheet {
                sheet: s.name.clone(),
                detail: format!("duplicate column header '{name}'"),
            });
        }
        header_cols.push((c, name.clone()));
    }
    let id_col = header_cols[0].0;
    let guard_col = header_cols
        .iter()
        .find(|(_, n)| n == "Features")
        .map(|(c, _)| *c);

    let mut rows = Vec::new();
    for (r, row) in s.grid.iter().enumerate().skip(2) {
        if row_is_empty(row) {
            continue;
        }
        let cells: BTreeMap<String, String> = header_cols
            .iter()
            .map(|(c, name)| (name.clone(), s.cell(r, *c).to_string()))
            .collect();
        let guard = match guard_col {
            Some(c) => {
                let text = s.cell(r, c);
                parse_expr(text).map_err(|e| Error::SheetRow {
                    sheet: s.name.clone(),
                    row: r + 1,
                    detail: format!("invalid feature expression '{text}': {e}"),
                })?
            }
            None => FeatureExpr::True,
        };
        rows.push(Row {
            id: s.cell(r, id_col).to_string(),
            cells,
            guard,
        });
    }
    Ok(AnnotationTable {
        target,
        kind,
        template,
        headers: header_cols.into_iter().map(|(_, n)| n).collect(),
        rows,
    })
}

/// Filter rows by guard, keep the last row per identifier, and order the
/// result by each identifier's first appearance among the kept rows. The
/// first-appearance order keeps generated blocks diff-stable when an
/// override toggles on or off.
pub fn resolve_rows(t: &AnnotationTable, selected: &BTreeSet<String>) -> Vec<Row> {
    let mut order: Vec<&str> = Vec::new();
    let mut last: HashMap<&str, &Row> = HashMap::new();
    for row in t.rows.iter().filter(|r| eval_expr(&r.guard, selected)) {
        if !last.contains_key(row.id.as_str()) {
            order.push(&row.id);
        }
        last.insert(&row.id, row);
    }
    order.into_iter().map(|id| last[id].clone()).collect()
}

/// Render one line per resolved row.
///
/// Pass 1 replaces `$Header` tokens in the template with row cells; pass 2
/// replaces tokens still unresolved with the value of the named feature,
/// provided it is selected and carries one. Tokens are maximal identifier
/// lexemes after `$` and must match exactly; `$` not followed by an
/// identifier is literal. For XML-element tables every substituted text is
/// escaped while template literals pass through verbatim. A token that
/// survives both passes is an error: a typo or a missing feature value.
pub fn render_block(
    t: &AnnotationTable,
    cfg: &Configuration,
    selected: &BTreeSet<String>,
) -> Result<Vec<String>> {
    let escape = t.kind == BlockKind::XmlElement;
    resolve_rows(t, selected)
        .iter()
        .map(|row| render_row(t, row, cfg, selected, escape))
        .collect()
}

fn render_row(
    t: &AnnotationTable,
    row: &Row,
    cfg: &Configuration,
    selected: &BTreeSet<String>,
    escape: bool,
) -> Result<String> {
    let pass1 = substitute(&t.template, |token| {
        row.cells
            .get(token)
            .map(|cell| if escape { xml_escape(cell) } else { cell.clone() })
    });
    let mut unresolved: Option<String> = None;
    let pass2 = substitute(&pass1, |token| {
        match (selected.contains(token), cfg.value(token)) {
            (true, Some(value)) => Some(if escape { xml_escape(value) } else { value.to_string() }),
            _ => {
                if unresolved.is_none() {
                    unresolved = Some(token.to_string());
                }
                None
            }
        }
    });
    match unresolved {
        Some(token) => Err(Error::UnresolvedToken {
            table: t.display_name(),
            row_id: row.id.clone(),
            token,
        }),
        None => Ok(pass2),
    }
}

/// Feature-value substitution over arbitrary cell text, without escaping.
/// Query formulas run through this before reaching the backend. Returns
/// the first unresolved token as the error.
pub fn substitute_values(
    text: &str,
    cfg: &Configuration,
    selected: &BTreeSet<String>,
) -> std::result::Result<String, String> {
    let mut unresolved: Option<String> = None;
    let out = substitute(text, |token| {
        match (selected.contains(token), cfg.value(token)) {
            (true, Some(value)) => Some(value.to_string()),
            _ => {
                if unresolved.is_none() {
                    unresolved = Some(token.to_string());
                }
                None
            }
        }
    });
    match unresolved {
        Some(token) => Err(token),
        None => Ok(out),
    }
}

/// Replace each `$token` via the callback; `None` leaves the token in
/// place. Inserted text is not rescanned within the same pass.
fn substitute(input: &str, mut lookup: impl FnMut(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(input.len());
    let mut rest = input;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let len = ident_prefix_len(after);
        if len == 0 {
            out.push('$');
            rest = after;
            continue;
        }
        let token = &after[..len];
        match lookup(token) {
            Some(value) => out.push_str(&value),
            None => {
                out.push('$');
                out.push_str(token);
            }
        }
        rest = &after[len..];
    }
    out.push_str(rest);
    out
}

pub(crate) fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            other => out.push(other),
        }
    }
    out
}
