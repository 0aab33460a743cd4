//! Annotated-block scanning and in-place document rewriting.
//!
//! Two block shapes exist in a target document. A comment block starts at
//! a line whose trimmed content is `// @Name` (anything after the name is
//! ignored) and its body runs to just before the first whitespace-only
//! line, or to end of input. An XML-element block is the text strictly
//! between literal `<name>` and the first following `</name>`, looked up
//! only for names that correspond to annotation tables. Replacement
//! touches body bytes only; everything else survives byte-for-byte.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use crate::annotations::{render_block, AnnotationTable, BlockKind, Configuration};
use crate::error::{Error, Result};
use crate::featexpr::ident_prefix_len;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpan {
    pub name: String,
    pub kind: BlockKind,
    /// The `// @Name` line for comment blocks; the whole element from
    /// `<name>` through `</name>` for XML blocks. Byte offsets.
    pub marker_span: Range<usize>,
    /// Replaceable content. For comment blocks this excludes the final
    /// line's terminator, so the blank line after the block stays intact
    /// across replacements.
    pub body_span: Range<usize>,
}

impl BlockSpan {
    pub(crate) fn extent(&self) -> Range<usize> {
        self.marker_span.start.min(self.body_span.start)
            ..self.marker_span.end.max(self.body_span.end)
    }

    fn display_name(&self) -> String {
        match self.kind {
            BlockKind::CommentBlock => format!("// @{}", self.name),
            BlockKind::XmlElement => format!("<{}>", self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedDocument {
    pub text: String,
    /// Non-overlapping, sorted by start offset.
    pub blocks: Vec<BlockSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewriteWarning {
    /// A table has no block in the document to land in.
    MissingTarget { table: String },
    /// A document block has no table feeding it.
    UnmatchedBlock { block: String },
}

impl fmt::Display for RewriteWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteWarning::MissingTarget { table } => {
                write!(f, "table '{table}' has no matching block in the document")
            }
            RewriteWarning::UnmatchedBlock { block } => {
                write!(f, "document block '{block}' has no matching annotation table")
            }
        }
    }
}

/// (content_start, content_end, terminator_end) per line. The content
/// range excludes the line terminator (LF or CRLF). A final line without
/// a terminator is included; a trailing terminator adds no empty line.
fn line_table(text: &str) -> Vec<(usize, usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..bytes.len() {
        if bytes[i] == b'\n' {
            let content_end = if i > start && bytes[i - 1] == b'\r' { i - 1 } else { i };
            out.push((start, content_end, i + 1));
            start = i + 1;
        }
    }
    if start < bytes.len() {
        out.push((start, bytes.len(), bytes.len()));
    }
    out
}

fn detect_eol(text: &str) -> &'static str {
    match text.find('\n') {
        Some(i) if i > 0 && text.as_bytes()[i - 1] == b'\r' => "\r\n",
        _ => "\n",
    }
}

/// Find every annotated block. `xml_targets` names the elements to match;
/// arbitrary XML in the document is otherwise left alone. Blocks may share
/// a name. Nested or otherwise overlapping blocks have no coherent
/// replacement order and are rejected.
pub fn scan_blocks(text: &str, xml_targets: &BTreeSet<String>) -> Result<AnnotatedDocument> {
    let lines = line_table(text);
    let mut blocks: Vec<BlockSpan> = Vec::new();

    for (i, &(cs, ce, _)) in lines.iter().enumerate() {
        let Some(rest) = text[cs..ce].trim_start().strip_prefix("// @") else {
            continue;
        };
        let len = ident_prefix_len(rest);
        if len == 0 {
            continue;
        }
        let name = rest[..len].to_string();
        let mut last_body: Option<usize> = None;
        for (j, &(s, e, _)) in lines.iter().enumerate().skip(i + 1) {
            if text[s..e].trim().is_empty() {
                break;
            }
            last_body = Some(j);
        }
        let body_span = match last_body {
            Some(k) => lines[i + 1].0..lines[k].1,
            None => {
                let p = lines.get(i + 1).map(|l| l.0).unwrap_or(text.len());
                p..p
            }
        };
        blocks.push(BlockSpan {
            name,
            kind: BlockKind::CommentBlock,
            marker_span: cs..ce,
            body_span,
        });
    }

    for name in xml_targets {
        let open = format!("<{name}>");
        let close = format!("</{name}>");
        let mut from = 0;
        while let Some(rel) = text[from..].find(&open) {
            let open_start = from + rel;
            let body_start = open_start + open.len();
            let rel_close = text[body_start..].find(&close).ok_or_else(|| Error::Document {
                detail: format!(
                    "element '<{name}>' at offset {open_start} has no closing '</{name}>'"
                ),
            })?;
            let body_end = body_start + rel_close;
            let close_end = body_end + close.len();
            blocks.push(BlockSpan {
                name: name.clone(),
                kind: BlockKind::XmlElement,
                marker_span: open_start..close_end,
                body_span: body_start..body_end,
            });
            from = close_end;
        }
    }

    blocks.sort_by_key(|b| (b.extent().start, b.extent().end));
    for pair in blocks.windows(2) {
        if pair[1].extent().start < pair[0].extent().end {
            return Err(Error::Document {
                detail: format!(
                    "annotated blocks overlap: '{}' and '{}' (missing blank line between blocks?)",
                    pair[0].display_name(),
                    pair[1].display_name()
                ),
            });
        }
    }

    Ok(AnnotatedDocument {
        text: text.to_string(),
        blocks,
    })
}

/// The edit that replaces a block's body: a byte range and its new text,
/// joined with the document's own line-ending style. Growing an empty
/// comment body needs terminators of its own: one after the inserted
/// lines so the blank line (or EOF) that delimited the block still
/// delimits it, and one before them when the marker line itself is
/// unterminated. Emptying a non-empty body swallows the body's final
/// terminator, leaving marker then blank line.
fn splice_edit(text: &str, block: &BlockSpan, lines: &[String], eol: &str) -> (Range<usize>, String) {
    let mut range = block.body_span.clone();
    let mut rep = lines.join(eol);
    if block.kind == BlockKind::CommentBlock {
        if range.is_empty() && !lines.is_empty() {
            rep.push_str(eol);
            if range.start > 0 && text.as_bytes()[range.start - 1] != b'\n' {
                rep.insert_str(0, eol);
            }
        } else if !range.is_empty() && lines.is_empty() {
            let rest = &text[range.end..];
            if rest.starts_with("\r\n") {
                range.end += 2;
            } else if rest.starts_with('\n') {
                range.end += 1;
            }
        }
    }
    (range, rep)
}

/// Replace the body of every block matching (name, kind). No match leaves
/// the text unchanged and reports a missing-target warning.
pub fn replace_blocks(
    doc: &AnnotatedDocument,
    name: &str,
    kind: BlockKind,
    lines: &[String],
) -> (String, Vec<RewriteWarning>) {
    let spans: Vec<&BlockSpan> = doc
        .blocks
        .iter()
        .filter(|b| b.name == name && b.kind == kind)
        .collect();
    if spans.is_empty() {
        let table = match kind {
            BlockKind::CommentBlock => format!("@{name}"),
            BlockKind::XmlElement => format!("<{name}>"),
        };
        return (
            doc.text.clone(),
            vec![RewriteWarning::MissingTarget { table }],
        );
    }
    let eol = detect_eol(&doc.text);
    let mut text = doc.text.clone();
    for block in spans.into_iter().rev() {
        let (range, rep) = splice_edit(&doc.text, block, lines, eol);
        text.replace_range(range, &rep);
    }
    (text, Vec::new())
}

/// Rewrite a document for one configuration: scan once, render every
/// table, splice all replacements back-to-front. Warnings report tables
/// without a block and blocks without a table; errors carry the
/// configuration name.
pub fn apply_product(
    text: &str,
    tables: &[AnnotationTable],
    cfg: &Configuration,
    selected: &BTreeSet<String>,
) -> Result<(String, Vec<RewriteWarning>)> {
    let xml_targets: BTreeSet<String> = tables
        .iter()
        .filter(|t| t.kind == BlockKind::XmlElement)
        .map(|t| t.target.clone())
        .collect();
    let doc = scan_blocks(text, &xml_targets).map_err(|e| e.in_config(&cfg.name))?;
    let eol = detect_eol(text);

    let mut warnings = Vec::new();
    let mut edits: Vec<(Range<usize>, String)> = Vec::new();
    for table in tables {
        let lines = render_block(table, cfg, selected).map_err(|e| e.in_config(&cfg.name))?;
        let spans: Vec<&BlockSpan> = doc
            .blocks
            .iter()
            .filter(|b| b.name == table.target && b.kind == table.kind)
            .collect();
        if spans.is_empty() {
            warnings.push(RewriteWarning::MissingTarget {
                table: table.display_name(),
            });
            continue;
        }
        for block in spans {
            edits.push(splice_edit(text, block, &lines, eol));
        }
    }
    for block in &doc.blocks {
        let fed = tables
            .iter()
            .any(|t| t.target == block.name && t.kind == block.kind);
        if !fed {
            warnings.push(RewriteWarning::UnmatchedBlock {
                block: block.display_name(),
            });
        }
    }

    edits.sort_by_key(|(range, _)| range.start);
    let mut out = text.to_string();
    for (range, rep) in edits.into_iter().rev() {
        out.replace_range(range, &rep);
    }
    Ok((out, warnings))
}
