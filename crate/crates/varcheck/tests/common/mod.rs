//! Shared helpers for the integration suites: hammer fixture staging, a
//! CLI runner, a unix script writer, and a minimal XLSX writer so tests
//! can build real workbooks without an office suite.

#![allow(dead_code)]

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub struct Hammer {
    pub workbook: PathBuf,
    pub model: PathBuf,
    pub mock: PathBuf,
}

/// Copy the hammer fixture into `dir` so tests can rewrite freely.
/// Layout: `<dir>/hammer/` (CSV workbook), `<dir>/hammer.xml`,
/// `<dir>/mock_all_pass.tsv`.
pub fn stage_hammer(dir: &Path) -> Hammer {
    let src = fixture_dir();
    let workbook = dir.join("hammer");
    fs::create_dir(&workbook).unwrap();
    for entry in fs::read_dir(src.join("hammer")).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), workbook.join(entry.file_name())).unwrap();
    }
    let model = dir.join("hammer.xml");
    fs::copy(src.join("hammer.xml"), &model).unwrap();
    let mock = dir.join("mock_all_pass.tsv");
    fs::copy(src.join("mock_all_pass.tsv"), &mock).unwrap();
    Hammer {
        workbook,
        model,
        mock,
    }
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Run the varcheck binary with `cwd` as working directory. The
/// VARCHECK_BACKEND variable is cleared so ambient environments cannot
/// leak into tests; pass `envs` to set it deliberately.
pub fn run_cli(cwd: &Path, args: &[&str], envs: &[(&str, &str)]) -> CliOutput {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varcheck"));
    cmd.args(args).current_dir(cwd).env_remove("VARCHECK_BACKEND");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("varcheck binary runs");
    CliOutput {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

#[cfg(unix)]
pub fn write_script(path: &Path, body: &str) {
    use std::os::unix::fs::PermissionsExt;
    fs::write(path, body).unwrap();
    fs::set_permissions(path, fs::Permissions::from_mode(0o755)).unwrap();
}

/// Fails the test if `text` is not well-formed XML (the HTML report is
/// written as XHTML precisely so this check is possible).
pub fn assert_well_formed_xml(text: &str) {
    let mut reader = quick_xml::Reader::from_str(text);
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(quick_xml::events::Event::Eof) => break,
            Ok(_) => {}
            Err(e) => panic!("not well-formed at byte {}: {e}", reader.buffer_position()),
        }
        buf.clear();
    }
}

// ---------------------------------------------------------------------
// Minimal XLSX writer. Hand-built parts, deflated zip entries; enough
// for shared strings, inline strings, numbers, booleans, cached formula
// results, empty gaps, and merged regions.

#[derive(Debug, Clone)]
pub enum XCell {
    Empty,
    Shared(String),
    Inline(String),
    Num(f64),
    Bool(bool),
    /// Formula with a cached numeric result.
    FormulaNum(String, f64),
    /// Formula with a cached string result.
    FormulaStr(String, String),
}

pub fn shared(s: &str) -> XCell {
    XCell::Shared(s.to_string())
}

pub struct XSheet {
    pub name: String,
    pub rows: Vec<Vec<XCell>>,
    /// Merge regions like "A1:C1". Only the top-left cell holds a value,
    /// matching what spreadsheet applications store.
    pub merges: Vec<String>,
}

impl XSheet {
    pub fn new(name: &str, rows: Vec<Vec<XCell>>) -> XSheet {
        XSheet {
            name: name.to_string(),
            rows,
            merges: Vec::new(),
        }
    }
}

fn xml_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            other => out.push(other),
        }
    }
    out
}

fn col_name(mut idx: usize) -> String {
    let mut out = String::new();
    loop {
        out.insert(0, (b'A' + (idx % 26) as u8) as char);
        if idx < 26 {
            break;
        }
        idx = idx / 26 - 1;
    }
    out
}

pub fn write_xlsx(path: &Path, sheets: &[XSheet]) {
    let mut strings: Vec<String> = Vec::new();
    let mut string_id = |s: &str| -> usize {
        match strings.iter().position(|x| x == s) {
            Some(i) => i,
            None => {
                strings.push(s.to_string());
                strings.len() - 1
            }
        }
    };

    let mut sheet_parts: Vec<String> = Vec::new();
    for sheet in sheets {
        let mut body = String::from(
            "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
             <worksheet xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\">\
             <sheetData>",
        );
        for (r, row) in sheet.rows.iter().enumerate() {
            body.push_str(&format!("<row r=\"{}\">", r + 1));
            for (c, cell) in row.iter().enumerate() {
                let cell_ref = format!("{}{}", col_name(c), r + 1);
                let rendered = match cell {
                    XCell::Empty => continue,
                    XCell::Shared(s) => {
                        format!("<c r=\"{cell_ref}\" t=\"s\"><v>{}</v></c>", string_id(s))
                    }
                    XCell::Inline(s) => format!(
                        "<c r=\"{cell_ref}\" t=\"inlineStr\"><is><t xml:space=\"preserve\">{}</t></is></c>",
                        xml_escape(s)
                    ),
                    XCell::Num(v) => format!("<c r=\"{cell_ref}\"><v>{v}</v></c>"),
                    XCell::Bool(b) => format!(
                        "<c r=\"{cell_ref}\" t=\"b\"><v>{}</v></c>",
                        if *b { 1 } else { 0 }
                    ),
                    XCell::FormulaNum(f, v) => format!(
                        "<c r=\"{cell_ref}\"><f>{}</f><v>{v}</v></c>",
                        xml_escape(f)
                    ),
                    XCell::FormulaStr(f, v) => format!(
                        "<c r=\"{cell_ref}\" t=\"str\"><f>{}</f><v>{}</v></c>",
                        xml_escape(f),
                        xml_escape(v)
                    ),
                };
                body.push_str(&rendered);
            }
            body.push_str("</row>");
        }
        body.push_str("</sheetData>");
        if !sheet.merges.is_empty() {
            body.push_str(&format!("<mergeCells count=\"{}\">", sheet.merges.len()));
            for m in &sheet.merges {
                body.push_str(&format!("<mergeCell ref=\"{m}\"/>"));
            }
            body.push_str("</mergeCells>");
        }
        body.push_str("</worksheet>");
        sheet_parts.push(body);
    }

    let mut content_types = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
         <Types xmlns=\"http://schemas.openxmlformats.org/package/2006/content-types\">\
         <Default Extension=\"rels\" ContentType=\"application/vnd.openxmlformats-package.relationships+xml\"/>\
         <Default Extension=\"xml\" ContentType=\"application/xml\"/>\
         <Override PartName=\"/xl/workbook.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml\"/>\
         <Override PartName=\"/xl/sharedStrings.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.sharedStrings+xml\"/>",
    );
    for i in 0..sheets.len() {
        content_types.push_str(&format!(
            "<Override PartName=\"/xl/worksheets/sheet{}.xml\" ContentType=\"application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml\"/>",
            i + 1
        ));
    }
    content_types.push_str("</Types>");

    let root_rels = "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
         <Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">\
         <Relationship Id=\"rId1\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument\" Target=\"xl/workbook.xml\"/>\
         </Relationships>";

    let mut workbook = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
         <workbook xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" \
         xmlns:r=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships\"><sheets>",
    );
    for (i, sheet) in sheets.iter().enumerate() {
        workbook.push_str(&format!(
            "<sheet name=\"{}\" sheetId=\"{}\" r:id=\"rId{}\"/>",
            xml_escape(&sheet.name),
            i + 1,
            i + 1
        ));
    }
    workbook.push_str("</sheets></workbook>");

    let mut wb_rels = String::from(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
         <Relationships xmlns=\"http://schemas.openxmlformats.org/package/2006/relationships\">",
    );
    for i in 0..sheets.len() {
        wb_rels.push_str(&format!(
            "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet\" Target=\"worksheets/sheet{}.xml\"/>",
            i + 1,
            i + 1
        ));
    }
    wb_rels.push_str(&format!(
        "<Relationship Id=\"rId{}\" Type=\"http://schemas.openxmlformats.org/officeDocument/2006/relationships/sharedStrings\" Target=\"sharedStrings.xml\"/>",
        sheets.len() + 1
    ));
    wb_rels.push_str("</Relationships>");

    let mut shared_strings = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"yes\"?>\n\
         <sst xmlns=\"http://schemas.openxmlformats.org/spreadsheetml/2006/main\" count=\"{n}\" uniqueCount=\"{n}\">",
        n = strings.len()
    );
    for s in &strings {
        shared_strings.push_str(&format!(
            "<si><t xml:space=\"preserve\">{}</t></si>",
            xml_escape(s)
        ));
    }
    shared_strings.push_str("</sst>");

    let file = fs::File::create(path).unwrap();
    let mut zip = zip::ZipWriter::new(file);
    let opts = zip::write::SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated);
    let mut add = |name: String, data: &str| {
        zip.start_file(name, opts).unwrap();
        zip.write_all(data.as_bytes()).unwrap();
    };
    add("[Content_Types].xml".into(), &content_types);
    add("_rels/.rels".into(), root_rels);
    add("xl/workbook.xml".into(), &workbook);
    add("xl/_rels/workbook.xml.rels".into(), &wb_rels);
    add("xl/sharedStrings.xml".into(), &shared_strings);
    for (i, part) in sheet_parts.iter().enumerate() {
        add(format!("xl/worksheets/sheet{}.xml", i + 1), part);
    }
    zip.finish().unwrap();
}

/// The hammer fixture sheets rebuilt as XLSX cell grids, so the .xlsx
/// path can be checked against the CSV directory loading the same data.
pub fn hammer_as_xlsx(path: &Path) {
    let csv_dir = fixture_dir().join("hammer");
    let mut sheets = Vec::new();
    for (file, name) in [
        ("@Configurations.csv", "@Configurations"),
        ("@FeatureModel.csv", "@FeatureModel"),
        ("@Limits.csv", "@Limits"),
        ("_queries_.csv", "<queries>"),
    ] {
        let text = fs::read_to_string(csv_dir.join(file)).unwrap();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.unwrap();
            rows.push(
                record
                    .iter()
                    .map(|cell| {
                        if cell.is_empty() {
                            XCell::Empty
                        } else {
                            shared(cell)
                        }
                    })
                    .collect(),
            );
        }
        sheets.push(XSheet::new(name, rows));
    }
    write_xlsx(path, &sheets);
}
