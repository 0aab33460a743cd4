//! Command-line front end: load, classify, validate, apply, verify, report.
//!
//! Every model rewrite is preceded by a timestamped copy under `backups/`
//! and performed atomically (temp file + rename). Exit codes are stable:
//! 0 success, 1 validation or verification failure, 2 usage or fatal error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::Parser;

use crate::annotations::{
    parse_annotation_sheet, parse_configurations, resolve_rows, substitute_values,
    AnnotationTable, BlockKind, Configuration,
};
use crate::docrewrite::apply_product;
use crate::error::{Error, Result};
use crate::featexpr::vars_of;
use crate::featmodel::{parse_feature_model, FeatureModel, Violation};
use crate::report::{render_console, render_html, ConfigEntry, VerificationReport};
use crate::runner::{
    run_verification, BackendSpec, QueryResult, QueryStatus, DEFAULT_COMMAND_TEMPLATE,
};
use crate::workbook::{classify_sheets, load_workbook};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Rewrite the model for one configuration; no verification.
    Apply,
    /// Apply, then verify the rewritten model.
    Run,
    /// Verify every configuration and build one report.
    RunAll,
    /// Check configurations against the feature model; touch nothing.
    Validate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliRequest {
    pub workbook_path: PathBuf,
    pub model_path: Option<PathBuf>,
    pub mode: Mode,
    pub product: Option<String>,
    pub timeout_s: Option<u64>,
    pub backend_override: Option<String>,
    pub mock_results: Option<PathBuf>,
    pub jobs: usize,
}

#[derive(Parser, Debug)]
#[command(
    name = "varcheck",
    about = "Rewrite annotated model documents from spreadsheet configurations and verify them",
    disable_version_flag = true
)]
struct Cli {
    /// Workbook: an .xlsx file or a directory of .csv sheets
    workbook: PathBuf,

    /// Rewrite the model for the chosen configuration, then verify it
    #[arg(long, group = "mode")]
    run: bool,

    /// Verify every configuration and build a combined report
    #[arg(long = "runAll", group = "mode")]
    run_all: bool,

    /// Validate configurations against the feature model only
    #[arg(long, group = "mode")]
    validate: bool,

    /// Configuration to apply (default: first row of @Configurations)
    #[arg(short = 'p', value_name = "NAME")]
    product: Option<String>,

    /// Target model document (default: workbook path with .xml extension)
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,

    /// Backend budget per invocation, in seconds
    #[arg(long, value_name = "SECONDS")]
    timeout: Option<u64>,

    /// Backend command template; {model} and {timeout_s} are substituted
    #[arg(long, value_name = "TEMPLATE")]
    backend: Option<String>,

    /// Read verdicts from a formula<TAB>verdict file instead of a backend
    #[arg(long, value_name = "PATH")]
    mock: Option<PathBuf>,

    /// Verify up to N configurations concurrently during --runAll
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
}

/// Parse command-line arguments (without the binary name). Errors are
/// clap usage errors; `main` turns them into exit code 2.
pub fn parse_args<I, T>(args: I) -> std::result::Result<CliRequest, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv = std::iter::once(OsString::from("varcheck"))
        .chain(args.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(argv)?;
    let mode = if cli.run {
        Mode::Run
    } else if cli.run_all {
        Mode::RunAll
    } else if cli.validate {
        Mode::Validate
    } else {
        Mode::Apply
    };
    Ok(CliRequest {
        workbook_path: cli.workbook,
        model_path: cli.model,
        mode,
        product: cli.product,
        timeout_s: cli.timeout,
        backend_override: cli.backend,
        mock_results: cli.mock,
        jobs: cli.jobs.max(1),
    })
}

/// Workbook path with its extension replaced by `.xml`; `--model` overrides.
pub fn default_model_path(workbook: &Path) -> PathBuf {
    workbook.with_extension("xml")
}

/// Backend command template precedence: `--backend` flag, then the
/// `VARCHECK_BACKEND` environment variable, then the built-in default.
pub fn backend_command(flag: Option<&str>, env: Option<&str>) -> String {
    flag.or(env).unwrap_or(DEFAULT_COMMAND_TEMPLATE).to_string()
}

/// Copy the model into `backups/` next to it, named
/// `<stem>-<YYYYMMDD-HHMMSS>.<ext>` (UTC). Same-second collisions get
/// `-1`, `-2`, … appended before the extension.
pub fn backup_model(model: &Path) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S").to_string();
    backup_model_at(model, &stamp)
}

pub fn backup_model_at(model: &Path, stamp: &str) -> Result<PathBuf> {
    let bytes = fs::read(model).map_err(|source| Error::Io {
        path: model.to_path_buf(),
        source,
    })?;
    let dir = parent_dir(model).join("backups");
    fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let stem = model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());
    let ext = model
        .extension()
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_default();
    for attempt in 0u32.. {
        let suffix = if attempt == 0 {
            String::new()
        } else {
            format!("-{attempt}")
        };
        let candidate = dir.join(format!("{stem}-{stamp}{suffix}{ext}"));
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&candidate)
        {
            Ok(mut file) => {
                file.write_all(&bytes).map_err(|source| Error::Io {
                    path: candidate.clone(),
                    source,
                })?;
                return Ok(candidate);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(source) => {
                return Err(Error::Io {
                    path: candidate,
                    source,
                })
            }
        }
    }
    unreachable!("backup suffix search is unbounded")
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Write through a temp file in the target's directory, then rename over
/// the target. A crash mid-write never leaves a half-written model.
fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = parent_dir(path);
    let mut tmp = tempfile::Builder::new()
        .prefix(".varcheck-")
        .tempfile_in(&dir)
        .map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
    tmp.write_all(text.as_bytes()).map_err(|source| Error::Io {
        path: tmp.path().to_path_buf(),
        source,
    })?;
    tmp.persist(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn execute(req: &CliRequest) -> i32 {
    match execute_inner(req) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

struct Loaded {
    configs: Vec<Configuration>,
    model: Option<FeatureModel>,
    tables: Vec<AnnotationTable>,
}

fn load_inputs(req: &CliRequest) -> Result<Loaded> {
    let wb = load_workbook(&req.workbook_path)?;
    let cls = classify_sheets(&wb)?;
    let mut header_features = BTreeSet::new();
    let configs = match &cls.configurations {
        Some(sheet) => {
            if let Some(header) = sheet.grid.first() {
                header_features.extend(header.iter().skip(1).filter(|c| !c.is_empty()).cloned());
            }
            parse_configurations(sheet)?
        }
        None => Vec::new(),
    };
    let model = cls
        .feature_model
        .as_ref()
        .map(parse_feature_model)
        .transpose()?;
    let mut tables = Vec::new();
    for sheet in cls.at_annotations.iter().chain(cls.xml_annotations.iter()) {
        tables.push(parse_annotation_sheet(sheet)?);
    }
    for name in &cls.ignored {
        eprintln!("warning: sheet '{name}' is neither reserved nor an annotation table; ignored");
    }
    lint_guards(&tables, &header_features, model.as_ref());
    Ok(Loaded {
        configs,
        model,
        tables,
    })
}

/// Guards referring to features no configuration column or feature-model
/// row declares are legal (they evaluate false) but usually typos.
fn lint_guards(
    tables: &[AnnotationTable],
    header_features: &BTreeSet<String>,
    model: Option<&FeatureModel>,
) {
    let mut known = header_features.clone();
    if let Some(m) = model {
        known.extend(m.features().iter().cloned());
    }
    let mut warned = BTreeSet::new();
    for table in tables {
        for row in &table.rows {
            for var in vars_of(&row.guard) {
                if !known.contains(&var) && warned.insert(var.clone()) {
                    eprintln!(
                        "warning: feature '{var}' appears in guards but in no \
                         configuration column or feature model"
                    );
                }
            }
        }
    }
}

fn pick_product(req: &CliRequest, configs: &[Configuration]) -> Result<Configuration> {
    match &req.product {
        Some(name) => configs
            .iter()
            .find(|c| &c.name == name)
            .cloned()
            .ok_or_else(|| Error::Other(format!("unknown configuration '{name}'"))),
        None => Ok(configs
            .first()
            .cloned()
            .unwrap_or_else(|| Configuration::empty("default"))),
    }
}

/// Expanded selection plus violations, the latter already carrying the
/// configuration name. Without a feature model everything is valid.
fn analyze(
    model: Option<&FeatureModel>,
    cfg: &Configuration,
) -> (BTreeSet<String>, Vec<Violation>) {
    let sel = cfg.selected();
    match model {
        Some(m) => {
            let expanded = m.expand_selection(&sel);
            let violations = m
                .validate_selection(&expanded)
                .into_iter()
                .map(|v| v.for_config(&cfg.name))
                .collect();
            (expanded, violations)
        }
        None => (sel, Vec::new()),
    }
}

/// Expanded selection with per-configuration attribute values, sorted.
fn feature_list(cfg: &Configuration, selected: &BTreeSet<String>) -> Vec<(String, Option<String>)> {
    selected
        .iter()
        .map(|name| (name.clone(), cfg.value(name).map(str::to_string)))
        .collect()
}

/// (formula, comment) pairs from the resolved `<queries>` rows, with
/// feature values substituted. The first header names the formula column.
fn resolved_queries(
    tables: &[AnnotationTable],
    cfg: &Configuration,
    selected: &BTreeSet<String>,
) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for table in tables
        .iter()
        .filter(|t| t.kind == BlockKind::XmlElement && t.target == "queries")
    {
        for row in resolve_rows(table, selected) {
            let raw_formula = row
                .cells
                .get(&table.headers[0])
                .cloned()
                .unwrap_or_default();
            let formula =
                substitute_values(&raw_formula, cfg, selected).map_err(|token| {
                    Error::UnresolvedToken {
                        table: table.display_name(),
                        row_id: row.id.clone(),
                        token,
                    }
                })?;
            let raw_comment = row.cells.get("Comment").cloned().unwrap_or_default();
            // Comments are cosmetic; an unresolved token there is not fatal.
            let comment =
                substitute_values(&raw_comment, cfg, selected).unwrap_or(raw_comment);
            out.push((formula, comment));
        }
    }
    Ok(out)
}

fn backend_spec_for(req: &CliRequest) -> BackendSpec {
    let mut spec = match &req.mock_results {
        Some(path) => BackendSpec::mock(path.clone()),
        None => BackendSpec::external(backend_command(
            req.backend_override.as_deref(),
            std::env::var("VARCHECK_BACKEND").ok().as_deref(),
        )),
    };
    if let Some(t) = req.timeout_s {
        spec.timeout_s = t;
    }
    spec
}

fn model_path_for(req: &CliRequest) -> PathBuf {
    req.model_path
        .clone()
        .unwrap_or_else(|| default_model_path(&req.workbook_path))
}

fn read_model(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| {
        Error::Other(format!(
            "model document '{}' cannot be read ({source}); pass --model to point \
             at the target document",
            path.display()
        ))
    })
}

fn print_violations(violations: &[Violation]) {
    for v in violations {
        println!("{}", v.detail);
    }
}

fn build_report(
    req: &CliRequest,
    loaded: &Loaded,
    entries: Vec<ConfigEntry>,
) -> VerificationReport {
    VerificationReport {
        generated_at: chrono::Utc::now()
            .format("%Y-%m-%d %H:%M:%S UTC")
            .to_string(),
        workbook: req.workbook_path.clone(),
        model: model_path_for(req),
        uvl_text: loaded.model.as_ref().map(|m| m.to_uvl()),
        annotation_tables: loaded.tables.iter().map(|t| t.display_name()).collect(),
        entries,
    }
}

/// `report.html` lands next to the workbook, overwriting any previous run.
fn write_report_html(req: &CliRequest, report: &VerificationReport) -> Result<PathBuf> {
    let path = parent_dir(&req.workbook_path).join("report.html");
    fs::write(&path, render_html(report)).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn execute_inner(req: &CliRequest) -> Result<i32> {
    let loaded = load_inputs(req)?;
    match req.mode {
        Mode::Apply => do_apply(req, &loaded),
        Mode::Run => do_run(req, &loaded),
        Mode::RunAll => do_run_all(req, &loaded),
        Mode::Validate => do_validate(req, &loaded),
    }
}

/// Shared by Apply and Run: validate the product, back up, rewrite.
/// `Ok(None)` means validation failed and nothing was written (exit 1).
fn rewrite_model(
    req: &CliRequest,
    loaded: &Loaded,
    model: &Path,
) -> Result<Option<(Configuration, BTreeSet<String>)>> {
    let text = read_model(model)?;
    let cfg = pick_product(req, &loaded.configs)?;
    let (selected, violations) = analyze(loaded.model.as_ref(), &cfg);
    if !violations.is_empty() {
        print_violations(&violations);
        println!(
            "configuration '{}' is invalid; model not rewritten",
            cfg.name
        );
        return Ok(None);
    }
    let (new_text, warnings) = apply_product(&text, &loaded.tables, &cfg, &selected)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let backup = backup_model(model)?;
    write_atomic(model, &new_text)?;
    println!(
        "applied configuration '{}' to {} (backup: {})",
        cfg.name,
        model.display(),
        backup.display()
    );
    Ok(Some((cfg, selected)))
}

fn do_apply(req: &CliRequest, loaded: &Loaded) -> Result<i32> {
    let model = model_path_for(req);
    match rewrite_model(req, loaded, &model)? {
        Some(_) => Ok(0),
        None => Ok(1),
    }
}

fn do_run(req: &CliRequest, loaded: &Loaded) -> Result<i32> {
    let model = model_path_for(req);
    let Some((cfg, selected)) = rewrite_model(req, loaded, &model)? else {
        return Ok(1);
    };
    let queries = resolved_queries(&loaded.tables, &cfg, &selected)?;
    let results = run_verification(&model, &queries, &backend_spec_for(req));
    let clean = results
        .iter()
        .all(|r| r.status == QueryStatus::Passed);
    let entry = ConfigEntry {
        config_name: cfg.name.clone(),
        selected_features: feature_list(&cfg, &selected),
        violations: Vec::new(),
        results,
        skipped: false,
    };
    let report = build_report(req, loaded, vec![entry]);
    print!("{}", render_console(&report));
    let html = write_report_html(req, &report)?;
    println!("report written to {}", html.display());
    Ok(if clean { 0 } else { 1 })
}

struct Prepared {
    cfg: Configuration,
    selected_list: Vec<(String, Option<String>)>,
    violations: Vec<Violation>,
    queries: Vec<(String, String)>,
    /// None for invalid configurations, which are never rewritten.
    rewritten: Option<String>,
}

fn do_run_all(req: &CliRequest, loaded: &Loaded) -> Result<i32> {
    let model = model_path_for(req);
    let original = read_model(&model)?;
    let spec = backend_spec_for(req);

    let mut prepared: Vec<Prepared> = Vec::new();
    let mut warned_rewrite = false;
    for cfg in &loaded.configs {
        let (selected, violations) = analyze(loaded.model.as_ref(), cfg);
        if !violations.is_empty() {
            prepared.push(Prepared {
                cfg: cfg.clone(),
                selected_list: feature_list(cfg, &selected),
                violations,
                queries: Vec::new(),
                rewritten: None,
            });
            continue;
        }
        let (text, warnings) = apply_product(&original, &loaded.tables, cfg, &selected)?;
        // Blocks and tables are the same for every configuration, so the
        // unmatched/missing warnings repeat; print them once.
        if !warned_rewrite {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            warned_rewrite = true;
        }
        let queries = resolved_queries(&loaded.tables, cfg, &selected)?;
        prepared.push(Prepared {
            cfg: cfg.clone(),
            selected_list: feature_list(cfg, &selected),
            violations: Vec::new(),
            queries,
            rewritten: Some(text),
        });
    }

    let results = verify_all(&prepared, &spec, req.jobs, model.extension());

    // The working model ends up as a sequential apply loop would leave it:
    // rewritten for the last valid configuration.
    if let Some(last) = prepared.iter().rev().find_map(|p| p.rewritten.as_deref()) {
        backup_model(&model)?;
        write_atomic(&model, last)?;
    }

    let mut all_passed = true;
    let mut any_invalid = false;
    let mut entries = Vec::new();
    for (p, results) in prepared.into_iter().zip(results) {
        let skipped = !p.violations.is_empty();
        any_invalid |= skipped;
        all_passed &= results.iter().all(|r| r.status == QueryStatus::Passed);
        entries.push(ConfigEntry {
            config_name: p.cfg.name,
            selected_features: p.selected_list,
            violations: p.violations,
            results,
            skipped,
        });
    }
    let report = build_report(req, loaded, entries);
    print!("{}", render_console(&report));
    let html = write_report_html(req, &report)?;
    println!("report written to {}", html.display());
    Ok(if all_passed && !any_invalid { 0 } else { 1 })
}

/// Verify each valid prepared configuration against its own temporary
/// model copy, up to `jobs` at a time. Results keep `prepared` order.
fn verify_all(
    prepared: &[Prepared],
    spec: &BackendSpec,
    jobs: usize,
    model_ext: Option<&std::ffi::OsStr>,
) -> Vec<Vec<QueryResult>> {
    let suffix = model_ext
        .map(|e| format!(".{}", e.to_string_lossy()))
        .unwrap_or_else(|| ".xml".to_string());
    let verify_one = |p: &Prepared| -> Vec<QueryResult> {
        let Some(text) = &p.rewritten else {
            return Vec::new();
        };
        let tmp = tempfile::Builder::new()
            .prefix("varcheck-model-")
            .suffix(&suffix)
            .tempfile()
            .and_then(|mut f| f.write_all(text.as_bytes()).map(|_| f));
        match tmp {
            Ok(file) => run_verification(file.path(), &p.queries, spec),
            Err(e) => p
                .queries
                .iter()
                .enumerate()
                .map(|(i, (formula, comment))| QueryResult {
                    index: i + 1,
                    formula: formula.clone(),
                    comment: comment.clone(),
                    status: QueryStatus::Error(format!("cannot write temporary model: {e}")),
                    duration_ms: 0,
                })
                .collect(),
        }
    };

    let n = prepared.len();
    if jobs <= 1 || n <= 1 {
        return prepared.iter().map(verify_one).collect();
    }
    let slots: Vec<Mutex<Vec<QueryResult>>> = (0..n).map(|_| Mutex::new(Vec::new())).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = verify_one(&prepared[i]);
                *slots[i].lock().unwrap() = result;
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap())
        .collect()
}

fn do_validate(req: &CliRequest, loaded: &Loaded) -> Result<i32> {
    let mut entries = Vec::new();
    let mut all_valid = true;
    for cfg in &loaded.configs {
        let (selected, violations) = analyze(loaded.model.as_ref(), cfg);
        all_valid &= violations.is_empty();
        entries.push(ConfigEntry {
            config_name: cfg.name.clone(),
            selected_features: feature_list(cfg, &selected),
            skipped: !violations.is_empty(),
            violations,
            results: Vec::new(),
        });
    }
    let report = build_report(req, loaded, entries);
    print!("{}", render_console(&report));
    Ok(if all_valid { 0 } else { 1 })
}
