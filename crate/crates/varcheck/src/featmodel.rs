//! Tabular feature models: tree structure, groups, cross-tree constraints.
//!
//! The `@FeatureModel` sheet encodes a feature tree by column position.
//! A structural row declares features; each non-empty cell is the child
//! of the value one column to its left, where an empty left cell falls
//! back to the most recent value seen in that column (the inheritance
//! register). Rows whose first non-empty cell starts with `#` attach
//! group semantics (`#mandatory`, `#optional`, `#alternative`, `#or`) to
//! previously declared siblings, or add a `#constraint` formula.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::featexpr::{eval_expr, parse_expr, FeatureExpr};
use crate::workbook::{column_label, row_is_empty, Sheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKind {
    Mandatory,
    Optional,
    Alternative,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub parent: String,
    pub kind: GroupKind,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    UnknownFeature,
    MissingMandatory,
    AlternativeExceeded,
    OrUnsatisfied,
    ConstraintFailed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Feature name, group parent, or formula text, depending on kind.
    pub subject: String,
    pub detail: String,
}

impl Violation {
    /// Prefix the detail with the configuration it was found under.
    pub fn for_config(mut self, config: &str) -> Violation {
        self.detail = format!("configuration '{config}': {}", self.detail);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    root: String,
    /// Declaration order; drives deterministic iteration everywhere.
    features: Vec<String>,
    parent_of: HashMap<String, Option<String>>,
    children_of: HashMap<String, Vec<String>>,
    groups: Vec<Group>,
    /// Feature -> index into `groups`. At most one group per feature.
    group_of: HashMap<String, usize>,
    cross_constraints: Vec<FeatureExpr>,
}

impl FeatureModel {
    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn contains(&self, name: &str) -> bool {
        self.parent_of.contains_key(name)
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.parent_of.get(name).and_then(|p| p.as_deref())
    }

    pub fn children(&self, name: &str) -> &[String] {
        self.children_of.get(name).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn cross_constraints(&self) -> &[FeatureExpr] {
        &self.cross_constraints
    }

    /// A feature not covered by an optional/alternative/or group is
    /// mandatory; membership in a `#mandatory` group restates the default.
    pub fn is_mandatory(&self, name: &str) -> bool {
        match self.group_of.get(name) {
            None => true,
            Some(&g) => self.groups[g].kind == GroupKind::Mandatory,
        }
    }
}

pub fn parse_feature_model(s: &Sheet) -> Result<FeatureModel> {
    if s.grid.is_empty() {
        return Err(Error::Sheet {
            sheet: s.name.clone(),
            detail: "feature model sheet is empty".into(),
        });
    }
    let width = s.n_cols();
    let mut registers: Vec<Option<String>> = vec![None; width];
    let mut root: Option<String> = None;
    let mut features: Vec<String> = Vec::new();
    let mut parent_of: HashMap<String, Option<String>> = HashMap::new();
    let mut children_of: HashMap<String, Vec<String>> = HashMap::new();
    let mut constraints: Vec<FeatureExpr> = Vec::new();

    struct PendingGroup {
        row_no: usize,
        kind: GroupKind,
        parent: String,
        members: Vec<String>,
    }
    let mut pending: Vec<PendingGroup> = Vec::new();

    let err_at = |row_no: usize, detail: String| Error::SheetRow {
        sheet: s.name.clone(),
        row: row_no,
        detail,
    };

    for (r, row) in s.grid.iter().enumerate() {
        let row_no = r + 1;
        if row_is_empty(row) {
            continue;
        }
        let first = row.iter().position(|c| !c.is_empty()).unwrap();
        if row[first].starts_with('#') {
            let keyword = row[first].as_str();
            if keyword == "#constraint" {
                let text = row[first + 1..]
                    .iter()
                    .find(|c| !c.is_empty())
                    .ok_or_else(|| {
                        err_at(row_no, "missing expression after '#constraint'".into())
                    })?;
                let expr = parse_expr(text).map_err(|e| {
                    err_at(row_no, format!("invalid constraint expression '{text}': {e}"))
                })?;
                constraints.push(expr);
                continue;
            }
            let kind = match keyword {
                "#mandatory" => GroupKind::Mandatory,
                "#optional" => GroupKind::Optional,
                "#alternative" => GroupKind::Alternative,
                "#or" => GroupKind::Or,
                other => {
                    return Err(err_at(row_no, format!("unknown keyword '{other}'")));
                }
            };
            if first == 0 {
                return Err(err_at(
                    row_no,
                    format!("group '{keyword}' has no parent column to its left"),
                ));
            }
            // Cells left of the keyword are empty (it is the first non-empty
            // cell), so the effective parent is the inherited register value.
            let parent = registers[first - 1].clone().ok_or_else(|| {
                err_at(
                    row_no,
                    format!(
                        "group '{keyword}' has no parent: column {} holds no inherited feature",
                        column_label(first - 1)
                    ),
                )
            })?;
            let members: Vec<String> = row[first + 1..]
                .iter()
                .filter(|c| !c.is_empty())
                .cloned()
                .collect();
            if members.is_empty() {
                return Err(err_at(row_no, format!("group '{keyword}' lists no members")));
            }
            pending.push(PendingGroup {
                row_no,
                kind,
                parent,
                members,
            });
            continue;
        }

        // Structural row. The effective left neighbor of column i is the
        // row's own cell at i-1 when non-empty, else the register value
        // carried down from earlier rows.
        for i in first..width {
            if row[i].is_empty() {
                continue;
            }
            let name = row[i].clone();
            let parent = if i == 0 {
                None
            } else if !row[i - 1].is_empty() {
                Some(row[i - 1].clone())
            } else {
                registers[i - 1].clone()
            };
            match parent {
                None => match &root {
                    None => {
                        root = Some(name.clone());
                        parent_of.insert(name.clone(), None);
                        features.push(name);
                    }
                    Some(r) if *r == name => {}
                    Some(r) => {
                        return Err(err_at(
                            row_no,
                            format!("second root '{name}' (root is '{r}')"),
                        ));
                    }
                },
                Some(p) => match parent_of.get(&name) {
                    None => {
                        parent_of.insert(name.clone(), Some(p.clone()));
                        children_of.entry(p).or_default().push(name.clone());
                        features.push(name);
                    }
                    Some(Some(existing)) if *existing == p => {}
                    Some(existing) => {
                        let old = existing.as_deref().unwrap_or("(root)");
                        return Err(err_at(
                            row_no,
                            format!(
                                "feature '{name}' declared under two different parents ('{old}' and '{p}')"
                            ),
                        ));
                    }
                },
            }
        }
        // A value in a column invalidates every register to its right:
        // the old deep path no longer describes the current branch.
        for i in 0..width {
            if !row[i].is_empty() {
                registers[i] = Some(row[i].clone());
                for reg in registers.iter_mut().skip(i + 1) {
                    *reg = None;
                }
            }
        }
    }

    let root = root.ok_or_else(|| Error::Sheet {
        sheet: s.name.clone(),
        detail: "no features declared".into(),
    })?;

    let mut groups: Vec<Group> = Vec::new();
    let mut group_of: HashMap<String, usize> = HashMap::new();
    for pg in pending {
        for m in &pg.members {
            let declared_parent = parent_of.get(m).and_then(|p| p.as_deref());
            if declared_parent != Some(pg.parent.as_str()) {
                return Err(err_at(
                    pg.row_no,
                    format!(
                        "group member '{m}' is not a declared child of '{}'",
                        pg.parent
                    ),
                ));
            }
            if group_of.contains_key(m) {
                return Err(err_at(
                    pg.row_no,
                    format!("feature '{m}' belongs to more than one group"),
                ));
            }
            group_of.insert(m.clone(), groups.len());
        }
        groups.push(Group {
            parent: pg.parent,
            kind: pg.kind,
            members: pg.members,
        });
    }

    Ok(FeatureModel {
        root,
        features,
        parent_of,
        children_of,
        groups,
        group_of,
        cross_constraints: constraints,
    })
}

impl FeatureModel {
    /// Close a selection under the parent relation and add the root.
    /// Unknown names pass through untouched; validation reports them.
    pub fn expand_selection(&self, sel: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out = sel.clone();
        out.insert(self.root.clone());
        for name in sel {
            let mut cur = name.as_str();
            while let Some(parent_opt) = self.parent_of.get(cur) {
                match parent_opt {
                    Some(p) => {
                        if !out.insert(p.clone()) {
                            // Already present: its ancestors are handled by
                            // its own walk or were added before.
                            break;
                        }
                        cur = p.as_str();
                    }
                    None => break,
                }
            }
        }
        out
    }

    /// Check an (already expanded) selection. Violations come out grouped
    /// by kind: unknown features, missing mandatory children, alternative
    /// overflows, unsatisfied or-groups, failed cross constraints; inside
    /// each kind, document order.
    pub fn validate_selection(&self, sel: &BTreeSet<String>) -> Vec<Violation> {
        self.validate_counted(sel).0
    }

    /// Validation with an instrumented count of element visits. The count
    /// is sel-independent: one visit per feature, per group member slot,
    /// per constraint. Tests assert it to pin the single-pass shape.
    fn validate_counted(&self, sel: &BTreeSet<String>) -> (Vec<Violation>, usize) {
        let mut visits = 0usize;

        let mut unknown = Vec::new();
        for name in sel {
            if !self.contains(name) {
                unknown.push(Violation {
                    kind: ViolationKind::UnknownFeature,
                    subject: name.clone(),
                    detail: format!("unknown feature '{name}'"),
                });
            }
        }

        let mut missing = Vec::new();
        for p in &self.features {
            visits += 1;
            if !sel.contains(p) {
                continue;
            }
            for c in self.children(p) {
                if self.is_mandatory(c) && !sel.contains(c) {
                    missing.push(Violation {
                        kind: ViolationKind::MissingMandatory,
                        subject: c.clone(),
                        detail: format!(
                            "mandatory feature '{c}' is missing: its parent '{p}' is selected"
                        ),
                    });
                }
            }
        }

        let mut alt = Vec::new();
        let mut or = Vec::new();
        for g in &self.groups {
            visits += g.members.len();
            if !sel.contains(&g.parent) {
                continue;
            }
            match g.kind {
                GroupKind::Alternative => {
                    let chosen: Vec<&String> =
                        g.members.iter().filter(|m| sel.contains(*m)).collect();
                    if chosen.len() > 1 {
                        let picked: Vec<&str> = chosen.iter().map(|m| m.as_str()).collect();
                        alt.push(Violation {
                            kind: ViolationKind::AlternativeExceeded,
                            subject: g.parent.clone(),
                            detail: format!(
                                "alternative group under '{}' permits at most one of [{}], but [{}] are selected",
                                g.parent,
                                g.members.join(", "),
                                picked.join(", ")
                            ),
                        });
                    }
                }
                GroupKind::Or => {
                    if !g.members.iter().any(|m| sel.contains(m)) {
                        or.push(Violation {
                            kind: ViolationKind::OrUnsatisfied,
                            subject: g.parent.clone(),
                            detail: format!(
                                "or group under '{}' requires at least one of [{}]",
                                g.parent,
                                g.members.join(", ")
                            ),
                        });
                    }
                }
                GroupKind::Mandatory | GroupKind::Optional => {}
            }
        }

        let mut failed = Vec::new();
        for c in &self.cross_constraints {
            visits += 1;
            if !eval_expr(c, sel) {
                failed.push(Violation {
                    kind: ViolationKind::ConstraintFailed,
                    subject: c.to_string(),
                    detail: format!("cross constraint '{c}' is not satisfied"),
                });
            }
        }

        let mut out = unknown;
        out.extend(missing);
        out.extend(alt);
        out.extend(or);
        out.extend(failed);
        (out, visits)
    }

    /// UVL plain-text export. Two-space indentation; the root sits one
    /// level under the `features` header; each feature's mandatory
    /// children come first under a merged `mandatory` header, then its
    /// groups in document order.
    pub fn to_uvl(&self) -> String {
        let mut out = String::from("features\n");
        self.emit_uvl_feature(&self.root, 1, &mut out);
        if !self.cross_constraints.is_empty() {
            out.push_str("\nconstraints\n");
            for c in &self.cross_constraints {
                out.push_str("  ");
                out.push_str(&uvl_expr(c, 0));
                out.push('\n');
            }
        }
        out
    }

    fn emit_uvl_feature(&self, name: &str, depth: usize, out: &mut String) {
        push_indented(out, depth, name);
        let mandatory: Vec<&String> = self
            .children(name)
            .iter()
            .filter(|c| self.is_mandatory(c))
            .collect();
        if !mandatory.is_empty() {
            push_indented(out, depth + 1, "mandatory");
            for c in mandatory {
                self.emit_uvl_feature(c, depth + 2, out);
            }
        }
        for g in &self.groups {
            if g.parent != name || g.kind == GroupKind::Mandatory {
                continue;
            }
            let header = match g.kind {
                GroupKind::Optional => "optional",
                GroupKind::Alternative => "alternative",
                GroupKind::Or => "or",
                GroupKind::Mandatory => unreachable!(),
            };
            push_indented(out, depth + 1, header);
            for m in &g.members {
                self.emit_uvl_feature(m, depth + 2, out);
            }
        }
    }

    /// Every self-expanded, violation-free subset of the declared
    /// features, in lexicographic order, truncated to `cap`. Exists for
    /// tests and diagnostics; refuses models too large to brute-force.
    pub fn enumerate_valid(&self, cap: usize) -> Result<Vec<BTreeSet<String>>> {
        let n = self.features.len();
        if n > 24 {
            return Err(Error::Other(format!(
                "refusing to enumerate selections of a model with {n} features (limit 24)"
            )));
        }
        let mut out = Vec::new();
        for mask in 0u64..(1u64 << n) {
            let sel: BTreeSet<String> = self
                .features
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, f)| f.clone())
                .collect();
            if self.expand_selection(&sel) == sel && self.validate_selection(&sel).is_empty() {
                out.push(sel);
            }
        }
        out.sort();
        out.truncate(cap);
        Ok(out)
    }
}

fn push_indented(out: &mut String, depth: usize, text: &str) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(text);
    out.push('\n');
}

fn uvl_expr(e: &FeatureExpr, min: u8) -> String {
    match e {
        FeatureExpr::True => "true".into(),
        FeatureExpr::Var(n) => n.clone(),
        FeatureExpr::Not(x) => format!("!{}", uvl_expr(x, 3)),
        FeatureExpr::And(l, r) => {
            let body = format!("{} & {}", uvl_expr(l, 2), uvl_expr(r, 3));
            if min > 2 {
                format!("({body})")
            } else {
                body
            }
        }
        FeatureExpr::Or(l, r) => {
            let body = format!("{} | {}", uvl_expr(l, 1), uvl_expr(r, 2));
            if min > 1 {
                format!("({body})")
            } else {
                body
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sheet(rows: &[&[&str]]) -> Sheet {
        Sheet::new(
            "@FeatureModel",
            rows.iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect(),
        )
    }

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn hammer() -> FeatureModel {
        parse_feature_model(&sheet(&[
            &["Hammer", "Worker", "Lazy"],
            &["", "", "Overworker"],
            &["", "", "#alternative", "Lazy", "Overworker"],
            &["", "Hammer-speed", "Slow"],
            &["", "Counting", "Count"],
            &["", "", "Inft"],
            &["", "", "#or", "Count", "Inft"],
            &["", "#optional", "Worker", "Hammer-speed", "Counting"],
        ]))
        .unwrap()
    }

    #[test]
    fn hammer_tree_shape() {
        let fm = hammer();
        assert_eq!(fm.root(), "Hammer");
        assert_eq!(
            fm.features(),
            [
                "Hammer",
                "Worker",
                "Lazy",
                "Overworker",
                "Hammer-speed",
                "Slow",
                "Counting",
                "Count",
                "Inft"
            ]
        );
        assert_eq!(fm.parent("Slow"), Some("Hammer-speed"));
        assert_eq!(fm.parent("Hammer-speed"), Some("Hammer"));
        assert_eq!(fm.parent("Overworker"), Some("Worker"));
        assert_eq!(fm.parent("Hammer"), None);
        assert_eq!(fm.children("Counting"), ["Count", "Inft"]);
        assert_eq!(fm.groups().len(), 3);
        assert_eq!(fm.groups()[0].kind, GroupKind::Alternative);
        assert_eq!(fm.groups()[0].parent, "Worker");
        assert_eq!(fm.groups()[2].kind, GroupKind::Optional);
        assert_eq!(fm.groups()[2].members, ["Worker", "Hammer-speed", "Counting"]);
        assert!(fm.is_mandatory("Slow"));
        assert!(!fm.is_mandatory("Worker"));
        assert!(!fm.is_mandatory("Count"));
    }

    #[test]
    fn empty_left_cell_inherits_column_register() {
        // Slow hangs off Hammer-speed, which hangs off the inherited root.
        let fm = parse_feature_model(&sheet(&[
            &["Hammer", "Worker"],
            &["", "Hammer-speed", "Slow"],
        ]))
        .unwrap();
        assert_eq!(fm.parent("Hammer-speed"), Some("Hammer"));
        assert_eq!(fm.parent("Slow"), Some("Hammer-speed"));
    }

    #[test]
    fn register_clears_to_the_right() {
        // After row 3 re-declares a value in column B, the stale register
        // for column C (Slow) must not adopt later rows.
        let fm = parse_feature_model(&sheet(&[
            &["Top", "A", "DeepA"],
            &["", "B"],
            &["", "", "UnderB"],
        ]))
        .unwrap();
        assert_eq!(fm.parent("UnderB"), Some("B"));
        assert_eq!(fm.parent("DeepA"), Some("A"));
    }

    #[test]
    fn constraint_row_parses_expression() {
        let fm = parse_feature_model(&sheet(&[
            &["Top", "Count"],
            &["", "Inft"],
            &["", "#optional", "Count", "Inft"],
            &["#constraint", "Count || Inft"],
        ]))
        .unwrap();
        assert_eq!(
            fm.cross_constraints(),
            [FeatureExpr::Or(
                Box::new(FeatureExpr::Var("Count".into())),
                Box::new(FeatureExpr::Var("Inft".into()))
            )]
        );
    }

    #[test]
    fn restating_an_edge_is_a_no_op() {
        let fm = parse_feature_model(&sheet(&[
            &["Top", "A"],
            &["Top", "A"],
            &["", "B"],
        ]))
        .unwrap();
        assert_eq!(fm.features(), ["Top", "A", "B"]);
        assert_eq!(fm.children("Top"), ["A", "B"]);
    }

    #[test]
    fn conflicting_parent_is_an_error() {
        let err = parse_feature_model(&sheet(&[
            &["Top", "A", "X"],
            &["", "B", "X"],
        ]))
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("two different parents"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn second_root_is_an_error() {
        let err = parse_feature_model(&sheet(&[&["Top"], &["Other"]])).unwrap_err();
        assert!(err.to_string().contains("second root 'Other'"));
    }

    #[test]
    fn unknown_keyword_is_an_error() {
        let err =
            parse_feature_model(&sheet(&[&["Top", "A"], &["", "#xor", "A"]])).unwrap_err();
        assert!(err.to_string().contains("unknown keyword '#xor'"));
    }

    #[test]
    fn group_member_must_be_child_of_parent() {
        let err = parse_feature_model(&sheet(&[
            &["Top", "A", "Deep"],
            &["", "#optional", "Deep"],
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("not a declared child of 'Top'"));
    }

    #[test]
    fn group_requires_a_parent_column() {
        let err = parse_feature_model(&sheet(&[
            &["Top", "A"],
            &["#optional", "A"],
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("no parent column"));
    }

    #[test]
    fn group_without_members_is_an_error() {
        let err =
            parse_feature_model(&sheet(&[&["Top", "A"], &["", "#optional"]])).unwrap_err();
        assert!(err.to_string().contains("lists no members"));
    }

    #[test]
    fn feature_in_two_groups_is_an_error() {
        let err = parse_feature_model(&sheet(&[
            &["Top", "A"],
            &["", "B"],
            &["", "#optional", "A", "B"],
            &["", "#or", "A", "B"],
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("more than one group"));
    }

    #[test]
    fn missing_constraint_expression_is_an_error() {
        let err =
            parse_feature_model(&sheet(&[&["Top"], &["#constraint"]])).unwrap_err();
        assert!(err.to_string().contains("missing expression"));
    }

    #[test]
    fn empty_sheet_is_an_error() {
        let err = parse_feature_model(&sheet(&[])).unwrap_err();
        assert!(err.to_string().contains("empty"));
    }

    #[test]
    fn expansion_adds_ancestors_and_root() {
        let fm = hammer();
        assert_eq!(
            fm.expand_selection(&set(&["Slow"])),
            set(&["Hammer", "Hammer-speed", "Slow"])
        );
        assert_eq!(fm.expand_selection(&set(&[])), set(&["Hammer"]));
        assert_eq!(fm.expand_selection(&set(&["Hammer"])), set(&["Hammer"]));
        // Unknown names pass through for validation to flag.
        assert!(fm.expand_selection(&set(&["Ghost"])).contains("Ghost"));
    }

    #[test]
    fn validation_clauses_fire_in_order() {
        let fm = hammer();
        // Valid: the empty configuration expands to the root alone.
        assert!(fm.validate_selection(&fm.expand_selection(&set(&[]))).is_empty());
        // Alternative exceeded.
        let sel = fm.expand_selection(&set(&["Lazy", "Overworker"]));
        let vs = fm.validate_selection(&sel);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].kind, ViolationKind::AlternativeExceeded);
        assert_eq!(vs[0].subject, "Worker");
        assert!(vs[0].detail.contains("Lazy, Overworker"));
        // Or unsatisfied: Counting selected, neither Count nor Inft.
        let sel = fm.expand_selection(&set(&["Counting"]));
        let vs = fm.validate_selection(&sel);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].kind, ViolationKind::OrUnsatisfied);
        // Missing mandatory: Hammer-speed without Slow.
        let mut sel = fm.expand_selection(&set(&["Hammer-speed"]));
        sel.remove("Slow");
        let vs = fm.validate_selection(&sel);
        assert!(vs.iter().any(|v| v.kind == ViolationKind::MissingMandatory
            && v.subject == "Slow"));
        // Unknown feature sorts before everything else.
        let mut sel = fm.expand_selection(&set(&["Lazy", "Overworker"]));
        sel.insert("Ghost".into());
        let vs = fm.validate_selection(&sel);
        assert_eq!(vs[0].kind, ViolationKind::UnknownFeature);
        assert_eq!(vs[1].kind, ViolationKind::AlternativeExceeded);
    }

    #[test]
    fn constraint_violation_names_the_formula() {
        let fm = parse_feature_model(&sheet(&[
            &["Top", "A"],
            &["", "B"],
            &["", "#optional", "A", "B"],
            &["#constraint", "!A || B"],
        ]))
        .unwrap();
        let sel = fm.expand_selection(&set(&["A"]));
        let vs = fm.validate_selection(&sel);
        assert_eq!(vs.len(), 1);
        assert_eq!(vs[0].kind, ViolationKind::ConstraintFailed);
        assert_eq!(vs[0].subject, "!A || B");
    }

    #[test]
    fn for_config_prefixes_detail() {
        let v = Violation {
            kind: ViolationKind::UnknownFeature,
            subject: "X".into(),
            detail: "unknown feature 'X'".into(),
        }
        .for_config("Overwork");
        assert!(v.detail.starts_with("configuration 'Overwork':"));
    }

    // Definitional oracle for the five validation clauses, written against
    // the model's raw data rather than validate_selection's loop shape.
    fn oracle_is_valid(fm: &FeatureModel, sel: &BTreeSet<String>) -> bool {
        let known = sel.iter().all(|f| fm.contains(f));
        let mandatory_ok = fm.features().iter().all(|p| {
            !sel.contains(p)
                || fm
                    .children(p)
                    .iter()
                    .all(|c| !fm.is_mandatory(c) || sel.contains(c))
        });
        let alt_ok = fm.groups().iter().all(|g| {
            g.kind != GroupKind::Alternative
                || !sel.contains(&g.parent)
                || g.members.iter().filter(|m| sel.contains(*m)).count() <= 1
        });
        let or_ok = fm.groups().iter().all(|g| {
            g.kind != GroupKind::Or
                || !sel.contains(&g.parent)
                || g.members.iter().any(|m| sel.contains(m))
        });
        let constraints_ok = fm.cross_constraints().iter().all(|c| eval_expr(c, sel));
        known && mandatory_ok && alt_ok && or_ok && constraints_ok
    }

    #[test]
    fn validation_agrees_with_definitional_oracle_on_all_subsets() {
        let fm = parse_feature_model(&sheet(&[
            &["R", "A", "A1"],
            &["", "B"],
            &["", "C"],
            &["", "#optional", "B", "C"],
            &["", "#constraint", "!C || B"],
        ]))
        .unwrap();
        // 5 features: R, A, A1, B, C. All 32 subsets.
        let names = fm.features().to_vec();
        for mask in 0u32..(1 << names.len()) {
            let sel: BTreeSet<String> = names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, f)| f.clone())
                .collect();
            let verdict = fm.validate_selection(&sel).is_empty();
            assert_eq!(verdict, oracle_is_valid(&fm, &sel), "subset {sel:?}");
        }
    }

    #[test]
    fn validation_visit_count_is_model_sized_and_selection_independent() {
        let fm = hammer();
        let expected = fm.features().len()
            + fm.groups().iter().map(|g| g.members.len()).sum::<usize>()
            + fm.cross_constraints().len();
        for sel in [
            set(&[]),
            fm.expand_selection(&set(&["Lazy", "Overworker", "Count"])),
            set(&["Ghost"]),
        ] {
            let (_, visits) = fm.validate_counted(&sel);
            assert_eq!(visits, expected);
        }
    }

    #[test]
    fn uvl_export_of_hammer_model() {
        let expected = "\
features
  Hammer
    optional
      Worker
        alternative
          Lazy
          Overworker
      Hammer-speed
        mandatory
          Slow
      Counting
        or
          Count
          Inft
";
        assert_eq!(hammer().to_uvl(), expected);
    }

    #[test]
    fn uvl_export_single_feature() {
        let fm = parse_feature_model(&sheet(&[&["Hammer"]])).unwrap();
        assert_eq!(fm.to_uvl(), "features\n  Hammer\n");
    }

    #[test]
    fn uvl_export_constraints_section() {
        let fm = parse_feature_model(&sheet(&[
            &["Top", "Count"],
            &["", "Inft"],
            &["", "#optional", "Count", "Inft"],
            &["#constraint", "Count || Inft"],
            &["#constraint", "!(Count && Inft)"],
        ]))
        .unwrap();
        let text = fm.to_uvl();
        assert!(text.ends_with("\nconstraints\n  Count | Inft\n  !(Count & Inft)\n"));
    }

    #[test]
    fn enumerate_valid_small_models() {
        let fm = parse_feature_model(&sheet(&[&["R"]])).unwrap();
        assert_eq!(fm.enumerate_valid(100).unwrap(), vec![set(&["R"])]);

        let fm = parse_feature_model(&sheet(&[
            &["R", "c"],
            &["", "#optional", "c"],
        ]))
        .unwrap();
        assert_eq!(
            fm.enumerate_valid(100).unwrap(),
            vec![set(&["R"]), set(&["R", "c"])]
        );
        // Cap truncates.
        assert_eq!(fm.enumerate_valid(1).unwrap(), vec![set(&["R"])]);
    }

    #[test]
    fn enumerate_valid_matches_powerset_filter_on_hammer() {
        let fm = hammer();
        let names = fm.features().to_vec();
        let mut expected = Vec::new();
        for mask in 0u32..(1 << names.len()) {
            let sel: BTreeSet<String> = names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, f)| f.clone())
                .collect();
            if fm.expand_selection(&sel) == sel && oracle_is_valid(&fm, &sel) {
                expected.push(sel);
            }
        }
        expected.sort();
        assert_eq!(fm.enumerate_valid(usize::MAX).unwrap(), expected);
        assert!(!expected.is_empty());
    }

    #[test]
    fn enumerate_valid_refuses_oversized_models() {
        let mut rows: Vec<Vec<String>> = vec![vec!["R".to_string()]];
        for i in 0..25 {
            rows.push(vec![String::new(), format!("f{i}")]);
        }
        let fm = parse_feature_model(&Sheet::new("@FeatureModel", rows)).unwrap();
        assert!(fm.enumerate_valid(10).is_err());
    }

    proptest! {
        #[test]
        fn expansion_is_monotone_and_idempotent(
            picks in proptest::collection::btree_set(0usize..9, 0..5)
        ) {
            let fm = hammer();
            let names = fm.features().to_vec();
            let sel: BTreeSet<String> =
                picks.iter().map(|&i| names[i].clone()).collect();
            let once = fm.expand_selection(&sel);
            prop_assert!(sel.is_subset(&once));
            prop_assert_eq!(fm.expand_selection(&once), once.clone());
            // Expansion never leaves a selected child with an unselected
            // parent, so no violation can stem from one.
            for f in &once {
                if let Some(p) = fm.parent(f) {
                    prop_assert!(once.contains(p));
                }
            }
        }

        #[test]
        fn uvl_is_deterministic(_x in 0..10u8) {
            let a = hammer().to_uvl();
            let b = hammer().to_uvl();
            prop_assert_eq!(a, b);
        }
    }
}
