//! Whole-project consistency checks.
//!
//! Problems are reported as data. Paths are `/`-separated locators built from
//! entity ids rather than list positions, so a report survives canonical
//! re-ordering of the document unchanged.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::adcd::validate_adcd;
use crate::model::{ModuleSet, Project, Scale};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.findings.push(Finding {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn extend_prefixed(&mut self, prefix: &str, other: ValidationReport) {
        for mut f in other.findings {
            f.path = format!("{prefix}/{}", f.path);
            self.findings.push(f);
        }
    }

    /// Sorts findings by path, then severity, then message.
    pub fn finish(mut self) -> Self {
        self.findings
            .sort_by(|x, y| (&x.path, x.severity, &x.message).cmp(&(&y.path, y.severity, &y.message)));
        self.findings.dedup();
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            let tag = match finding.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            writeln!(f, "{tag}: {}: {}", finding.path, finding.message)?;
        }
        Ok(())
    }
}

fn duplicate_ids<'a>(ids: impl IntoIterator<Item = &'a str>) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dups = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            dups.insert(id);
        }
    }
    dups
}

fn check_unique<'a>(report: &mut ValidationReport, collection: &str, ids: impl IntoIterator<Item = &'a str>) {
    for id in duplicate_ids(ids) {
        report.error(format!("{collection}/{id}"), format!("duplicate id {id:?}"));
    }
}

/// Checks every cross-reference and type invariant of a project.
pub fn validate_project(project: &Project) -> ValidationReport {
    let mut report = ValidationReport::default();

    let requirements: BTreeSet<&str> = project.requirements.iter().map(|r| r.id.as_str()).collect();
    let properties: BTreeSet<&str> = project.properties.iter().map(|p| p.id.as_str()).collect();
    let solutions: BTreeSet<&str> = project.solutions.iter().map(|s| s.id.as_str()).collect();
    let modules = project.module_ids();
    let concepts: BTreeSet<&str> = project.concepts.iter().map(|c| c.id.as_str()).collect();

    if project.name.trim().is_empty() {
        report.error("name", "project name is empty");
    }

    check_unique(&mut report, "requirements", project.requirements.iter().map(|r| r.id.as_str()));
    for r in &project.requirements {
        if !(r.raw_weight.is_finite() && r.raw_weight > 0.0) {
            report.error(
                format!("requirements/{}/raw_weight", r.id),
                format!("raw weight must be positive, got {}", r.raw_weight),
            );
        }
    }

    check_unique(&mut report, "properties", project.properties.iter().map(|p| p.id.as_str()));

    check_unique(&mut report, "solutions", project.solutions.iter().map(|s| s.id.as_str()));
    for s in &project.solutions {
        for p in &s.realizes {
            if !properties.contains(p.as_str()) {
                report.error(format!("solutions/{}/realizes", s.id), format!("unknown property {p:?}"));
            }
        }
    }

    check_unique(&mut report, "modules", project.modules.iter().map(|m| m.id.as_str()));
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for m in &project.modules {
        let path = format!("modules/{}/members", m.id);
        if m.members.is_empty() {
            report.error(&path, "module has no members");
        }
        for member in &m.members {
            if !solutions.contains(member.as_str()) {
                report.error(&path, format!("unknown technical solution {member:?}"));
            }
            if let Some(first) = owner.insert(member, &m.id) {
                if first != m.id {
                    report.error(&path, format!("technical solution {member:?} is also a member of {first:?}"));
                }
            }
        }
    }

    check_unique(&mut report, "criteria", project.criteria.iter().map(|c| c.id.as_str()));
    for c in &project.criteria {
        if !(c.weight.is_finite() && c.weight > 0.0) {
            report.error(format!("criteria/{}/weight", c.id), format!("weight must be positive, got {}", c.weight));
        }
        if !c.anchors.is_empty() && c.scale != Scale::Ordinal1To5 {
            report.error(format!("criteria/{}/anchors", c.id), "anchors are only allowed on ordinal_1_5 criteria");
        }
        for key in c.anchors.keys() {
            if !matches!(key, 1 | 3 | 5) {
                report.error(format!("criteria/{}/anchors", c.id), format!("anchor key must be 1, 3 or 5, got {key}"));
            }
        }
    }

    check_unique(&mut report, "concepts", project.concepts.iter().map(|c| c.id.as_str()));
    let datums = project.concepts.iter().filter(|c| c.is_datum).count();
    if datums > 1 {
        report.error("concepts", format!("{datums} concepts are marked as datum; at most one is allowed"));
    } else if datums == 0 && !project.matrices.pugh.is_empty() {
        report.error("concepts", "a Pugh matrix is present but no concept is marked as datum");
    }

    validate_matrices(project, &requirements, &properties, &solutions, &concepts, &mut report);

    let adcd = validate_adcd(&project.adcd);
    report.extend_prefixed("adcd", adcd);
    for node in &project.adcd.nodes {
        if !modules.contains(node.as_str()) {
            report.error(format!("adcd/nodes/{node}"), format!("unknown module {node:?}"));
        }
    }

    validate_msasm(project, &modules, &mut report);

    let config = &project.config;
    if !(config.lambda.is_finite() && config.lambda >= 0.0) {
        report.error("config/lambda", format!("lambda must be non-negative, got {}", config.lambda));
    }
    if !(config.pair_cost.is_finite() && config.pair_cost >= 0.0) {
        report.error("config/pair_cost", format!("pair_cost must be non-negative, got {}", config.pair_cost));
    }
    if config.max_blocks == Some(0) {
        report.error("config/max_blocks", "max_blocks must be at least 1");
    }
    if let Err(msg) = config.band_thresholds.check() {
        report.error("config/band_thresholds", msg);
    }
    for m in &config.reusable_modules {
        if !modules.contains(m.as_str()) {
            report.error("config/reusable_modules", format!("unknown module {m:?}"));
        }
    }
    if let Some(ids) = &config.msasm_criteria {
        check_unique(&mut report, "config/msasm_criteria", ids.iter().map(String::as_str));
        for id in ids {
            match project.criterion(id) {
                None => report.error("config/msasm_criteria", format!("unknown criterion {id:?}")),
                Some(c) if c.scale != Scale::Ordinal1To5 => {
                    report.error("config/msasm_criteria", format!("criterion {id:?} is not on the ordinal 1-5 scale"))
                }
                Some(_) => {}
            }
        }
    }

    report.finish()
}

fn validate_matrices(
    project: &Project,
    requirements: &BTreeSet<&str>,
    properties: &BTreeSet<&str>,
    solutions: &BTreeSet<&str>,
    concepts: &BTreeSet<&str>,
    report: &mut ValidationReport,
) {
    let m = &project.matrices;

    check_unique(
        report,
        "matrices/qfd",
        m.qfd.iter().map(|c| cell_key(&c.requirement, &c.property)).collect::<Vec<_>>().iter().map(String::as_str),
    );
    for c in &m.qfd {
        let path = format!("matrices/qfd/{}/{}", c.requirement, c.property);
        if !requirements.contains(c.requirement.as_str()) {
            report.error(&path, format!("unknown requirement {:?}", c.requirement));
        }
        if !properties.contains(c.property.as_str()) {
            report.error(&path, format!("unknown property {:?}", c.property));
        }
    }

    check_unique(
        report,
        "matrices/dpm",
        m.dpm.iter().map(|c| cell_key(&c.property, &c.solution)).collect::<Vec<_>>().iter().map(String::as_str),
    );
    for c in &m.dpm {
        let path = format!("matrices/dpm/{}/{}", c.property, c.solution);
        if !properties.contains(c.property.as_str()) {
            report.error(&path, format!("unknown property {:?}", c.property));
        }
        if !solutions.contains(c.solution.as_str()) {
            report.error(&path, format!("unknown technical solution {:?}", c.solution));
        }
    }

    check_unique(
        report,
        "matrices/mim",
        m.mim.iter().map(|c| cell_key(c.driver.as_str(), &c.solution)).collect::<Vec<_>>().iter().map(String::as_str),
    );
    for c in &m.mim {
        if !solutions.contains(c.solution.as_str()) {
            report.error(
                format!("matrices/mim/{}/{}", c.driver, c.solution),
                format!("unknown technical solution {:?}", c.solution),
            );
        }
    }

    let canonical_pairs: Vec<String> = m
        .interactions
        .iter()
        .map(|c| if c.a <= c.b { cell_key(&c.a, &c.b) } else { cell_key(&c.b, &c.a) })
        .collect();
    check_unique(report, "matrices/interactions", canonical_pairs.iter().map(String::as_str));
    for (c, key) in m.interactions.iter().zip(&canonical_pairs) {
        let path = format!("matrices/interactions/{key}");
        if c.a == c.b {
            report.error(&path, "self-interaction is not allowed");
        }
        for end in [&c.a, &c.b] {
            if !solutions.contains(end.as_str()) {
                report.error(&path, format!("unknown technical solution {end:?}"));
            }
        }
        if !(c.strength.is_finite() && c.strength >= 0.0) {
            report.error(&path, format!("interaction strength must be non-negative, got {}", c.strength));
        }
    }

    for (name, cells) in [
        ("pugh", m.pugh.iter().map(|c| (&c.concept, &c.criterion)).collect::<Vec<_>>()),
        ("numeric", m.numeric.iter().map(|c| (&c.concept, &c.criterion)).collect::<Vec<_>>()),
    ] {
        let keys: Vec<String> = cells.iter().map(|(a, b)| cell_key(a, b)).collect();
        check_unique(report, &format!("matrices/{name}"), keys.iter().map(String::as_str));
        for ((concept, criterion), key) in cells.iter().zip(&keys) {
            let path = format!("matrices/{name}/{key}");
            if !concepts.contains(concept.as_str()) {
                report.error(&path, format!("unknown concept {concept:?}"));
            }
            if project.criterion(criterion).is_none() {
                report.error(&path, format!("unknown criterion {criterion:?}"));
            }
        }
    }
}

fn cell_key(a: &str, b: &str) -> String {
    format!("{a}/{b}")
}

fn validate_msasm(project: &Project, modules: &BTreeSet<&str>, report: &mut ValidationReport) {
    let configured: BTreeSet<String> = project.msasm_criteria().into_iter().collect();
    let mut seen: BTreeSet<(&ModuleSet, &str)> = BTreeSet::new();
    for r in &project.msasm {
        let path = format!("msasm/{}/{}", r.set, r.criterion);
        for end in [r.set.a(), r.set.b()] {
            if !modules.contains(end) {
                report.error(&path, format!("unknown module {end:?}"));
            }
        }
        match project.criterion(&r.criterion) {
            None => report.error(&path, format!("unknown criterion {:?}", r.criterion)),
            Some(c) => {
                if c.scale != Scale::Ordinal1To5 {
                    report.error(&path, format!("criterion {:?} is not on the ordinal 1-5 scale", r.criterion));
                }
                if !configured.contains(&r.criterion) {
                    report.error(&path, format!("criterion {:?} is not in the configured MSASM criteria", r.criterion));
                }
            }
        }
        if !seen.insert((&r.set, r.criterion.as_str())) {
            report.error(&path, "duplicate score for this module set and criterion");
        }
    }

    let scored: BTreeSet<&ModuleSet> = project.msasm.iter().map(|r| &r.set).collect();
    for set in project.module_sets() {
        if !scored.contains(&set) {
            report.warning(format!("msasm/{set}"), "module set has no MSASM scores");
        }
    }
}
