//! Project files, canonical serialization and CSV export.

use std::io::Write as _;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

use crate::concepts::criteria_catalog;
use crate::matrices::{compute_cvr, compute_dpm, compute_mim, compute_qfd, ImportanceVector};
use crate::model::{ModuleDriver, Project, SCHEMA_VERSION};
use crate::validate::{validate_project, ValidationReport};

/// Conventional project file extension.
pub const PROJECT_EXTENSION: &str = ".mfdx.json";

/// Matrix ids accepted by [`export_csv`].
pub const CSV_MATRICES: &[&str] = &["cvr", "qfd", "dpm", "mim", "interactions", "pugh", "numeric", "msasm"];

#[derive(Debug, Error)]
pub enum ProjectIoError {
    #[error("malformed project document: {0}")]
    MalformedSyntax(String),
    #[error("unsupported schema_version {0}; this build reads version {SCHEMA_VERSION}")]
    UnsupportedVersion(String),
    #[error("project failed validation:\n{0}")]
    ValidationFailed(ValidationReport),
    #[error("unknown matrix {0:?}")]
    UnknownMatrix(String),
    #[error("cannot export {matrix}: {reason}")]
    Export { matrix: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses, version-checks and validates a project document.
pub fn load_project(bytes: &[u8]) -> Result<Project, ProjectIoError> {
    let project = parse_project(bytes)?;
    let report = validate_project(&project);
    if report.has_errors() {
        return Err(ProjectIoError::ValidationFailed(report));
    }
    Ok(project)
}

/// Parses and version-checks without validating.
pub fn parse_project(bytes: &[u8]) -> Result<Project, ProjectIoError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ProjectIoError::MalformedSyntax(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(ProjectIoError::MalformedSyntax("top level must be an object".into()));
    };
    match map.get("schema_version") {
        None => {}
        Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
        Some(v) => return Err(ProjectIoError::UnsupportedVersion(v.to_string())),
    }
    serde_json::from_value(value).map_err(|e| ProjectIoError::MalformedSyntax(e.to_string()))
}

/// Canonical bytes: sorted lists, sorted object keys, two-space indent and a
/// trailing newline.
pub fn save_project(project: &Project) -> Vec<u8> {
    let mut canonical = project.clone();
    canonical.canonicalize();
    // Going through Value sorts object keys.
    let value = serde_json::to_value(&canonical).expect("project serializes");
    let mut out = serde_json::to_vec_pretty(&value).expect("value serializes");
    out.push(b'\n');
    out
}

pub fn read_project_file(path: &Path) -> Result<Project, ProjectIoError> {
    load_project(&std::fs::read(path)?)
}

/// Writes the canonical form next to `path` and renames it into place.
pub fn write_project_file(path: &Path, project: &Project) -> Result<(), ProjectIoError> {
    write_atomic(path, &save_project(project))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ProjectIoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn export_err(matrix: &str, reason: impl ToString) -> ProjectIoError {
    ProjectIoError::Export {
        matrix: matrix.to_string(),
        reason: reason.to_string(),
    }
}

fn fmt_num(x: f64) -> String {
    // Shortest round-trip form, matching the JSON output.
    serde_json::Number::from_f64(x).map_or_else(|| x.to_string(), |n| n.to_string())
}

fn write_rows(rows: Vec<Vec<String>>) -> Result<Vec<u8>, ProjectIoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| export_err("csv", e))?;
    }
    w.into_inner().map_err(|e| export_err("csv", e.error()))
}

fn vector_rows(header: [&str; 2], v: &ImportanceVector) -> Vec<Vec<String>> {
    let mut rows = vec![header.iter().map(|s| s.to_string()).collect()];
    rows.extend(v.entries.iter().map(|(id, x)| vec![id.clone(), fmt_num(*x)]));
    rows
}

fn cvr(project: &Project, matrix: &str) -> Result<ImportanceVector, ProjectIoError> {
    compute_cvr(&project.requirements).map_err(|e| export_err(matrix, e))
}

/// Exports one matrix as CSV with a header row and deterministic row order.
pub fn export_csv(matrix_id: &str, project: &Project) -> Result<Vec<u8>, ProjectIoError> {
    let rows: Vec<Vec<String>> = match matrix_id {
        "cvr" => {
            if project.requirements.is_empty() {
                vec![vec!["requirement".into(), "weight".into()]]
            } else {
                vector_rows(["requirement", "weight"], &cvr(project, matrix_id)?)
            }
        }
        "qfd" => {
            let mut rows = vec![vec!["requirement".to_string()]];
            let props = project.property_ids();
            rows[0].extend(props.iter().cloned());
            let rel = project.qfd_relations();
            let mut reqs: Vec<&str> = project.requirements.iter().map(|r| r.id.as_str()).collect();
            reqs.sort();
            for r in reqs {
                let mut row = vec![r.to_string()];
                row.extend(
                    props.iter().map(|p| rel.get(&(r.to_string(), p.clone())).map_or(0, |s| s.value()).to_string()),
                );
                rows.push(row);
            }
            if !project.requirements.is_empty() {
                let pv = compute_qfd(&cvr(project, matrix_id)?, &rel, &props).map_err(|e| export_err(matrix_id, e))?;
                let mut row = vec!["importance".to_string()];
                row.extend(props.iter().map(|p| fmt_num(pv.get(p))));
                rows.push(row);
            }
            rows
        }
        "dpm" => {
            let sols = project.solution_ids();
            let props = project.property_ids();
            let rel = project.dpm_relations();
            let mut rows = vec![std::iter::once("property".to_string()).chain(sols.iter().cloned()).collect::<Vec<_>>()];
            for p in &props {
                let mut row = vec![p.clone()];
                row.extend(sols.iter().map(|s| rel.get(&(p.clone(), s.clone())).map_or(0, |v| v.value()).to_string()));
                rows.push(row);
            }
            if !project.requirements.is_empty() {
                let pv = compute_qfd(&cvr(project, matrix_id)?, &project.qfd_relations(), &props)
                    .map_err(|e| export_err(matrix_id, e))?;
                let sv = compute_dpm(&pv, &rel, &sols).map_err(|e| export_err(matrix_id, e))?;
                let mut row = vec!["importance".to_string()];
                row.extend(sols.iter().map(|s| fmt_num(sv.get(s))));
                rows.push(row);
            }
            rows
        }
        "mim" => {
            let sols = project.solution_ids();
            let summary = compute_mim(&project.mim_matrix(), &sols, project.config.mim_threshold)
                .map_err(|e| export_err(matrix_id, e))?;
            let mut header = vec!["solution".to_string()];
            header.extend(ModuleDriver::ALL.iter().map(|d| d.as_str().to_string()));
            header.extend(["total".to_string(), "candidate".to_string()]);
            let mut rows = vec![header];
            for s in &sols {
                let mut row = vec![s.clone()];
                row.extend(summary.profile[s].iter().map(|v| v.to_string()));
                row.push(summary.per_solution_total[s].to_string());
                row.push(summary.candidate_flags[s].to_string());
                rows.push(row);
            }
            rows
        }
        "interactions" => {
            let m = project.interaction_matrix().map_err(|e| export_err(matrix_id, e))?;
            let mut rows = vec![vec!["a".to_string(), "b".to_string(), "strength".to_string()]];
            rows.extend(m.iter().map(|(a, b, w)| vec![a.to_string(), b.to_string(), fmt_num(w)]));
            rows
        }
        "pugh" | "numeric" => {
            let cells: Vec<(String, String, String)> = if matrix_id == "pugh" {
                project.pugh_cells().into_iter().map(|((c, k), v)| (c, k, v.value().to_string())).collect()
            } else {
                project.numeric_cells().into_iter().map(|((c, k), v)| (c, k, v.value().to_string())).collect()
            };
            let criteria: std::collections::BTreeSet<&str> = cells.iter().map(|(_, k, _)| k.as_str()).collect();
            let mut concepts: Vec<&str> = project.concepts.iter().map(|c| c.id.as_str()).collect();
            concepts.sort();
            let mut rows = vec![std::iter::once("concept".to_string()).chain(criteria.iter().map(|s| s.to_string())).collect::<Vec<_>>()];
            for c in concepts {
                let mut row = vec![c.to_string()];
                row.extend(criteria.iter().map(|k| {
                    cells
                        .iter()
                        .find(|(cc, kk, _)| cc == c && kk == k)
                        .map_or_else(String::new, |(_, _, v)| v.clone())
                }));
                rows.push(row);
            }
            rows
        }
        "msasm" => {
            let report = project.msasm_report().map_err(|e| export_err(matrix_id, e))?;
            let mut header = vec!["set".to_string()];
            header.extend(report.criteria.iter().cloned());
            header.extend(["total", "mean", "band"].map(String::from));
            let mut rows = vec![header];
            for agg in &report.aggregates {
                let mut row = vec![agg.set.to_string()];
                row.extend(report.criteria.iter().map(|c| agg.scores.get(c).map_or_else(String::new, |v| v.to_string())));
                row.push(agg.total.to_string());
                row.push(format!("{:.2}", agg.mean));
                row.push(agg.band.to_string());
                rows.push(row);
            }
            rows
        }
        "catalog" => {
            let mut rows = vec![["id", "name", "kind"].map(String::from).to_vec()];
            rows.extend(
                criteria_catalog(crate::concepts::CatalogFilter::All)
                    .into_iter()
                    .map(|c| vec![c.id, c.name, c.kind.as_str().to_string()]),
            );
            rows
        }
        other => return Err(ProjectIoError::UnknownMatrix(other.to_string())),
    };
    write_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CustomerRequirement, ModuleSet, OrdinalScore};
    use crate::msasm::{MsasmRecord, Provenance};

    #[test]
    fn empty_project_round_trips() {
        let p = Project::new("empty");
        let bytes = save_project(&p);
        let loaded = load_project(&bytes).unwrap();
        assert_eq!(loaded, p);
        assert_eq!(save_project(&loaded), bytes);
        assert!(bytes.ends_with(b"}\n"));
    }

    #[test]
    fn malformed_and_version_errors() {
        let bytes = save_project(&Project::new("x"));
        let truncated = &bytes[..bytes.len() / 2];
        assert!(matches!(load_project(truncated), Err(ProjectIoError::MalformedSyntax(_))));
        let v99 = br#"{"schema_version": 99, "name": "x"}"#;
        assert!(matches!(load_project(v99), Err(ProjectIoError::UnsupportedVersion(_))));
        let unknown = br#"{"schema_version": 1, "name": "x", "extra": true}"#;
        assert!(matches!(load_project(unknown), Err(ProjectIoError::MalformedSyntax(_))));
        let array = b"[]";
        assert!(matches!(load_project(array), Err(ProjectIoError::MalformedSyntax(_))));
        let invalid = br#"{"schema_version": 1, "name": ""}"#;
        assert!(matches!(load_project(invalid), Err(ProjectIoError::ValidationFailed(_))));
    }

    #[test]
    fn weights_survive_round_trip() {
        let mut p = Project::new("w");
        for (id, w) in [("R1", 0.5), ("R2", 0.3), ("R3", 0.2)] {
            p.requirements.push(CustomerRequirement {
                id: id.into(),
                statement: String::new(),
                raw_weight: w,
            });
        }
        let text = String::from_utf8(save_project(&p)).unwrap();
        assert!(text.contains("\"raw_weight\": 0.3,\n"));
        let loaded = load_project(text.as_bytes()).unwrap();
        let weights: Vec<f64> = loaded.requirements.iter().map(|r| r.raw_weight).collect();
        assert_eq!(weights, vec![0.5, 0.3, 0.2]);
    }

    #[test]
    fn scrambled_keys_become_canonical() {
        let scrambled = br#"{"config": {}, "name": "k", "schema_version": 1, "requirements": [
            {"raw_weight": 2.0, "statement": "b", "id": "R2"},
            {"statement": "a", "id": "R1", "raw_weight": 1.0}]}"#;
        let p = load_project(scrambled).unwrap();
        let text = String::from_utf8(save_project(&p)).unwrap();
        let r1 = text.find("\"R1\"").unwrap();
        let r2 = text.find("\"R2\"").unwrap();
        assert!(r1 < r2);
        let adcd = text.find("\"adcd\"").unwrap();
        let name = text.find("\"name\"").unwrap();
        assert!(adcd < name);
    }

    #[test]
    fn csv_exports() {
        let mut p = Project::new("csv");
        assert_eq!(export_csv("mim", &p).unwrap().iter().filter(|&&b| b == b'\n').count(), 1);
        assert!(matches!(export_csv("nope", &p), Err(ProjectIoError::UnknownMatrix(_))));

        p.requirements.push(CustomerRequirement {
            id: "R1".into(),
            statement: "light, quiet".into(),
            raw_weight: 1.0,
        });
        let cvr = String::from_utf8(export_csv("cvr", &p).unwrap()).unwrap();
        assert_eq!(cvr, "requirement,weight\r\nR1,1.0\r\n");

        let set = ModuleSet::new("M01", "M02").unwrap();
        for c in p.msasm_criteria() {
            p.msasm.push(MsasmRecord {
                set: set.clone(),
                criterion: c,
                score: OrdinalScore::new(3).unwrap(),
                provenance: Provenance::Consensus,
                note: None,
            });
        }
        let text = String::from_utf8(export_csv("msasm", &p).unwrap()).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        // set, six criteria, total, mean, band
        assert_eq!(reader.headers().unwrap().len(), 10);
        let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 1);
        assert_eq!(&rows[0][7], "18");
        assert_eq!(&rows[0][8], "3.00");
        assert_eq!(&rows[0][9], "revise");
    }

    #[test]
    fn csv_quotes_commas() {
        let mut p = Project::new("q");
        p.requirements.push(CustomerRequirement {
            id: "R,1".into(),
            statement: String::new(),
            raw_weight: 1.0,
        });
        let text = String::from_utf8(export_csv("cvr", &p).unwrap()).unwrap();
        assert!(text.contains("\"R,1\",1.0"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.mfdx.json");
        write_project_file(&path, &Project::new("one")).unwrap();
        write_project_file(&path, &Project::new("two")).unwrap();
        assert_eq!(read_project_file(&path).unwrap().name, "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
