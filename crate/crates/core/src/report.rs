//! Batch analysis and the Markdown report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adcd::{detect_assembly_issues, detect_dfd_issues, optimal_sequence, Issue, Sequence};
use crate::concepts::{ConceptRanking, EvaluationMode};
use crate::matrices::{compute_cvr, compute_dpm, compute_mim, compute_qfd, ImportanceVector, MimSummary};
use crate::model::{ModuleDriver, Project};
use crate::msasm::{band_colour, MsasmReport};

/// Everything the report shows, computed from one project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub cvr: Option<ImportanceVector>,
    pub qfd: Option<ImportanceVector>,
    pub dpm: Option<ImportanceVector>,
    pub mim: Option<MimSummary>,
    pub concepts: Option<ConceptRanking>,
    pub assembly_issues: Vec<Issue>,
    pub dfd_issues: Vec<Issue>,
    pub sequence: Option<Sequence>,
    pub msasm: Option<MsasmReport>,
    /// Stages that could not be computed, with the reason.
    pub skipped: Vec<String>,
}

pub fn analyze(project: &Project, mode: EvaluationMode) -> Analysis {
    let mut skipped = Vec::new();
    let mut note = |stage: &str, e: &dyn std::fmt::Display| skipped.push(format!("{stage}: {e}"));

    let cvr = if project.requirements.is_empty() {
        None
    } else {
        compute_cvr(&project.requirements).map_err(|e| note("cvr", &e)).ok()
    };
    let properties = project.property_ids();
    let solutions = project.solution_ids();
    let qfd = cvr
        .as_ref()
        .and_then(|c| compute_qfd(c, &project.qfd_relations(), &properties).map_err(|e| note("qfd", &e)).ok());
    let dpm = qfd
        .as_ref()
        .and_then(|q| compute_dpm(q, &project.dpm_relations(), &solutions).map_err(|e| note("dpm", &e)).ok());
    let mim = compute_mim(&project.mim_matrix(), &solutions, project.config.mim_threshold)
        .map_err(|e| note("mim", &e))
        .ok();
    let concepts = project.evaluate_concepts(mode).map_err(|e| note("concepts", &e)).ok().flatten();
    let sequence = if project.adcd.nodes.is_empty() {
        None
    } else {
        optimal_sequence(&project.adcd).map_err(|e| note("sequence", &e)).ok()
    };
    let msasm = project.msasm_report().map_err(|e| note("msasm", &e)).ok();
    Analysis {
        cvr,
        qfd,
        dpm,
        mim,
        concepts,
        assembly_issues: detect_assembly_issues(&project.adcd),
        dfd_issues: detect_dfd_issues(&project.adcd, &project.config.reusable_modules, project.config.diversity_threshold),
        sequence,
        msasm,
        skipped,
    }
}

fn num(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn cell(text: &str) -> String {
    text.replace('|', "\\|").replace('\n', " ")
}

fn vector_table(out: &mut String, label: &str, v: &ImportanceVector) {
    let _ = writeln!(out, "| {label} | importance |\n|---|---|");
    for (id, x) in &v.entries {
        let _ = writeln!(out, "| {} | {} |", cell(id), num(*x));
    }
    out.push('\n');
}

/// Deterministic Markdown rendering of a project and its analysis.
pub fn render_report(project: &Project, analysis: &Analysis) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", cell(&project.name));

    out.push_str("## Summary\n\n");
    for (label, n) in [
        ("Customer requirements", project.requirements.len()),
        ("Product properties", project.properties.len()),
        ("Technical solutions", project.solutions.len()),
        ("Modules", project.modules.len()),
        ("Module sets", project.module_sets().len()),
        ("Concepts", project.concepts.len()),
    ] {
        let _ = writeln!(out, "- {label}: {n}");
    }
    out.push('\n');

    out.push_str("## Customer value ranking\n\n");
    match &analysis.cvr {
        Some(v) => vector_table(&mut out, "requirement", v),
        None => out.push_str("No requirements.\n\n"),
    }
    out.push_str("## Product property importance\n\n");
    match &analysis.qfd {
        Some(v) => vector_table(&mut out, "property", v),
        None => out.push_str("Not computed.\n\n"),
    }
    out.push_str("## Technical solution importance\n\n");
    match &analysis.dpm {
        Some(v) => vector_table(&mut out, "solution", v),
        None => out.push_str("Not computed.\n\n"),
    }

    out.push_str("## Module indication matrix\n\n");
    match &analysis.mim {
        Some(m) if !m.profile.is_empty() => {
            let drivers: Vec<&str> = ModuleDriver::ALL.iter().map(|d| d.as_str()).collect();
            let _ = writeln!(out, "| solution | {} | total | candidate |", drivers.join(" | "));
            let _ = writeln!(out, "|---|{}---|---|", "---|".repeat(drivers.len()));
            for (s, profile) in &m.profile {
                let cells: Vec<String> = profile.iter().map(|v| v.to_string()).collect();
                let flag = if m.candidate_flags[s] { "yes" } else { "no" };
                let _ = writeln!(out, "| {} | {} | {} | {flag} |", cell(s), cells.join(" | "), m.per_solution_total[s]);
            }
            let _ = writeln!(out, "\nCandidate threshold: {}\n", m.threshold);
        }
        _ => out.push_str("No technical solutions.\n\n"),
    }

    out.push_str("## Concept ranking\n\n");
    match &analysis.concepts {
        None => out.push_str("Concepts: none evaluated.\n\n"),
        Some(ConceptRanking::Pugh(ranks)) => {
            out.push_str("| rank | concept | net score |\n|---|---|---|\n");
            for (i, r) in ranks.iter().enumerate() {
                let datum = if r.is_datum { " (datum)" } else { "" };
                let _ = writeln!(out, "| {} | {}{datum} | {} |", i + 1, cell(&r.concept), num(r.net));
            }
            out.push('\n');
        }
        Some(ConceptRanking::Numeric(ranks)) => {
            out.push_str("| rank | concept | weighted total |\n|---|---|---|\n");
            for (i, r) in ranks.iter().enumerate() {
                let _ = writeln!(out, "| {} | {} | {} |", i + 1, cell(&r.concept), num(r.total));
            }
            out.push('\n');
        }
    }

    out.push_str("## Assembly directions and connections\n\n");
    match &analysis.sequence {
        Some(seq) if !seq.steps.is_empty() => {
            let steps: Vec<String> = seq.steps.iter().map(|s| format!("{} ({})", s.module, s.direction)).collect();
            let _ = writeln!(
                out,
                "Assembly sequence ({}): {}\n\nReorientations: {}\n",
                if seq.exact { "optimal" } else { "heuristic" },
                steps.join(" → "),
                seq.reorientations
            );
        }
        _ => out.push_str("No assembly sequence.\n\n"),
    }
    let issues: Vec<&Issue> = analysis.assembly_issues.iter().chain(&analysis.dfd_issues).collect();
    if issues.is_empty() {
        out.push_str("No issues detected.\n\n");
    } else {
        out.push_str("| severity | issue | location | detail |\n|---|---|---|---|\n");
        for i in issues {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                i.severity.as_str(),
                i.kind.as_str(),
                cell(&i.location.to_string()),
                cell(&i.message)
            );
        }
        out.push('\n');
    }

    out.push_str("## Module set assembly strategy\n\n");
    match &analysis.msasm {
        Some(report) if !report.aggregates.is_empty() => {
            let _ = writeln!(out, "| set | {} | total | mean | band | colour |", report.criteria.join(" | "));
            let _ = writeln!(out, "|---|{}---|---|---|---|", "---|".repeat(report.criteria.len()));
            for a in &report.aggregates {
                let scores: Vec<String> = report
                    .criteria
                    .iter()
                    .map(|c| a.scores.get(c).map_or_else(|| "–".to_string(), |v| v.to_string()))
                    .collect();
                let _ = writeln!(
                    out,
                    "| {} | {} | {} | {:.2} | {} | {} |",
                    cell(&a.set.to_string()),
                    scores.join(" | "),
                    a.total,
                    a.mean,
                    a.band,
                    band_colour(a.band)
                );
            }
            out.push_str("\n### Bottlenecks\n\n");
            for (i, set) in report.bottlenecks.iter().enumerate() {
                let a = report.aggregates.iter().find(|a| &a.set == set).expect("ranked set is aggregated");
                let _ = writeln!(out, "{}. {} ({}, {:.2})", i + 1, cell(&set.to_string()), a.band, a.mean);
            }
            if !report.unscored.is_empty() {
                let sets: Vec<String> = report.unscored.iter().map(|s| s.to_string()).collect();
                let _ = writeln!(out, "\nUnscored sets: {}", sets.join(", "));
            }
            out.push('\n');
        }
        _ => out.push_str("No module sets scored.\n\n"),
    }

    if !analysis.skipped.is_empty() {
        out.push_str("## Skipped\n\n");
        for s in &analysis.skipped {
            let _ = writeln!(out, "- {}", cell(s));
        }
        out.push('\n');
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}
