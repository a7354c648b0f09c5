//! Modular Function Deployment engine with assembly and disassembly
//! extensions: the product management map pipeline, module clustering,
//! concept evaluation, assembly direction analysis and module set scoring.

pub mod adcd;
pub mod clustering;
pub mod concepts;
pub mod io;
pub mod matrices;
pub mod model;
pub mod msasm;
pub mod report;
pub mod validate;

pub use adcd::{
    detect_assembly_issues, detect_dfd_issues, optimal_sequence, reorientation_count, to_dot, validate_adcd, Access,
    AdcdError, AdcdGraph, Connection, Direction, FastenerKind, Issue, IssueKind, IssueLocation, IssueSeverity,
    Sequence, Step,
};
pub use clustering::{
    brute_force_partition, clustering_objective, propose_modules, ClusterError, InteractionMatrix, Move,
    ObjectiveWeights, Partition, Proposal, SearchParams,
};
pub use concepts::{
    builtin_criterion, criteria_catalog, numeric_evaluate, pugh_evaluate, CatalogFilter, CellMap, ConceptError,
    ConceptRanking, EvaluationMode, NumericRank, PughRank,
};
pub use io::{export_csv, load_project, read_project_file, save_project, write_project_file, ProjectIoError};
pub use matrices::{compute_cvr, compute_dpm, compute_mim, compute_qfd, ImportanceVector, MatrixError, MimMatrix, MimSummary};
pub use model::*;
pub use msasm::{
    aggregate_msasm, aggregate_msasm_with, band_colour, default_msasm_criteria, rank_bottlenecks, record_score, Band,
    BandThresholds, Colour, MsasmAggregate, MsasmError, MsasmRecord, MsasmReport, Provenance,
};
pub use report::{analyze, render_report, Analysis};
pub use validate::{validate_project, Finding, Severity, ValidationReport};
