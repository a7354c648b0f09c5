//! Production-oriented concept evaluation.
//!
//! Concepts are compared either against a datum with a Pugh matrix
//! (−1 / 0 / +1 per criterion) or with weighted ordinal scores where 1 is
//! best. Rankings break ties by concept id.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Concept, Criterion, CriterionKind, OrdinalScore, Project, PughCell, Scale};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConceptError {
    #[error("no concept is marked as datum")]
    NoDatum,
    #[error("more than one concept is marked as datum: {0:?}")]
    MultipleDatum(Vec<String>),
    #[error("missing cell for concept {concept:?} on criterion {criterion:?}")]
    MissingCell { concept: String, criterion: String },
    #[error("cell references unknown {kind} {id:?}")]
    UnknownReference { kind: &'static str, id: String },
}

/// Catalog filter. `Dfa` and `Dfd` include criteria tagged for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFilter {
    Dfa,
    Dfd,
    Both,
    All,
}

struct CatalogEntry {
    id: &'static str,
    name: &'static str,
    description: &'static str,
    kind: CriterionKind,
}

const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        id: "assembly_time",
        name: "Assembly time",
        description: "Time needed to put the product together",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "ease_of_insertion",
        name: "Ease of insertion",
        description: "How readily a part slides into place",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "tool_requirements",
        name: "Tool requirements",
        description: "Special tools the operation calls for",
        kind: CriterionKind::Both,
    },
    CatalogEntry {
        id: "access",
        name: "Access",
        description: "How reachable the joining or release point is",
        kind: CriterionKind::Both,
    },
    CatalogEntry {
        id: "connector_destruction",
        name: "Connector destruction",
        description: "Whether separation breaks the joint",
        kind: CriterionKind::Dfd,
    },
    CatalogEntry {
        id: "force_intensity",
        name: "Force intensity",
        description: "Effort needed to pull a part off",
        kind: CriterionKind::Dfd,
    },
    // Shorthand DFA and DFD checklist items.
    CatalogEntry {
        id: "dfa_part_count",
        name: "Reduced part count",
        description: "Fewer separate parts to handle and join",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "dfa_insertion_ease",
        name: "Insertion ease",
        description: "Parts go in without alignment effort",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "dfa_minimal_reorientation",
        name: "Minimal reorientation",
        description: "Assembly proceeds without turning the product",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "dfa_tooling",
        name: "Tooling",
        description: "Few and standard tools for assembly",
        kind: CriterionKind::Dfa,
    },
    CatalogEntry {
        id: "dfd_easy_removability",
        name: "Easy removability",
        description: "Modules come apart quickly for repair or reuse",
        kind: CriterionKind::Dfd,
    },
    CatalogEntry {
        id: "dfd_connector_standardisation",
        name: "Connector standardisation",
        description: "Few distinct connector types across the product",
        kind: CriterionKind::Dfd,
    },
    CatalogEntry {
        id: "dfd_accessibility",
        name: "Accessibility",
        description: "Detachment points reachable without removing other modules",
        kind: CriterionKind::Dfd,
    },
    CatalogEntry {
        id: "dfd_damage_avoidance",
        name: "Damage avoidance",
        description: "Separation does not damage modules or connectors",
        kind: CriterionKind::Dfd,
    },
];

fn entry_criterion(e: &CatalogEntry) -> Criterion {
    Criterion::new(e.id, e.name, e.kind, Scale::Ordinal1To5)
}

/// Built-in concept evaluation criteria in stable order.
pub fn criteria_catalog(filter: CatalogFilter) -> Vec<Criterion> {
    CATALOG
        .iter()
        .filter(|e| match filter {
            CatalogFilter::All => true,
            CatalogFilter::Both => e.kind == CriterionKind::Both,
            CatalogFilter::Dfa => matches!(e.kind, CriterionKind::Dfa | CriterionKind::Both),
            CatalogFilter::Dfd => matches!(e.kind, CriterionKind::Dfd | CriterionKind::Both),
        })
        .map(entry_criterion)
        .collect()
}

pub fn criterion_description(id: &str) -> Option<&'static str> {
    CATALOG.iter().find(|e| e.id == id).map(|e| e.description)
}

/// Resolves a built-in criterion id from the concept catalog or the default
/// MSASM criteria.
pub fn builtin_criterion(id: &str) -> Option<Criterion> {
    crate::msasm::default_msasm_criteria()
        .into_iter()
        .find(|c| c.id == id)
        .or_else(|| CATALOG.iter().find(|e| e.id == id).map(entry_criterion))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    #[default]
    Pugh,
    Numeric,
}

impl std::str::FromStr for EvaluationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pugh" => Ok(EvaluationMode::Pugh),
            "numeric" => Ok(EvaluationMode::Numeric),
            other => Err(format!("unknown evaluation mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PughRank {
    pub concept: String,
    pub net: f64,
    pub is_datum: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericRank {
    pub concept: String,
    pub total: f64,
}

pub type CellMap<T> = BTreeMap<(String, String), T>;

fn check_references<T>(concepts: &[Concept], criteria: &[Criterion], cells: &CellMap<T>) -> Result<(), ConceptError> {
    let concept_ids: BTreeSet<&str> = concepts.iter().map(|c| c.id.as_str()).collect();
    let criterion_ids: BTreeSet<&str> = criteria.iter().map(|c| c.id.as_str()).collect();
    for (concept, criterion) in cells.keys() {
        if !concept_ids.contains(concept.as_str()) {
            return Err(ConceptError::UnknownReference {
                kind: "concept",
                id: concept.clone(),
            });
        }
        if !criterion_ids.contains(criterion.as_str()) {
            return Err(ConceptError::UnknownReference {
                kind: "criterion",
                id: criterion.clone(),
            });
        }
    }
    Ok(())
}

fn sorted_criteria(criteria: &[Criterion]) -> Vec<&Criterion> {
    let mut sorted: Vec<&Criterion> = criteria.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted
}

/// Weighted Pugh net scores, best first. The datum scores zero by definition
/// and any cells recorded against it are ignored.
pub fn pugh_evaluate(
    concepts: &[Concept],
    criteria: &[Criterion],
    cells: &CellMap<PughCell>,
) -> Result<Vec<PughRank>, ConceptError> {
    let datums: Vec<String> = concepts.iter().filter(|c| c.is_datum).map(|c| c.id.clone()).collect();
    match datums.len() {
        0 => return Err(ConceptError::NoDatum),
        1 => {}
        _ => return Err(ConceptError::MultipleDatum(datums)),
    }
    check_references(concepts, criteria, cells)?;
    let criteria = sorted_criteria(criteria);

    let mut ranks = Vec::with_capacity(concepts.len());
    for concept in concepts {
        let net = if concept.is_datum {
            0.0
        } else {
            let mut net = 0.0;
            for c in &criteria {
                let cell = cells.get(&(concept.id.clone(), c.id.clone())).ok_or_else(|| ConceptError::MissingCell {
                    concept: concept.id.clone(),
                    criterion: c.id.clone(),
                })?;
                net += c.weight * f64::from(cell.value());
            }
            net
        };
        ranks.push(PughRank {
            concept: concept.id.clone(),
            net,
            is_datum: concept.is_datum,
        });
    }
    ranks.sort_by(|a, b| b.net.total_cmp(&a.net).then_with(|| a.concept.cmp(&b.concept)));
    Ok(ranks)
}

/// Weighted ordinal totals, best (lowest) first.
pub fn numeric_evaluate(
    concepts: &[Concept],
    criteria: &[Criterion],
    cells: &CellMap<OrdinalScore>,
) -> Result<Vec<NumericRank>, ConceptError> {
    check_references(concepts, criteria, cells)?;
    let criteria = sorted_criteria(criteria);
    let mut ranks = Vec::with_capacity(concepts.len());
    for concept in concepts {
        let mut total = 0.0;
        for c in &criteria {
            let cell = cells.get(&(concept.id.clone(), c.id.clone())).ok_or_else(|| ConceptError::MissingCell {
                concept: concept.id.clone(),
                criterion: c.id.clone(),
            })?;
            total += c.weight * f64::from(cell.value());
        }
        ranks.push(NumericRank {
            concept: concept.id.clone(),
            total,
        });
    }
    ranks.sort_by(|a, b| a.total.total_cmp(&b.total).then_with(|| a.concept.cmp(&b.concept)));
    Ok(ranks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "ranking", rename_all = "snake_case")]
pub enum ConceptRanking {
    Pugh(Vec<PughRank>),
    Numeric(Vec<NumericRank>),
}

/// Criteria referenced by a concept matrix, resolved against the project.
fn referenced_criteria<'a>(project: &Project, ids: impl Iterator<Item = &'a String>) -> Result<Vec<Criterion>, ConceptError> {
    let ids: BTreeSet<&String> = ids.collect();
    ids.into_iter()
        .map(|id| {
            project.criterion(id).ok_or_else(|| ConceptError::UnknownReference {
                kind: "criterion",
                id: id.clone(),
            })
        })
        .collect()
}

impl Project {
    pub fn pugh_cells(&self) -> CellMap<PughCell> {
        self.matrices
            .pugh
            .iter()
            .map(|e| ((e.concept.clone(), e.criterion.clone()), e.value))
            .collect()
    }

    pub fn numeric_cells(&self) -> CellMap<OrdinalScore> {
        self.matrices
            .numeric
            .iter()
            .map(|e| ((e.concept.clone(), e.criterion.clone()), e.value))
            .collect()
    }

    /// Evaluates the project's concept matrix for `mode`. Returns `None` when
    /// there is nothing to evaluate.
    pub fn evaluate_concepts(&self, mode: EvaluationMode) -> Result<Option<ConceptRanking>, ConceptError> {
        if self.concepts.is_empty() {
            return Ok(None);
        }
        match mode {
            EvaluationMode::Pugh => {
                if self.matrices.pugh.is_empty() {
                    return Ok(None);
                }
                let criteria = referenced_criteria(self, self.matrices.pugh.iter().map(|e| &e.criterion))?;
                pugh_evaluate(&self.concepts, &criteria, &self.pugh_cells()).map(|r| Some(ConceptRanking::Pugh(r)))
            }
            EvaluationMode::Numeric => {
                if self.matrices.numeric.is_empty() {
                    return Ok(None);
                }
                let criteria = referenced_criteria(self, self.matrices.numeric.iter().map(|e| &e.criterion))?;
                numeric_evaluate(&self.concepts, &criteria, &self.numeric_cells())
                    .map(|r| Some(ConceptRanking::Numeric(r)))
            }
        }
    }
}
