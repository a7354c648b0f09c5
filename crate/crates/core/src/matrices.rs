//! CVR → QFD → DPM importance propagation and MIM driver scoring.
//!
//! Every sum is accumulated in ascending id order (the iteration order of the
//! `BTreeMap`s involved), which keeps reports bit-stable across runs and
//! input orderings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CustomerRequirement, ModuleDriver, Project, RelationStrength};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("no requirements to weight")]
    EmptyInput,
    #[error("requirement {id:?} has non-positive weight {weight}")]
    NonPositiveWeight { id: String, weight: f64 },
    #[error("requirement {0:?} appears more than once")]
    DuplicateId(String),
    #[error("{kind} {id:?} is not defined")]
    DanglingReference { kind: &'static str, id: String },
    #[error("importance vector has basis {found:?}, expected {expected:?}")]
    WrongBasis { expected: Basis, found: Basis },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Requirement,
    Property,
    Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub basis: Basis,
    pub entries: BTreeMap<String, f64>,
}

impl ImportanceVector {
    pub fn get(&self, id: &str) -> f64 {
        self.entries.get(id).copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.entries.values().sum()
    }
}

/// Sparse relation matrix keyed by (row id, column id).
pub type Relations = BTreeMap<(String, String), RelationStrength>;

/// Normalises raw requirement weights to sum to one.
pub fn compute_cvr(requirements: &[CustomerRequirement]) -> Result<ImportanceVector, MatrixError> {
    if requirements.is_empty() {
        return Err(MatrixError::EmptyInput);
    }
    let mut raw = BTreeMap::new();
    for r in requirements {
        if !(r.raw_weight.is_finite() && r.raw_weight > 0.0) {
            return Err(MatrixError::NonPositiveWeight {
                id: r.id.clone(),
                weight: r.raw_weight,
            });
        }
        if raw.insert(r.id.clone(), r.raw_weight).is_some() {
            return Err(MatrixError::DuplicateId(r.id.clone()));
        }
    }
    let total: f64 = raw.values().sum();
    let entries = raw.into_iter().map(|(id, w)| (id, w / total)).collect();
    Ok(ImportanceVector {
        basis: Basis::Requirement,
        entries,
    })
}

/// One propagation step: `out[col] = Σ_row input[row] × relation(row, col)`.
fn propagate(
    input: &ImportanceVector,
    expected: Basis,
    relations: &Relations,
    columns: &[String],
    output: Basis,
    row_kind: &'static str,
    col_kind: &'static str,
) -> Result<ImportanceVector, MatrixError> {
    if input.basis != expected {
        return Err(MatrixError::WrongBasis {
            expected,
            found: input.basis,
        });
    }
    let cols: BTreeSet<&str> = columns.iter().map(String::as_str).collect();
    let mut entries: BTreeMap<String, f64> = cols.iter().map(|c| (c.to_string(), 0.0)).collect();
    // Column-major accumulation keeps the summation order per entry fixed.
    let mut by_column: BTreeMap<&str, Vec<(&str, RelationStrength)>> = BTreeMap::new();
    for ((row, col), strength) in relations {
        if !input.entries.contains_key(row) {
            return Err(MatrixError::DanglingReference {
                kind: row_kind,
                id: row.clone(),
            });
        }
        if !cols.contains(col.as_str()) {
            return Err(MatrixError::DanglingReference {
                kind: col_kind,
                id: col.clone(),
            });
        }
        by_column.entry(col).or_default().push((row, *strength));
    }
    for (col, cells) in by_column {
        let value: f64 = cells.iter().map(|(row, s)| input.get(row) * f64::from(s.value())).sum();
        entries.insert(col.to_string(), value);
    }
    Ok(ImportanceVector { basis: output, entries })
}

/// Maps requirement importance onto product properties.
pub fn compute_qfd(
    cvr: &ImportanceVector,
    relations: &Relations,
    properties: &[String],
) -> Result<ImportanceVector, MatrixError> {
    propagate(cvr, Basis::Requirement, relations, properties, Basis::Property, "requirement", "property")
}

/// Maps property importance onto technical solutions.
pub fn compute_dpm(
    property_importance: &ImportanceVector,
    relations: &Relations,
    solutions: &[String],
) -> Result<ImportanceVector, MatrixError> {
    propagate(
        property_importance,
        Basis::Property,
        relations,
        solutions,
        Basis::Solution,
        "property",
        "technical solution",
    )
}

/// Module indication matrix: driver strengths per technical solution.
/// Absent cells are zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MimMatrix {
    cells: BTreeMap<(ModuleDriver, String), RelationStrength>,
}

impl MimMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, driver: ModuleDriver, solution: impl Into<String>, strength: RelationStrength) {
        let key = (driver, solution.into());
        if strength == RelationStrength::NONE {
            self.cells.remove(&key);
        } else {
            self.cells.insert(key, strength);
        }
    }

    pub fn with(mut self, driver: ModuleDriver, solution: &str, strength: RelationStrength) -> Self {
        self.set(driver, solution, strength);
        self
    }

    pub fn get(&self, driver: ModuleDriver, solution: &str) -> RelationStrength {
        self.cells.get(&(driver, solution.to_string())).copied().unwrap_or_default()
    }

    /// Driver strengths for one solution in catalog order.
    pub fn profile(&self, solution: &str) -> [u8; ModuleDriver::COUNT] {
        let mut out = [0u8; ModuleDriver::COUNT];
        for d in ModuleDriver::ALL {
            out[d.index()] = self.get(d, solution).value();
        }
        out
    }

    pub fn solutions(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(_, s)| s.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ModuleDriver, &str, RelationStrength)> {
        self.cells.iter().map(|((d, s), v)| (*d, s.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimSummary {
    pub per_solution_total: BTreeMap<String, u32>,
    pub profile: BTreeMap<String, [u8; ModuleDriver::COUNT]>,
    pub candidate_flags: BTreeMap<String, bool>,
    pub threshold: u32,
}

/// Totals driver strengths per solution and flags module candidates.
///
/// `solutions` is the scope; every solution in it gets an entry, and a MIM
/// cell naming a solution outside it is a dangling reference.
pub fn compute_mim(mim: &MimMatrix, solutions: &[String], threshold: u32) -> Result<MimSummary, MatrixError> {
    let scope: BTreeSet<&str> = solutions.iter().map(String::as_str).collect();
    if let Some(missing) = mim.solutions().into_iter().find(|s| !scope.contains(s)) {
        return Err(MatrixError::DanglingReference {
            kind: "technical solution",
            id: missing.to_string(),
        });
    }
    let mut summary = MimSummary {
        per_solution_total: BTreeMap::new(),
        profile: BTreeMap::new(),
        candidate_flags: BTreeMap::new(),
        threshold,
    };
    for s in scope {
        let profile = mim.profile(s);
        let total: u32 = profile.iter().map(|&v| u32::from(v)).sum();
        summary.per_solution_total.insert(s.to_string(), total);
        summary.profile.insert(s.to_string(), profile);
        summary.candidate_flags.insert(s.to_string(), total >= threshold);
    }
    Ok(summary)
}

impl Project {
    pub fn qfd_relations(&self) -> Relations {
        self.matrices
            .qfd
            .iter()
            .map(|c| ((c.requirement.clone(), c.property.clone()), c.strength))
            .collect()
    }

    pub fn dpm_relations(&self) -> Relations {
        self.matrices
            .dpm
            .iter()
            .map(|c| ((c.property.clone(), c.solution.clone()), c.strength))
            .collect()
    }

    pub fn mim_matrix(&self) -> MimMatrix {
        let mut mim = MimMatrix::new();
        for c in &self.matrices.mim {
            mim.set(c.driver, c.solution.clone(), c.strength);
        }
        mim
    }

    pub fn property_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.properties.iter().map(|p| p.id.as_str()).collect();
        ids.into_iter().map(str::to_string).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(id: &str, w: f64) -> CustomerRequirement {
        CustomerRequirement {
            id: id.into(),
            statement: String::new(),
            raw_weight: w,
        }
    }

    fn rel(cells: &[(&str, &str, u8)]) -> Relations {
        cells
            .iter()
            .map(|(r, c, s)| ((r.to_string(), c.to_string()), RelationStrength::try_from(*s).unwrap()))
            .collect()
    }

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cvr_normalises() {
        let v = compute_cvr(&[req("R1", 5.0), req("R2", 3.0), req("R3", 2.0)]).unwrap();
        assert_eq!(v.get("R1"), 0.5);
        assert_eq!(v.get("R2"), 0.3);
        assert_eq!(v.get("R3"), 0.2);
        assert!((v.sum() - 1.0).abs() < 1e-9);

        let single = compute_cvr(&[req("R1", 7.0)]).unwrap();
        assert_eq!(single.get("R1"), 1.0);

        let flat = compute_cvr(&[req("A", 1.0), req("B", 1.0), req("C", 1.0), req("D", 1.0)]).unwrap();
        assert!(flat.entries.values().all(|&x| x == 0.25));
    }

    #[test]
    fn cvr_errors() {
        assert_eq!(compute_cvr(&[]), Err(MatrixError::EmptyInput));
        assert!(matches!(
            compute_cvr(&[req("R1", 1.0), req("R2", 0.0)]),
            Err(MatrixError::NonPositiveWeight { .. })
        ));
        assert!(matches!(compute_cvr(&[req("R1", -2.0)]), Err(MatrixError::NonPositiveWeight { .. })));
    }

    #[test]
    fn qfd_weighted_sums() {
        let cvr = compute_cvr(&[req("R1", 1.0)]).unwrap();
        let out = compute_qfd(&cvr, &rel(&[("R1", "P1", 9)]), &ids(&["P1"])).unwrap();
        assert_eq!(out.get("P1"), 9.0);

        let cvr = compute_cvr(&[req("R1", 1.0), req("R2", 1.0)]).unwrap();
        let out = compute_qfd(
            &cvr,
            &rel(&[("R1", "P1", 9), ("R2", "P1", 3), ("R2", "P2", 3)]),
            &ids(&["P1", "P2"]),
        )
        .unwrap();
        // 0.5*9 + 0.5*3 and 0.5*3
        assert_eq!(out.get("P1"), 6.0);
        assert_eq!(out.get("P2"), 1.5);
        assert_eq!(out.basis, Basis::Property);

        let zero = compute_qfd(&cvr, &rel(&[("R1", "P1", 0)]), &ids(&["P1", "P2"])).unwrap();
        assert!(zero.entries.values().all(|&x| x == 0.0));
        assert_eq!(zero.entries.len(), 2);
    }

    #[test]
    fn qfd_rejects_dangling() {
        let cvr = compute_cvr(&[req("R1", 1.0)]).unwrap();
        let err = compute_qfd(&cvr, &rel(&[("R9", "P1", 9)]), &ids(&["P1"])).unwrap_err();
        assert_eq!(
            err,
            MatrixError::DanglingReference {
                kind: "requirement",
                id: "R9".into()
            }
        );
        let err = compute_qfd(&cvr, &rel(&[("R1", "P7", 9)]), &ids(&["P1"])).unwrap_err();
        assert!(matches!(err, MatrixError::DanglingReference { kind: "property", .. }));
        assert!(matches!(
            compute_dpm(&cvr, &Relations::new(), &ids(&["TS1"])),
            Err(MatrixError::WrongBasis { .. })
        ));
    }

    #[test]
    fn dpm_products() {
        let props = ImportanceVector {
            basis: Basis::Property,
            entries: [("P1".to_string(), 6.0), ("P2".to_string(), 1.5)].into(),
        };
        let out = compute_dpm(&props, &rel(&[("P1", "TS1", 3)]), &ids(&["TS1"])).unwrap();
        assert_eq!(out.get("TS1"), 18.0);

        // 6.0*9 + 1.5*1
        let out = compute_dpm(&props, &rel(&[("P1", "TS1", 9), ("P2", "TS1", 1)]), &ids(&["TS1"])).unwrap();
        assert_eq!(out.get("TS1"), 55.5);

        let out = compute_dpm(&props, &Relations::new(), &ids(&["TS1", "TS2"])).unwrap();
        assert!(out.entries.values().all(|&x| x == 0.0));
    }

    #[test]
    fn mim_totals_and_flags() {
        let mim = MimMatrix::new()
            .with(ModuleDriver::Styling, "TS1", RelationStrength::STRONG)
            .with(ModuleDriver::Carryover, "TS3", RelationStrength::STRONG)
            .with(ModuleDriver::Recycling, "TS3", RelationStrength::MEDIUM);
        let s = compute_mim(&mim, &ids(&["TS1", "TS2", "TS3"]), 9).unwrap();
        assert_eq!(s.per_solution_total["TS1"], 9);
        assert_eq!(s.profile["TS1"].iter().filter(|&&v| v != 0).count(), 1);
        assert_eq!(s.profile["TS1"][ModuleDriver::Styling.index()], 9);
        assert_eq!(s.per_solution_total["TS2"], 0);
        assert!(!s.candidate_flags["TS2"]);
        assert_eq!(s.per_solution_total["TS3"], 12);
        assert!(s.candidate_flags["TS3"]);

        let err = compute_mim(&mim, &ids(&["TS1"]), 9).unwrap_err();
        assert!(matches!(err, MatrixError::DanglingReference { .. }));
    }

    fn strength() -> impl Strategy<Value = u8> {
        prop::sample::select(vec![0u8, 1, 3, 9])
    }

    proptest! {
        #[test]
        fn cvr_scale_equivariance(weights in prop::collection::vec(0.01f64..100.0, 1..8), k in 0.1f64..50.0) {
            let reqs: Vec<_> = weights.iter().enumerate().map(|(i, &w)| req(&format!("R{i}"), w)).collect();
            let scaled: Vec<_> = weights.iter().enumerate().map(|(i, &w)| req(&format!("R{i}"), w * k)).collect();
            let a = compute_cvr(&reqs).unwrap();
            let b = compute_cvr(&scaled).unwrap();
            for (id, x) in &a.entries {
                prop_assert!((x - b.get(id)).abs() < 1e-12);
            }
            prop_assert!((a.sum() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn qfd_monotone_in_strength(
            weights in prop::collection::vec(0.1f64..10.0, 1..5),
            cells in prop::collection::vec(strength(), 15),
            pick in 0usize..15,
        ) {
            let n = weights.len();
            let reqs: Vec<_> = weights.iter().enumerate().map(|(i, &w)| req(&format!("R{i}"), w)).collect();
            let cvr = compute_cvr(&reqs).unwrap();
            let props = ids(&["P0", "P1", "P2"]);
            let build = |cells: &[u8]| -> Relations {
                let mut r = Relations::new();
                for i in 0..n {
                    for (j, p) in props.iter().enumerate() {
                        r.insert((format!("R{i}"), p.clone()), RelationStrength::try_from(cells[i * 3 + j]).unwrap());
                    }
                }
                r
            };
            let before = compute_qfd(&cvr, &build(&cells), &props).unwrap();
            let mut raised = cells.clone();
            let idx = pick % (n * 3);
            raised[idx] = match raised[idx] { 0 => 1, 1 => 3, _ => 9 };
            let after = compute_qfd(&cvr, &build(&raised), &props).unwrap();
            let p = &props[idx % 3];
            prop_assert!(after.get(p) >= before.get(p));
        }

        #[test]
        fn cvr_permutation_invariance(weights in prop::collection::vec(0.1f64..10.0, 1..8), seed in any::<u64>()) {
            let reqs: Vec<_> = weights.iter().enumerate().map(|(i, &w)| req(&format!("R{i}"), w)).collect();
            let mut shuffled = reqs.clone();
            let len = shuffled.len();
            shuffled.rotate_left((seed as usize) % len);
            shuffled.reverse();
            prop_assert_eq!(compute_cvr(&reqs).unwrap(), compute_cvr(&shuffled).unwrap());
        }
    }
}
