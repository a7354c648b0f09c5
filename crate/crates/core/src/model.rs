//! Domain types of the Product Management Map.
//!
//! A [`Project`] is the single container for everything a modularisation
//! session produces: requirements, properties, technical solutions, modules,
//! criteria, the sparse PMM matrices, the assembly graph and the module set
//! scores. Identifiers are caller-supplied opaque strings; codes such as
//! `M01` or `TS03` are a naming convention, not a type.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::adcd::AdcdGraph;
use crate::msasm::{BandThresholds, MsasmRecord};

/// Current project document version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomerRequirement {
    pub id: String,
    pub statement: String,
    /// Relative importance, unitless, must be positive.
    pub raw_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductProperty {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechnicalSolution {
    pub id: String,
    pub name: String,
    /// Product properties this solution realises.
    #[serde(default)]
    pub realizes: BTreeSet<String>,
}

/// The standard MFD module driver catalog.
///
/// Declaration order is the canonical ordering used for driver profiles and
/// CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleDriver {
    Carryover,
    TechnologyEvolution,
    PlannedDesignChanges,
    DifferentSpecification,
    Styling,
    CommonUnit,
    ProcessOrganisation,
    SeparateTesting,
    SupplierAvailability,
    ServiceMaintenance,
    Upgrading,
    Recycling,
}

impl ModuleDriver {
    pub const COUNT: usize = 12;

    pub const ALL: [ModuleDriver; Self::COUNT] = [
        ModuleDriver::Carryover,
        ModuleDriver::TechnologyEvolution,
        ModuleDriver::PlannedDesignChanges,
        ModuleDriver::DifferentSpecification,
        ModuleDriver::Styling,
        ModuleDriver::CommonUnit,
        ModuleDriver::ProcessOrganisation,
        ModuleDriver::SeparateTesting,
        ModuleDriver::SupplierAvailability,
        ModuleDriver::ServiceMaintenance,
        ModuleDriver::Upgrading,
        ModuleDriver::Recycling,
    ];

    /// Position of the driver in [`ModuleDriver::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleDriver::Carryover => "carryover",
            ModuleDriver::TechnologyEvolution => "technology_evolution",
            ModuleDriver::PlannedDesignChanges => "planned_design_changes",
            ModuleDriver::DifferentSpecification => "different_specification",
            ModuleDriver::Styling => "styling",
            ModuleDriver::CommonUnit => "common_unit",
            ModuleDriver::ProcessOrganisation => "process_organisation",
            ModuleDriver::SeparateTesting => "separate_testing",
            ModuleDriver::SupplierAvailability => "supplier_availability",
            ModuleDriver::ServiceMaintenance => "service_maintenance",
            ModuleDriver::Upgrading => "upgrading",
            ModuleDriver::Recycling => "recycling",
        }
    }
}

impl fmt::Display for ModuleDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Module {
    pub id: String,
    pub name: String,
    /// Technical solutions grouped into this module.
    pub members: BTreeSet<String>,
}

/// An unordered pair of distinct modules sharing an interface.
///
/// Always stored in canonical order (`a < b`), so two sets naming the same
/// modules compare equal regardless of construction order. Serialized as a
/// two-element array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[String; 2]", into = "[String; 2]")]
pub struct ModuleSet {
    a: String,
    b: String,
}

impl ModuleSet {
    /// Returns `None` when both ends name the same module.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Option<Self> {
        let (x, y) = (x.into(), y.into());
        match x.cmp(&y) {
            std::cmp::Ordering::Less => Some(ModuleSet { a: x, b: y }),
            std::cmp::Ordering::Greater => Some(ModuleSet { a: y, b: x }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn a(&self) -> &str {
        &self.a
    }

    pub fn b(&self) -> &str {
        &self.b
    }

    pub fn contains(&self, module: &str) -> bool {
        self.a == module || self.b == module
    }

    /// The end that is not `module`, if `module` is an end at all.
    pub fn other(&self, module: &str) -> Option<&str> {
        if self.a == module {
            Some(&self.b)
        } else if self.b == module {
            Some(&self.a)
        } else {
            None
        }
    }
}

impl TryFrom<[String; 2]> for ModuleSet {
    type Error = String;

    fn try_from([x, y]: [String; 2]) -> Result<Self, Self::Error> {
        ModuleSet::new(x.clone(), y).ok_or_else(|| format!("module set must name two distinct modules, got {x} twice"))
    }
}

impl From<ModuleSet> for [String; 2] {
    fn from(set: ModuleSet) -> Self {
        [set.a, set.b]
    }
}

impl fmt::Display for ModuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}–{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriterionKind {
    #[serde(rename = "DFA")]
    Dfa,
    #[serde(rename = "DFD")]
    Dfd,
    #[serde(rename = "BOTH")]
    Both,
}

impl CriterionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::Dfa => "DFA",
            CriterionKind::Dfd => "DFD",
            CriterionKind::Both => "DFA/DFD",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[serde(rename = "ordinal_1_5")]
    Ordinal1To5,
    Pugh,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub id: String,
    pub name: String,
    pub kind: CriterionKind,
    pub scale: Scale,
    #[serde(default = "default_weight")]
    pub weight: f64,
    /// Anchor texts for scores 1, 3 and 5 on ordinal criteria.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub anchors: BTreeMap<u8, String>,
}

impl Criterion {
    pub fn new(id: impl Into<String>, name: impl Into<String>, kind: CriterionKind, scale: Scale) -> Self {
        Criterion {
            id: id.into(),
            name: name.into(),
            kind,
            scale,
            weight: 1.0,
            anchors: BTreeMap::new(),
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_anchors(mut self, best: &str, mid: &str, poor: &str) -> Self {
        self.anchors = BTreeMap::from([(1, best.to_string()), (3, mid.to_string()), (5, poor.to_string())]);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Concept {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub is_datum: bool,
}

/// QFD/DPM/MIM relation strength on the 0/1/3/9 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RelationStrength(u8);

impl RelationStrength {
    pub const NONE: RelationStrength = RelationStrength(0);
    pub const WEAK: RelationStrength = RelationStrength(1);
    pub const MEDIUM: RelationStrength = RelationStrength(3);
    pub const STRONG: RelationStrength = RelationStrength(9);

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for RelationStrength {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            0 | 1 | 3 | 9 => Ok(RelationStrength(value)),
            other => Err(format!("relation strength must be one of 0, 1, 3, 9; got {other}")),
        }
    }
}

impl From<RelationStrength> for u8 {
    fn from(s: RelationStrength) -> u8 {
        s.0
    }
}

/// Pugh comparison against the datum: worse, same or better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct PughCell(i8);

impl PughCell {
    pub const WORSE: PughCell = PughCell(-1);
    pub const SAME: PughCell = PughCell(0);
    pub const BETTER: PughCell = PughCell(1);

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn flipped(self) -> PughCell {
        PughCell(-self.0)
    }
}

impl TryFrom<i8> for PughCell {
    type Error = String;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        match value {
            -1..=1 => Ok(PughCell(value)),
            other => Err(format!("pugh cell must be -1, 0 or +1; got {other}")),
        }
    }
}

impl From<PughCell> for i8 {
    fn from(c: PughCell) -> i8 {
        c.0
    }
}

/// Ordinal score 1..=5 where 1 is best. Shared by numeric concept scoring
/// and module set scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct OrdinalScore(u8);

impl OrdinalScore {
    pub const BEST: OrdinalScore = OrdinalScore(1);
    pub const WORST: OrdinalScore = OrdinalScore(5);

    pub fn new(value: u8) -> Option<Self> {
        (1..=5).contains(&value).then_some(OrdinalScore(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for OrdinalScore {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        OrdinalScore::new(value).ok_or_else(|| format!("score must be in 1..=5; got {value}"))
    }
}

impl From<OrdinalScore> for u8 {
    fn from(s: OrdinalScore) -> u8 {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QfdCell {
    pub requirement: String,
    pub property: String,
    pub strength: RelationStrength,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpmCell {
    pub property: String,
    pub solution: String,
    pub strength: RelationStrength,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimCell {
    pub driver: ModuleDriver,
    pub solution: String,
    pub strength: RelationStrength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionCell {
    pub a: String,
    pub b: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PughEntry {
    pub concept: String,
    pub criterion: String,
    pub value: PughCell,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericEntry {
    pub concept: String,
    pub criterion: String,
    pub value: OrdinalScore,
}

/// Sparse PMM matrices. Absent cells mean zero (or "not scored" for the
/// concept matrices).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrices {
    #[serde(default)]
    pub qfd: Vec<QfdCell>,
    #[serde(default)]
    pub dpm: Vec<DpmCell>,
    #[serde(default)]
    pub mim: Vec<MimCell>,
    /// Solution-to-solution interface strengths used by clustering.
    #[serde(default)]
    pub interactions: Vec<InteractionCell>,
    #[serde(default)]
    pub pugh: Vec<PughEntry>,
    #[serde(default)]
    pub numeric: Vec<NumericEntry>,
}

impl Matrices {
    pub fn is_empty(&self) -> bool {
        self.qfd.is_empty()
            && self.dpm.is_empty()
            && self.mim.is_empty()
            && self.interactions.is_empty()
            && self.pugh.is_empty()
            && self.numeric.is_empty()
    }
}

fn default_mim_threshold() -> u32 {
    9
}

fn default_lambda() -> f64 {
    0.5
}

fn default_diversity_threshold() -> usize {
    3
}

/// Per-project tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    /// MIM total at or above which a solution is flagged as a module candidate.
    #[serde(default = "default_mim_threshold")]
    pub mim_threshold: u32,
    /// Interface cost weight in the clustering objective.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Cost charged per pair of solutions sharing a module.
    #[serde(default)]
    pub pair_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_blocks: Option<usize>,
    /// Distinct fastener kinds above which diversity is flagged.
    #[serde(default = "default_diversity_threshold")]
    pub diversity_threshold: usize,
    /// Ordered MSASM criteria; `None` selects the six-criterion default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub msasm_criteria: Option<Vec<String>>,
    #[serde(default)]
    pub band_thresholds: BandThresholds,
    /// Modules intended for reuse after disassembly.
    #[serde(default)]
    pub reusable_modules: BTreeSet<String>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            mim_threshold: default_mim_threshold(),
            lambda: default_lambda(),
            pair_cost: 0.0,
            max_blocks: None,
            diversity_threshold: default_diversity_threshold(),
            msasm_criteria: None,
            band_thresholds: BandThresholds::default(),
            reusable_modules: BTreeSet::new(),
        }
    }
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// The PMM document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Project {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub requirements: Vec<CustomerRequirement>,
    #[serde(default)]
    pub properties: Vec<ProductProperty>,
    #[serde(default)]
    pub solutions: Vec<TechnicalSolution>,
    #[serde(default)]
    pub modules: Vec<Module>,
    #[serde(default)]
    pub criteria: Vec<Criterion>,
    #[serde(default)]
    pub matrices: Matrices,
    #[serde(default)]
    pub adcd: AdcdGraph,
    #[serde(default)]
    pub msasm: Vec<MsasmRecord>,
    #[serde(default)]
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub config: ProjectConfig,
}

impl Project {
    pub fn new(name: impl Into<String>) -> Self {
        Project {
            schema_version: SCHEMA_VERSION,
            name: name.into(),
            requirements: Vec::new(),
            properties: Vec::new(),
            solutions: Vec::new(),
            modules: Vec::new(),
            criteria: Vec::new(),
            matrices: Matrices::default(),
            adcd: AdcdGraph::default(),
            msasm: Vec::new(),
            concepts: Vec::new(),
            config: ProjectConfig::default(),
        }
    }

    /// Looks a criterion up in the project first, then in the built-in
    /// catalog (concept criteria and the default MSASM criteria).
    pub fn criterion(&self, id: &str) -> Option<Criterion> {
        self.criteria
            .iter()
            .find(|c| c.id == id)
            .cloned()
            .or_else(|| crate::concepts::builtin_criterion(id))
    }

    /// The ordered MSASM criteria in effect.
    pub fn msasm_criteria(&self) -> Vec<String> {
        match &self.config.msasm_criteria {
            Some(ids) => ids.clone(),
            None => crate::msasm::default_msasm_criteria().into_iter().map(|c| c.id).collect(),
        }
    }

    /// Module sets named anywhere in the project, in canonical order.
    pub fn module_sets(&self) -> Vec<ModuleSet> {
        let sets: BTreeSet<ModuleSet> = self
            .adcd
            .edges
            .iter()
            .map(|c| c.set.clone())
            .chain(self.msasm.iter().map(|r| r.set.clone()))
            .collect();
        sets.into_iter().collect()
    }

    pub fn solution_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.solutions.iter().map(|s| s.id.as_str()).collect();
        ids.into_iter().map(str::to_string).collect()
    }

    pub fn module_ids(&self) -> BTreeSet<&str> {
        self.modules.iter().map(|m| m.id.as_str()).collect()
    }

    /// Sorts every entity list and cell list into canonical order.
    pub fn canonicalize(&mut self) {
        self.requirements.sort_by(|x, y| x.id.cmp(&y.id));
        self.properties.sort_by(|x, y| x.id.cmp(&y.id));
        self.solutions.sort_by(|x, y| x.id.cmp(&y.id));
        self.modules.sort_by(|x, y| x.id.cmp(&y.id));
        self.criteria.sort_by(|x, y| x.id.cmp(&y.id));
        self.concepts.sort_by(|x, y| x.id.cmp(&y.id));
        self.matrices.qfd.sort();
        self.matrices.dpm.sort();
        self.matrices.mim.sort();
        for cell in &mut self.matrices.interactions {
            if cell.b < cell.a {
                std::mem::swap(&mut cell.a, &mut cell.b);
            }
        }
        self.matrices
            .interactions
            .sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)).then(x.strength.total_cmp(&y.strength)));
        self.matrices.pugh.sort();
        self.matrices.numeric.sort();
        self.adcd.canonicalize();
        self.msasm.sort_by(|x, y| (&x.set, &x.criterion).cmp(&(&y.set, &y.criterion)));
    }
}
