//! Assembly Directions and Connections Draft.
//!
//! Modules are nodes, annotated connections are edges, and an optional
//! precedence relation constrains the assembly order. On top of the graph
//! sit the reorientation-minimising sequencer and the rule-based issue
//! detectors.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModuleSet;
use crate::validate::ValidationReport;

/// Graphs up to this size are sequenced exactly; larger ones greedily.
pub const EXACT_SEQUENCE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdcdError {
    #[error("assembly sequence is empty")]
    EmptySequence,
    #[error("precedence relation contains a cycle through {0:?}")]
    CyclicPrecedence(Vec<String>),
    #[error("module {0:?} has no connection to derive an insertion direction from")]
    MissingDirection(String),
    #[error("module {0:?} is referenced but not a node of the graph")]
    UnknownModule(String),
}

/// Abstract insertion axis. `-Z` points down, so gravity helps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+X")]
    PosX,
    #[serde(rename = "-X")]
    NegX,
    #[serde(rename = "+Y")]
    PosY,
    #[serde(rename = "-Y")]
    NegY,
    #[serde(rename = "+Z")]
    PosZ,
    #[serde(rename = "-Z")]
    NegZ,
}

impl Direction {
    pub const ALL: [Direction; 6] = [
        Direction::PosX,
        Direction::NegX,
        Direction::PosY,
        Direction::NegY,
        Direction::PosZ,
        Direction::NegZ,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PosX => "+X",
            Direction::NegX => "-X",
            Direction::PosY => "+Y",
            Direction::NegY => "-Y",
            Direction::PosZ => "+Z",
            Direction::NegZ => "-Z",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    fn from_index(i: usize) -> Direction {
        Direction::ALL[i]
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastenerKind {
    SnapFit,
    Screw,
    Adhesive,
    Clip,
    Other(String),
}

impl FastenerKind {
    pub fn default_requires_tool(&self) -> bool {
        matches!(self, FastenerKind::Screw)
    }

    pub fn default_destructive_removal(&self) -> bool {
        matches!(self, FastenerKind::Adhesive)
    }
}

impl fmt::Display for FastenerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FastenerKind::SnapFit => f.write_str("snap_fit"),
            FastenerKind::Screw => f.write_str("screw"),
            FastenerKind::Adhesive => f.write_str("adhesive"),
            FastenerKind::Clip => f.write_str("clip"),
            FastenerKind::Other(name) => write!(f, "other({name})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Clear,
    PartiallyObstructed,
    Obstructed,
}

impl Access {
    pub fn as_str(self) -> &'static str {
        match self {
            Access::Clear => "clear",
            Access::PartiallyObstructed => "partially_obstructed",
            Access::Obstructed => "obstructed",
        }
    }
}

/// One annotated interface between two modules.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Connection {
    pub set: ModuleSet,
    pub direction: Direction,
    pub fastener: FastenerKind,
    /// Overrides the fastener's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requires_tool: Option<bool>,
    /// Overrides the fastener's default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destructive_removal: Option<bool>,
    pub access: Access,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub annotation: String,
}

impl Connection {
    pub fn new(set: ModuleSet, direction: Direction, fastener: FastenerKind, access: Access) -> Self {
        Connection {
            set,
            direction,
            fastener,
            requires_tool: None,
            destructive_removal: None,
            access,
            annotation: String::new(),
        }
    }

    pub fn requires_tool(&self) -> bool {
        self.requires_tool.unwrap_or_else(|| self.fastener.default_requires_tool())
    }

    pub fn destructive_removal(&self) -> bool {
        self.destructive_removal
            .unwrap_or_else(|| self.fastener.default_destructive_removal())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdcdGraph {
    #[serde(default)]
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<Connection>,
    /// `(before, after)` pairs.
    #[serde(default)]
    pub precedence: Vec<(String, String)>,
}

impl AdcdGraph {
    pub fn canonicalize(&mut self) {
        self.nodes.sort();
        self.edges.sort();
        self.precedence.sort();
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.edges.is_empty() && self.precedence.is_empty()
    }

    /// One precedence cycle, listed with its first node repeated at the end.
    fn precedence_cycle(&self) -> Option<Vec<String>> {
        let mut succ: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in &self.precedence {
            succ.entry(a).or_default().insert(b);
            succ.entry(b).or_default();
        }
        // Iterative DFS with colours: 0 unvisited, 1 on stack, 2 done.
        let mut colour: BTreeMap<&str, u8> = succ.keys().map(|k| (*k, 0)).collect();
        for &start in succ.keys() {
            if colour[start] != 0 {
                continue;
            }
            let mut stack: Vec<(&str, Vec<&str>)> = vec![(start, succ[start].iter().copied().collect())];
            colour.insert(start, 1);
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                match pending.pop() {
                    Some(next) => match colour[next] {
                        0 => {
                            colour.insert(next, 1);
                            stack.push((next, succ[next].iter().copied().collect()));
                        }
                        1 => {
                            let from = stack.iter().position(|(n, _)| *n == next).unwrap();
                            let mut cycle: Vec<String> = stack[from..].iter().map(|(n, _)| n.to_string()).collect();
                            cycle.push(next.to_string());
                            return Some(cycle);
                        }
                        _ => {}
                    },
                    None => {
                        colour.insert(node, 2);
                        stack.pop();
                    }
                }
            }
        }
        None
    }
}

/// Structural checks: dangling endpoints and precedence cycles are errors,
/// modules without any connection are warnings.
pub fn validate_adcd(graph: &AdcdGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut nodes = BTreeSet::new();
    for n in &graph.nodes {
        if !nodes.insert(n.as_str()) {
            report.error(format!("nodes/{n}"), format!("duplicate node {n:?}"));
        }
    }
    for c in &graph.edges {
        for end in [c.set.a(), c.set.b()] {
            if !nodes.contains(end) {
                report.error(format!("edges/{}", c.set), format!("endpoint {end:?} is not a node"));
            }
        }
    }
    for (a, b) in &graph.precedence {
        for end in [a, b] {
            if !nodes.contains(end.as_str()) {
                report.error(format!("precedence/{a}->{b}"), format!("endpoint {end:?} is not a node"));
            }
        }
    }
    if let Some(cycle) = graph.precedence_cycle() {
        report.error("precedence", format!("precedence cycle {}", cycle.join(" -> ")));
    }
    let connected: BTreeSet<&str> = graph.edges.iter().flat_map(|c| [c.set.a(), c.set.b()]).collect();
    for n in &nodes {
        if !connected.contains(n) {
            report.warning(format!("nodes/{n}"), "module has no connections");
        }
    }
    report.finish()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub module: String,
    pub direction: Direction,
}

impl Step {
    pub fn new(module: impl Into<String>, direction: Direction) -> Self {
        Step {
            module: module.into(),
            direction,
        }
    }
}

/// Number of adjacent steps whose insertion directions differ.
pub fn reorientation_count(sequence: &[Step]) -> Result<usize, AdcdError> {
    if sequence.is_empty() {
        return Err(AdcdError::EmptySequence);
    }
    Ok(sequence.windows(2).filter(|w| w[0].direction != w[1].direction).count())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sequence {
    pub steps: Vec<Step>,
    pub reorientations: usize,
    /// Whether the sequence is a proven optimum.
    pub exact: bool,
}

impl Sequence {
    /// Disassembly is modelled as the reversed assembly order.
    pub fn disassembly_order(&self) -> Vec<&str> {
        self.steps.iter().rev().map(|s| s.module.as_str()).collect()
    }
}

/// Index-based view used by the sequencer.
pub(crate) struct SequencingProblem {
    pub ids: Vec<String>,
    /// Modules that must precede module i.
    pub preds: Vec<Vec<usize>>,
    /// Direction bitmask of the connections between i and j.
    pub link_dirs: Vec<u8>,
    /// Direction bitmask of every connection touching i.
    pub all_dirs: Vec<u8>,
}

impl SequencingProblem {
    pub fn new(graph: &AdcdGraph) -> Result<Self, AdcdError> {
        if let Some(cycle) = graph.precedence_cycle() {
            return Err(AdcdError::CyclicPrecedence(cycle));
        }
        let ids: Vec<String> = graph.nodes.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let n = ids.len();
        let index = |m: &str| ids.binary_search_by(|x| x.as_str().cmp(m)).map_err(|_| AdcdError::UnknownModule(m.to_string()));
        let mut preds = vec![Vec::new(); n];
        for (a, b) in &graph.precedence {
            let (ia, ib) = (index(a)?, index(b)?);
            preds[ib].push(ia);
        }
        let mut link_dirs = vec![0u8; n * n];
        let mut all_dirs = vec![0u8; n];
        for c in &graph.edges {
            let (ia, ib) = (index(c.set.a())?, index(c.set.b())?);
            let bit = c.direction.bit();
            link_dirs[ia * n + ib] |= bit;
            link_dirs[ib * n + ia] |= bit;
            all_dirs[ia] |= bit;
            all_dirs[ib] |= bit;
        }
        if let Some(i) = all_dirs.iter().position(|&d| d == 0) {
            return Err(AdcdError::MissingDirection(ids[i].clone()));
        }
        Ok(SequencingProblem {
            ids,
            preds,
            link_dirs,
            all_dirs,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn ready(&self, i: usize, placed: &[bool]) -> bool {
        !placed[i] && self.preds[i].iter().all(|&j| placed[j])
    }

    /// Directions module `i` may be inserted along once `placed` are in:
    /// those of its connections to placed modules, or all of its connection
    /// directions when it touches none of them.
    pub fn allowed(&self, i: usize, placed: &[bool]) -> u8 {
        let n = self.len();
        let toward: u8 = (0..n).filter(|&j| placed[j]).fold(0, |acc, j| acc | self.link_dirs[i * n + j]);
        if toward != 0 {
            toward
        } else {
            self.all_dirs[i]
        }
    }
}

/// Topological order minimising reorientations; exact up to
/// [`EXACT_SEQUENCE_LIMIT`] modules, greedy beyond. Ties resolve to the
/// lexicographically smallest module order.
pub fn optimal_sequence(graph: &AdcdGraph) -> Result<Sequence, AdcdError> {
    for (a, b) in &graph.precedence {
        for end in [a, b] {
            if !graph.nodes.contains(end) {
                return Err(AdcdError::UnknownModule(end.clone()));
            }
        }
    }
    let problem = SequencingProblem::new(graph)?;
    if problem.len() == 0 {
        return Ok(Sequence {
            steps: Vec::new(),
            reorientations: 0,
            exact: true,
        });
    }
    let (steps, exact) = if problem.len() <= EXACT_SEQUENCE_LIMIT {
        (exact_sequence(&problem), true)
    } else {
        (greedy_sequence(&problem), false)
    };
    let reorientations = reorientation_count(&steps)?;
    Ok(Sequence {
        steps,
        reorientations,
        exact,
    })
}

const NO_DIRECTION: usize = 6;

/// Memoised search over (placed set, last direction).
fn exact_sequence(p: &SequencingProblem) -> Vec<Step> {
    let n = p.len();
    let full = (1usize << n) - 1;
    let mut memo: Vec<Option<usize>> = vec![None; (1 << n) * 7];

    fn placed_flags(mask: usize, n: usize) -> Vec<bool> {
        (0..n).map(|i| mask & (1 << i) != 0).collect()
    }

    fn remaining(p: &SequencingProblem, mask: usize, last: usize, full: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if mask == full {
            return 0;
        }
        if let Some(v) = memo[mask * 7 + last] {
            return v;
        }
        let n = p.len();
        let placed = placed_flags(mask, n);
        let mut best = usize::MAX;
        for i in 0..n {
            if !p.ready(i, &placed) {
                continue;
            }
            let allowed = p.allowed(i, &placed);
            for d in 0..6 {
                if allowed & (1 << d) == 0 {
                    continue;
                }
                let step = usize::from(last != NO_DIRECTION && last != d);
                let rest = remaining(p, mask | (1 << i), d, full, memo);
                best = best.min(step + rest);
            }
        }
        memo[mask * 7 + last] = Some(best);
        best
    }

    let mut steps = Vec::with_capacity(n);
    let (mut mask, mut last) = (0usize, NO_DIRECTION);
    while mask != full {
        let target = remaining(p, mask, last, full, &mut memo);
        let placed = placed_flags(mask, n);
        let (i, d) = (0..n)
            .filter(|&i| p.ready(i, &placed))
            .flat_map(|i| {
                let allowed = p.allowed(i, &placed);
                (0..6).filter(move |d| allowed & (1 << d) != 0).map(move |d| (i, d))
            })
            .find(|&(i, d)| {
                usize::from(last != NO_DIRECTION && last != d) + remaining(p, mask | (1 << i), d, full, &mut memo)
                    == target
            })
            .expect("an optimal continuation exists");
        steps.push(Step::new(p.ids[i].clone(), Direction::from_index(d)));
        mask |= 1 << i;
        last = d;
    }
    steps
}

/// Keeps the current direction while any available module allows it;
/// otherwise switches to the direction most available modules share.
fn greedy_sequence(p: &SequencingProblem) -> Vec<Step> {
    let n = p.len();
    let mut placed = vec![false; n];
    let mut current: Option<usize> = None;
    let mut steps = Vec::with_capacity(n);
    while steps.len() < n {
        let available: Vec<usize> = (0..n).filter(|&i| p.ready(i, &placed)).collect();
        let keep = current.and_then(|d| available.iter().copied().find(|&i| p.allowed(i, &placed) & (1 << d) != 0));
        let (i, d) = match (keep, current) {
            (Some(i), Some(d)) => (i, d),
            _ => {
                let d = (0..6)
                    .max_by_key(|&d| {
                        let count = available.iter().filter(|&&i| p.allowed(i, &placed) & (1 << d) != 0).count();
                        (count, std::cmp::Reverse(d))
                    })
                    .expect("six directions");
                match available.iter().copied().find(|&i| p.allowed(i, &placed) & (1 << d) != 0) {
                    Some(i) => (i, d),
                    None => {
                        let i = available[0];
                        let allowed = p.allowed(i, &placed);
                        (i, (0..6).find(|d| allowed & (1 << d) != 0).expect("module has a direction"))
                    }
                }
            }
        };
        steps.push(Step::new(p.ids[i].clone(), Direction::from_index(d)));
        placed[i] = true;
        current = Some(d);
    }
    steps
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    ToolAccessConflict,
    SimultaneousInsertion,
    DestructiveConnector,
    ObstructedDetachment,
    FastenerDiversity,
}

impl IssueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueKind::ToolAccessConflict => "tool_access_conflict",
            IssueKind::SimultaneousInsertion => "simultaneous_insertion",
            IssueKind::DestructiveConnector => "destructive_connector",
            IssueKind::ObstructedDetachment => "obstructed_detachment",
            IssueKind::FastenerDiversity => "fastener_diversity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueSeverity {
    Info,
    Warn,
    Critical,
}

impl IssueSeverity {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueSeverity::Info => "info",
            IssueSeverity::Warn => "warn",
            IssueSeverity::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueLocation {
    Set(ModuleSet),
    Graph,
}

impl fmt::Display for IssueLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueLocation::Set(set) => set.fmt(f),
            IssueLocation::Graph => f.write_str("graph"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub location: IssueLocation,
    pub severity: IssueSeverity,
    pub message: String,
}

fn sort_issues(issues: &mut [Issue]) {
    issues.sort_by(|a, b| (&a.location, a.kind, &a.message).cmp(&(&b.location, b.kind, &b.message)));
}

/// Tool access conflicts and module sets needing several mating directions.
pub fn detect_assembly_issues(graph: &AdcdGraph) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut directions: BTreeMap<&ModuleSet, BTreeSet<Direction>> = BTreeMap::new();
    for c in &graph.edges {
        directions.entry(&c.set).or_default().insert(c.direction);
        if c.requires_tool() && c.access != Access::Clear {
            issues.push(Issue {
                kind: IssueKind::ToolAccessConflict,
                location: IssueLocation::Set(c.set.clone()),
                severity: IssueSeverity::Warn,
                message: format!("{} joint along {} needs a tool but access is {}", c.fastener, c.direction, c.access.as_str()),
            });
        }
    }
    for (set, dirs) in directions {
        if dirs.len() > 1 {
            let listed: Vec<_> = dirs.iter().map(|d| d.as_str()).collect();
            issues.push(Issue {
                kind: IssueKind::SimultaneousInsertion,
                location: IssueLocation::Set(set.clone()),
                severity: IssueSeverity::Warn,
                message: format!("mating requires {} directions at once: {}", dirs.len(), listed.join(", ")),
            });
        }
    }
    sort_issues(&mut issues);
    issues
}

/// Destructive connectors, obstructed detachment points and fastener
/// diversity.
pub fn detect_dfd_issues(graph: &AdcdGraph, reusable_modules: &BTreeSet<String>, diversity_threshold: usize) -> Vec<Issue> {
    let mut issues = Vec::new();
    let mut kinds: BTreeSet<&FastenerKind> = BTreeSet::new();
    for c in &graph.edges {
        kinds.insert(&c.fastener);
        if c.destructive_removal() {
            let reusable: Vec<&str> =
                [c.set.a(), c.set.b()].into_iter().filter(|m| reusable_modules.contains(*m)).collect();
            let (severity, message) = if reusable.is_empty() {
                (IssueSeverity::Warn, format!("{} joint must be destroyed to separate", c.fastener))
            } else {
                (
                    IssueSeverity::Critical,
                    format!("{} joint must be destroyed to separate reusable module {}", c.fastener, reusable.join(", ")),
                )
            };
            issues.push(Issue {
                kind: IssueKind::DestructiveConnector,
                location: IssueLocation::Set(c.set.clone()),
                severity,
                message,
            });
        }
        if c.access == Access::Obstructed {
            issues.push(Issue {
                kind: IssueKind::ObstructedDetachment,
                location: IssueLocation::Set(c.set.clone()),
                severity: IssueSeverity::Warn,
                message: format!("{} joint along {} is obstructed for detachment", c.fastener, c.direction),
            });
        }
    }
    if !kinds.is_empty() {
        let count = kinds.len();
        let listed: Vec<String> = kinds.iter().map(|k| k.to_string()).collect();
        issues.push(Issue {
            kind: IssueKind::FastenerDiversity,
            location: IssueLocation::Graph,
            severity: if count > diversity_threshold { IssueSeverity::Warn } else { IssueSeverity::Info },
            message: format!("{count} distinct fastener kinds (threshold {diversity_threshold}): {}", listed.join(", ")),
        });
    }
    sort_issues(&mut issues);
    issues
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders the graph in Graphviz dot syntax. Connections are undirected
/// edges labelled with direction, fastener and access; precedence is drawn
/// as dashed arrows.
pub fn to_dot(graph: &AdcdGraph) -> String {
    let mut g = graph.clone();
    g.canonicalize();
    let mut out = String::from("digraph adcd {\n  node [shape=box];\n");
    for n in &g.nodes {
        let _ = writeln!(out, "  {};", dot_quote(n));
    }
    for c in &g.edges {
        let mut label = dot_quote(&format!("{} {} ({})", c.direction, c.fastener, c.access.as_str()));
        if !c.annotation.is_empty() {
            label.pop();
            label.push_str("\\n");
            label.push_str(&dot_quote(&c.annotation)[1..]);
        }
        let _ = writeln!(out, "  {} -> {} [dir=none, label={}];", dot_quote(c.set.a()), dot_quote(c.set.b()), label);
    }
    for (a, b) in &g.precedence {
        let _ = writeln!(out, "  {} -> {} [style=dashed];", dot_quote(a), dot_quote(b));
    }
    out.push_str("}\n");
    out
}
