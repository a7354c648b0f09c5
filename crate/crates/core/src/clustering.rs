//! Partitioning technical solutions into modules.
//!
//! The objective rewards placing solutions that share module drivers, or
//! that interact strongly, in the same block, and penalises interactions
//! that cross block boundaries:
//!
//! ```text
//! J = Σ_within (sim(a,b) + w(a,b) − pair_cost) − λ · Σ_cross w(a,b)
//! sim(a,b) = profile(a) · profile(b) / 81
//! ```
//!
//! With `pair_cost = 0` every within-block term is non-negative, so the
//! single all-in-one block is always among the optima. A positive pair cost
//! prices module size and makes the search select genuinely separate blocks.
//!
//! Driver dot products are accumulated as integers and divided once, so the
//! same partition always evaluates to the same bits regardless of which code
//! path scores it.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrices::MimMatrix;
use crate::model::{ModuleDriver, Project};

/// Largest instance the exhaustive oracle accepts (Bell(10) = 115 975).
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Instances up to this size are finished with an exhaustive sweep.
pub const EXHAUSTIVE_LIMIT: usize = 9;

const STRONG_DOT: f64 = 81.0;
const EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("partition does not cover the solutions in scope: {0}")]
    CoverageMismatch(String),
    #[error("{0} solutions exceed the brute-force limit of {BRUTE_FORCE_LIMIT}")]
    TooLarge(usize),
    #[error("no technical solutions to cluster")]
    NoSolutions,
    #[error("solution {0:?} is referenced but not in scope")]
    UnknownSolution(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Symmetric, sparse solution-to-solution interaction strengths.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionMatrix {
    cells: BTreeMap<(String, String), f64>,
}

impl InteractionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, a: &str, b: &str, strength: f64) -> Result<(), ClusterError> {
        if a == b {
            return Err(ClusterError::InvalidParameter(format!("self-interaction on {a:?}")));
        }
        if !(strength.is_finite() && strength >= 0.0) {
            return Err(ClusterError::InvalidParameter(format!(
                "interaction {a:?}-{b:?} has invalid strength {strength}"
            )));
        }
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        if strength == 0.0 {
            self.cells.remove(&key);
        } else {
            self.cells.insert(key, strength);
        }
        Ok(())
    }

    pub fn get(&self, a: &str, b: &str) -> f64 {
        let key = if a < b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        self.cells.get(&key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.cells.iter().map(|((a, b), w)| (a.as_str(), b.as_str(), *w))
    }

    pub fn total(&self) -> f64 {
        self.cells.values().sum()
    }
}

/// A disjoint cover of the solutions, held in canonical form: blocks sorted
/// by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<BTreeSet<String>>", into = "Vec<BTreeSet<String>>")]
pub struct Partition {
    blocks: Vec<BTreeSet<String>>,
}

impl Partition {
    pub fn new(blocks: impl IntoIterator<Item = BTreeSet<String>>) -> Self {
        let mut blocks: Vec<_> = blocks.into_iter().collect();
        blocks.sort();
        Partition { blocks }
    }

    pub fn from_lists<S: AsRef<str>>(blocks: &[&[S]]) -> Self {
        Partition::new(blocks.iter().map(|b| b.iter().map(|s| s.as_ref().to_string()).collect()))
    }

    pub fn singletons(solutions: &[String]) -> Self {
        Partition::new(solutions.iter().map(|s| BTreeSet::from([s.clone()])))
    }

    pub fn blocks(&self) -> &[BTreeSet<String>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block lists for lexicographic comparison.
    fn key(&self) -> Vec<Vec<&str>> {
        self.blocks.iter().map(|b| b.iter().map(String::as_str).collect()).collect()
    }
}

impl From<Vec<BTreeSet<String>>> for Partition {
    fn from(blocks: Vec<BTreeSet<String>>) -> Self {
        Partition::new(blocks)
    }
}

impl From<Partition> for Vec<BTreeSet<String>> {
    fn from(p: Partition) -> Self {
        p.blocks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveWeights {
    /// Weight of cross-block interactions.
    pub lambda: f64,
    /// Cost charged for every within-block pair.
    #[serde(default)]
    pub pair_cost: f64,
}

impl ObjectiveWeights {
    pub fn new(lambda: f64) -> Self {
        ObjectiveWeights { lambda, pair_cost: 0.0 }
    }

    pub fn with_pair_cost(mut self, pair_cost: f64) -> Self {
        self.pair_cost = pair_cost;
        self
    }

    fn check(&self) -> Result<(), ClusterError> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ClusterError::InvalidParameter(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.pair_cost.is_finite() && self.pair_cost >= 0.0) {
            return Err(ClusterError::InvalidParameter(format!(
                "pair cost must be non-negative, got {}",
                self.pair_cost
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchParams {
    pub max_blocks: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    /// Two blocks, named by their smallest members, were merged.
    Merge { left: String, right: String, objective: f64 },
    /// A solution moved into the block represented by `target`, or into a
    /// new block when `target` is `None`.
    Relocate {
        solution: String,
        target: Option<String>,
        objective: f64,
    },
    /// The exhaustive sweep found a strictly better partition.
    Exhaustive { objective: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub partition: Partition,
    pub objective: f64,
    pub trace: Vec<Move>,
}

/// Dense, index-based view of one clustering instance. Index order is the
/// ascending solution id order.
struct Instance {
    ids: Vec<String>,
    dots: Vec<u32>,
    inter: Vec<f64>,
    weights: ObjectiveWeights,
}

impl Instance {
    fn new(
        solutions: &[String],
        mim: &MimMatrix,
        interactions: &InteractionMatrix,
        weights: ObjectiveWeights,
    ) -> Result<Self, ClusterError> {
        weights.check()?;
        let ids = scope(solutions);
        let known: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        if let Some(s) = mim.solutions().into_iter().find(|s| !known.contains(s)) {
            return Err(ClusterError::UnknownSolution(s.to_string()));
        }
        for (a, b, _) in interactions.iter() {
            for end in [a, b] {
                if !known.contains(end) {
                    return Err(ClusterError::UnknownSolution(end.to_string()));
                }
            }
        }
        let n = ids.len();
        let profiles: Vec<_> = ids.iter().map(|s| mim.profile(s)).collect();
        let mut dots = vec![0u32; n * n];
        let mut inter = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    dots[i * n + j] = dot(&profiles[i], &profiles[j]);
                    inter[i * n + j] = interactions.get(&ids[i], &ids[j]);
                }
            }
        }
        Ok(Instance {
            ids,
            dots,
            inter,
            weights,
        })
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn objective(&self, labels: &[usize]) -> f64 {
        let n = self.len();
        let mut dots: u64 = 0;
        let mut within = 0.0;
        let mut cross = 0.0;
        let mut pairs: u64 = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.inter[i * n + j];
                if labels[i] == labels[j] {
                    dots += u64::from(self.dots[i * n + j]);
                    within += w;
                    pairs += 1;
                } else {
                    cross += w;
                }
            }
        }
        combine(dots, within, cross, pairs, self.weights)
    }

    /// Change in J when the pair (i, j) goes from cross-block to within-block.
    fn gain(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        f64::from(self.dots[i * n + j]) / STRONG_DOT + self.inter[i * n + j] * (1.0 + self.weights.lambda)
            - self.weights.pair_cost
    }

    fn partition(&self, labels: &[usize]) -> Partition {
        let mut blocks: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            blocks.entry(l).or_default().insert(self.ids[i].clone());
        }
        Partition::new(blocks.into_values())
    }

    fn representative(&self, labels: &[usize], label: usize) -> String {
        let i = labels.iter().position(|&l| l == label).expect("label in use");
        self.ids[i].clone()
    }
}

fn scope(solutions: &[String]) -> Vec<String> {
    let set: BTreeSet<&String> = solutions.iter().collect();
    set.into_iter().cloned().collect()
}

fn dot(a: &[u8; ModuleDriver::COUNT], b: &[u8; ModuleDriver::COUNT]) -> u32 {
    a.iter().zip(b).map(|(&x, &y)| u32::from(x) * u32::from(y)).sum()
}

fn combine(dots: u64, within: f64, cross: f64, pairs: u64, w: ObjectiveWeights) -> f64 {
    dots as f64 / STRONG_DOT + within - w.lambda * cross - w.pair_cost * pairs as f64
}

/// Scores a partition of exactly the solutions in `solutions`.
pub fn clustering_objective(
    partition: &Partition,
    solutions: &[String],
    mim: &MimMatrix,
    interactions: &InteractionMatrix,
    weights: ObjectiveWeights,
) -> Result<f64, ClusterError> {
    weights.check()?;
    let ids = scope(solutions);
    let mut block_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (b, block) in partition.blocks().iter().enumerate() {
        if block.is_empty() {
            return Err(ClusterError::CoverageMismatch(format!("block {b} is empty")));
        }
        for s in block {
            if block_of.insert(s, b).is_some() {
                return Err(ClusterError::CoverageMismatch(format!("{s:?} appears in more than one block")));
            }
        }
    }
    for s in &ids {
        if !block_of.contains_key(s.as_str()) {
            return Err(ClusterError::CoverageMismatch(format!("{s:?} is not in any block")));
        }
    }
    if block_of.len() != ids.len() {
        let extra = block_of.keys().find(|s| ids.binary_search_by(|x| x.as_str().cmp(s)).is_err());
        return Err(ClusterError::CoverageMismatch(format!("{:?} is not in scope", extra.unwrap())));
    }

    let mut dots: u64 = 0;
    let mut within = 0.0;
    let mut cross = 0.0;
    let mut pairs: u64 = 0;
    for (i, a) in ids.iter().enumerate() {
        let pa = mim.profile(a);
        for b in &ids[i + 1..] {
            let w = interactions.get(a, b);
            if block_of[a.as_str()] == block_of[b.as_str()] {
                dots += u64::from(dot(&pa, &mim.profile(b)));
                within += w;
                pairs += 1;
            } else {
                cross += w;
            }
        }
    }
    Ok(combine(dots, within, cross, pairs, weights))
}

type Visit<'a> = dyn FnMut(&[BTreeSet<String>]) -> Result<(), ClusterError> + 'a;

/// Exhaustive optimum over every partition with at most `max_blocks` blocks.
/// Ties go to the lexicographically smallest canonical form.
pub fn brute_force_partition(
    solutions: &[String],
    mim: &MimMatrix,
    interactions: &InteractionMatrix,
    weights: ObjectiveWeights,
    max_blocks: Option<usize>,
) -> Result<Partition, ClusterError> {
    let ids = scope(solutions);
    if ids.is_empty() {
        return Err(ClusterError::NoSolutions);
    }
    if ids.len() > BRUTE_FORCE_LIMIT {
        return Err(ClusterError::TooLarge(ids.len()));
    }
    if max_blocks == Some(0) {
        return Err(ClusterError::InvalidParameter("max_blocks must be at least 1".into()));
    }
    let limit = max_blocks.unwrap_or(usize::MAX);

    fn extend(
        rest: &[String],
        blocks: &mut Vec<BTreeSet<String>>,
        limit: usize,
        visit: &mut Visit<'_>,
    ) -> Result<(), ClusterError> {
        let Some((first, rest)) = rest.split_first() else {
            return visit(blocks);
        };
        for b in 0..blocks.len() {
            blocks[b].insert(first.clone());
            extend(rest, blocks, limit, visit)?;
            blocks[b].remove(first);
        }
        if blocks.len() < limit {
            blocks.push(BTreeSet::from([first.clone()]));
            extend(rest, blocks, limit, visit)?;
            blocks.pop();
        }
        Ok(())
    }

    let mut best: Option<(f64, Partition)> = None;
    extend(&ids, &mut Vec::new(), limit, &mut |blocks| {
        let candidate = Partition::new(blocks.iter().cloned());
        let j = clustering_objective(&candidate, &ids, mim, interactions, weights)?;
        let better = match &best {
            None => true,
            Some((bj, bp)) => j > *bj || (j == *bj && candidate.key() < bp.key()),
        };
        if better {
            best = Some((j, candidate));
        }
        Ok(())
    })?;
    Ok(best.expect("at least one partition").1)
}

/// Greedy agglomeration, then simulated annealing over single-solution
/// moves. Small instances finish with an exhaustive sweep, so their result
/// is a global optimum.
pub fn propose_modules(
    solutions: &[String],
    mim: &MimMatrix,
    interactions: &InteractionMatrix,
    weights: ObjectiveWeights,
    params: SearchParams,
) -> Result<Proposal, ClusterError> {
    let inst = Instance::new(solutions, mim, interactions, weights)?;
    let n = inst.len();
    if n == 0 {
        return Err(ClusterError::NoSolutions);
    }
    let max_blocks = match params.max_blocks {
        Some(0) => return Err(ClusterError::InvalidParameter("max_blocks must be at least 1".into())),
        Some(k) => k.min(n),
        None => n,
    };
    let mut trace = Vec::new();

    let mut labels = agglomerate(&inst, max_blocks, &mut trace);
    let mut best_j = inst.objective(&labels);
    let mut best = labels.clone();

    anneal(&inst, &mut labels, max_blocks, params.seed, &mut trace, &mut best, &mut best_j);

    if n <= EXHAUSTIVE_LIMIT {
        if let Some((j, found)) = exhaustive(&inst, max_blocks) {
            if j > best_j {
                best_j = j;
                best = found;
                trace.push(Move::Exhaustive { objective: j });
            }
        }
    }

    let partition = inst.partition(&best);
    let objective = clustering_objective(&partition, &inst.ids, mim, interactions, weights)?;
    debug_assert_eq!(objective, best_j);
    Ok(Proposal {
        partition,
        objective,
        trace,
    })
}

fn agglomerate(inst: &Instance, max_blocks: usize, trace: &mut Vec<Move>) -> Vec<usize> {
    let n = inst.len();
    let mut blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for x in 0..blocks.len() {
            for y in (x + 1)..blocks.len() {
                let delta: f64 = blocks[x]
                    .iter()
                    .flat_map(|&i| blocks[y].iter().map(move |&j| (i, j)))
                    .map(|(i, j)| inst.gain(i, j))
                    .sum();
                if best.is_none_or(|(d, _, _)| delta > d) {
                    best = Some((delta, x, y));
                }
            }
        }
        let Some((delta, x, y)) = best else { break };
        if delta <= EPS && blocks.len() <= max_blocks {
            break;
        }
        let absorbed = blocks.remove(y);
        let left = inst.ids[blocks[x][0]].clone();
        let right = inst.ids[absorbed[0]].clone();
        blocks[x].extend(absorbed);
        blocks[x].sort_unstable();
        let labels = labels_of(&blocks, n);
        trace.push(Move::Merge {
            left,
            right,
            objective: inst.objective(&labels),
        });
    }
    labels_of(&blocks, n)
}

fn labels_of(blocks: &[Vec<usize>], n: usize) -> Vec<usize> {
    let mut labels = vec![0; n];
    for (b, block) in blocks.iter().enumerate() {
        for &i in block {
            labels[i] = b;
        }
    }
    labels
}

fn anneal(
    inst: &Instance,
    labels: &mut [usize],
    max_blocks: usize,
    seed: u64,
    trace: &mut Vec<Move>,
    best: &mut [usize],
    best_j: &mut f64,
) {
    let n = inst.len();
    if n < 2 {
        return;
    }
    let steps = (50 * n * n).clamp(500, 50_000);
    let scale = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| inst.gain(i, j).abs())
        .fold(0.0, f64::max);
    let t0 = if scale > 0.0 { scale } else { 1.0 };
    let t_end = t0 * 1e-3;
    let cooling = (t_end / t0).powf(1.0 / steps as f64);
    let mut temperature = t0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for _ in 0..steps {
        temperature *= cooling;
        let i = rng.random_range(0..n);
        let own = labels[i];
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &l in labels.iter() {
            *counts.entry(l).or_default() += 1;
        }
        let mut targets: Vec<Option<usize>> = counts.keys().filter(|&&l| l != own).map(|&l| Some(l)).collect();
        if counts.len() < max_blocks && counts[&own] > 1 {
            targets.push(None);
        }
        if targets.is_empty() {
            continue;
        }
        let target = targets[rng.random_range(0..targets.len())];
        let leave: f64 = (0..n).filter(|&k| k != i && labels[k] == own).map(|k| inst.gain(i, k)).sum();
        let join: f64 = match target {
            Some(t) => (0..n).filter(|&k| labels[k] == t).map(|k| inst.gain(i, k)).sum(),
            None => 0.0,
        };
        let delta = join - leave;
        let accept = delta >= 0.0 || rng.random::<f64>() < (delta / temperature).exp();
        if !accept {
            continue;
        }
        let representative = target.map(|t| inst.representative(labels, t));
        labels[i] = match target {
            Some(t) => t,
            None => (0..=n).find(|l| !counts.contains_key(l)).expect("free label"),
        };
        let j = inst.objective(labels);
        trace.push(Move::Relocate {
            solution: inst.ids[i].clone(),
            target: representative,
            objective: j,
        });
        if j > *best_j {
            *best_j = j;
            best.copy_from_slice(labels);
        }
    }
}

/// Walks every restricted growth string with at most `max_blocks` labels.
fn exhaustive(inst: &Instance, max_blocks: usize) -> Option<(f64, Vec<usize>)> {
    let n = inst.len();
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;

    fn walk(
        inst: &Instance,
        pos: usize,
        used: usize,
        max_blocks: usize,
        labels: &mut [usize],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if pos == labels.len() {
            let j = inst.objective(labels);
            if best.as_ref().is_none_or(|(b, _)| j > *b) {
                *best = Some((j, labels.to_vec()));
            }
            return;
        }
        let upper = (used + 1).min(max_blocks);
        for l in 0..upper {
            labels[pos] = l;
            walk(inst, pos + 1, used.max(l + 1), max_blocks, labels, best);
        }
    }

    walk(inst, 0, 0, max_blocks, &mut labels, &mut best);
    best
}

impl Project {
    pub fn interaction_matrix(&self) -> Result<InteractionMatrix, ClusterError> {
        let mut m = InteractionMatrix::new();
        for c in &self.matrices.interactions {
            m.insert(&c.a, &c.b, c.strength)?;
        }
        Ok(m)
    }

    /// The partition implied by the project's current modules. Solutions not
    /// assigned to any module become singleton blocks.
    pub fn current_partition(&self) -> Partition {
        let mut assigned = BTreeSet::new();
        let mut blocks: Vec<BTreeSet<String>> = Vec::new();
        for m in &self.modules {
            assigned.extend(m.members.iter().cloned());
            blocks.push(m.members.clone());
        }
        for s in self.solution_ids() {
            if !assigned.contains(&s) {
                blocks.push(BTreeSet::from([s]));
            }
        }
        Partition::new(blocks)
    }
}
