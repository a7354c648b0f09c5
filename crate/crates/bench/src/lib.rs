//! Seeded workload generators shared by the benches.

use mfdx_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ClusterInstance {
    pub solutions: Vec<String>,
    pub mim: MimMatrix,
    pub interactions: InteractionMatrix,
}

pub fn cluster_instance(n: usize, seed: u64) -> ClusterInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solutions: Vec<String> = (1..=n).map(|i| format!("S{i:02}")).collect();
    let mut mim = MimMatrix::new();
    for s in &solutions {
        for _ in 0..3 {
            let d = ModuleDriver::ALL[rng.random_range(0..12)];
            let v = [1u8, 3, 9][rng.random_range(0..3)];
            mim.set(d, s.clone(), RelationStrength::try_from(v).unwrap());
        }
    }
    let mut interactions = InteractionMatrix::new();
    for _ in 0..2 * n {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            let w = f64::from(rng.random_range(1..=4u8)) * 0.5;
            interactions.insert(&solutions[a], &solutions[b], w).unwrap();
        }
    }
    ClusterInstance {
        solutions,
        mim,
        interactions,
    }
}

/// Connected assembly graph with a sparse acyclic precedence relation.
pub fn assembly_graph(n: usize, seed: u64) -> AdcdGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = |i: usize| format!("M{i:02}");
    let mut edges = Vec::new();
    let mut link = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        let d = Direction::ALL[rng.random_range(0..6)];
        edges.push(Connection::new(ModuleSet::new(name(a), name(b)).unwrap(), d, FastenerKind::SnapFit, Access::Clear));
    };
    for k in 1..n {
        let parent = rng.random_range(0..k);
        link(parent, k, &mut rng);
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            link(a, b, &mut rng);
        }
    }
    let precedence = (0..n / 3)
        .map(|_| {
            let a = rng.random_range(0..n - 1);
            (name(a), name(rng.random_range(a + 1..n)))
        })
        .collect();
    AdcdGraph {
        nodes: (0..n).map(name).collect(),
        edges,
        precedence,
    }
}

/// Fully scored module sets over the default criteria.
pub fn msasm_records(sets: usize, seed: u64) -> (Vec<MsasmRecord>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let criteria: Vec<String> = default_msasm_criteria().into_iter().map(|c| c.id).collect();
    let mut records = Vec::with_capacity(sets * criteria.len());
    for i in 0..sets {
        let set = ModuleSet::new(format!("M{i:04}"), format!("M{:04}", i + 1)).unwrap();
        for c in &criteria {
            let proposals: Vec<i64> = (0..3).map(|_| rng.random_range(1..=5)).collect();
            records.push(record_score(set.clone(), c.clone(), &proposals).unwrap());
        }
    }
    (records, criteria)
}
