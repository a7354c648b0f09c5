use std::collections::BTreeSet;

use mfdx_core::*;
use proptest::prelude::*;

fn ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("S{i}")).collect()
}

fn strength(v: u8) -> RelationStrength {
    RelationStrength::try_from(v).unwrap()
}

/// Six-solution instance whose optima were computed by a separate
/// exhaustive enumeration and frozen here.
fn frozen_instance() -> (Vec<String>, MimMatrix, InteractionMatrix) {
    let d = ModuleDriver::ALL;
    let mut mim = MimMatrix::new();
    for (driver, s, v) in [
        (0, "S2", 9),
        (0, "S3", 1),
        (0, "S4", 3),
        (0, "S5", 1),
        (0, "S6", 1),
        (1, "S1", 9),
        (1, "S5", 9),
        (2, "S1", 3),
        (2, "S3", 9),
        (3, "S6", 9),
        (4, "S2", 1),
        (4, "S4", 3),
    ] {
        mim.set(d[driver], s.to_string(), strength(v));
    }
    let mut inter = InteractionMatrix::new();
    for (a, b, w) in [
        ("S1", "S5", 2.0),
        ("S1", "S6", 0.5),
        ("S2", "S3", 0.5),
        ("S2", "S4", 0.5),
        ("S3", "S6", 2.0),
        ("S4", "S6", 2.0),
    ] {
        inter.insert(a, b, w).unwrap();
    }
    (ids(6), mim, inter)
}

#[test]
fn frozen_six_solution_optimum() {
    let (sols, mim, inter) = frozen_instance();
    let w = ObjectiveWeights::new(0.5).with_pair_cost(0.75);

    let expected = Partition::from_lists(&[&["S1", "S5"], &["S2"], &["S3", "S4", "S6"]]);
    let best = brute_force_partition(&sols, &mim, &inter, w, None).unwrap();
    assert_eq!(best, expected);
    let j = clustering_objective(&best, &sols, &mim, &inter, w).unwrap();
    assert!((j - 3.3364197530864192).abs() < 1e-12, "{j}");
    let proposal = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks: None, seed: 7 }).unwrap();
    assert_eq!(proposal.partition, expected);
    assert_eq!(proposal.objective, j);

    let expected2 = Partition::from_lists(&[&["S1", "S5"], &["S2", "S3", "S4", "S6"]]);
    let best2 = brute_force_partition(&sols, &mim, &inter, w, Some(2)).unwrap();
    assert_eq!(best2, expected2);
    let j2 = clustering_objective(&best2, &sols, &mim, &inter, w).unwrap();
    assert!((j2 - 3.1790123456790127).abs() < 1e-12, "{j2}");
    let proposal2 = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks: Some(2), seed: 7 }).unwrap();
    assert_eq!(proposal2.objective, j2);

    let singletons = clustering_objective(&Partition::singletons(&sols), &sols, &mim, &inter, w).unwrap();
    assert_eq!(singletons, -3.75);
}

#[test]
fn proposals_are_deterministic_per_seed() {
    let (sols, mim, inter) = frozen_instance();
    let w = ObjectiveWeights::new(0.5).with_pair_cost(0.75);
    let a = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks: None, seed: 42 }).unwrap();
    let b = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks: None, seed: 42 }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn larger_instances_beat_singletons() {
    // 14 solutions is beyond the exhaustive sweep; annealing alone must
    // still find the obvious pairs.
    let sols = ids(14);
    let mut mim = MimMatrix::new();
    for (i, s) in sols.iter().enumerate() {
        mim.set(ModuleDriver::ALL[i / 2 % 12], s.clone(), strength(9));
    }
    let inter = InteractionMatrix::new();
    let w = ObjectiveWeights::new(0.5).with_pair_cost(0.5);
    let p = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks: None, seed: 3 }).unwrap();
    assert_eq!(p.partition.len(), 7);
    assert_eq!(p.objective, 7.0 * 0.5);
}

fn instance(n: usize, cells: &[(usize, usize, u8)], pairs: &[(usize, usize, u8)]) -> (Vec<String>, MimMatrix, InteractionMatrix) {
    let sols = ids(n);
    let mut mim = MimMatrix::new();
    for &(d, s, v) in cells {
        if s < n && v > 0 {
            mim.set(ModuleDriver::ALL[d], sols[s].clone(), strength(v));
        }
    }
    let mut inter = InteractionMatrix::new();
    for &(a, b, w) in pairs {
        if a < n && b < n && a != b {
            inter.insert(&sols[a], &sols[b], f64::from(w) * 0.5).unwrap();
        }
    }
    (sols, mim, inter)
}

fn cell() -> impl Strategy<Value = (usize, usize, u8)> {
    (0usize..12, 0usize..8, prop::sample::select(vec![0u8, 1, 3, 9]))
}

fn pair() -> impl Strategy<Value = (usize, usize, u8)> {
    (0usize..8, 0usize..8, 0u8..=6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn proposal_matches_brute_force(
        n in 1usize..=8,
        cells in prop::collection::vec(cell(), 0..24),
        pairs in prop::collection::vec(pair(), 0..16),
        lambda in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0, 2.0]),
        mu in prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]),
        max_blocks in prop::option::of(1usize..=4),
        seed in any::<u64>(),
    ) {
        let (sols, mim, inter) = instance(n, &cells, &pairs);
        let w = ObjectiveWeights::new(lambda).with_pair_cost(mu);
        let best = brute_force_partition(&sols, &mim, &inter, w, max_blocks).unwrap();
        let oracle = clustering_objective(&best, &sols, &mim, &inter, w).unwrap();
        let p = propose_modules(&sols, &mim, &inter, w, SearchParams { max_blocks, seed }).unwrap();
        prop_assert_eq!(p.objective, oracle);
        prop_assert_eq!(clustering_objective(&p.partition, &sols, &mim, &inter, w).unwrap(), p.objective);
        if let Some(k) = max_blocks {
            prop_assert!(p.partition.len() <= k);
        }
        let covered: BTreeSet<&String> = p.partition.blocks().iter().flatten().collect();
        prop_assert_eq!(covered.len(), n);
    }

    /// Raising lambda never increases the cross-block interaction weight of
    /// the exhaustive optimum.
    #[test]
    fn lambda_monotone_cross_weight(
        n in 2usize..=7,
        cells in prop::collection::vec(cell(), 0..16),
        pairs in prop::collection::vec((0usize..7, 0usize..7, 0u8..=2), 0..14),
        lo in 0.0f64..2.0,
        step in 0.0f64..2.0,
    ) {
        let pairs: Vec<_> = pairs.into_iter().map(|(a, b, w)| (a, b, w.min(2))).collect();
        let (sols, mim, inter) = instance(n, &cells, &pairs);
        let cross = |lambda: f64| {
            let w = ObjectiveWeights::new(lambda).with_pair_cost(0.5);
            let p = brute_force_partition(&sols, &mim, &inter, w, None).unwrap();
            let block_of = |s: &str| p.blocks().iter().position(|b| b.contains(s)).unwrap();
            inter.iter().filter(|(a, b, _)| block_of(a) != block_of(b)).map(|(_, _, w)| w).sum::<f64>()
        };
        prop_assert!(cross(lo + step) <= cross(lo) + 1e-9);
    }

    /// Relabelling solutions permutes the optimum without changing its value.
    #[test]
    fn objective_is_label_invariant(
        n in 1usize..=6,
        cells in prop::collection::vec(cell(), 0..16),
        pairs in prop::collection::vec(pair(), 0..12),
    ) {
        let (sols, mim, inter) = instance(n, &cells, &pairs);
        let w = ObjectiveWeights::new(0.5).with_pair_cost(0.25);
        let rename = |s: &str| format!("Z{}", 100 - s[1..].parse::<usize>().unwrap());
        let renamed: Vec<String> = sols.iter().map(|s| rename(s)).collect();
        let mut mim2 = MimMatrix::new();
        for (d, s, v) in mim.iter() {
            mim2.set(d, rename(s), v);
        }
        let mut inter2 = InteractionMatrix::new();
        for (a, b, x) in inter.iter() {
            inter2.insert(&rename(a), &rename(b), x).unwrap();
        }
        let j1 = clustering_objective(&brute_force_partition(&sols, &mim, &inter, w, None).unwrap(), &sols, &mim, &inter, w).unwrap();
        let j2 = clustering_objective(&brute_force_partition(&renamed, &mim2, &inter2, w, None).unwrap(), &renamed, &mim2, &inter2, w).unwrap();
        prop_assert!((j1 - j2).abs() < 1e-9);
    }
}
