use std::collections::{BTreeMap, BTreeSet};

use mfdx_core::*;
use proptest::prelude::*;

/// Minimum reorientations by enumerating every precedence-respecting order
/// and, for each order, growing maximal runs that share a direction.
fn oracle(graph: &AdcdGraph) -> usize {
    let nodes: Vec<&str> = graph.nodes.iter().map(String::as_str).collect();
    let mut dirs: BTreeMap<(&str, &str), BTreeSet<Direction>> = BTreeMap::new();
    for c in &graph.edges {
        dirs.entry((c.set.a(), c.set.b())).or_default().insert(c.direction);
        dirs.entry((c.set.b(), c.set.a())).or_default().insert(c.direction);
    }
    let allowed = |m: &str, placed: &[&str]| -> BTreeSet<Direction> {
        let toward: BTreeSet<Direction> =
            placed.iter().filter_map(|p| dirs.get(&(m, *p))).flatten().copied().collect();
        if toward.is_empty() {
            dirs.iter().filter(|((x, _), _)| *x == m).flat_map(|(_, d)| d.iter().copied()).collect()
        } else {
            toward
        }
    };
    let mut best = usize::MAX;
    let mut order: Vec<&str> = Vec::new();
    fn walk<'a>(
        nodes: &[&'a str],
        prec: &[(String, String)],
        order: &mut Vec<&'a str>,
        allowed: &dyn Fn(&str, &[&str]) -> BTreeSet<Direction>,
        best: &mut usize,
    ) {
        if order.len() == nodes.len() {
            let mut runs = 0;
            let mut current: BTreeSet<Direction> = BTreeSet::new();
            for k in 0..order.len() {
                let a = allowed(order[k], &order[..k]);
                let meet: BTreeSet<Direction> = current.intersection(&a).copied().collect();
                if meet.is_empty() {
                    runs += 1;
                    current = a;
                } else {
                    current = meet;
                }
            }
            *best = (*best).min(runs - 1);
            return;
        }
        for &m in nodes {
            let ready = !order.contains(&m)
                && prec.iter().filter(|(_, b)| b == m).all(|(a, _)| order.contains(&a.as_str()));
            if ready {
                order.push(m);
                walk(nodes, prec, order, allowed, best);
                order.pop();
            }
        }
    }
    walk(&nodes, &graph.precedence, &mut order, &allowed, &mut best);
    best
}

/// Connected random graph: a random spanning tree plus extra edges, and a
/// precedence relation drawn from a hidden order so it stays acyclic.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = AdcdGraph> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(any::<prop::sample::Index>(), n - 1),
                prop::collection::vec((0..n, 0..n), 0..n),
                prop::collection::vec(0usize..6, 2 * n),
                prop::collection::vec((0..n, 0..n), 0..n),
            )
        })
        .prop_map(|(n, parents, extra, dirs, prec)| {
            let name = |i: usize| format!("M{i}");
            let mut pairs: Vec<(usize, usize)> = parents.iter().enumerate().map(|(k, ix)| (ix.index(k + 1), k + 1)).collect();
            pairs.extend(extra.into_iter().filter(|(a, b)| a != b));
            let edges = pairs
                .iter()
                .zip(dirs.iter().cycle())
                .map(|(&(a, b), &d)| {
                    Connection::new(ModuleSet::new(name(a), name(b)).unwrap(), Direction::ALL[d], FastenerKind::SnapFit, Access::Clear)
                })
                .collect();
            let precedence = prec
                .into_iter()
                .filter(|(a, b)| a < b)
                .map(|(a, b)| (name(a), name(b)))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            AdcdGraph {
                nodes: (0..n).map(name).collect(),
                edges,
                precedence,
            }
        })
}

fn dfd(graph: &AdcdGraph, reusable: &BTreeSet<String>) -> Vec<Issue> {
    detect_dfd_issues(graph, reusable, 3)
}

fn keys(issues: &[Issue]) -> BTreeSet<(IssueKind, IssueLocation)> {
    issues.iter().filter(|i| i.kind != IssueKind::FastenerDiversity).map(|i| (i.kind, i.location.clone())).collect()
}

fn fastener() -> impl Strategy<Value = FastenerKind> {
    prop_oneof![
        Just(FastenerKind::SnapFit),
        Just(FastenerKind::Screw),
        Just(FastenerKind::Adhesive),
        Just(FastenerKind::Clip),
        Just(FastenerKind::Other("rivet".into())),
    ]
}

fn access() -> impl Strategy<Value = Access> {
    prop_oneof![Just(Access::Clear), Just(Access::PartiallyObstructed), Just(Access::Obstructed)]
}

fn annotated_edges(n: usize) -> impl Strategy<Value = Vec<Connection>> {
    prop::collection::vec((0..n, 0..n, 0usize..6, fastener(), access()), 0..10).prop_map(|raw| {
        raw.into_iter()
            .filter(|(a, b, ..)| a != b)
            .map(|(a, b, d, f, acc)| {
                Connection::new(ModuleSet::new(format!("M{a}"), format!("M{b}")).unwrap(), Direction::ALL[d], f, acc)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sequence_matches_exhaustive_oracle(graph in graph_strategy(7)) {
        let seq = optimal_sequence(&graph).unwrap();
        prop_assert!(seq.exact);
        prop_assert_eq!(seq.reorientations, oracle(&graph));
        prop_assert_eq!(Ok(seq.reorientations), reorientation_count(&seq.steps));
        let pos: BTreeMap<&str, usize> = seq.steps.iter().enumerate().map(|(i, s)| (s.module.as_str(), i)).collect();
        for (a, b) in &graph.precedence {
            prop_assert!(pos[a.as_str()] < pos[b.as_str()]);
        }
    }

    #[test]
    fn adding_a_connection_never_removes_issues(
        edges in annotated_edges(5),
        extra in annotated_edges(5),
        reusable in prop::collection::btree_set((0usize..5).prop_map(|i| format!("M{i}")), 0..3),
    ) {
        let nodes: Vec<String> = (0..5).map(|i| format!("M{i}")).collect();
        let base = AdcdGraph { nodes: nodes.clone(), edges: edges.clone(), precedence: vec![] };
        let mut grown = base.clone();
        grown.edges.extend(extra);
        prop_assert!(keys(&detect_assembly_issues(&base)).is_subset(&keys(&detect_assembly_issues(&grown))));
        prop_assert!(keys(&dfd(&base, &reusable)).is_subset(&keys(&dfd(&grown, &reusable))));
    }

    #[test]
    fn issues_are_label_invariant(edges in annotated_edges(5)) {
        let nodes: Vec<String> = (0..5).map(|i| format!("M{i}")).collect();
        let g = AdcdGraph { nodes, edges, precedence: vec![] };
        let rename = |s: &str| format!("Q{}", 9 - s[1..].parse::<usize>().unwrap());
        let mut h = g.clone();
        h.nodes = g.nodes.iter().map(|n| rename(n)).collect();
        for c in &mut h.edges {
            c.set = ModuleSet::new(rename(c.set.a()), rename(c.set.b())).unwrap();
        }
        let summary = |issues: Vec<Issue>, f: &dyn Fn(&str) -> String| -> BTreeMap<(IssueKind, String), usize> {
            let mut m = BTreeMap::new();
            for i in issues {
                let loc = match &i.location {
                    IssueLocation::Set(s) => {
                        let mut ends = [f(s.a()), f(s.b())];
                        ends.sort();
                        ends.join("-")
                    }
                    IssueLocation::Graph => "graph".into(),
                };
                *m.entry((i.kind, loc)).or_insert(0) += 1;
            }
            m
        };
        let id = |s: &str| s.to_string();
        prop_assert_eq!(
            summary(detect_assembly_issues(&g), &rename),
            summary(detect_assembly_issues(&h), &id)
        );
        prop_assert_eq!(
            summary(dfd(&g, &BTreeSet::new()), &rename),
            summary(dfd(&h, &BTreeSet::new()), &id)
        );
    }
}

#[test]
fn named_issue_rules_fire() {
    let set = |a: &str, b: &str| ModuleSet::new(a, b).unwrap();
    let reusable: BTreeSet<String> = ["M02".to_string()].into();

    let glued = AdcdGraph {
        nodes: vec!["M01".into(), "M02".into()],
        edges: vec![Connection::new(set("M01", "M02"), Direction::NegZ, FastenerKind::Adhesive, Access::Clear)],
        precedence: vec![],
    };
    let issues = detect_dfd_issues(&glued, &reusable, 3);
    assert!(issues
        .iter()
        .any(|i| i.kind == IssueKind::DestructiveConnector && i.severity == IssueSeverity::Critical));

    let mixed = AdcdGraph {
        nodes: vec!["M01".into(), "M02".into()],
        edges: vec![
            Connection::new(set("M01", "M02"), Direction::NegZ, FastenerKind::SnapFit, Access::Clear),
            Connection::new(set("M01", "M02"), Direction::PosX, FastenerKind::Clip, Access::Clear),
        ],
        precedence: vec![],
    };
    assert!(detect_assembly_issues(&mixed).iter().any(|i| i.kind == IssueKind::SimultaneousInsertion));

    let tooled = AdcdGraph {
        nodes: vec!["M01".into(), "M02".into()],
        edges: vec![Connection::new(set("M01", "M02"), Direction::NegZ, FastenerKind::Screw, Access::Obstructed)],
        precedence: vec![],
    };
    assert!(detect_assembly_issues(&tooled).iter().any(|i| i.kind == IssueKind::ToolAccessConflict));
}
