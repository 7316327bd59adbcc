use proptest::prelude::*;

use asim::scenario::{
    compile, compile_source, parse, parse_graph, render, tokenize, DecisionGraph, GraphEdge,
    GraphNode, NodeKind, Verb,
};

const SYNOPSIS: &str = include_str!("fixtures/synopsis.scn");
const OBSERVE: &str = include_str!("fixtures/observe.scn");
const CHOOSE: &str = include_str!("fixtures/choose.scn");

#[test]
fn synopsis_declarations() {
    let ast = parse(&tokenize(SYNOPSIS).unwrap()).unwrap();
    assert_eq!(ast.moves, ["A", "B", "C", "D"]);
    assert_eq!(ast.facilities, ["sight", "sound", "touch"]);
    assert_eq!(ast.objects.len(), 2);
    assert_eq!(ast.degrees_of_freedom, Some(5));
    let colours: Vec<_> = ast.objects.iter().map(|o| o.color.as_deref()).collect();
    assert_eq!(colours, [Some("blue"), Some("red")]);
}

#[test]
fn observation_only_scenario_has_no_output() {
    let ast = parse(&tokenize(OBSERVE).unwrap()).unwrap();
    assert_eq!(ast.objects.len(), 2);
    let g = compile(&ast).unwrap();
    assert_eq!(g.output_node(), None);
    assert!(g
        .nodes
        .iter()
        .any(|n| n.kind == NodeKind::Statement(asim::scenario::Verb::Think)));
}

#[test]
fn decision_scenario_outputs_at_node_three() {
    let g = compile_source(CHOOSE.as_bytes()).unwrap();
    assert_eq!(g.output_node(), Some(3));
    assert!(g.is_connected());
}

#[test]
fn rendering_is_stable() {
    let g = compile_source(OBSERVE.as_bytes()).unwrap();
    assert_eq!(render(&g), render(&g));
    assert_eq!(parse_graph(&render(&g)).unwrap(), g);
}

#[test]
fn unexplicated_term_is_reported() {
    let e = compile_source(b"Scenario:\nME I 'dance'.\n").unwrap_err();
    assert!(e.iter().any(|d| d.message == "unexplicated term: dance"));
    assert!(e.iter().all(|d| d.line >= 1 && d.column >= 1));
}

const VERBS: [Verb; 6] = [
    Verb::Awake,
    Verb::Think,
    Verb::Search,
    Verb::Find,
    Verb::See,
    Verb::Decide,
];

fn label() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 \"\\\\:=_-]{0,12}"
}

/// Random connected graph: node 0 is the entry and every later node gets an
/// edge from some earlier node, plus a few extra edges.
fn graph() -> impl Strategy<Value = DecisionGraph> {
    (1usize..8)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0usize..7, label(), any::<prop::sample::Index>()), n - 1),
                prop::collection::vec((0..n, 0..n), 0..4),
                prop::collection::vec(
                    (prop::option::of(label()), prop::option::of(label())),
                    n + 3,
                ),
                label(),
                any::<bool>(),
            )
        })
        .prop_map(|(kinds, extra, labels, entry_label, with_output)| {
            let n = kinds.len() + 1;
            let mut nodes = vec![GraphNode {
                id: 0,
                kind: NodeKind::Entry,
                label: entry_label,
            }];
            let parents: Vec<u32> = kinds
                .iter()
                .enumerate()
                .map(|(i, k)| k.2.index(i + 1) as u32)
                .collect();
            for (i, (k, l, _)) in kinds.into_iter().enumerate() {
                let kind = match k {
                    6 if with_output => NodeKind::Output,
                    6 => NodeKind::Statement(Verb::Decide),
                    v => NodeKind::Statement(VERBS[v]),
                };
                nodes.push(GraphNode {
                    id: i as u32 + 1,
                    kind,
                    label: l,
                });
            }
            let mut edges: Vec<GraphEdge> = (1..n)
                .map(|to| GraphEdge {
                    from: parents[to - 1],
                    to: to as u32,
                    label: None,
                    weights: None,
                })
                .chain(extra.into_iter().map(|(a, b)| GraphEdge {
                    from: a as u32,
                    to: b as u32,
                    label: None,
                    weights: None,
                }))
                .collect();
            for (e, (l, w)) in edges.iter_mut().zip(labels) {
                e.label = l;
                e.weights = w;
            }
            DecisionGraph { nodes, edges }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rendered_graph_parses_back(g in graph()) {
        prop_assert!(g.validate().is_ok());
        let text = render(&g);
        prop_assert_eq!(parse_graph(&text).unwrap(), g);
    }
}
