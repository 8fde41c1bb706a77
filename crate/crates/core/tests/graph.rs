use std::collections::BTreeSet;

use orbitile::graph::{
    build_orbit_graph, candidate_shifts, canonical_form, check_pq, extract_pattern, extract_pattern_with_ids,
    galleries, galleries_at_triangle, pattern_radius, patch_periods, reduce, EdgeKind, GraphError, GraphPatch,
    Pattern, Shift,
};
use orbitile::orbit::{seed_orbit, OrbitWindow, SeedSpec, WindowRow};
use orbitile::pq::{decorate, pq_substitution};
use orbitile::substitution::SubstitutionSystem;
use petgraph::algo::is_isomorphic_matching;
use petgraph::graph::UnGraph;
use proptest::prelude::*;

fn sys(name: &str, rules: &[(char, &str)]) -> SubstitutionSystem {
    SubstitutionSystem::from_chars(name, rules).unwrap()
}

fn fib() -> SubstitutionSystem {
    sys("fib", &[('a', "ab"), ('b', "a")])
}

fn doubling() -> SubstitutionSystem {
    sys("two", &[('0', "00")])
}

fn patch_of(s: &SubstitutionSystem, spec: SeedSpec) -> (OrbitWindow, GraphPatch) {
    let (w, _) = seed_orbit(s, &spec).unwrap();
    let p = build_orbit_graph(&w, s.letters());
    (w, p)
}

fn spec(rows: usize, top: usize, max: usize) -> SeedSpec {
    SeedSpec { rows, top_width: top, max_width: max, occurrence: 0 }
}

#[test]
fn fibonacci_triangles_match_hand_count() {
    let s = fib();
    let w = OrbitWindow {
        i_lo: 0,
        rows: vec![
            WindowRow::new(0, vec![0, 1, 0], vec![true, true, true]),
            WindowRow::new(0, vec![0, 1, 0, 0, 1], vec![false; 5]),
        ],
        parents: vec![vec![0, 0, 1, 2, 2]],
    };
    let patch = build_orbit_graph(&w, s.letters());
    let triangles = patch.faces.iter().filter(|f| f.len() == 3).count();
    let quads = patch.faces.iter().filter(|f| f.len() == 4).count();
    // two parents labeled a, each with two children
    assert_eq!(triangles, 2);
    assert_eq!(quads, 2);
}

#[test]
fn faces_are_triangles_or_quads_and_tally() {
    for s in [fib(), doubling(), sys("silver", &[('A', "AB"), ('B', "AAB")])] {
        let (w, patch) = patch_of(&s, spec(5, 7, 60));
        for f in &patch.faces {
            assert!(f.len() == 3 || f.len() == 4);
        }
        // per strip: faces = vertical edges - 1
        let strips = w.parents.iter().filter(|p| !p.is_empty()).count();
        assert_eq!(patch.faces.len(), patch.edge_count(EdgeKind::Vertical) - strips);
        // triangle iff two consecutive children share a parent
        let shared: usize = w.parents.iter().map(|p| p.windows(2).filter(|x| x[0] == x[1]).count()).sum();
        assert_eq!(patch.faces.iter().filter(|f| f.len() == 3).count(), shared);
    }
}

#[test]
fn interior_triangles_meet_one_gallery() {
    for s in [fib(), doubling()] {
        let (_, patch) = patch_of(&s, spec(6, 5, 80));
        let all = galleries(&patch);
        assert!(!all.is_empty());
        let mut checked = 0;
        for (t, face) in patch.faces.iter().enumerate() {
            if face.len() == 3 && face.iter().all(|&v| patch.is_interior(v, 2)) {
                assert_eq!(galleries_at_triangle(&patch, &all, t), 1);
                checked += 1;
            }
        }
        assert!(checked > 0);
        // every face belongs to at most one gallery
        let mut seen = BTreeSet::new();
        for g in &all {
            for &f in &g.faces {
                assert!(seen.insert(f));
                assert_eq!(patch.faces[f].len(), 4);
            }
        }
    }
}

#[test]
fn doubling_alternates_triangles_and_quads() {
    let (_, patch) = patch_of(&doubling(), spec(3, 3, 40));
    let tri = patch.faces.iter().filter(|f| f.len() == 3).count();
    let quad = patch.faces.iter().filter(|f| f.len() == 4).count();
    assert!(tri > 0 && quad > 0);
    assert!(tri.abs_diff(quad) <= 2);
}

#[test]
fn reduce_examples() {
    let (_, patch) = patch_of(&fib(), spec(4, 5, 40));
    let same = reduce(&patch, |_| false);
    assert_eq!(same.edges, patch.edges);
    // a window with a single W child
    let w = OrbitWindow {
        i_lo: 0,
        rows: vec![
            WindowRow::new(0, vec![0], vec![true]),
            WindowRow::new(0, vec![0, 1], vec![false, false]),
        ],
        parents: vec![vec![0, 0]],
    };
    let names = vec!["Y".to_string(), "W".to_string()];
    let patch = build_orbit_graph(&w, &names);
    let reduced = reduce(&patch, |l| l == 1);
    assert_eq!(patch.edge_count(EdgeKind::Vertical) - reduced.edge_count(EdgeKind::Vertical), 1);
}

fn reduced_pq_patch(p: usize, q: usize, rows: usize, max: usize) -> GraphPatch {
    let base = pq_substitution(p, q).unwrap();
    let (_, patch) = patch_of(&base, spec(rows, 5, max));
    let w = base.letter_index("W").unwrap();
    reduce(&patch, |l| l == w)
}

#[test]
fn pq_patches_pass_check_pq() {
    for (p, q, rows, max) in [(5, 5, 6, 600), (5, 6, 6, 800), (8, 8, 6, 16000)] {
        let reduced = reduced_pq_patch(p, q, rows, max);
        let report = check_pq(&reduced, p, q);
        assert!(report.passed(), "{p},{q}: {report:?}");
        assert!(report.interior_faces > 0, "{p},{q}: {report:?}");
        let base = pq_substitution(p, q).unwrap();
        let (_, unreduced) = patch_of(&base, spec(rows, 5, max));
        assert!(!check_pq(&unreduced, p, q).passed());
    }
}

#[test]
fn periods() {
    let (_, patch) = patch_of(&doubling(), spec(6, 5, 60));
    let cands = candidate_shifts(&patch, 3);
    let found = patch_periods(&patch, &cands);
    assert!(found.contains(&Shift { rows: 0, cols: 0 }));
    assert!(found.iter().any(|s| s.rows > 0));

    let (_, patch) = patch_of(&fib(), spec(6, 9, 80));
    let found = patch_periods(&patch, &candidate_shifts(&patch, 3));
    assert!(found.contains(&Shift { rows: 0, cols: 0 }));
}

#[test]
fn pentagon_patterns() {
    let reduced = reduced_pq_patch(5, 5, 7, 1500);
    let radius = pattern_radius(5);
    let interior: Vec<usize> = (0..reduced.vertices.len()).filter(|&v| reduced.is_interior(v, radius)).collect();
    assert!(!interior.is_empty());
    let v = interior[interior.len() / 2];
    let (pattern, _) = extract_pattern_with_ids(&reduced, v, radius).unwrap();
    assert_eq!(reduced.faces_at(v).len(), 5);
    assert_eq!(pattern.labels.len(), 16);
    assert!(pattern.is_connected());

    // row neighbours share two pentagons
    let u = interior
        .iter()
        .copied()
        .find(|&u| reduced.edges.iter().any(|e| e.kind == EdgeKind::Horizontal && e.a == u && interior.contains(&e.b)))
        .unwrap();
    let w = reduced.edges.iter().find(|e| e.kind == EdgeKind::Horizontal && e.a == u).unwrap().b;
    let fu: BTreeSet<usize> = reduced.faces_at(u).into_iter().collect();
    let fw: BTreeSet<usize> = reduced.faces_at(w).into_iter().collect();
    assert_eq!(fu.intersection(&fw).count(), 2);

    let edge = (0..reduced.vertices.len()).find(|&v| !reduced.is_interior(v, 1)).unwrap();
    assert!(matches!(extract_pattern(&reduced, edge, radius), Err(GraphError::BoundaryVertex { .. })));
}

fn to_petgraph(p: &Pattern) -> UnGraph<(String, bool), ()> {
    let mut g = UnGraph::new_undirected();
    let nodes: Vec<_> = (0..p.labels.len()).map(|v| g.add_node((p.labels[v].clone(), v == p.basepoint))).collect();
    for &(a, b) in &p.edges {
        g.add_edge(nodes[a], nodes[b], ());
    }
    g
}

fn isomorphic(a: &Pattern, b: &Pattern) -> bool {
    is_isomorphic_matching(&to_petgraph(a), &to_petgraph(b), |x, y| x == y, |_, _| true)
}

fn permuted(p: &Pattern, perm: &[usize]) -> Pattern {
    let mut labels = vec![String::new(); p.labels.len()];
    for (v, &k) in perm.iter().enumerate() {
        labels[k] = p.labels[v].clone();
    }
    Pattern { labels, edges: p.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect(), basepoint: perm[p.basepoint] }
}

fn decorated_patterns() -> Vec<Pattern> {
    let dec = decorate(&pq_substitution(5, 5).unwrap()).unwrap();
    let (w, _) = seed_orbit(&dec.sys, &spec(7, 5, 1500)).unwrap();
    let patch = build_orbit_graph(&w, dec.sys.letters());
    let reduced = reduce(&patch, |l| dec.base_of(l) == dec.w);
    let radius = pattern_radius(5);
    (0..reduced.vertices.len())
        .filter(|&v| reduced.is_interior(v, radius))
        .take(60)
        .map(|v| extract_pattern(&reduced, v, radius).unwrap())
        .collect()
}

#[test]
fn canonical_form_agrees_with_isomorphism_oracle() {
    let pats = decorated_patterns();
    for a in &pats {
        for b in &pats {
            assert_eq!(canonical_form(a) == canonical_form(b), isomorphic(a, b));
        }
    }
    // symmetric labelings stress the search
    let plain: Vec<Pattern> = pats.iter().take(3).map(|p| p.relabel(|_| "x".into())).collect();
    for a in &plain {
        for b in &plain {
            assert_eq!(canonical_form(a) == canonical_form(b), isomorphic(a, b));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_is_invariant_under_relabeling(seed in 0usize..60, shuffle in prop::collection::vec(0usize..1000, 16)) {
        let pats = decorated_patterns();
        let p = &pats[seed % pats.len()];
        let mut perm: Vec<usize> = (0..p.labels.len()).collect();
        let n = perm.len();
        for (k, s) in shuffle.iter().enumerate().take(n) {
            perm.swap(k % n, s % n);
        }
        let q = permuted(p, &perm);
        prop_assert!(isomorphic(p, &q));
        prop_assert_eq!(canonical_form(p), canonical_form(&q));
    }

    #[test]
    fn reduce_keeps_vertices_and_row_edges(rows in 3usize..6, top in 3usize..9, mask in 0u32..4) {
        let (_, patch) = patch_of(&fib(), spec(rows, top, 60));
        let reduced = reduce(&patch, |l| (mask >> l) & 1 == 1);
        prop_assert_eq!(reduced.vertices.len(), patch.vertices.len());
        prop_assert_eq!(reduced.edge_count(EdgeKind::Horizontal), patch.edge_count(EdgeKind::Horizontal));
    }
}
