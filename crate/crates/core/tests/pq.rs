use std::collections::{BTreeSet, VecDeque};

use num_rational::BigRational;
use orbitile::graph::{build_orbit_graph, pattern_radius, reduce, EdgeKind, GraphPatch};
use orbitile::orbit::{seed_orbit, SeedSpec};
use orbitile::pq::{
    check_membership, collect_pattern_family, compare_with_window, cycle_data, decorate, dy, pq_substitution,
    reconstruct_rows, surface_patch, Decorated, FamilySpec, PqError, SurfaceContext, SurfacePatch, Verdict,
};
use orbitile::substitution::SubstitutionSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn unit2() -> SubstitutionSystem {
    SubstitutionSystem::from_chars("unit2", &[('0', "00")]).unwrap()
}

#[test]
fn decorated_images() {
    let dec = decorate(&pq_substitution(5, 5).unwrap()).unwrap();
    let names: Vec<&str> = dec.sys.letters().iter().map(String::as_str).collect();
    assert_eq!(names, ["Y1", "W2", "W3", "Y4", "W5", "W6", "Y7", "W8"]);
    let y3 = dec.sys.letter_index("W3").unwrap();
    let y = dec.sys.letter_index("Y4").unwrap();
    // images ignore the position
    assert_eq!(dec.sys.format_word(dec.sys.image(y)), "Y1 W2 W3 Y4 W5");
    assert_eq!(dec.sys.image(y), dec.sys.image(dec.sys.letter_index("Y1").unwrap()));
    assert_eq!(dec.sys.image(y3).len(), 8);
    assert_eq!(dec.width(), 8);
    assert!(dec.sys.is_primitive());
}

/// Decorated base window, its reduced patch and the interior vertices at
/// pattern radius.
fn decorated_patch(p: usize, q: usize, rows: usize, max: usize) -> (Decorated, GraphPatch, Vec<usize>) {
    let dec = decorate(&pq_substitution(p, q).unwrap()).unwrap();
    let (w, _) = seed_orbit(&dec.sys, &SeedSpec { rows, top_width: 5, max_width: max, occurrence: 0 }).unwrap();
    let patch = build_orbit_graph(&w, dec.sys.letters());
    let reduced = reduce(&patch, |l| dec.base_of(l) == dec.w);
    let interior = (0..reduced.vertices.len()).filter(|&v| reduced.is_interior(v, pattern_radius(p))).collect();
    (dec, reduced, interior)
}

#[test]
fn one_horizontal_path_per_cycle() {
    for (p, q, rows, max) in [(5, 5, 7, 1500), (5, 6, 7, 2500)] {
        let (dec, patch, _) = decorated_patch(p, q, rows, max);
        let labels: Vec<usize> = patch.vertices.iter().map(|v| v.label).collect();
        let data = cycle_data(&dec, &patch.neighbours(), &|v| labels[v], p);
        let mut checked = 0;
        let mut ambiguous = 0;
        for (c, cycle) in data.cycles.iter().enumerate() {
            if cycle.iter().all(|&v| patch.is_interior(v, 1)) {
                assert!(data.path_counts[c] >= 1, "{p},{q} cycle {cycle:?}");
                if data.path_counts[c] > 1 {
                    ambiguous += 1;
                }
                assert!(data.paths[c].is_some(), "{p},{q} cycle {cycle:?} left undecided");
                checked += 1;
                // a (p-1)-path is produced by the remaining vertex
                let h = data.paths[c].as_ref().unwrap();
                if h.vertices.len() == p - 1 {
                    let other = cycle.iter().find(|v| !h.vertices.contains(v)).unwrap();
                    assert!(h.vertices.iter().all(|&v| patch.parent[v] == Some(*other)));
                }
            }
        }
        assert!(checked > 20);
        // labels alone read both rows of a mirror-symmetric cycle
        assert!(ambiguous > 0, "{p},{q}");
        // p-cycles of the graph are exactly the interior faces
        let faces: BTreeSet<Vec<usize>> = patch
            .faces
            .iter()
            .filter(|f| f.iter().all(|&v| patch.is_interior(v, 1)))
            .map(|f| {
                let mut s = f.clone();
                s.sort();
                s
            })
            .collect();
        let cycles: BTreeSet<Vec<usize>> = data
            .cycles
            .iter()
            .filter(|f| f.iter().all(|&v| patch.is_interior(v, 1)))
            .map(|f| {
                let mut s = f.clone();
                s.sort();
                s
            })
            .collect();
        assert_eq!(faces, cycles);
    }
}

#[test]
fn dy_examples() {
    let (dec, patch, _) = decorated_patch(5, 5, 7, 1500);
    let interior: Vec<usize> = (0..patch.vertices.len()).filter(|&v| patch.is_interior(v, 1)).collect();
    let labels: Vec<usize> = patch.vertices.iter().map(|v| v.label).collect();
    let data = cycle_data(&dec, &patch.neighbours(), &|v| labels[v], 5);
    let mut rows = 0;
    let mut verticals = 0;
    for e in &patch.edges {
        if !(interior.contains(&e.a) && interior.contains(&e.b)) {
            continue;
        }
        let d = dy(&data, e.a, e.b).unwrap();
        assert_eq!(dy(&data, e.b, e.a).unwrap(), -d);
        match e.kind {
            EdgeKind::Horizontal => {
                assert_eq!(d, 0);
                rows += 1;
            }
            EdgeKind::Vertical => {
                // child to parent goes up, so parent to child is +1
                assert_eq!(dy(&data, e.b, e.a).unwrap(), 1);
                verticals += 1;
            }
        }
    }
    assert!(rows > 0 && verticals > 0);
}

#[test]
fn reconstruction_matches_the_window() {
    for (p, q, rows, max) in [(5, 5, 7, 1500), (5, 6, 7, 2500)] {
        let (dec, patch, interior) = decorated_patch(p, q, rows, max);
        let labels: Vec<usize> = patch.vertices.iter().map(|v| v.label).collect();
        let base = interior[interior.len() / 2];
        let (rec, _) = reconstruct_rows(&dec, &patch.neighbours(), &|v| labels[v], p, base).unwrap();
        assert_eq!(rec.y[&base], 0);
        let report = compare_with_window(&patch, &rec, &interior);
        assert!(report.passed(), "{p},{q}: {report:?}");
        assert_eq!(report.checked, interior.len());
    }
}

#[test]
fn constant_relabeling_breaks_reconstruction() {
    let (dec, patch, interior) = decorated_patch(5, 5, 7, 1500);
    let y1 = dec.sys.letter_index("Y1").unwrap();
    let base = interior[0];
    let result = reconstruct_rows(&dec, &patch.neighbours(), &|_| y1, 5, base);
    match result {
        Err(PqError::HorizontalPaths { .. } | PqError::InconsistentCycle(_) | PqError::BoundaryEdge(..)) => {}
        other => panic!("constant labels reconstructed: {:?}", other.map(|r| r.0.y.len())),
    }
}

fn context() -> SurfaceContext {
    SurfaceContext::new(5, 5, &unit2()).unwrap()
}

fn small_spec() -> FamilySpec {
    FamilySpec { offsets: vec![("1/10".into(), "1/20".into())], rows: 8, top_width: 3, max_width: 3000 }
}

fn distances(patch: &GraphPatch, from: usize) -> Vec<usize> {
    let adj = patch.neighbours();
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

#[test]
fn family_self_check_and_mutations() {
    let ctx = context();
    let spec = small_spec();
    let family = collect_pattern_family(&ctx, &spec).unwrap();
    assert!(!family.patterns.is_empty());
    assert!(!family.complete);
    assert_eq!(family, collect_pattern_family(&ctx, &spec).unwrap());

    let (sp, _) = surface_patch(&ctx, &q(1, 10), &q(1, 20), spec.rows, spec.top_width, spec.max_width).unwrap();
    let report = check_membership(&ctx, &sp, &family);
    assert!(!report.vertices.is_empty());
    assert_eq!(report.count(Verdict::Pass), report.vertices.len());

    // mutation sites: checked vertices, whose neighbourhoods are complete
    let candidates: Vec<usize> = report.vertices.iter().map(|r| r.vertex).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let v = candidates[rng.gen_range(0..candidates.len())];
        let mut mutated = sp.patch.clone();
        let old = mutated.vertices[v].label;
        let mut new = old;
        while new == old {
            new = rng.gen_range(0..ctx.ov.len());
        }
        mutated.vertices[v].label = new;
        let msp = SurfacePatch::new(&ctx, mutated);
        let report = check_membership(&ctx, &msp, &family);
        let dist = distances(&msp.patch, v);
        let near_fail = report.vertices.iter().any(|r| r.verdict == Verdict::Fail && dist[r.vertex] <= ctx.p);
        assert!(near_fail, "mutation at {v} not detected");
    }
}

#[test]
fn fresh_offsets_are_pass_or_unknown() {
    let ctx = context();
    let family = collect_pattern_family(&ctx, &small_spec()).unwrap();
    let (sp, _) = surface_patch(&ctx, &q(3, 7), &q(2, 5), 8, 3, 3000).unwrap();
    let report = check_membership(&ctx, &sp, &family);
    assert_eq!(report.count(Verdict::Fail), 0);
    assert!(report.count(Verdict::Pass) + report.count(Verdict::Unknown) == report.vertices.len());
}
