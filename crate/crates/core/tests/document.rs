use num_rational::BigRational;
use orbitile::document::{PatchDocument, WindowDocument, WindowKind};
use orbitile::graph::{build_orbit_graph, reduce};
use orbitile::orbit::{overlay_orbit, seed_orbit, OverlayOptions, SeedSpec};
use orbitile::overlay::enumerate_alphabet;
use orbitile::substitution::SubstitutionSystem;
use proptest::prelude::*;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn fib() -> SubstitutionSystem {
    SubstitutionSystem::from_chars("fib", &[('a', "ab"), ('b', "a")]).unwrap()
}

fn overlay_doc(c: BigRational, d: BigRational, rows: usize) -> WindowDocument {
    let a = SubstitutionSystem::from_chars("unit3", &[('0', "000")]).unwrap();
    let b = SubstitutionSystem::from_chars("unit2", &[('0', "00")]).unwrap();
    let ov = enumerate_alphabet(&a, &b).unwrap();
    let options = OverlayOptions { seed_a: SeedSpec { rows, ..SeedSpec::default() }, ..OverlayOptions::default() };
    let orbit = overlay_orbit(&ov, &c, &d, &options).unwrap();
    WindowDocument::overlay(&ov, &orbit, &options)
}

#[test]
fn base_round_trip_is_byte_identical() {
    let sys = fib();
    let spec = SeedSpec { rows: 6, top_width: 9, max_width: 80, occurrence: 0 };
    let (window, seed) = seed_orbit(&sys, &spec).unwrap();
    let doc = WindowDocument::base(&sys, &window, &seed, &spec, "0", "0");
    let text = doc.to_json();
    let back = WindowDocument::from_json(&text).unwrap();
    assert_eq!(back, doc);
    assert_eq!(back.to_json(), text);
    // letters come back as the same indices
    let (sys2, w2) = back.tiling().unwrap();
    assert_eq!(sys2, sys);
    assert_eq!(w2, window);
}

#[test]
fn overlay_document_fields() {
    let doc = overlay_doc(q(1, 10), q(1, 20), 6);
    assert_eq!(doc.kind, WindowKind::Overlay);
    assert_eq!(doc.systems.len(), 2);
    assert_eq!(doc.geometry.len(), doc.rows.len());
    assert!(doc.metadata.row_shift.iter().all(|&s| s == 0));
    for (g, row) in doc.geometry.iter().zip(&doc.rows) {
        assert_eq!(g.i, row.i);
        assert_eq!(g.nabla.len(), g.u.len());
        let first = row.j_lo - g.j_lo;
        assert!(first >= 0 && first as usize + row.letters.len() < g.u.len());
        // fifty significant digits
        let digits = g.u[1].chars().filter(char::is_ascii_digit).collect::<String>();
        assert!(digits.trim_start_matches('0').len() >= 50, "{}", g.u[1]);
    }
    for row in &doc.rows {
        assert!(row.tiles.as_ref().unwrap().iter().all(|t| t == "0"));
        assert!(row.tile_origin.is_some());
    }
    let text = doc.to_json();
    assert_eq!(WindowDocument::from_json(&text).unwrap().to_json(), text);
}

#[test]
fn interned_window_keeps_the_structure() {
    let doc = overlay_doc(q(2, 7), q(1, 3), 5);
    let (window, names) = doc.interned();
    assert_eq!(window.height(), doc.rows.len());
    for (row, entry) in window.rows.iter().zip(&doc.rows) {
        let spelled: Vec<&String> = row.letters.iter().map(|&l| &names[l]).collect();
        assert_eq!(spelled, entry.letters.iter().collect::<Vec<_>>());
    }
}

#[test]
fn patch_round_trip() {
    let sys = fib();
    let spec = SeedSpec { rows: 5, top_width: 7, max_width: 60, occurrence: 0 };
    let (window, seed) = seed_orbit(&sys, &spec).unwrap();
    let doc = WindowDocument::base(&sys, &window, &seed, &spec, "0", "0");
    let (w, names) = doc.interned();
    let patch = reduce(&build_orbit_graph(&w, &names), |_| false);
    let pd = PatchDocument { systems: doc.systems.clone(), patch, tiles: None, check: None };
    let text = pd.to_json();
    assert_eq!(PatchDocument::from_json(&text).unwrap().to_json(), text);
}

#[test]
fn malformed_documents_are_rejected() {
    let sys = fib();
    let spec = SeedSpec { rows: 4, top_width: 5, max_width: 40, occurrence: 0 };
    let (window, seed) = seed_orbit(&sys, &spec).unwrap();
    let mut doc = WindowDocument::base(&sys, &window, &seed, &spec, "0", "0");
    doc.parents[0].pop();
    assert!(WindowDocument::from_json(&doc.to_json()).is_err());
    assert!(WindowDocument::from_json("{\"kind\": \"base\"}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn overlay_round_trip(cn in 1i64..40, dn in 1i64..40) {
        let doc = overlay_doc(q(cn, 41), q(dn, 43), 4);
        let text = doc.to_json();
        let back = WindowDocument::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json(), text);
    }
}
