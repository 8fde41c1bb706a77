use orbitile::orbit::{seed_orbit, OrbitWindow, SeedSpec};
use orbitile::render::{check_abutment, layer, svg, Placement, RenderError};
use orbitile::substitution::SubstitutionSystem;
use proptest::prelude::*;

fn doubling() -> SubstitutionSystem {
    SubstitutionSystem::from_chars("unit2", &[('0', "00")]).unwrap()
}

fn fib() -> SubstitutionSystem {
    SubstitutionSystem::from_chars("fib", &[('a', "ab"), ('b', "a")]).unwrap()
}

fn placement(sys: &SubstitutionSystem, c: f64, d: f64) -> Placement {
    Placement {
        weights: sys.distribution().unwrap().weights.iter().map(|w| w.to_f64()).collect(),
        lambda: sys.growth_rate().unwrap().to_f64(),
        c,
        d,
    }
}

#[test]
fn doubling_widths_halve() {
    let sys = doubling();
    let (w, _) = seed_orbit(&sys, &SeedSpec { rows: 3, top_width: 4, max_width: 8, occurrence: 0 }).unwrap();
    let l = layer("unit2", &sys, &w, &placement(&sys, 0.0, 0.0), false).unwrap();
    for r in 1..3 {
        let above = l.rows[r - 1][0].width;
        assert!(l.rows[r].iter().all(|t| (t.width - above / 2.0).abs() < 1e-15));
        assert!((l.rows[r][0].height - 2f64.ln()).abs() < 1e-15);
    }
    check_abutment(&l, 1e-9).unwrap();
    // each core parent is exactly covered by two children
    for t in &l.rows[1] {
        let kids: Vec<_> = l.rows[2].iter().filter(|k| k.parent == Some((t.column - l.rows[1][0].column) as usize)).collect();
        if kids.is_empty() {
            continue;
        }
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].x, t.x);
        assert!((kids[1].x + kids[1].width - t.x - t.width).abs() < 1e-12);
    }
}

#[test]
fn shifted_cell_is_caught() {
    let sys = fib();
    let (w, _) = seed_orbit(&sys, &SeedSpec { rows: 5, top_width: 7, max_width: 40, occurrence: 0 }).unwrap();
    let mut l = layer("fib", &sys, &w, &placement(&sys, 0.3, 0.2), false).unwrap();
    check_abutment(&l, 1e-9).unwrap();
    l.rows[2][1].x += 1e-6;
    assert!(matches!(check_abutment(&l, 1e-9), Err(RenderError::Abutment { .. })));
}

#[test]
fn empty_window_gives_an_empty_svg() {
    let out = svg(&[]);
    assert!(out.contains("<svg") && out.trim_end().ends_with("</svg>"));
    assert!(!out.contains("<rect"));
    let sys = fib();
    let empty = OrbitWindow { i_lo: 0, rows: Vec::new(), parents: Vec::new() };
    let l = layer("fib", &sys, &empty, &placement(&sys, 0.0, 0.0), false).unwrap();
    assert!(!svg(&[l]).contains("<rect"));
}

#[test]
fn stroke_only_layers_have_no_fill() {
    let sys = fib();
    let (w, _) = seed_orbit(&sys, &SeedSpec { rows: 3, top_width: 5, max_width: 20, occurrence: 0 }).unwrap();
    let l = layer("fib", &sys, &w, &placement(&sys, 0.0, 0.0), true).unwrap();
    let out = svg(&[l]);
    assert_eq!(out.matches("<rect").count(), out.matches("fill=\"none\"").count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tiles_abut_at_any_placement(c in -3.0f64..3.0, d in -2.0f64..2.0, top in 3usize..12, fibo in any::<bool>()) {
        let sys = if fibo { fib() } else { doubling() };
        let (w, _) = seed_orbit(&sys, &SeedSpec { rows: 6, top_width: top, max_width: 120, occurrence: 0 }).unwrap();
        let l = layer("t", &sys, &w, &placement(&sys, c, d), false).unwrap();
        prop_assert!(check_abutment(&l, 1e-9).is_ok());
        // y of row i is d - i log lambda
        let h = l.rows[0][0].height;
        for (r, row) in l.rows.iter().enumerate() {
            prop_assert!((row[0].y - (d - r as f64 * h)).abs() < 1e-12);
        }
    }
}
