use std::collections::{BTreeSet, HashMap};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use orbitile::document::{PatchDocument, WindowDocument, WindowKind};
use orbitile::graph::{build_orbit_graph, check_pq, reduce, GraphPatch};
use orbitile::orbit::{
    format_rational, overlay_orbit, parse_rational, period_search, seed_orbit, validate_base, validate_geometry,
    validate_overlay, OverlayOptions, SeedSpec,
};
use orbitile::overlay::{compute_k_exact, enumerate_alphabet, scale_distributions, OverlayConfig};
use orbitile::pq::{
    check_membership, collect_pattern_family, compare_with_window, complete_star, cycle_data, decorate, pq_substitution, reconstruct_rows,
    Decorated, FamilySpec, PatternFamily, SurfaceContext, SurfacePatch, Verdict,
};
use orbitile::real::set_bit_budget;
use orbitile::render::{check_abutment, layer, svg, Layer, Placement};
use orbitile::substitution::{incommensurate, Commensurability, Distribution, SubstitutionSystem};
use serde_json::json;

mod config;
mod failure;

use config::Config;
use failure::Failure;

/// Relative tolerance of the rendering abutment checks.
const ABUTMENT_TOLERANCE: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "orbitile", version, about = "Orbit windows, overlay alphabets and {p,q} patches of substitution systems")]
struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Matrix, primitivity, expansivity, growth rate, distribution and minimal polynomial.
    Analyze { system: PathBuf },
    /// Incommensurability of two growth rates, and the power K of the second that reaches the first.
    Compat {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        bound: Option<u32>,
    },
    /// Overlay alphabet of the first system over the second.
    Alphabet { a: PathBuf, b: PathBuf },
    /// Seeded window of one system, or the overlay window of two.
    Orbit {
        a: PathBuf,
        b: Option<PathBuf>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        c: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        d: Option<String>,
        #[arg(long)]
        top_width: Option<usize>,
        #[arg(long)]
        max_width: Option<usize>,
        #[arg(long)]
        occurrence: Option<usize>,
        #[arg(long)]
        occurrence_second: Option<usize>,
        /// Resolve exact ties toward the smaller index.
        #[arg(long)]
        tie_left: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the second system's window (overlay only).
        #[arg(long)]
        second_output: Option<PathBuf>,
    },
    /// Orbit graph of a window.
    Graph {
        window: PathBuf,
        /// Drop production edges into cells whose first-system letter starts with W.
        #[arg(long)]
        reduce: bool,
        #[arg(long, num_args = 2, value_names = ["P", "Q"])]
        check_pq: Option<Vec<usize>>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Recovers rows, columns and parents of a {p,q} patch from its labels.
    Reconstruct {
        patch: PathBuf,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        /// Vertex placed at row 0, column 0.
        #[arg(long)]
        base: Option<usize>,
    },
    /// Collects allowed neighbourhood patterns from overlay windows.
    Family {
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        b: PathBuf,
        /// Offsets as `c:d` pairs separated by commas, e.g. `1/10:1/20,2/7:1/3`.
        #[arg(long)]
        windows: Option<String>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        top_width: Option<usize>,
        #[arg(long)]
        max_width: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks a patch against a pattern family.
    Member { patch: PathBuf, family: PathBuf },
    /// SVG picture of a window, optionally with a second tiling drawn over it.
    Render {
        window: PathBuf,
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Vertical periods of a window up to a bound.
    Periods {
        window: PathBuf,
        #[arg(long)]
        max_pi: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if let Failure::Validation { report, .. } = &f {
                println!("{report}");
            }
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(bits) = cfg.bits {
        set_bit_budget(bits);
    }
    if let Ok(text) = std::env::var("ORBITILE_BITS") {
        let bits = text.trim().parse().map_err(|_| Failure::Usage(format!("ORBITILE_BITS: not a number: {text}")))?;
        set_bit_budget(bits);
    }
    match cli.command {
        Command::Analyze { system } => analyze(&read_system(&system)?),
        Command::Compat { a, b, bound } => compat(&read_system(&a)?, &read_system(&b)?, bound.or(cfg.bound).unwrap_or(20)),
        Command::Alphabet { a, b } => alphabet(&read_system(&a)?, &read_system(&b)?),
        Command::Orbit {
            a,
            b,
            rows,
            c,
            d,
            top_width,
            max_width,
            occurrence,
            occurrence_second,
            tie_left,
            output,
            second_output,
        } => {
            let spec = SeedSpec {
                rows: rows.or(cfg.rows).unwrap_or(8),
                top_width: top_width.or(cfg.top_width).unwrap_or(24),
                max_width: max_width.or(cfg.max_width).unwrap_or(160),
                occurrence: occurrence.or(cfg.occurrence).unwrap_or(0),
            };
            let c = rational_arg("--c", c.or(cfg.c.clone()).as_deref().unwrap_or(if b.is_some() { "1/10" } else { "0" }))?;
            let d = rational_arg("--d", d.or(cfg.d.clone()).as_deref().unwrap_or(if b.is_some() { "1/20" } else { "0" }))?;
            let sys_a = read_system(&a)?;
            match b {
                None => orbit_base(&sys_a, &spec, &c, &d, output.as_deref()),
                Some(b) => {
                    let options = OverlayOptions {
                        tie_left: tie_left || cfg.tie_left.unwrap_or(false),
                        seed_a: spec,
                        occurrence_b: occurrence_second.or(cfg.occurrence_second).unwrap_or(0),
                    };
                    orbit_overlay(&sys_a, &read_system(&b)?, &options, &c, &d, output.as_deref(), second_output.as_deref())
                }
            }
        }
        Command::Graph { window, reduce, check_pq, output } => {
            let pq = check_pq.map(|v| (v[0], v[1]));
            graph(&read_window(&window)?, reduce || cfg.reduce.unwrap_or(false), pq, output.as_deref())
        }
        Command::Reconstruct { patch, p, q, base } => reconstruct(&read_patch(&patch)?, p.or(cfg.p), q.or(cfg.q), base),
        Command::Family { p, q, b, windows, rows, top_width, max_width, output } => {
            let defaults = FamilySpec { rows: 8, top_width: 3, max_width: 3000, ..FamilySpec::default() };
            let offsets = match windows.or(cfg.windows.clone()) {
                Some(text) => parse_windows(&text)?,
                None => defaults.offsets.clone(),
            };
            let spec = FamilySpec {
                offsets,
                rows: rows.or(cfg.rows).unwrap_or(defaults.rows),
                top_width: top_width.or(cfg.top_width).unwrap_or(defaults.top_width),
                max_width: max_width.or(cfg.max_width).unwrap_or(defaults.max_width),
            };
            let p = p.or(cfg.p).ok_or_else(|| Failure::Usage("--p is required".into()))?;
            let q = q.or(cfg.q).ok_or_else(|| Failure::Usage("--q is required".into()))?;
            family(p, q, &read_system(&b)?, &spec, output.as_deref())
        }
        Command::Member { patch, family } => member(&read_patch(&patch)?, &read_json(&family)?),
        Command::Render { window, overlay, output } => {
            let second = overlay.map(|p| read_window(&p)).transpose()?;
            render(&read_window(&window)?, second.as_ref(), &output)
        }
        Command::Periods { window, max_pi } => periods(&read_window(&window)?, max_pi.or(cfg.max_pi).unwrap_or(4)),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn read_system(path: &Path) -> Result<SubstitutionSystem, Failure> {
    SubstitutionSystem::parse(&read_text(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_window(path: &Path) -> Result<WindowDocument, Failure> {
    WindowDocument::from_json(&read_text(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_patch(path: &Path) -> Result<PatchDocument, Failure> {
    PatchDocument::from_json(&read_text(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json(value: &impl serde::Serialize, output: Option<&Path>) -> Result<(), Failure> {
    emit(&(serde_json::to_string_pretty(value).expect("reports serialize") + "\n"), output)
}

fn rational_arg(flag: &str, text: &str) -> Result<BigRational, Failure> {
    let (q, decimal) = parse_rational(text).map_err(|e| Failure::Usage(format!("{flag}: {e}")))?;
    if decimal {
        eprintln!("warning: {flag} {text} read as the rational {}", format_rational(&q));
    }
    Ok(q)
}

fn parse_windows(text: &str) -> Result<Vec<(String, String)>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (c, d) = pair
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("--windows: expected c:d, got `{pair}`")))?;
            let c = rational_arg("--windows", c)?;
            let d = rational_arg("--windows", d)?;
            Ok((format_rational(&c), format_rational(&d)))
        })
        .collect()
}

fn analyze(sys: &SubstitutionSystem) -> Result<(), Failure> {
    let primitive = sys.is_primitive();
    let expansive = sys.is_expansive()?;
    let mut report = json!({
        "name": sys.name(),
        "letters": sys.letters(),
        "matrix": sys.matrix().entries,
        "primitive": primitive,
        "expansive": expansive,
    });
    if expansive {
        let perron = sys.perron()?;
        report["lambda"] = json!(perron.lambda.to_decimal(40));
        report["lambda_exact"] = json!(perron.lambda.exact().map(format_rational));
        report["characteristic_polynomial"] = json!(perron.charpoly.to_string());
        report["minimal_polynomial"] = json!(perron.minpoly.to_string());
        report["isolating_interval"] = json!([format_rational(&perron.interval.0), format_rational(&perron.interval.1)]);
        if primitive {
            let nu = sys.distribution()?;
            report["distribution"] = json!(nu.weights.iter().map(|w| w.to_decimal(30)).collect::<Vec<_>>());
        }
    }
    emit_json(&report, None)
}

fn compat(a: &SubstitutionSystem, b: &SubstitutionSystem, bound: u32) -> Result<(), Failure> {
    let verdict = incommensurate(a, b, bound)?;
    let k = compute_k_exact(a, b)?;
    emit_json(&json!({ "verdict": verdict, "summary": verdict.to_string(), "k": k }), None)?;
    if verdict == Commensurability::Indeterminate {
        return Err(Failure::Undecided("commensurability could not be decided".into()));
    }
    Ok(())
}

fn alphabet(a: &SubstitutionSystem, b: &SubstitutionSystem) -> Result<(), Failure> {
    let ov = enumerate_alphabet(a, b)?;
    let word = |w: &[usize]| ov.sys_b.format_word(w);
    let letters: Vec<_> = ov
        .letters
        .iter()
        .map(|x| {
            json!({
                "name": ov.format_letter(x),
                "alpha": ov.sys_a.letters()[x.alpha],
                "beta": word(&x.beta),
                "p": word(&x.p),
                "s": word(&x.s),
                "delta": x.delta,
            })
        })
        .collect();
    emit_json(
        &json!({ "first": a.name(), "second": b.name(), "k": ov.k, "n": ov.n, "size": letters.len(), "letters": letters }),
        None,
    )
}

fn orbit_base(
    sys: &SubstitutionSystem,
    spec: &SeedSpec,
    c: &BigRational,
    d: &BigRational,
    output: Option<&Path>,
) -> Result<(), Failure> {
    let (window, seed) = seed_orbit(sys, spec)?;
    validate_base(sys, &window).map_err(|v| Failure::validation(v.to_string(), &v))?;
    let doc = WindowDocument::base(sys, &window, &seed, spec, &format_rational(c), &format_rational(d));
    emit(&doc.to_json(), output)
}

fn orbit_overlay(
    a: &SubstitutionSystem,
    b: &SubstitutionSystem,
    options: &OverlayOptions,
    c: &BigRational,
    d: &BigRational,
    output: Option<&Path>,
    second_output: Option<&Path>,
) -> Result<(), Failure> {
    let ov = enumerate_alphabet(a, b)?;
    let orbit = overlay_orbit(&ov, c, d, options)?;
    validate_overlay(&ov, &orbit).map_err(|v| Failure::validation(v.to_string(), &v))?;
    validate_geometry(&ov, &orbit).map_err(|v| Failure::validation(v.to_string(), &v))?;
    if let Some(path) = second_output {
        let base_b = &orbit.base_b;
        let spec = SeedSpec {
            rows: base_b.height(),
            top_width: base_b.rows.first().map_or(0, |r| r.len()),
            max_width: base_b.rows.iter().map(|r| r.len()).max().unwrap_or(0),
            occurrence: options.occurrence_b,
        };
        let doc = WindowDocument::base(b, base_b, &orbit.seed_b, &spec, &format_rational(c), &format_rational(d));
        emit(&doc.to_json(), Some(path))?;
    }
    emit(&WindowDocument::overlay(&ov, &orbit, options).to_json(), output)
}

fn graph(doc: &WindowDocument, reduce_w: bool, pq: Option<(usize, usize)>, output: Option<&Path>) -> Result<(), Failure> {
    let (window, names) = doc.interned();
    let patch = build_orbit_graph(&window, &names);
    let tiles: Option<Vec<String>> = (doc.kind == WindowKind::Overlay)
        .then(|| doc.rows.iter().flat_map(|r| r.tiles.clone().unwrap_or_default()).collect());
    let patch = if reduce_w {
        // the tile letter of a label is the same wherever the label occurs
        let mut tile_of: HashMap<usize, bool> = HashMap::new();
        for (v, cell) in patch.vertices.iter().enumerate() {
            let tile = tiles.as_ref().map_or(names[cell.label].as_str(), |t| t[v].as_str());
            tile_of.insert(cell.label, tile.starts_with('W'));
        }
        reduce(&patch, |l| tile_of[&l])
    } else {
        patch
    };
    let check = pq.map(|(p, q)| check_pq(&patch, p, q));
    let out = PatchDocument { systems: doc.systems.clone(), patch, tiles, check };
    emit(&out.to_json(), output)?;
    match &out.check {
        Some(report) if !report.passed() => Err(Failure::validation(
            format!("{} bad vertices and {} bad faces among the interior", report.bad_vertices.len(), report.bad_faces.len()),
            report,
        )),
        _ => Ok(()),
    }
}

/// `(p, q)` whose decorated system is `sys`.
fn infer_pq(sys: &SubstitutionSystem) -> Option<(usize, usize)> {
    for p in 5..=40 {
        for q in 5..=40 {
            let Ok(base) = pq_substitution(p, q) else { continue };
            if base.image(1).len() != sys.size() {
                continue;
            }
            if decorate(&base).is_ok_and(|dec| dec.sys.letters() == sys.letters() && dec.sys.rules() == sys.rules()) {
                return Some((p, q));
            }
        }
    }
    None
}

fn reconstruct(doc: &PatchDocument, p: Option<usize>, q: Option<usize>, base: Option<usize>) -> Result<(), Failure> {
    let sys = doc.system("first")?;
    let (p, q) = match (p, q) {
        (Some(p), Some(q)) => (p, q),
        _ => infer_pq(&sys).ok_or_else(|| Failure::Usage("first system is not a decorated {p,q} system; pass --p and --q".into()))?,
    };
    let dec: Decorated = decorate(&pq_substitution(p, q)?)?;
    let mut labels = Vec::with_capacity(doc.patch.vertices.len());
    for v in 0..doc.patch.vertices.len() {
        let name = doc.tile_name(v);
        labels.push(dec.sys.letter_index(name).ok_or_else(|| Failure::Usage(format!("letter `{name}` is not decorated")))?);
    }
    let patch: GraphPatch = if doc.patch.reduced {
        doc.patch.clone()
    } else {
        let is_w: HashMap<usize, bool> =
            doc.patch.vertices.iter().zip(&labels).map(|(cell, &l)| (cell.label, dec.base_of(l) == dec.w)).collect();
        reduce(&doc.patch, |l| is_w[&l])
    };
    let adj = patch.neighbours();
    let data = cycle_data(&dec, &adj, &|v| labels[v], p);
    // vertices whose whole star is in the patch
    let interior: Vec<usize> = (0..patch.vertices.len()).filter(|&v| complete_star(&data, &adj, q, v)).collect();
    let base = match base {
        Some(b) if b < patch.vertices.len() => b,
        Some(b) => return Err(Failure::Usage(format!("--base {b}: no such vertex"))),
        None => *interior
            .get(interior.len() / 2)
            .ok_or_else(|| Failure::validation("patch has no vertex with a complete star", &json!({ "interior": 0 })))?,
    };
    let (rec, data) = reconstruct_rows(&dec, &adj, &|v| labels[v], p, base)?;
    let truth = compare_with_window(&patch, &rec, &interior);
    let interior_cycles: BTreeSet<usize> =
        interior.iter().flat_map(|v| data.by_vertex.get(v).cloned().unwrap_or_default()).collect();
    let report = json!({
        "p": p,
        "q": q,
        "base": base,
        "interior_vertices": interior.len(),
        "cycles": {
            "total": data.cycles.len(),
            "interior": interior_cycles.len(),
            "one_literal_horizontal_path": interior_cycles.iter().filter(|&&c| data.path_counts[c] == 1).count(),
            "ambiguous": interior_cycles.iter().filter(|&&c| data.path_counts[c] > 1).count(),
            "settled": interior_cycles.iter().filter(|&&c| data.paths[c].is_some()).count(),
        },
        "ground_truth": truth,
        "reconstruction": rec,
    });
    if !truth.passed() {
        return Err(Failure::validation("reconstruction disagrees with the patch coordinates", &report));
    }
    emit_json(&report, None)
}

fn family(p: usize, q: usize, b: &SubstitutionSystem, spec: &FamilySpec, output: Option<&Path>) -> Result<(), Failure> {
    let ctx = SurfaceContext::new(p, q, b)?;
    let fam = collect_pattern_family(&ctx, spec)?;
    emit_json(&fam, output)
}

fn member(doc: &PatchDocument, fam: &PatternFamily) -> Result<(), Failure> {
    let sys_b = SubstitutionSystem::parse(&fam.system_b)?;
    let ctx = SurfaceContext::new(fam.p, fam.q, &sys_b)?;
    let mut patch = doc.patch.clone();
    let ids = patch
        .label_names
        .iter()
        .map(|n| ctx.letter_id(n).ok_or_else(|| Failure::Usage(format!("`{n}` is not a letter of the family's alphabet"))))
        .collect::<Result<Vec<_>, _>>()?;
    for v in &mut patch.vertices {
        v.label = ids[v.label];
    }
    patch.label_names = ctx.names.clone();
    if !patch.reduced {
        patch = reduce(&patch, |x| ctx.is_w(x));
    }
    let sp = SurfacePatch::new(&ctx, patch);
    let report = check_membership(&ctx, &sp, fam);
    let summary = json!({
        "checked": report.vertices.len(),
        "pass": report.count(Verdict::Pass),
        "fail": report.count(Verdict::Fail),
        "unknown": report.count(Verdict::Unknown),
        "vertices": report.vertices,
    });
    if report.count(Verdict::Fail) > 0 {
        return Err(Failure::validation(format!("{} vertices fail", report.count(Verdict::Fail)), &summary));
    }
    emit_json(&summary, None)
}

fn weights(dist: &Distribution) -> Vec<f64> {
    dist.weights.iter().map(|w| w.to_f64()).collect()
}

fn offset(text: &str) -> Result<f64, Failure> {
    let (q, _) = parse_rational(text).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(q.to_f64().unwrap_or(f64::NAN))
}

/// Distributions of two systems scaled the way the overlay construction
/// scales them.
fn joint(a: &SubstitutionSystem, b: &SubstitutionSystem) -> Result<(Vec<f64>, Vec<f64>, f64, f64), Failure> {
    let gamma = b.growth_rate()?;
    let (nu, eta) = scale_distributions(&a.distribution()?, &b.distribution()?, &gamma, &OverlayConfig::default().slack)?;
    Ok((weights(&nu), weights(&eta), a.growth_rate()?.to_f64(), gamma.to_f64()))
}

fn render(first: &WindowDocument, second: Option<&WindowDocument>, output: &Path) -> Result<(), Failure> {
    let (sys_a, win_a) = first.tiling()?;
    let c = offset(&first.metadata.c)?;
    let d = offset(&first.metadata.d)?;
    let mut layers: Vec<Layer> = Vec::new();
    let partner = match second {
        Some(doc) => {
            let (sys_b, win_b) = doc.tiling()?;
            Some((sys_b, Some(win_b)))
        }
        None if first.kind == WindowKind::Overlay => Some((first.system("second")?, None)),
        None => None,
    };
    match partner {
        Some((sys_b, win_b)) => {
            let (nu, eta, lambda, gamma) = joint(&sys_a, &sys_b)?;
            let place_a = Placement { weights: nu, lambda, c, d: -d };
            layers.push(layer(sys_a.name(), &sys_a, &win_a, &place_a, false)?);
            if let Some(win_b) = win_b {
                let place_b = Placement { weights: eta, lambda: gamma, c: 0.0, d: 0.0 };
                layers.push(layer(sys_b.name(), &sys_b, &win_b, &place_b, true)?);
            }
        }
        None => {
            let place = Placement { weights: weights(&sys_a.distribution()?), lambda: sys_a.growth_rate()?.to_f64(), c, d };
            layers.push(layer(sys_a.name(), &sys_a, &win_a, &place, false)?);
        }
    }
    for l in &layers {
        check_abutment(l, ABUTMENT_TOLERANCE)?;
    }
    std::fs::write(output, svg(&layers))?;
    Ok(())
}

fn periods(doc: &WindowDocument, max_pi: usize) -> Result<(), Failure> {
    let (window, _) = doc.interned();
    let found = period_search(&window, max_pi);
    emit_json(&json!({ "max_pi": max_pi, "rows": window.height(), "periods": found }), None)
}
