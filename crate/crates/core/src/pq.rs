//! The {p,q} substitution, its position-decorated system, recovery of rows
//! from a labeled graph, and local pattern checks for labelings by overlay
//! letters of the decorated system.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{self, build_orbit_graph, canonical_form, CanonicalPattern, EdgeKind, GraphPatch, Pattern};
use crate::orbit::{self, OrbitError, OverlayOptions, SeedSpec};
use crate::overlay::{self, OverlayError, OverlaySystem};
use crate::substitution::{SubstError, SubstitutionSystem, Sym};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PqError {
    #[error("bad parameters: {0}")]
    BadParameters(String),
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("edge {0}-{1} does not lie on two p-cycles of the patch")]
    BoundaryEdge(usize, usize),
    #[error("dy does not sum to zero around the p-cycle through vertex {0}")]
    InconsistentCycle(usize),
    #[error("p-cycle through vertex {vertex} has {count} paths of horizontal type")]
    HorizontalPaths { vertex: usize, count: usize },
    #[error("horizontal order is inconsistent at vertex {0}")]
    InconsistentRow(usize),
}

/// `Y -> (Y W^{p-3})^{q-4} Y W^{p-4}`, `W -> (Y W^{p-3})^{q-3} Y W^{p-4}`.
pub fn pq_substitution(p: usize, q: usize) -> Result<SubstitutionSystem, PqError> {
    if p < 5 || q < 5 {
        return Err(PqError::BadParameters(format!("need p, q >= 5, got p={p}, q={q}")));
    }
    let block = format!("Y{}", "W".repeat(p - 3));
    let tail = format!("Y{}", "W".repeat(p - 4));
    let y = format!("{}{}", block.repeat(q - 4), tail);
    let w = format!("{}{}", block.repeat(q - 3), tail);
    Ok(SubstitutionSystem::from_chars(&format!("pq{p}_{q}"), &[('Y', y.as_str()), ('W', w.as_str())])?)
}

/// The position-decorated system: letters `(a, i)` for every letter `a`
/// appearing at position `i` (from 1) of some image, with
/// `(a, i) -> (s_1, 1) (s_2, 2) ...` where `s = sigma(a)`.
#[derive(Clone, Debug)]
pub struct Decorated {
    pub base: SubstitutionSystem,
    pub sys: SubstitutionSystem,
    /// `(base letter, position)` of each decorated letter.
    pub letters: Vec<(Sym, usize)>,
    pub y: Sym,
    pub w: Sym,
}

impl Decorated {
    pub fn base_of(&self, x: Sym) -> Sym {
        self.letters[x].0
    }

    pub fn position_of(&self, x: Sym) -> usize {
        self.letters[x].1
    }

    /// Positions (from 1) of Y in the image of the base letter `a`.
    pub fn y_positions(&self, a: Sym) -> Vec<usize> {
        y_positions(&self.base, self.y, a)
    }

    /// Largest image length of the base system.
    pub fn width(&self) -> usize {
        (0..self.base.size()).map(|a| self.base.image(a).len()).max().unwrap_or(0)
    }
}

pub fn y_positions(base: &SubstitutionSystem, y: Sym, a: Sym) -> Vec<usize> {
    base.image(a).iter().enumerate().filter(|(_, &s)| s == y).map(|(k, _)| k + 1).collect()
}

pub fn decorate(base: &SubstitutionSystem) -> Result<Decorated, PqError> {
    let y = base.letter_index("Y").ok_or_else(|| PqError::BadParameters("system has no letter Y".into()))?;
    let w = base.letter_index("W").ok_or_else(|| PqError::BadParameters("system has no letter W".into()))?;
    let mut set = BTreeSet::new();
    for a in 0..base.size() {
        for (k, &s) in base.image(a).iter().enumerate() {
            set.insert((k + 1, s));
        }
    }
    let letters: Vec<(Sym, usize)> = set.into_iter().map(|(pos, s)| (s, pos)).collect();
    let index: HashMap<(Sym, usize), usize> = letters.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let names: Vec<String> = letters.iter().map(|&(s, pos)| format!("{}{}", base.letters()[s], pos)).collect();
    let rules = letters
        .iter()
        .map(|&(s, _)| {
            base.image(s).iter().enumerate().map(|(k, &t)| index[&(t, k + 1)]).collect()
        })
        .collect();
    let sys = SubstitutionSystem::new(&format!("{}#", base.name()), names, rules)?;
    Ok(Decorated { base: base.clone(), sys, letters, y, w })
}

/// Whether a run of position labels is of horizontal type for the
/// producing letter `a`:
/// `p - 1` consecutive positions starting and ending at Y positions of
/// `sigma(a)`, or `p - 2` labels whose first `p - 3` are the last positions
/// of `sigma(a)` starting at a Y position, followed by position 1.
pub fn horizontal_type(base: &SubstitutionSystem, y: Sym, positions: &[usize], a: Sym, p: usize) -> bool {
    let k = positions.len();
    let len = base.image(a).len();
    let ys = y_positions(base, y, a);
    if k + 1 == p {
        positions.windows(2).all(|w| w[1] == w[0] + 1)
            && ys.contains(&positions[0])
            && ys.contains(&positions[k - 1])
            && positions[k - 1] <= len
    } else if k + 2 == p && k >= 2 {
        let head = &positions[..k - 1];
        head.windows(2).all(|w| w[1] == w[0] + 1)
            && ys.contains(&head[0])
            && head[head.len() - 1] == len
            && positions[k - 1] == 1
    } else {
        false
    }
}

/// All `p`-cycles of a graph, each listed once from its smallest vertex.
pub fn find_p_cycles(adj: &[Vec<usize>], p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(p);
    let mut dist: HashMap<usize, usize> = HashMap::new();
    for s in 0..adj.len() {
        // distances from s inside vertices >= s, up to p / 2
        dist.clear();
        dist.insert(s, 0);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == p / 2 {
                continue;
            }
            for &w in &adj[v] {
                if w > s && !dist.contains_key(&w) {
                    dist.insert(w, d + 1);
                    queue.push_back(w);
                }
            }
        }
        path.clear();
        path.push(s);
        extend(adj, p, &dist, &mut path, &mut out);
    }
    out
}

fn extend(adj: &[Vec<usize>], p: usize, dist: &HashMap<usize, usize>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let s = path[0];
    let v = *path.last().unwrap();
    if path.len() == p {
        if adj[v].contains(&s) && path[1] < path[p - 1] {
            out.push(path.clone());
        }
        return;
    }
    let remaining = p - path.len();
    for &w in &adj[v] {
        let Some(&d) = dist.get(&w) else { continue };
        if d > remaining || path.contains(&w) {
            continue;
        }
        path.push(w);
        extend(adj, p, dist, path, out);
        path.pop();
    }
}

/// The oriented path of horizontal type in a p-cycle with, for each of its
/// vertices, the vertex that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizontalPath {
    pub vertices: Vec<usize>,
    pub producers: Vec<usize>,
}

impl HorizontalPath {
    pub fn contains(&self, v: usize) -> bool {
        self.vertices.contains(&v)
    }

    /// Whether `u` is immediately followed by `v` along the path.
    pub fn steps(&self, u: usize, v: usize) -> bool {
        self.vertices.windows(2).any(|w| w[0] == u && w[1] == v)
    }
}

/// Every oriented path of horizontal type in a p-cycle, with vertex labels
/// given as decorated letters.
pub fn horizontal_paths(dec: &Decorated, cycle: &[usize], label: &impl Fn(usize) -> Sym, p: usize) -> Vec<HorizontalPath> {
    let n = cycle.len();
    let mut out = Vec::new();
    if n != p {
        return out;
    }
    for reversed in [false, true] {
        let c: Vec<usize> = if reversed { cycle.iter().rev().copied().collect() } else { cycle.to_vec() };
        for start in 0..n {
            for k in [p - 1, p - 2] {
                let vertices: Vec<usize> = (0..k).map(|t| c[(start + t) % n]).collect();
                let positions: Vec<usize> = vertices.iter().map(|&v| dec.position_of(label(v))).collect();
                let before = c[(start + n - 1) % n];
                let after = c[(start + k) % n];
                let producer = if k + 1 == p { after } else { before };
                if !horizontal_type(&dec.base, dec.y, &positions, dec.base_of(label(producer)), p) {
                    continue;
                }
                let producers = if k + 1 == p {
                    vec![after; k]
                } else {
                    let mut v = vec![before; k - 1];
                    v.push(after);
                    v
                };
                out.push(HorizontalPath { vertices, producers });
            }
        }
    }
    out
}

/// The p-cycles of a labeled graph with their horizontal-type paths.
#[derive(Clone, Debug)]
pub struct CycleData {
    pub cycles: Vec<Vec<usize>>,
    /// Every oriented path of horizontal type, read from the labels of the
    /// cycle alone.
    pub candidates: Vec<Vec<HorizontalPath>>,
    /// The path kept after ruling out candidates that disagree with every
    /// remaining candidate of a neighbouring cycle on a shared edge. `None`
    /// when zero or several remain.
    pub paths: Vec<Option<HorizontalPath>>,
    /// Number of candidates of each cycle, before any ruling out.
    pub path_counts: Vec<usize>,
    pub by_edge: HashMap<(usize, usize), Vec<usize>>,
    pub by_vertex: HashMap<usize, Vec<usize>>,
}

impl CycleData {
    /// Cycles with more than one candidate path.
    pub fn ambiguous(&self) -> usize {
        self.path_counts.iter().filter(|&&n| n > 1).count()
    }

    /// Ambiguous cycles that the neighbouring cycles settle.
    pub fn settled(&self) -> usize {
        self.path_counts.iter().zip(&self.paths).filter(|(&n, h)| n > 1 && h.is_some()).count()
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Role of the edge `u -> v` of a cycle with respect to a candidate path:
/// `Some(0)` on the path, `Some(+-1)` for the dy it gets, `None` when
/// neither end is on the path.
fn edge_role(h: &HorizontalPath, u: usize, v: usize) -> Option<i32> {
    if h.steps(u, v) || h.steps(v, u) {
        return Some(0);
    }
    match (h.contains(u), h.contains(v)) {
        (false, true) => Some(1),
        (true, false) => Some(-1),
        _ => None,
    }
}

fn compatible(a: Option<i32>, b: Option<i32>) -> bool {
    match (a, b) {
        (Some(0), Some(0)) | (Some(0), None) | (None, Some(0)) => true,
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

pub fn cycle_data(dec: &Decorated, adj: &[Vec<usize>], label: &impl Fn(usize) -> Sym, p: usize) -> CycleData {
    let cycles = find_p_cycles(adj, p);
    let mut candidates = Vec::with_capacity(cycles.len());
    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    let mut by_vertex: HashMap<usize, Vec<usize>> = HashMap::new();
    for (c, cycle) in cycles.iter().enumerate() {
        candidates.push(horizontal_paths(dec, cycle, label, p));
        for k in 0..cycle.len() {
            by_edge.entry(key(cycle[k], cycle[(k + 1) % cycle.len()])).or_default().push(c);
            by_vertex.entry(cycle[k]).or_default().push(c);
        }
    }
    let path_counts: Vec<usize> = candidates.iter().map(Vec::len).collect();
    let mut alive: Vec<Vec<bool>> = candidates.iter().map(|c| vec![true; c.len()]).collect();
    let mut queue: VecDeque<usize> = (0..cycles.len()).filter(|&c| path_counts[c] > 1).collect();
    let mut queued: Vec<bool> = path_counts.iter().map(|&n| n > 1).collect();
    while let Some(c) = queue.pop_front() {
        queued[c] = false;
        let n = cycles[c].len();
        let mut changed = false;
        for t in 0..candidates[c].len() {
            if !alive[c][t] {
                continue;
            }
            let h = &candidates[c][t];
            let consistent = (0..n).all(|k| {
                let (u, v) = (cycles[c][k], cycles[c][(k + 1) % n]);
                let role = edge_role(h, u, v);
                by_edge[&key(u, v)].iter().filter(|&&o| o != c).all(|&o| {
                    candidates[o]
                        .iter()
                        .zip(&alive[o])
                        .any(|(g, &ok)| ok && compatible(role, edge_role(g, u, v)))
                        || candidates[o].is_empty()
                })
            });
            if !consistent {
                alive[c][t] = false;
                changed = true;
            }
        }
        if changed {
            for k in 0..n {
                let (u, v) = (cycles[c][k], cycles[c][(k + 1) % n]);
                for &o in &by_edge[&key(u, v)] {
                    if o != c && path_counts[o] > 1 && !queued[o] {
                        queued[o] = true;
                        queue.push_back(o);
                    }
                }
            }
        }
    }
    let paths = candidates
        .iter()
        .zip(&alive)
        .map(|(cands, ok)| {
            let mut left = cands.iter().zip(ok).filter(|(_, &a)| a).map(|(h, _)| h.clone());
            match (left.next(), left.next()) {
                (Some(h), None) => Some(h),
                _ => None,
            }
        })
        .collect();
    CycleData { cycles, candidates, paths, path_counts, by_edge, by_vertex }
}

/// `dy` of the oriented edge `u -> v`.
pub fn dy(data: &CycleData, u: usize, v: usize) -> Result<i32, PqError> {
    let cs = data.by_edge.get(&key(u, v)).map(Vec::as_slice).unwrap_or(&[]);
    if cs.len() != 2 {
        return Err(PqError::BoundaryEdge(u, v));
    }
    let mut paths = Vec::new();
    for &c in cs {
        match &data.paths[c] {
            Some(path) => paths.push(path),
            None => return Err(PqError::HorizontalPaths { vertex: data.cycles[c][0], count: data.path_counts[c] }),
        }
    }
    if paths.iter().any(|h| h.steps(u, v) || h.steps(v, u)) {
        return Ok(0);
    }
    let mut value = None;
    for h in paths {
        let d = match (h.contains(u), h.contains(v)) {
            (false, true) => 1,
            (true, false) => -1,
            _ => continue,
        };
        if value.is_some_and(|x| x != d) {
            return Err(PqError::InconsistentCycle(u));
        }
        value = Some(d);
    }
    value.ok_or(PqError::BoundaryEdge(u, v))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub base: usize,
    /// Row coordinate relative to the base vertex.
    pub y: BTreeMap<usize, i64>,
    /// Position along the horizontal line through the vertex.
    pub x: BTreeMap<usize, i64>,
    /// Horizontal component of each vertex.
    pub line: BTreeMap<usize, usize>,
    pub parent: BTreeMap<usize, usize>,
    /// `x` of the parent.
    pub parent_x: BTreeMap<usize, i64>,
}

/// Whether `v` has degree `q`, lies on `q` p-cycles, and every edge of those
/// cycles lies on two p-cycles.
pub fn complete_star(data: &CycleData, adj: &[Vec<usize>], q: usize, v: usize) -> bool {
    let Some(cycles) = data.by_vertex.get(&v) else { return false };
    adj[v].len() == q
        && cycles.len() == q
        && cycles.iter().all(|&c| {
            let cycle = &data.cycles[c];
            (0..cycle.len()).all(|k| {
                let e = key(cycle[k], cycle[(k + 1) % cycle.len()]);
                data.by_edge.get(&e).is_some_and(|cs| cs.len() == 2)
            })
        })
}

/// Recovers rows, positions and parents from labels alone. Only edges lying
/// on two p-cycles of the graph are used.
pub fn reconstruct_rows(
    dec: &Decorated,
    adj: &[Vec<usize>],
    label: &impl Fn(usize) -> Sym,
    p: usize,
    base: usize,
) -> Result<(Reconstruction, CycleData), PqError> {
    let data = cycle_data(dec, adj, label, p);
    let usable = |u: usize, v: usize| data.by_edge.get(&key(u, v)).is_some_and(|c| c.len() == 2);
    let mut out = Reconstruction { base, ..Default::default() };
    out.y.insert(base, 0);
    let mut queue = VecDeque::from([base]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !usable(u, v) {
                continue;
            }
            let yv = out.y[&u] + dy(&data, u, v)? as i64;
            match out.y.get(&v) {
                Some(&old) if old != yv => return Err(PqError::InconsistentCycle(v)),
                Some(_) => {}
                None => {
                    out.y.insert(v, yv);
                    queue.push_back(v);
                }
            }
        }
    }
    for (c, cycle) in data.cycles.iter().enumerate() {
        let n = cycle.len();
        if (0..n).all(|k| usable(cycle[k], cycle[(k + 1) % n])) {
            let mut sum = 0;
            for k in 0..n {
                sum += dy(&data, cycle[k], cycle[(k + 1) % n])?;
            }
            if sum != 0 {
                return Err(PqError::InconsistentCycle(data.cycles[c][0]));
            }
        }
    }
    // horizontal lines, oriented by the paths
    let mut right: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut left: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for h in data.paths.iter().flatten() {
        for w in h.vertices.windows(2) {
            right.entry(w[0]).or_default().insert(w[1]);
            left.entry(w[1]).or_default().insert(w[0]);
        }
        for (&v, &par) in h.vertices.iter().zip(&h.producers) {
            if let Some(&old) = out.parent.get(&v) {
                if old != par {
                    return Err(PqError::InconsistentRow(v));
                }
            }
            out.parent.insert(v, par);
        }
    }
    for (v, set) in right.iter().chain(left.iter()) {
        if set.len() > 1 {
            return Err(PqError::InconsistentRow(*v));
        }
    }
    let reached: Vec<usize> = out.y.keys().copied().collect();
    for &v0 in &reached {
        if out.x.contains_key(&v0) {
            continue;
        }
        out.x.insert(v0, 0);
        out.line.insert(v0, v0);
        let mut queue = VecDeque::from([v0]);
        while let Some(u) = queue.pop_front() {
            let xu = out.x[&u];
            let steps = right
                .get(&u)
                .into_iter()
                .flatten()
                .map(|&v| (v, 1))
                .chain(left.get(&u).into_iter().flatten().map(|&v| (v, -1)))
                .collect::<Vec<_>>();
            for (v, d) in steps {
                if !out.y.contains_key(&v) {
                    continue;
                }
                if out.y.get(&v) != out.y.get(&u) {
                    return Err(PqError::InconsistentRow(v));
                }
                match out.x.get(&v) {
                    Some(&old) if old != xu + d => return Err(PqError::InconsistentRow(v)),
                    Some(_) => {}
                    None => {
                        out.x.insert(v, xu + d);
                        out.line.insert(v, v0);
                        queue.push_back(v);
                    }
                }
            }
        }
    }
    let parent_x: BTreeMap<usize, i64> =
        out.parent.iter().filter_map(|(&v, par)| out.x.get(par).map(|&x| (v, x))).collect();
    out.parent_x = parent_x;
    Ok((out, data))
}

/// Agreement of a reconstruction with the rows, columns and parents of the
/// window the patch came from, over the given vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthReport {
    pub checked: usize,
    pub row_mismatches: usize,
    pub column_mismatches: usize,
    pub parent_mismatches: usize,
    pub missing: usize,
}

impl GroundTruthReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.row_mismatches + self.column_mismatches + self.parent_mismatches + self.missing == 0
    }
}

pub fn compare_with_window(patch: &GraphPatch, rec: &Reconstruction, vertices: &[usize]) -> GroundTruthReport {
    let mut report = GroundTruthReport::default();
    let base = &patch.vertices[rec.base];
    let mut line_offset: HashMap<usize, i64> = HashMap::new();
    for &v in vertices {
        report.checked += 1;
        let (Some(&y), Some(&x), Some(&line)) = (rec.y.get(&v), rec.x.get(&v), rec.line.get(&v)) else {
            report.missing += 1;
            continue;
        };
        let cell = &patch.vertices[v];
        if y != cell.i - base.i {
            report.row_mismatches += 1;
        }
        let off = *line_offset.entry(line).or_insert(cell.j - x);
        if cell.j - x != off {
            report.column_mismatches += 1;
        }
        if rec.parent.get(&v).copied() != patch.parent[v] {
            report.parent_mismatches += 1;
        }
    }
    report
}

/// Overlay letters of the decorated system over a second system, with the
/// decorated system itself.
#[derive(Clone, Debug)]
pub struct SurfaceContext {
    pub p: usize,
    pub q: usize,
    pub dec: Decorated,
    pub ov: OverlaySystem,
    pub names: Vec<String>,
    index: HashMap<String, usize>,
}

impl SurfaceContext {
    pub fn new(p: usize, q: usize, sys_b: &SubstitutionSystem) -> Result<Self, PqError> {
        let dec = decorate(&pq_substitution(p, q)?)?;
        let ov = overlay::enumerate_alphabet(&dec.sys, sys_b)?;
        let names: Vec<String> = ov.letters.iter().map(|x| ov.format_letter(x)).collect();
        let index = names.iter().enumerate().map(|(k, n)| (n.clone(), k)).collect();
        Ok(Self { p, q, dec, ov, names, index })
    }

    pub fn letter_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Decorated letter under an overlay letter.
    pub fn decorated(&self, x: usize) -> Sym {
        self.ov.letter(x).alpha
    }

    pub fn is_w(&self, x: usize) -> bool {
        self.dec.base_of(self.decorated(x)) == self.dec.w
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySource {
    pub c: String,
    pub d: String,
    pub rows: usize,
    pub patterns_seen: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternFamily {
    pub p: usize,
    pub q: usize,
    pub system_b: String,
    pub patterns: Vec<CanonicalPattern>,
    pub sources: Vec<FamilySource>,
    /// Patterns come from finitely many windows, so the family is a subset
    /// of the full one.
    pub complete: bool,
}

impl PatternFamily {
    pub fn contains(&self, c: &CanonicalPattern) -> bool {
        self.patterns.binary_search(c).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub offsets: Vec<(String, String)>,
    pub rows: usize,
    pub top_width: usize,
    pub max_width: usize,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            offsets: vec![("1/10".into(), "1/20".into()), ("2/7".into(), "1/3".into()), ("3/5".into(), "2/9".into())],
            rows: 9,
            top_width: 3,
            max_width: 400,
        }
    }
}

/// A labeled reduced patch over overlay letters with its p-cycle data.
pub struct SurfacePatch {
    pub patch: GraphPatch,
    pub adj: Vec<Vec<usize>>,
    pub data: CycleData,
}

impl SurfacePatch {
    pub fn new(ctx: &SurfaceContext, patch: GraphPatch) -> Self {
        let adj = patch.neighbours();
        let labels: Vec<usize> = patch.vertices.iter().map(|v| ctx.decorated(v.label)).collect();
        let data = cycle_data(&ctx.dec, &adj, &|v| labels[v], ctx.p);
        Self { patch, adj, data }
    }

    /// Whether the star of `v` is complete: `q` p-cycles through `v`, each
    /// of whose edges lies on two p-cycles of the patch.
    pub fn checkable(&self, ctx: &SurfaceContext, v: usize) -> bool {
        complete_star(&self.data, &self.adj, ctx.q, v)
    }

    /// Union of the p-cycles through `v`, basepointed at `v`.
    pub fn pattern_at(&self, ctx: &SurfaceContext, v: usize) -> Pattern {
        let cycles = self.data.by_vertex.get(&v).cloned().unwrap_or_default();
        let mut ids = vec![v];
        let mut pairs = BTreeSet::new();
        for &c in &cycles {
            let cycle = &self.data.cycles[c];
            for k in 0..cycle.len() {
                let (a, b) = (cycle[k], cycle[(k + 1) % cycle.len()]);
                pairs.insert(key(a, b));
                if !ids.contains(&a) {
                    ids.push(a);
                }
            }
        }
        ids[1..].sort_unstable();
        let local: HashMap<usize, usize> = ids.iter().enumerate().map(|(k, &g)| (g, k)).collect();
        Pattern {
            labels: ids.iter().map(|&g| ctx.names[self.patch.vertices[g].label].clone()).collect(),
            edges: pairs.into_iter().map(|(a, b)| (local[&a], local[&b])).collect(),
            basepoint: 0,
        }
    }

    /// Checks at `v` that need no family: one horizontal path per p-cycle
    /// through `v`, the produced path spells the decorated image, the
    /// production relation, and adjacency along the produced path and
    /// between `v` and its horizontal neighbours.
    pub fn local_failure(&self, ctx: &SurfaceContext, v: usize) -> Option<String> {
        let cycles = self.data.by_vertex.get(&v).cloned().unwrap_or_default();
        if cycles.len() != ctx.q {
            return Some(format!("{} p-cycles through the vertex, expected {}", cycles.len(), ctx.q));
        }
        let mut produced: BTreeMap<usize, usize> = BTreeMap::new(); // position -> vertex
        let mut neighbours: BTreeSet<(usize, usize)> = BTreeSet::new();
        let label = |u: usize| self.patch.vertices[u].label;
        for &c in &cycles {
            let Some(h) = &self.data.paths[c] else {
                return Some(format!("p-cycle with {} horizontal paths left undecided", self.data.path_counts[c]));
            };
            for (&u, &par) in h.vertices.iter().zip(&h.producers) {
                if par == v {
                    let pos = ctx.dec.position_of(ctx.decorated(label(u)));
                    if produced.insert(pos, u).is_some_and(|old| old != u) {
                        return Some("two produced vertices share a position".into());
                    }
                }
            }
            for w in h.vertices.windows(2) {
                if w[0] == v || w[1] == v {
                    neighbours.insert((w[0], w[1]));
                }
            }
        }
        let x = ctx.ov.letter(label(v));
        let image = ctx.dec.sys.image(x.alpha);
        if produced.len() != image.len() || produced.keys().copied().ne(1..=image.len()) {
            return Some("produced vertices do not cover the image".into());
        }
        let kids: Vec<usize> = produced.values().copied().collect();
        for w in kids.windows(2) {
            if !self.adj[w[0]].contains(&w[1]) {
                return Some("produced vertices are not a path".into());
            }
        }
        let letters: Vec<_> = kids.iter().map(|&u| ctx.ov.letter(label(u))).collect();
        for w in letters.windows(2) {
            if !overlay::adjacent(w[0], w[1]) {
                return Some("produced row is not admissible".into());
            }
        }
        if !overlay::is_production(&ctx.ov, x, &letters) {
            return Some("produced row is not a production of the vertex".into());
        }
        for (a, b) in neighbours {
            if !overlay::adjacent(ctx.ov.letter(label(a)), ctx.ov.letter(label(b))) {
                return Some("horizontal neighbours are not admissible".into());
            }
        }
        None
    }
}

/// Builds a reduced patch from an overlay window of the decorated system.
pub fn surface_patch(
    ctx: &SurfaceContext,
    c: &BigRational,
    d: &BigRational,
    rows: usize,
    top_width: usize,
    max_width: usize,
) -> Result<(SurfacePatch, orbit::OverlayOrbit), PqError> {
    let options = OverlayOptions {
        tie_left: false,
        seed_a: SeedSpec { rows, top_width, max_width, occurrence: 0 },
        occurrence_b: 0,
    };
    let orbit = orbit::overlay_orbit(&ctx.ov, c, d, &options)?;
    let patch = build_orbit_graph(&orbit.window, &ctx.names);
    let reduced = graph::reduce(&patch, |x| ctx.is_w(x));
    Ok((SurfacePatch::new(ctx, reduced), orbit))
}

pub fn collect_pattern_family(ctx: &SurfaceContext, spec: &FamilySpec) -> Result<PatternFamily, PqError> {
    let mut set = BTreeSet::new();
    let mut sources = Vec::new();
    for (c, d) in &spec.offsets {
        let (cq, _) = orbit::parse_rational(c)?;
        let (dq, _) = orbit::parse_rational(d)?;
        let (sp, _) = surface_patch(ctx, &cq, &dq, spec.rows, spec.top_width, spec.max_width)?;
        let mut seen = 0;
        for v in 0..sp.patch.vertices.len() {
            if !sp.checkable(ctx, v) || sp.local_failure(ctx, v).is_some() {
                continue;
            }
            seen += 1;
            set.insert(canonical_form(&sp.pattern_at(ctx, v)));
        }
        sources.push(FamilySource { c: c.clone(), d: d.clone(), rows: spec.rows, patterns_seen: seen });
    }
    Ok(PatternFamily {
        p: ctx.p,
        q: ctx.q,
        system_b: ctx.ov.sys_b.to_text(),
        patterns: set.into_iter().collect(),
        sources,
        complete: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexVerdict {
    pub vertex: usize,
    pub i: i64,
    pub j: i64,
    pub verdict: Verdict,
    pub reason: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub vertices: Vec<VertexVerdict>,
}

impl MembershipReport {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.vertices.iter().filter(|v| v.verdict == verdict).count()
    }
}

/// FAIL when a local condition is violated, PASS when the pattern at the
/// vertex is in the family, UNKNOWN otherwise.
pub fn check_membership(ctx: &SurfaceContext, sp: &SurfacePatch, family: &PatternFamily) -> MembershipReport {
    let mut vertices = Vec::new();
    for v in 0..sp.patch.vertices.len() {
        if !sp.checkable(ctx, v) {
            continue;
        }
        let cell = &sp.patch.vertices[v];
        let (verdict, reason) = match sp.local_failure(ctx, v) {
            Some(why) => (Verdict::Fail, Some(why)),
            None if family.contains(&canonical_form(&sp.pattern_at(ctx, v))) => (Verdict::Pass, None),
            None => (Verdict::Unknown, Some("pattern not in the collected family".into())),
        };
        vertices.push(VertexVerdict { vertex: v, i: cell.i, j: cell.j, verdict, reason });
    }
    MembershipReport { vertices }
}

/// Number of vertical edges of a patch, used by callers that report sizes.
pub fn vertical_edges(patch: &GraphPatch) -> usize {
    patch.edge_count(EdgeKind::Vertical)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pq_images() {
        let s = pq_substitution(5, 5).unwrap();
        assert_eq!(s.format_word(s.image(0)), "YWWYW");
        assert_eq!(s.format_word(s.image(1)), "YWWYWWYW");
        let s = pq_substitution(8, 8).unwrap();
        assert_eq!((s.image(0).len(), s.image(1).len()), (29, 35));
        let s = pq_substitution(5, 6).unwrap();
        assert_eq!((s.image(0).len(), s.image(1).len()), (8, 11));
        assert!(matches!(pq_substitution(4, 5), Err(PqError::BadParameters(_))));
    }

    #[test]
    fn horizontal_type_examples() {
        let dec = decorate(&pq_substitution(5, 5).unwrap()).unwrap();
        let (y, w) = (dec.y, dec.w);
        // Y W W Y inside sigma(W) = YWWYWWYW
        assert!(horizontal_type(&dec.base, dec.y, &[1, 2, 3, 4], w, 5));
        assert!(horizontal_type(&dec.base, dec.y, &[4, 5, 6, 7], w, 5));
        // last Y W of sigma(Y) then the first child of the next letter
        assert!(horizontal_type(&dec.base, dec.y, &[4, 5, 1], y, 5));
        assert!(!horizontal_type(&dec.base, dec.y, &[1, 2], y, 5));
        assert!(!horizontal_type(&dec.base, dec.y, &[1, 2, 4, 5], w, 5));
        assert!(!horizontal_type(&dec.base, dec.y, &[2, 3, 4, 5], w, 5));
    }
}
