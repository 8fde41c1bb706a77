//! Orbit graphs of finite windows: row and production edges, faces between
//! consecutive rows, galleries, reduction, {p,q} checks, patch periods and
//! basepointed patterns with a canonical form.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbit::OrbitWindow;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex ({i}, {j}) is too close to the patch boundary")]
    BoundaryVertex { i: i64, j: i64 },
    #[error("no vertex at ({i}, {j})")]
    NoSuchVertex { i: i64, j: i64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    Horizontal,
    Vertical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchVertex {
    pub i: i64,
    pub j: i64,
    pub label: usize,
}

/// Horizontal edges join `a` to its right neighbour `b`; vertical edges
/// join the child `a` to its parent `b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PatchEdge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphPatch {
    pub vertices: Vec<PatchVertex>,
    /// Names of the label ids used by `vertices`.
    pub label_names: Vec<String>,
    pub edges: Vec<PatchEdge>,
    /// Faces as cyclic vertex lists: the lower row left to right, then the
    /// upper row right to left.
    pub faces: Vec<Vec<usize>>,
    /// Distance (in the unreduced graph) to a vertex whose neighbourhood is
    /// cut by the window.
    pub boundary_distance: Vec<u32>,
    pub reduced: bool,
    /// Parent of each vertex in the window, when present.
    pub parent: Vec<Option<usize>>,
}

impl GraphPatch {
    pub fn index_of(&self, i: i64, j: i64) -> Option<usize> {
        // rows are stored contiguously in order, so a scan of the row start
        // table is enough
        self.vertices.iter().position(|v| v.i == i && v.j == j)
    }

    pub fn coordinates(&self) -> HashMap<(i64, i64), usize> {
        self.vertices.iter().enumerate().map(|(k, v)| ((v.i, v.j), k)).collect()
    }

    pub fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degree(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertices.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn is_interior(&self, v: usize, radius: u32) -> bool {
        self.boundary_distance[v] >= radius
    }

    pub fn label_name(&self, v: usize) -> &str {
        &self.label_names[self.vertices[v].label]
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Faces containing `v`.
    pub fn faces_at(&self, v: usize) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| self.faces[f].contains(&v)).collect()
    }
}

/// Vertices are the window cells; horizontal edges join row neighbours and
/// vertical edges join each cell to its parent.
pub fn build_orbit_graph(window: &OrbitWindow, label_names: &[String]) -> GraphPatch {
    let mut vertices = Vec::new();
    let mut starts = Vec::new();
    for (r, row) in window.rows.iter().enumerate() {
        starts.push(vertices.len());
        for (t, &l) in row.letters.iter().enumerate() {
            vertices.push(PatchVertex { i: window.i_lo + r as i64, j: row.j_lo + t as i64, label: l });
        }
    }
    let mut edges = Vec::new();
    let mut parent = vec![None; vertices.len()];
    for (r, row) in window.rows.iter().enumerate() {
        for t in 1..row.len() {
            edges.push(PatchEdge { a: starts[r] + t - 1, b: starts[r] + t, kind: EdgeKind::Horizontal });
        }
        if r > 0 {
            for (t, &pt) in window.parents[r - 1].iter().enumerate() {
                let child = starts[r] + t;
                let par = starts[r - 1] + pt;
                edges.push(PatchEdge { a: child, b: par, kind: EdgeKind::Vertical });
                parent[child] = Some(par);
            }
        }
    }
    // cells whose neighbourhood the window cuts
    let mut boundary = vec![false; vertices.len()];
    let last = window.rows.len().saturating_sub(1);
    for (r, row) in window.rows.iter().enumerate() {
        for t in 0..row.len() {
            let cut = r == 0 || r == last || t == 0 || t + 1 == row.len() || !row.core[t];
            boundary[starts[r] + t] = cut;
        }
    }
    let mut patch = GraphPatch {
        vertices,
        label_names: label_names.to_vec(),
        edges,
        faces: Vec::new(),
        boundary_distance: Vec::new(),
        reduced: false,
        parent,
    };
    patch.boundary_distance = distances_from(&patch.neighbours(), &boundary);
    patch.faces = strip_faces(&patch);
    patch
}

fn distances_from(adj: &[Vec<usize>], sources: &[bool]) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for (v, &s) in sources.iter().enumerate() {
        if s {
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == u32::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Faces between consecutive rows: one for each pair of consecutive lower
/// cells that keep a vertical edge.
fn strip_faces(patch: &GraphPatch) -> Vec<Vec<usize>> {
    let coords = patch.coordinates();
    let mut kept: BTreeMap<(i64, i64), usize> = BTreeMap::new(); // (row, col) of child -> parent
    for e in &patch.edges {
        if e.kind == EdgeKind::Vertical {
            let c = &patch.vertices[e.a];
            kept.insert((c.i, c.j), e.b);
        }
    }
    let mut faces = Vec::new();
    let mut by_row: BTreeMap<i64, Vec<(i64, usize)>> = BTreeMap::new();
    for ((i, j), p) in kept {
        by_row.entry(i).or_default().push((j, p));
    }
    for (i, list) in by_row {
        for pair in list.windows(2) {
            let (j1, p1) = pair[0];
            let (j2, p2) = pair[1];
            let mut face: Vec<usize> = (j1..=j2).map(|j| coords[&(i, j)]).collect();
            let (pi, pj1, pj2) = (patch.vertices[p1].i, patch.vertices[p1].j, patch.vertices[p2].j);
            for j in (pj1..=pj2).rev() {
                match coords.get(&(pi, j)) {
                    Some(&v) => face.push(v),
                    None => {
                        face.clear();
                        break;
                    }
                }
            }
            if !face.is_empty() {
                faces.push(face);
            }
        }
    }
    faces
}

impl GraphPatch {
    pub fn is_triangle(&self, face: &[usize]) -> bool {
        face.len() == 3
    }
}

/// A maximal chain of quadrilaterals glued along row edges, listed from the
/// top down.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gallery {
    pub faces: Vec<usize>,
}

fn row_edges_of_face(patch: &GraphPatch, face: &[usize]) -> ((usize, usize), (usize, usize)) {
    // lower edge spans the first two entries, upper edge the last two
    let n = face.len();
    let lower = (face[0], face[1]);
    let upper = (face[n - 1], face[n - 2]);
    let _ = patch;
    (lower, upper)
}

/// Quadrilateral galleries of an unreduced patch.
pub fn galleries(patch: &GraphPatch) -> Vec<Gallery> {
    let quads: Vec<usize> = (0..patch.faces.len()).filter(|&f| patch.faces[f].len() == 4).collect();
    let mut by_upper: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in &quads {
        let (_, upper) = row_edges_of_face(patch, &patch.faces[f]);
        by_upper.insert(upper, f);
    }
    let mut below: HashMap<usize, usize> = HashMap::new();
    let mut has_above: BTreeSet<usize> = BTreeSet::new();
    for &f in &quads {
        let (lower, _) = row_edges_of_face(patch, &patch.faces[f]);
        if let Some(&g) = by_upper.get(&lower) {
            below.insert(f, g);
            has_above.insert(g);
        }
    }
    let mut out = Vec::new();
    for &f in &quads {
        if has_above.contains(&f) {
            continue;
        }
        let mut chain = vec![f];
        let mut cur = f;
        while let Some(&g) = below.get(&cur) {
            chain.push(g);
            cur = g;
        }
        out.push(Gallery { faces: chain });
    }
    out
}

/// Galleries whose top quadrilateral hangs from the row edge of triangle
/// `t`.
pub fn galleries_at_triangle(patch: &GraphPatch, all: &[Gallery], t: usize) -> usize {
    let face = &patch.faces[t];
    let row_edge = (face[0], face[1]);
    all.iter()
        .filter(|g| g.faces.iter().any(|&f| row_edges_of_face(patch, &patch.faces[f]).1 == row_edge))
        .count()
}

/// Removes every vertical edge whose child is labeled W under `is_w`.
pub fn reduce(patch: &GraphPatch, is_w: impl Fn(usize) -> bool) -> GraphPatch {
    let mut out = patch.clone();
    out.edges.retain(|e| e.kind == EdgeKind::Horizontal || !is_w(patch.vertices[e.a].label));
    out.reduced = true;
    out.faces = strip_faces(&out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PqReport {
    pub p: usize,
    pub q: usize,
    pub interior_vertices: usize,
    pub interior_faces: usize,
    /// `(i, j, degree)` of interior vertices with the wrong degree.
    pub bad_vertices: Vec<(i64, i64, usize)>,
    /// `(i, j, length)` of the first vertex of interior faces that are not p-cycles.
    pub bad_faces: Vec<(i64, i64, usize)>,
}

impl PqReport {
    pub fn passed(&self) -> bool {
        self.bad_vertices.is_empty() && self.bad_faces.is_empty() && self.interior_vertices > 0
    }
}

pub const VERTEX_RADIUS: u32 = 1;
pub const FACE_RADIUS: u32 = 2;

/// Radius needed for every p-cycle through a vertex to lie in the patch.
pub fn pattern_radius(p: usize) -> u32 {
    (p / 2) as u32 + 1
}

pub fn check_pq(patch: &GraphPatch, p: usize, q: usize) -> PqReport {
    let deg = patch.degree();
    let mut report = PqReport { p, q, interior_vertices: 0, interior_faces: 0, bad_vertices: Vec::new(), bad_faces: Vec::new() };
    for v in 0..patch.vertices.len() {
        if patch.is_interior(v, VERTEX_RADIUS) {
            report.interior_vertices += 1;
            if deg[v] != q {
                report.bad_vertices.push((patch.vertices[v].i, patch.vertices[v].j, deg[v]));
            }
        }
    }
    for face in &patch.faces {
        if face.iter().all(|&v| patch.is_interior(v, FACE_RADIUS)) {
            report.interior_faces += 1;
            if face.len() != p {
                let v = &patch.vertices[face[0]];
                report.bad_faces.push((v.i, v.j, face.len()));
            }
        }
    }
    report
}

/// A candidate patch map `(i, j) -> (i + rows, j + cols)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Shift {
    pub rows: i64,
    pub cols: i64,
}

/// Shifts by `0..=max_pi` rows whose top row overlaps the shifted row in at
/// least half of the shorter one.
pub fn candidate_shifts(patch: &GraphPatch, max_pi: usize) -> Vec<Shift> {
    let mut rows: BTreeMap<i64, (i64, i64)> = BTreeMap::new();
    for v in &patch.vertices {
        let e = rows.entry(v.i).or_insert((v.j, v.j));
        e.0 = e.0.min(v.j);
        e.1 = e.1.max(v.j);
    }
    let Some((&top, &(lo, hi))) = rows.iter().next() else { return Vec::new() };
    let mut out = Vec::new();
    for pi in 0..=max_pi as i64 {
        let Some(&(lo2, hi2)) = rows.get(&(top + pi)) else { continue };
        let need = ((hi - lo + 1).min(hi2 - lo2 + 1) + 1) / 2;
        for s in (lo2 - hi)..=(hi2 - lo) {
            let overlap = (hi + s).min(hi2) - (lo + s).max(lo2) + 1;
            if overlap >= need {
                out.push(Shift { rows: pi, cols: s });
            }
        }
    }
    out
}

/// Shifts that preserve labels and edges wherever both ends of the map lie
/// in the patch, and map at least one vertex.
pub fn patch_periods(patch: &GraphPatch, candidates: &[Shift]) -> Vec<Shift> {
    let coords = patch.coordinates();
    let edge_set: BTreeSet<(usize, usize, EdgeKind)> =
        patch.edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b), e.kind)).collect();
    let image = |v: usize, s: Shift| {
        let x = &patch.vertices[v];
        coords.get(&(x.i + s.rows, x.j + s.cols)).copied()
    };
    candidates
        .iter()
        .copied()
        .filter(|&s| {
            let mut mapped = 0;
            for v in 0..patch.vertices.len() {
                if let Some(w) = image(v, s) {
                    mapped += 1;
                    if patch.label_names[patch.vertices[v].label] != patch.label_names[patch.vertices[w].label] {
                        return false;
                    }
                }
            }
            if mapped == 0 {
                return false;
            }
            patch.edges.iter().all(|e| match (image(e.a, s), image(e.b, s)) {
                (Some(a), Some(b)) => edge_set.contains(&(a.min(b), a.max(b), e.kind)),
                _ => true,
            })
        })
        .collect()
}

/// Finite labeled graph with a basepoint (local index 0 after extraction).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    pub basepoint: usize,
}

impl Pattern {
    pub fn is_connected(&self) -> bool {
        if self.labels.is_empty() {
            return false;
        }
        let mut adj = vec![Vec::new(); self.labels.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.labels.len()];
        let mut stack = vec![self.basepoint];
        seen[self.basepoint] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Same graph with labels replaced through `f`.
    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Pattern {
        Pattern { labels: self.labels.iter().map(|l| f(l)).collect(), ..self.clone() }
    }
}

/// Union of the faces containing `v`, with patch vertex ids for each local
/// vertex.
pub fn extract_pattern_with_ids(patch: &GraphPatch, v: usize, radius: u32) -> Result<(Pattern, Vec<usize>), GraphError> {
    let x = &patch.vertices[v];
    let boundary = || GraphError::BoundaryVertex { i: x.i, j: x.j };
    if !patch.is_interior(v, radius) {
        return Err(boundary());
    }
    let faces = patch.faces_at(v);
    if faces.len() != patch.degree()[v] {
        return Err(boundary());
    }
    let mut ids = vec![v];
    let mut pairs = BTreeSet::new();
    for &f in &faces {
        let face = &patch.faces[f];
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            pairs.insert((a.min(b), a.max(b)));
            if !ids.contains(&a) {
                ids.push(a);
            }
        }
    }
    ids[1..].sort_unstable();
    let local: HashMap<usize, usize> = ids.iter().enumerate().map(|(k, &g)| (g, k)).collect();
    let labels = ids.iter().map(|&g| patch.label_name(g).to_string()).collect();
    let edges = pairs.into_iter().map(|(a, b)| (local[&a], local[&b])).collect();
    Ok((Pattern { labels, edges, basepoint: 0 }, ids))
}

pub fn extract_pattern(patch: &GraphPatch, v: usize, radius: u32) -> Result<Pattern, GraphError> {
    extract_pattern_with_ids(patch, v, radius).map(|(p, _)| p)
}

/// Canonical encoding of a basepointed labeled graph: equal encodings iff
/// there is a label- and basepoint-preserving isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalPattern {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

fn refine(adj: &[Vec<usize>], colors: &mut Vec<usize>) {
    loop {
        let classes = colors.iter().collect::<BTreeSet<_>>().len();
        let mut sigs: Vec<(usize, Vec<usize>)> = (0..adj.len())
            .map(|v| {
                let mut n: Vec<usize> = adj[v].iter().map(|&w| colors[w]).collect();
                n.sort_unstable();
                (colors[v], n)
            })
            .collect();
        let mut sorted = sigs.clone();
        sorted.sort();
        sorted.dedup();
        let rank: BTreeMap<&(usize, Vec<usize>), usize> = sorted.iter().enumerate().map(|(k, s)| (s, k)).collect();
        let next: Vec<usize> = sigs.iter().map(|s| rank[s]).collect();
        sigs.clear();
        let new_classes = sorted.len();
        *colors = next;
        if new_classes == classes {
            return;
        }
    }
}

fn encode(pattern: &Pattern, order: &[usize]) -> CanonicalPattern {
    // order[v] is the new index of v
    let mut inverse = vec![0; order.len()];
    for (v, &k) in order.iter().enumerate() {
        inverse[k] = v;
    }
    let labels = inverse.iter().map(|&v| pattern.labels[v].clone()).collect();
    let mut edges: Vec<(usize, usize)> = pattern
        .edges
        .iter()
        .map(|&(a, b)| (order[a].min(order[b]), order[a].max(order[b])))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    CanonicalPattern { labels, edges }
}

fn search(pattern: &Pattern, adj: &[Vec<usize>], colors: Vec<usize>, best: &mut Option<CanonicalPattern>) {
    let mut colors = colors;
    refine(adj, &mut colors);
    let mut counts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (v, &c) in colors.iter().enumerate() {
        counts.entry(c).or_default().push(v);
    }
    let Some((&cell, members)) = counts.iter().find(|(_, m)| m.len() > 1) else {
        let code = encode(pattern, &colors);
        if best.as_ref().is_none_or(|b| code < *b) {
            *best = Some(code);
        }
        return;
    };
    for &v in members {
        // split v off the cell: every color above the cell moves up by one
        let mut next: Vec<usize> = colors.iter().map(|&c| if c > cell { c + 1 } else { c }).collect();
        next[v] = cell + 1;
        for (w, c) in next.iter_mut().enumerate() {
            if w != v && colors[w] == cell {
                *c = cell;
            }
        }
        search(pattern, adj, next, best);
    }
}

pub fn canonical_form(pattern: &Pattern) -> CanonicalPattern {
    let n = pattern.labels.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &pattern.edges {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    // initial colors: basepoint first, then labels in sorted order
    let mut names: Vec<&String> = pattern.labels.iter().collect();
    names.sort();
    names.dedup();
    let colors: Vec<usize> = (0..n)
        .map(|v| {
            if v == pattern.basepoint {
                0
            } else {
                1 + names.binary_search(&&pattern.labels[v]).unwrap()
            }
        })
        .collect();
    let mut best = None;
    search(pattern, &adj, colors, &mut best);
    best.unwrap_or(CanonicalPattern { labels: Vec::new(), edges: Vec::new() })
}
