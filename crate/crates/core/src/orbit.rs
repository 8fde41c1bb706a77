//! Finite orbit windows: seeded orbits of one substitution system, the
//! overlay orbit built from two of them, validation, period search and the
//! growth-exponent report.

use std::cmp::Ordering;
use std::ops::Range;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::overlay::{self, OverlayError, OverlayLetter, OverlaySystem};
use crate::real::{Real, RealError};
use crate::substitution::{SubstError, SubstitutionSystem, Sym, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrbitError {
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error(transparent)]
    Overlay(#[from] OverlayError),
    #[error(transparent)]
    Real(#[from] RealError),
    #[error("degenerate offset: exact tie at row {row}{}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    DegenerateOffset { row: i64, column: Option<i64> },
    #[error("window too narrow: {0}")]
    WindowTooNarrow(String),
    #[error("constructed letter {letter} at row {row}, column {column} is not in the overlay alphabet")]
    LetterNotInAlphabet { row: i64, column: i64, letter: String },
    #[error("bad parameters: {0}")]
    BadParameters(String),
}

/// One row of a window: letters with the global index of the first one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRow {
    pub j_lo: i64,
    pub letters: Vec<usize>,
    /// Cells whose full production lies in the next row of the window.
    pub core: Vec<bool>,
    /// Letter counts of the cells from column 0 up to `j_lo`, negated when
    /// `j_lo < 0`. Empty when the row holds column 0, in which case the
    /// counts follow from the letters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<i64>,
}

impl WindowRow {
    pub fn new(j_lo: i64, letters: Vec<usize>, core: Vec<bool>) -> Self {
        Self { j_lo, letters, core, origin: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn j_hi(&self) -> i64 {
        self.j_lo + self.letters.len() as i64 - 1
    }

    pub fn local(&self, j: i64) -> Option<usize> {
        let t = j - self.j_lo;
        (t >= 0 && (t as usize) < self.letters.len()).then_some(t as usize)
    }

    pub fn core_range(&self) -> Option<Range<usize>> {
        let first = self.core.iter().position(|&c| c)?;
        let last = self.core.iter().rposition(|&c| c)?;
        Some(first..last + 1)
    }

    /// Signed letter counts of the cells between column 0 and cell `t`
    /// (local), over an alphabet of `n` letters. `None` when the row neither
    /// stores its origin nor holds column 0.
    pub fn counts_to(&self, n: usize, t: usize) -> Option<Vec<i64>> {
        let mut counts = if !self.origin.is_empty() {
            self.origin.clone()
        } else if self.j_lo == 0 {
            vec![0; n]
        } else {
            let zero = self.local(0)?;
            let mut c = vec![0; n];
            for &l in &self.letters[..zero] {
                c[l] -= 1;
            }
            c
        };
        for &l in &self.letters[..t] {
            counts[l] += 1;
        }
        Some(counts)
    }
}

/// Rows `i_lo, i_lo + 1, ...` with parent maps between consecutive rows.
/// Column indices are global: the first child of cell `j` of row `i` has
/// index `|sigma(cells 0..j)|` in row `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitWindow {
    pub i_lo: i64,
    pub rows: Vec<WindowRow>,
    /// `parents[r][t]` is the local index in row `r` of the parent of cell
    /// `t` of row `r + 1`.
    pub parents: Vec<Vec<usize>>,
}

impl OrbitWindow {
    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: i64) -> Option<&WindowRow> {
        let r = i - self.i_lo;
        (r >= 0).then(|| self.rows.get(r as usize)).flatten()
    }

    pub fn i_hi(&self) -> i64 {
        self.i_lo + self.rows.len() as i64 - 1
    }

    /// Child ranges (local indices in row `r + 1`) of every cell of row `r`.
    pub fn child_ranges(&self, r: usize) -> Vec<Option<Range<usize>>> {
        let mut out: Vec<Option<Range<usize>>> = vec![None; self.rows[r].len()];
        if let Some(ps) = self.parents.get(r) {
            for (t, &p) in ps.iter().enumerate() {
                out[p] = Some(match out[p].take() {
                    None => t..t + 1,
                    Some(range) => range.start..t + 1,
                });
            }
        }
        out
    }

    /// Replaces every letter through `f`.
    pub fn map_letters(&self, f: impl Fn(usize) -> usize) -> OrbitWindow {
        let mut out = self.clone();
        for row in &mut out.rows {
            for l in &mut row.letters {
                *l = f(*l);
            }
        }
        out
    }
}

/// The letter `a` and power `n` with `a` in the interior of `sigma^n(a)`,
/// plus the chosen interior occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedChoice {
    pub letter: Sym,
    pub power: usize,
    /// Offset of the fixed occurrence inside `sigma^power(letter)`.
    pub offset: usize,
}

/// Minimal `n` (then first letter) such that a letter occurs in the interior
/// of its own `n`-th image; `occurrence` picks among interior occurrences,
/// 0 being the leftmost.
pub fn find_seed(sys: &SubstitutionSystem, occurrence: usize) -> Result<SeedChoice, OrbitError> {
    if !sys.is_expansive()? {
        return Err(SubstError::NotExpansive.into());
    }
    let limit = (sys.size() + 1) * (sys.size() + 1) + 4;
    for n in 1..=limit {
        for a in 0..sys.size() {
            let img = sys.apply(&[a], n)?;
            if img.len() < 3 {
                continue;
            }
            let hits: Vec<usize> = (1..img.len() - 1).filter(|&t| img[t] == a).collect();
            if !hits.is_empty() {
                let offset = *hits.get(occurrence).unwrap_or(hits.last().unwrap());
                return Ok(SeedChoice { letter: a, power: n, offset });
            }
        }
    }
    Err(OrbitError::BadParameters("no self-interior letter found".into()))
}

/// A growing chunk of the two-sided fixed point of `sigma^n` through the
/// seed occurrence.
struct FixedPoint<'a> {
    sys: &'a SubstitutionSystem,
    seed: SeedChoice,
    word: Word,
    center: usize,
}

impl<'a> FixedPoint<'a> {
    fn new(sys: &'a SubstitutionSystem, seed: SeedChoice) -> Self {
        Self { sys, word: vec![seed.letter], center: 0, seed }
    }

    fn grow(&mut self) {
        let left = self.sys.apply(&self.word[..self.center], self.seed.power).unwrap();
        self.center = left.len() + self.seed.offset;
        self.word = self.sys.apply(&self.word, self.seed.power).unwrap();
    }

    /// Grows until `left` cells exist before the center and `right` after.
    fn ensure(&mut self, left: usize, right: usize) {
        while self.center < left || self.word.len() - self.center - 1 < right {
            self.grow();
        }
    }

    fn slice(&mut self, left: usize, right: usize) -> Word {
        self.ensure(left, right);
        self.word[self.center - left..=self.center + right].to_vec()
    }

    /// Grows until the weighted extents on each side reach the targets.
    fn ensure_weight(&mut self, weights: &[f64], left: f64, right: f64) {
        loop {
            let l: f64 = self.word[..self.center].iter().map(|&s| weights[s]).sum();
            let r: f64 = self.word[self.center..].iter().map(|&s| weights[s]).sum();
            if l >= left && r >= right {
                return;
            }
            self.grow();
        }
    }
}

/// Shape of a seeded window.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub rows: usize,
    /// Cells in the top row, centered on the fixed occurrence.
    pub top_width: usize,
    /// Lower rows hold the full productions of a run of parents around
    /// column 0 with at most this many cells.
    pub max_width: usize,
    pub occurrence: usize,
}

impl Default for SeedSpec {
    fn default() -> Self {
        Self { rows: 8, top_width: 24, max_width: 160, occurrence: 0 }
    }
}

/// Seeded window of a single system: the top row is a chunk of the fixed
/// point of `sigma^n` centered on the seed occurrence; each lower row holds
/// the productions of a contiguous run of parents around column 0.
pub fn seed_orbit(sys: &SubstitutionSystem, spec: &SeedSpec) -> Result<(OrbitWindow, SeedChoice), OrbitError> {
    if spec.rows < 2 || spec.top_width == 0 || spec.max_width == 0 {
        return Err(OrbitError::BadParameters("need at least two rows and positive widths".into()));
    }
    let seed = find_seed(sys, spec.occurrence)?;
    let left = (spec.top_width - 1) / 2;
    let right = spec.top_width - 1 - left;
    let mut fp = FixedPoint::new(sys, seed.clone());
    let top = fp.slice(left, right);
    let mut window = OrbitWindow {
        i_lo: 0,
        rows: vec![WindowRow::new(-(left as i64), top, vec![false; spec.top_width])],
        parents: Vec::new(),
    };
    for _ in 1..spec.rows {
        let last = window.rows.last().unwrap();
        let range = band_around_zero(sys, last, spec.max_width);
        push_productions(sys, &mut window, range);
    }
    Ok((window, seed))
}

/// Largest run of parents containing column 0 whose productions fit in
/// `cap` cells, grown alternately to the right and left.
fn band_around_zero(sys: &SubstitutionSystem, row: &WindowRow, cap: usize) -> Range<usize> {
    let zero = row.local(0).unwrap_or(0);
    let size = |t: usize| sys.image(row.letters[t]).len();
    let (mut lo, mut hi) = (zero, zero + 1);
    let mut total = size(zero);
    loop {
        let mut grew = false;
        if hi < row.len() && total + size(hi) <= cap {
            total += size(hi);
            hi += 1;
            grew = true;
        }
        if lo > 0 && total + size(lo - 1) <= cap {
            total += size(lo - 1);
            lo -= 1;
            grew = true;
        }
        if !grew {
            return lo..hi;
        }
    }
}

/// Appends the row made of the productions of `parents` (a run of local
/// indices of the current last row) and marks those parents as core.
fn push_productions(sys: &SubstitutionSystem, window: &mut OrbitWindow, parents: Range<usize>) {
    let last = window.rows.last_mut().unwrap();
    let before = last.counts_to(sys.size(), parents.start).expect("row origin is known");
    let mut origin = vec![0i64; sys.size()];
    for (a, &count) in before.iter().enumerate() {
        if count != 0 {
            for &b in sys.image(a) {
                origin[b] += count;
            }
        }
    }
    let j_lo = origin.iter().sum();
    let mut letters = Vec::new();
    let mut parent_of = Vec::new();
    for t in parents.clone() {
        let img = sys.image(last.letters[t]);
        letters.extend_from_slice(img);
        parent_of.extend(std::iter::repeat_n(t, img.len()));
        last.core[t] = true;
    }
    let n = letters.len();
    window.rows.push(WindowRow { j_lo, letters, core: vec![false; n], origin });
    window.parents.push(parent_of);
}

/// Structural checks on a window over a plain substitution system.
#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind} at row {row}, column {column}: {detail}")]
pub struct Violation {
    pub kind: String,
    pub row: i64,
    pub column: i64,
    pub detail: String,
}

fn violation(kind: &str, row: i64, column: i64, detail: impl Into<String>) -> Violation {
    Violation { kind: kind.into(), row, column, detail: detail.into() }
}

/// Parent maps are monotone and onto the core; every core cell's children
/// are exactly its production; only boundary cells may be partially
/// produced; the first child of the first parent sits at the global index
/// given by the row origins.
pub fn validate_structure(
    window: &OrbitWindow,
    produce: impl Fn(usize) -> Vec<usize>,
) -> Result<(), Violation> {
    if window.parents.len() + 1 != window.rows.len() && !(window.rows.is_empty() && window.parents.is_empty()) {
        return Err(violation("shape", window.i_lo, 0, "parent map count does not match rows"));
    }
    for (r, ps) in window.parents.iter().enumerate() {
        let i = window.i_lo + r as i64;
        let upper = &window.rows[r];
        let lower = &window.rows[r + 1];
        if ps.len() != lower.len() {
            return Err(violation("shape", i + 1, lower.j_lo, "parent map length differs from row length"));
        }
        for t in 0..ps.len() {
            if ps[t] >= upper.len() {
                return Err(violation("parent", i + 1, lower.j_lo + t as i64, "parent index outside row"));
            }
            if t > 0 && ps[t] < ps[t - 1] {
                return Err(violation("monotone", i + 1, lower.j_lo + t as i64, "parent map decreases"));
            }
        }
        let ranges = window.child_ranges(r);
        for (t, range) in ranges.iter().enumerate() {
            let j = upper.j_lo + t as i64;
            let expected = produce(upper.letters[t]);
            match range {
                None if upper.core[t] => return Err(violation("onto", i, j, "core cell has no children")),
                None => {}
                Some(range) => {
                    let kids = &lower.letters[range.clone()];
                    if upper.core[t] {
                        if kids != expected.as_slice() {
                            return Err(violation("production", i, j, "children differ from the production"));
                        }
                    } else {
                        let boundary_left = range.start == 0 && expected.ends_with(kids);
                        let boundary_right = range.end == lower.len() && expected.starts_with(kids);
                        if !(boundary_left || boundary_right) {
                            return Err(violation("production", i, j, "partial production away from the boundary"));
                        }
                    }
                }
            }
        }
        if let Some(t) = (0..upper.len()).find(|&t| upper.core[t]) {
            let letters = upper.letters.iter().chain(&lower.letters).copied().max().map_or(0, |m| m + 1);
            if let Some(counts) = upper.counts_to(letters, t) {
                let first: i64 = counts.iter().enumerate().map(|(a, &c)| c * produce(a).len() as i64).sum();
                let start = ranges[t].as_ref().map_or(0, |r| r.start) as i64;
                if lower.j_lo + start != first {
                    return Err(violation("index", i + 1, first, "children are not at the global index of their parent"));
                }
            }
        }
    }
    Ok(())
}

pub fn validate_base(sys: &SubstitutionSystem, window: &OrbitWindow) -> Result<(), Violation> {
    for (r, row) in window.rows.iter().enumerate() {
        if let Some(t) = row.letters.iter().position(|&l| l >= sys.size()) {
            return Err(violation("letter", window.i_lo + r as i64, row.j_lo + t as i64, "unknown letter"));
        }
        if row.core.len() != row.letters.len() {
            return Err(violation("shape", window.i_lo + r as i64, row.j_lo, "core marks differ in length"));
        }
    }
    validate_structure(window, |a| sys.image(a).to_vec())
}

/// `Delta_i` per row together with whether `gamma^Delta = e^d lambda^i`
/// held exactly.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaSequence {
    pub i_lo: i64,
    /// `Delta_i` for `i = i_lo ..= i_hi + 1`.
    pub big: Vec<i64>,
    /// `delta_i = Delta_{i+1} - Delta_i`.
    pub small: Vec<i64>,
    pub ties: Vec<bool>,
}

fn real_of(q: &BigRational) -> Real {
    Real::from_rational(q.clone())
}

/// `Delta_i` with `gamma^Delta <= e^d lambda^i < gamma^(Delta + 1)`, decided
/// without logarithms.
pub fn big_delta(lambda: &Real, gamma: &Real, d: &BigRational, i: i64) -> Result<(i64, bool), OrbitError> {
    let x = &Real::exp_rational(d) * &lambda.powi(i as i32);
    let guess = (d.to_f64().unwrap_or(0.0) + i as f64 * lambda.to_f64().ln()) / gamma.to_f64().ln();
    let mut k = guess.floor() as i64;
    let cmp = |k: i64| -> Result<Ordering, OrbitError> {
        gamma.powi(k as i32).cmp_real(&x).map_err(|_| OrbitError::DegenerateOffset { row: i, column: None })
    };
    while cmp(k)? == Ordering::Greater {
        k -= 1;
    }
    while cmp(k + 1)? != Ordering::Greater {
        k += 1;
    }
    Ok((k, cmp(k)? == Ordering::Equal))
}

pub fn delta_sequence(lambda: &Real, gamma: &Real, d: &BigRational, i_lo: i64, i_hi: i64) -> Result<DeltaSequence, OrbitError> {
    let k = overlay::compute_k(lambda, gamma)? as i64;
    let mut big = Vec::new();
    let mut ties = Vec::new();
    for i in i_lo..=i_hi + 1 {
        let (b, t) = big_delta(lambda, gamma, d, i)?;
        big.push(b);
        ties.push(t);
    }
    let small: Vec<i64> = big.windows(2).map(|w| w[1] - w[0]).collect();
    for (r, s) in small.iter().enumerate() {
        if *s != k && *s != k - 1 {
            return Err(OrbitError::BadParameters(format!("row {} spans {s} rows, expected {} or {k}", i_lo + r as i64, k - 1)));
        }
    }
    Ok(DeltaSequence { i_lo, big, small, ties })
}

/// Weighted prefix positions of a row: `scale * |row(0..j)|` with the sign
/// convention that cells left of column 0 have negative positions.
fn position_f64(weights: &[f64], row: &WindowRow, scale: f64, j: i64) -> f64 {
    let counts = row.counts_to(weights.len(), (j - row.j_lo) as usize).expect("row origin is known");
    counts.iter().zip(weights).map(|(&c, &w)| c as f64 * w).sum::<f64>() * scale
}

/// Per-row overlay geometry: offsets of every cell of the first system's row
/// and the index of the second system's tile under its left edge.
#[derive(Clone, Debug)]
pub struct RowGeometry {
    pub i: i64,
    pub big_delta: i64,
    pub small_delta: i64,
    pub j_lo: i64,
    /// `U^i_j` for every cell of the row, plus one entry for the right edge.
    pub u: Vec<Real>,
    pub v: Vec<Real>,
    pub w: Vec<Real>,
    /// Global index in row `Delta_i` of the second window, per cell plus the
    /// right edge.
    pub nabla: Vec<i64>,
}

/// Options for the overlay construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayOptions {
    /// Resolve exact ties toward the smaller index instead of failing.
    pub tie_left: bool,
    pub seed_a: SeedSpec,
    pub occurrence_b: usize,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        Self { tie_left: false, seed_a: SeedSpec::default(), occurrence_b: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct OverlayOrbit {
    /// Letters index into the overlay alphabet.
    pub window: OrbitWindow,
    pub geometry: Vec<RowGeometry>,
    pub deltas: DeltaSequence,
    pub base_a: OrbitWindow,
    pub base_b: OrbitWindow,
    pub seed_a: SeedChoice,
    pub seed_b: SeedChoice,
    pub c: BigRational,
    pub d: BigRational,
}

/// Indices `nabla` for the cells `js` of row `i` of the first window against
/// row `Delta_i` of the second: the tile whose left edge is at or before
/// `e^{-d} U^i_j + c` and whose right edge is at or after it.
pub fn nabla_indices(
    ov: &OverlaySystem,
    row_a: &WindowRow,
    i: i64,
    row_b: &WindowRow,
    big_delta: i64,
    c: &BigRational,
    d: &BigRational,
    tie_left: bool,
) -> Result<(Vec<i64>, Vec<Real>, Vec<Real>, Vec<Real>), OrbitError> {
    let scale_a = ov.lambda.powi(-(i as i32));
    let scale_b = ov.gamma.powi(-(big_delta as i32));
    let shrink = Real::exp_rational(&-d.clone());
    let shift = real_of(c);
    let nb = ov.eta.weights.len();
    let mut counts_b = row_b.counts_to(nb, 0).ok_or_else(|| OrbitError::WindowTooNarrow("second row has no origin".into()))?;
    let mut counts_a = row_a
        .counts_to(ov.nu.weights.len(), 0)
        .ok_or_else(|| OrbitError::WindowTooNarrow("first row has no origin".into()))?;
    let mut t = row_b.j_lo;
    let mut out = Vec::with_capacity(row_a.len() + 1);
    let mut us = Vec::with_capacity(row_a.len() + 1);
    let mut vs = Vec::with_capacity(row_a.len() + 1);
    let mut ws = Vec::with_capacity(row_a.len() + 1);
    let mut left = &scale_b * &ov.eta.length_of_counts(&counts_b);
    counts_b[row_b.letters[0]] += 1;
    let mut right = &scale_b * &ov.eta.length_of_counts(&counts_b);
    for j in row_a.j_lo..=row_a.j_hi() + 1 {
        let u = &scale_a * &ov.nu.length_of_counts(&counts_a);
        if j <= row_a.j_hi() {
            counts_a[row_a.letters[(j - row_a.j_lo) as usize]] += 1;
        }
        let target = &(&shrink * &u) + &shift;
        let degenerate = |_| OrbitError::DegenerateOffset { row: i, column: Some(j) };
        if out.is_empty() && target.cmp_real(&left).map_err(degenerate)? == Ordering::Less {
            return Err(OrbitError::WindowTooNarrow(format!("row {big_delta} starts right of cell ({i}, {j})")));
        }
        loop {
            match right.cmp_real(&target).map_err(degenerate)? {
                Ordering::Less => {
                    t += 1;
                    if t > row_b.j_hi() {
                        return Err(OrbitError::WindowTooNarrow(format!(
                            "row {big_delta} ends left of cell ({i}, {j})"
                        )));
                    }
                    counts_b[row_b.letters[(t - row_b.j_lo) as usize]] += 1;
                    left = right;
                    right = &scale_b * &ov.eta.length_of_counts(&counts_b);
                }
                Ordering::Equal if !tie_left => return Err(OrbitError::DegenerateOffset { row: i, column: Some(j) }),
                _ => break,
            }
        }
        if left.cmp_real(&target).map_err(degenerate)? == Ordering::Equal && !tie_left && t > row_b.j_lo {
            return Err(OrbitError::DegenerateOffset { row: i, column: Some(j) });
        }
        out.push(t);
        us.push(u);
        vs.push(left.clone());
        ws.push(right.clone());
    }
    Ok((out, us, vs, ws))
}

/// Second-system window whose rows `k_lo ..= k_hi` cover the given x-ranges
/// (in the unscaled coordinates of the overlay, f64 sizing only).
fn covering_window(
    sys: &SubstitutionSystem,
    eta: &[f64],
    gamma: f64,
    seed: SeedChoice,
    k_lo: i64,
    needs: &[(f64, f64)],
) -> Result<OrbitWindow, OrbitError> {
    let scale = |k: i64| gamma.powi(-(k as i32));
    let mut fp = FixedPoint::new(sys, seed);
    let (xl, xr) = needs[0];
    let s0 = scale(k_lo);
    fp.ensure_weight(eta, (-xl).max(0.0) / s0 + 1.0, xr.max(0.0) / s0 + 1.0);
    // count cells on each side
    let mut left = 0usize;
    let mut acc = 0.0;
    while acc * s0 < -xl {
        left += 1;
        acc += eta[fp.word[fp.center - left]];
    }
    let mut right = 0usize;
    let mut acc = eta[fp.word[fp.center]];
    while acc * s0 < xr {
        right += 1;
        acc += eta[fp.word[fp.center + right]];
    }
    let top = fp.slice(left, right);
    let n = top.len();
    let mut window = OrbitWindow {
        i_lo: k_lo,
        rows: vec![WindowRow::new(-(left as i64), top, vec![false; n])],
        parents: Vec::new(),
    };
    for r in 1..needs.len() {
        let (nl, nr) = needs[r];
        let row = window.rows.last().unwrap();
        let k = k_lo + r as i64 - 1;
        let s = scale(k);
        let mut first = None;
        let mut last = 0;
        let mut x0 = position_f64(eta, row, s, row.j_lo);
        for t in 0..row.len() {
            let x1 = x0 + eta[row.letters[t]] * s;
            if x1 >= nl && x0 <= nr {
                first.get_or_insert(t);
                last = t;
            }
            x0 = x1;
        }
        let first = first.ok_or_else(|| OrbitError::WindowTooNarrow(format!("second window row {k} misses the needed range")))?;
        push_productions(sys, &mut window, first..last + 1);
    }
    Ok(window)
}

/// Builds the overlay orbit over a seeded window of the first system and a
/// second-system window sized to cover it.
pub fn overlay_orbit(
    ov: &OverlaySystem,
    c: &BigRational,
    d: &BigRational,
    options: &OverlayOptions,
) -> Result<OverlayOrbit, OrbitError> {
    let (base_a, seed_a) = seed_orbit(&ov.sys_a, &options.seed_a)?;
    let seed_b = find_seed(&ov.sys_b, options.occurrence_b)?;
    let base_b = covering_window_for(ov, &base_a, &seed_b, c, d)?;
    build_overlay_orbit(ov, &base_a, &base_b, seed_a, seed_b, c, d, options.tie_left)
}

/// Sizes a second-system window for `base_a` at offsets `(c, d)`.
pub fn covering_window_for(
    ov: &OverlaySystem,
    base_a: &OrbitWindow,
    seed_b: &SeedChoice,
    c: &BigRational,
    d: &BigRational,
) -> Result<OrbitWindow, OrbitError> {
    let deltas = delta_sequence(&ov.lambda, &ov.gamma, d, base_a.i_lo, base_a.i_hi())?;
    let nu: Vec<f64> = ov.nu.weights.iter().map(Real::to_f64).collect();
    let eta: Vec<f64> = ov.eta.weights.iter().map(Real::to_f64).collect();
    let eta_max = eta.iter().cloned().fold(0.0, f64::max);
    let lambda = ov.lambda.to_f64();
    let gamma = ov.gamma.to_f64();
    let shrink = (-d.to_f64().unwrap()).exp();
    let cf = c.to_f64().unwrap();
    let k_lo = deltas.big[0];
    let k_hi = *deltas.big.iter().rev().nth(1).unwrap();
    let height = (k_hi - k_lo + 1) as usize;
    let mut needs = vec![(f64::INFINITY, f64::NEG_INFINITY); height];
    for (r, row) in base_a.rows.iter().enumerate() {
        let i = base_a.i_lo + r as i64;
        let s = lambda.powi(-(i as i32));
        let x0 = cf + shrink * position_f64(&nu, row, s, row.j_lo);
        let x1 = cf + shrink * position_f64(&nu, row, s, row.j_hi() + 1);
        let top = deltas.big[r];
        let bottom = if r + 1 < base_a.rows.len() { deltas.big[r + 1] } else { top };
        let margin = 3.0 * eta_max * gamma.powi(-(top as i32));
        for k in top..=bottom {
            let e = &mut needs[(k - k_lo) as usize];
            e.0 = e.0.min(x0 - margin);
            e.1 = e.1.max(x1 + margin);
        }
    }
    // every row must also cover what the rows below it need
    for r in (0..height.saturating_sub(1)).rev() {
        let below = needs[r + 1];
        let e = &mut needs[r];
        e.0 = e.0.min(below.0);
        e.1 = e.1.max(below.1);
    }
    covering_window(&ov.sys_b, &eta, gamma, seed_b.clone(), k_lo, &needs)
}

/// Descendant range (global indices in row `k + depth`) of tile `t` in row
/// `k` of a window.
fn descendants(window: &OrbitWindow, k: i64, t: i64, depth: i64) -> Option<(i64, i64)> {
    let mut r = (k - window.i_lo) as usize;
    let row = window.rows.get(r)?;
    let mut lo = row.local(t)?;
    let mut hi = lo;
    for _ in 0..depth {
        let ranges = window.child_ranges(r);
        if !window.rows[r].core[lo..=hi].iter().all(|&c| c) {
            return None;
        }
        let a = ranges[lo].clone()?;
        let b = ranges[hi].clone()?;
        lo = a.start;
        hi = b.end - 1;
        r += 1;
    }
    let row = &window.rows[r];
    Some((row.j_lo + lo as i64, row.j_lo + hi as i64))
}

fn b_slice(window: &OrbitWindow, k: i64, from: i64, to_exclusive: i64) -> Option<Word> {
    let row = window.row(k)?;
    if from == to_exclusive {
        return Some(Vec::new());
    }
    let a = row.local(from)?;
    let b = row.local(to_exclusive - 1)?;
    Some(row.letters[a..=b].to_vec())
}

/// The explicit overlay construction over given windows of both systems.
#[allow(clippy::too_many_arguments)]
pub fn build_overlay_orbit(
    ov: &OverlaySystem,
    base_a: &OrbitWindow,
    base_b: &OrbitWindow,
    seed_a: SeedChoice,
    seed_b: SeedChoice,
    c: &BigRational,
    d: &BigRational,
    tie_left: bool,
) -> Result<OverlayOrbit, OrbitError> {
    let deltas = delta_sequence(&ov.lambda, &ov.gamma, d, base_a.i_lo, base_a.i_hi())?;
    if !tie_left {
        if let Some(r) = deltas.ties.iter().position(|&t| t) {
            return Err(OrbitError::DegenerateOffset { row: base_a.i_lo + r as i64, column: None });
        }
    }
    let narrow = |what: String| OrbitError::WindowTooNarrow(what);
    let mut geometry = Vec::with_capacity(base_a.height());
    for (r, row) in base_a.rows.iter().enumerate() {
        let i = base_a.i_lo + r as i64;
        let k = deltas.big[r];
        let row_b = base_b.row(k).ok_or_else(|| narrow(format!("second window lacks row {k}")))?;
        let (nabla, u, v, w) = nabla_indices(ov, row, i, row_b, k, c, d, tie_left)?;
        geometry.push(RowGeometry {
            i,
            big_delta: k,
            small_delta: deltas.small[r],
            j_lo: row.j_lo,
            u,
            v,
            w,
            nabla,
        });
    }

    // letters for every cell whose own production and the next cell's are
    // in the window
    let mut letters: Vec<Vec<Option<usize>>> = Vec::new();
    for r in 0..base_a.height().saturating_sub(1) {
        let i = base_a.i_lo + r as i64;
        let row = &base_a.rows[r];
        let ranges = base_a.child_ranges(r);
        let next = &base_a.rows[r + 1];
        let g = &geometry[r];
        let g_next = &geometry[r + 1];
        let delta = deltas.small[r];
        let k = deltas.big[r];
        let k_next = deltas.big[r + 1];
        let mut row_letters = vec![None; row.len()];
        for t in 0..row.len().saturating_sub(1) {
            if !(row.core[t] && row.core[t + 1]) {
                continue;
            }
            let j = row.j_lo + t as i64;
            let n_j = next.j_lo + ranges[t].as_ref().unwrap().start as i64;
            let n_next = next.j_lo + ranges[t + 1].as_ref().unwrap().start as i64;
            let nabla_j = g.nabla[t];
            let nabla_next = g.nabla[t + 1];
            let nab = |n: i64| g_next.nabla[(n - g_next.j_lo) as usize];
            let beta = b_slice(base_b, k, nabla_j, nabla_next).ok_or_else(|| narrow(format!("beta at ({i}, {j})")))?;
            let (m_j, big_m_j) =
                descendants(base_b, k, nabla_j, delta).ok_or_else(|| narrow(format!("descendants at ({i}, {j})")))?;
            let (m_next, _) = descendants(base_b, k, nabla_next, delta)
                .ok_or_else(|| narrow(format!("descendants at ({i}, {})", j + 1)))?;
            let first_child = nab(n_j);
            let next_first_child = nab(n_next);
            if !(m_j <= first_child && first_child <= big_m_j) || next_first_child < m_next {
                return Err(OrbitError::DegenerateOffset { row: i, column: Some(j) });
            }
            let p = b_slice(base_b, k_next, m_j, first_child).ok_or_else(|| narrow(format!("p at ({i}, {j})")))?;
            let s = b_slice(base_b, k_next, m_next, next_first_child).ok_or_else(|| narrow(format!("s at ({i}, {j})")))?;
            let x = OverlayLetter { alpha: row.letters[t], beta, p, s, delta: delta as u32 };
            let id = ov.lookup(&x).ok_or_else(|| OrbitError::LetterNotInAlphabet {
                row: i,
                column: j,
                letter: ov.format_letter(&x),
            })?;
            row_letters[t] = Some(id);
        }
        letters.push(row_letters);
    }

    // overlay rows: computable cells, each below a row cell of the previous
    // overlay row
    let mut window = OrbitWindow { i_lo: base_a.i_lo, rows: Vec::new(), parents: Vec::new() };
    let mut previous: Option<Range<usize>> = None;
    for (r, row_letters) in letters.iter().enumerate() {
        let mut keep: Vec<usize> = (0..row_letters.len()).filter(|&t| row_letters[t].is_some()).collect();
        if let Some(prev) = &previous {
            let ps = &base_a.parents[r - 1];
            keep.retain(|&t| prev.contains(&ps[t]));
        }
        if keep.is_empty() {
            break;
        }
        let range = keep[0]..keep[keep.len() - 1] + 1;
        if range.len() != keep.len() {
            return Err(OrbitError::WindowTooNarrow(format!("row {} has gaps", base_a.i_lo + r as i64)));
        }
        let a_row = &base_a.rows[r];
        window.rows.push(WindowRow::new(
            a_row.j_lo + range.start as i64,
            range.clone().map(|t| row_letters[t].unwrap()).collect(),
            vec![false; range.len()],
        ));
        if let Some(prev) = &previous {
            let ps = &base_a.parents[r - 1];
            window.parents.push(range.clone().map(|t| ps[t] - prev.start).collect());
        }
        previous = Some(range);
    }
    // core: every child present
    for r in 0..window.parents.len() {
        let ranges = window.child_ranges(r);
        let upper_j = window.rows[r].j_lo;
        let a_r = (upper_j - base_a.rows[r].j_lo) as usize;
        let a_ranges = base_a.child_ranges(r);
        for t in 0..window.rows[r].len() {
            let full = a_ranges[a_r + t].as_ref().map(|x| x.len());
            window.rows[r].core[t] = ranges[t].as_ref().map(|x| x.len()) == full && full.is_some();
        }
    }
    Ok(OverlayOrbit {
        window,
        geometry,
        deltas,
        base_a: base_a.clone(),
        base_b: base_b.clone(),
        seed_a,
        seed_b,
        c: c.clone(),
        d: d.clone(),
    })
}

fn overlay_letters<'a>(ov: &'a OverlaySystem, ids: &[usize]) -> Vec<&'a OverlayLetter> {
    ids.iter().map(|&x| ov.letter(x)).collect()
}

/// Independent re-validation of an overlay window: row adjacency, constant
/// delta per row matching the geometry, production rules on core cells, the
/// `~N` relation between parent runs and their produced rows, and the
/// first-system projection as an orbit window.
pub fn validate_overlay(ov: &OverlaySystem, orbit: &OverlayOrbit) -> Result<(), Violation> {
    let window = &orbit.window;
    for (r, row) in window.rows.iter().enumerate() {
        let i = window.i_lo + r as i64;
        if let Some(t) = row.letters.iter().position(|&x| x >= ov.len()) {
            return Err(violation("letter", i, row.j_lo + t as i64, "not an alphabet letter"));
        }
        let xs = overlay_letters(ov, &row.letters);
        for t in 0..xs.len() {
            if xs[t].delta as i64 != orbit.deltas.small[r] {
                return Err(violation("delta", i, row.j_lo + t as i64, "delta differs from the row's"));
            }
            if t + 1 < xs.len() && !overlay::adjacent(xs[t], xs[t + 1]) {
                return Err(violation("adjacency", i, row.j_lo + t as i64, "s(x) != p(y) or deltas differ"));
            }
        }
    }
    let alpha_window = window.map_letters(|x| ov.letter(x).alpha);
    validate_structure(&alpha_window, |a| ov.sys_a.image(a).to_vec())
        .map_err(|v| Violation { kind: format!("projection {}", v.kind), ..v })?;
    for r in 0..window.parents.len() {
        let i = window.i_lo + r as i64;
        let row = &window.rows[r];
        let ranges = window.child_ranges(r);
        let lower = &window.rows[r + 1];
        for t in 0..row.len() {
            if !row.core[t] {
                continue;
            }
            let kids = overlay_letters(ov, &lower.letters[ranges[t].clone().unwrap()]);
            if !overlay::is_production(ov, ov.letter(row.letters[t]), &kids) {
                return Err(violation("production", i, row.j_lo + t as i64, "not a production rule"));
            }
        }
        if let Some(core) = row.core_range() {
            let parents = overlay_letters(ov, &row.letters[core.clone()]);
            let first = ranges[core.start].clone().unwrap().start;
            let last = ranges[core.end - 1].clone().unwrap().end;
            let kids = overlay_letters(ov, &lower.letters[first..last]);
            if let Err(e) = overlay::verify_property3(ov, &parents, &kids) {
                return Err(violation("property 3", i + 1, lower.j_lo + (first + e.row_letter) as i64, format!("beta mismatch at position {}", e.position)));
            }
        }
    }
    Ok(())
}

/// Weighted-length comparison for cells `j..=k` of row `i`:
/// `|v(nabla_j + 1 .. nabla_{k+1} - 1)|_eta <= |u(j..=k)|_nu < gamma |v(nabla_j ..= nabla_{k+1})|_eta`.
pub fn equation_one(ov: &OverlaySystem, orbit: &OverlayOrbit, r: usize, j: i64, k: i64) -> Result<bool, OrbitError> {
    let g = &orbit.geometry[r];
    let row = &orbit.base_a.rows[r];
    let (tj, tk) = ((j - row.j_lo) as usize, (k - row.j_lo) as usize);
    let u_word = &row.letters[tj..=tk];
    let nj = g.nabla[tj];
    let nk1 = g.nabla[tk + 1];
    let inner = b_slice(&orbit.base_b, g.big_delta, nj + 1, nk1.max(nj + 1)).unwrap_or_default();
    let outer = b_slice(&orbit.base_b, g.big_delta, nj, nk1 + 1)
        .ok_or_else(|| OrbitError::WindowTooNarrow(format!("row {} beyond the second window", g.big_delta)))?;
    let mid = ov.nu_length(u_word);
    Ok(ov.eta_length(&inner).cmp_real(&mid)? != Ordering::Greater
        && mid.cmp_real(&(&ov.gamma * &ov.eta_length(&outer)))? == Ordering::Less)
}

/// Cross-checks of the geometry: `V <= e^{-d} U + c <= W` at every cell,
/// nabla is nondecreasing, and `V_{j+1} > W_j` for consecutive cells.
pub fn validate_geometry(ov: &OverlaySystem, orbit: &OverlayOrbit) -> Result<(), Violation> {
    let shrink = Real::exp_rational(&-orbit.d.clone());
    let shift = real_of(&orbit.c);
    for g in &orbit.geometry {
        for t in 0..g.u.len() {
            let j = g.j_lo + t as i64;
            let target = &(&shrink * &g.u[t]) + &shift;
            let ok = g.v[t].le(&target).unwrap_or(false) && target.le(&g.w[t]).unwrap_or(false);
            if !ok {
                return Err(violation("nabla", g.i, j, "left edge not inside its tile"));
            }
            if t > 0 {
                if g.nabla[t] <= g.nabla[t - 1] {
                    return Err(violation("nabla", g.i, j, "nabla does not increase"));
                }
                if !g.v[t].ge(&g.w[t - 1]).unwrap_or(false) {
                    return Err(violation("nabla", g.i, j, "V_{j+1} < W_j"));
                }
            }
        }
        let _ = ov;
    }
    Ok(())
}

/// Evidence that rows `i` and `i + pi` agree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodEvidence {
    pub pi: usize,
    /// `(row, shift)` pairs: row `row + pi` equals row `row` moved by `shift` cells.
    pub shifts: Vec<(i64, i64)>,
}

fn matching_shifts(a: &WindowRow, b: &WindowRow) -> Vec<i64> {
    let need = a.len().min(b.len()).div_ceil(2).max(1);
    let mut out = Vec::new();
    let (la, lb) = (a.len() as i64, b.len() as i64);
    for s in -(la - 1)..lb {
        // a[t] against b[t + s]
        let lo = 0.max(-s);
        let hi = la.min(lb - s);
        if hi - lo < need as i64 {
            continue;
        }
        if (lo..hi).all(|t| a.letters[t as usize] == b.letters[(t + s) as usize]) {
            out.push(s);
        }
    }
    out
}

/// Every `pi <= max_pi` for which each row pair `(r, r + pi)` in the window
/// agrees in letters under some shift overlapping at least half the shorter
/// row, with parent maps that commute with the shifts on core cells.
pub fn period_search(window: &OrbitWindow, max_pi: usize) -> Vec<PeriodEvidence> {
    let mut out = Vec::new();
    for pi in 1..=max_pi {
        if pi + 1 >= window.height() {
            break;
        }
        let mut shifts = Vec::new();
        let mut ok = true;
        for r in 0..window.height() - pi {
            let a = &window.rows[r];
            let b = &window.rows[r + pi];
            let candidates = matching_shifts(a, b);
            let found = candidates.into_iter().find(|&s| {
                if r + pi + 1 >= window.height() {
                    return true;
                }
                // the child rows must match too, with parents carried along
                let ca = &window.rows[r + 1];
                let cb = &window.rows[r + pi + 1];
                matching_shifts(ca, cb).into_iter().any(|s2| {
                    let pa = &window.parents[r];
                    let pb = &window.parents[r + pi];
                    (0..ca.len()).all(|t| {
                        let u = t as i64 + s2;
                        if u < 0 || u >= cb.len() as i64 {
                            return true;
                        }
                        let (x, y) = (pa[t], pb[u as usize]);
                        if !(a.core[x] && b.core[y]) {
                            return true;
                        }
                        x as i64 + s == y as i64
                    })
                })
            });
            match found {
                Some(s) => shifts.push((window.i_lo + r as i64, s + a.j_lo - b.j_lo)),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            out.push(PeriodEvidence { pi, shifts });
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub depth: usize,
    pub lengths: Vec<usize>,
    pub beta_lengths: Vec<usize>,
    /// `log |u^k| / k` and `log |beta(u^k)| / k` for `k >= 1`.
    pub per_step: Vec<(f64, f64)>,
    pub slope_letters: f64,
    pub slope_beta: f64,
    pub log_lambda: f64,
    /// `max |beta(a)|` over the alphabet.
    pub c_bound: usize,
    /// `|u| <= |beta(u)| <= C |u|` on every row word of the window.
    pub bounds_hold: bool,
}

fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = ys.iter().sum::<f64>() / n;
    let num: f64 = ys.iter().enumerate().map(|(k, y)| (k as f64 - xbar) * (y - ybar)).sum();
    let den: f64 = (0..ys.len()).map(|k| (k as f64 - xbar).powi(2)).sum();
    num / den
}

/// Follows the descendants of the cell at column 0 of the top row and fits
/// growth exponents to the lengths of the descendants and their beta words.
pub fn growth_exponent_check(ov: &OverlaySystem, window: &OrbitWindow, depth: usize) -> Result<GrowthReport, OrbitError> {
    let top = &window.rows[0];
    let start = top.local(0).ok_or_else(|| OrbitError::WindowTooNarrow("column 0 missing from the top row".into()))?;
    let (mut lo, mut hi) = (start, start);
    let mut lengths = vec![1usize];
    let mut beta_lengths = vec![ov.letter(top.letters[start]).beta.len()];
    for r in 0..depth {
        if r + 1 >= window.height() || !window.rows[r].core[lo..=hi].iter().all(|&c| c) {
            return Err(OrbitError::WindowTooNarrow(format!("descendants leave the window at depth {r}")));
        }
        let ranges = window.child_ranges(r);
        lo = ranges[lo].clone().unwrap().start;
        hi = ranges[hi].clone().unwrap().end - 1;
        let row = &window.rows[r + 1];
        lengths.push(hi - lo + 1);
        beta_lengths.push(row.letters[lo..=hi].iter().map(|&x| ov.letter(x).beta.len()).sum());
    }
    let ln_a: Vec<f64> = lengths.iter().map(|&x| (x as f64).ln()).collect();
    let ln_b: Vec<f64> = beta_lengths.iter().map(|&x| (x as f64).ln()).collect();
    let per_step = (1..=depth).map(|k| (ln_a[k] / k as f64, ln_b[k] / k as f64)).collect();
    let c_bound = ov.letters.iter().map(|x| x.beta.len()).max().unwrap_or(0);
    let bounds_hold = window.rows.iter().all(|row| {
        let u = row.len();
        let b: usize = row.letters.iter().map(|&x| ov.letter(x).beta.len()).sum();
        u <= b && b <= c_bound * u
    });
    Ok(GrowthReport {
        depth,
        slope_letters: least_squares_slope(&ln_a),
        slope_beta: least_squares_slope(&ln_b),
        log_lambda: ov.lambda.to_f64().ln(),
        lengths,
        beta_lengths,
        per_step,
        c_bound,
        bounds_hold,
    })
}

/// Rational offset parsing: `p/q`, integers, or decimals (converted exactly).
pub fn parse_rational(text: &str) -> Result<(BigRational, bool), OrbitError> {
    let text = text.trim();
    let bad = || OrbitError::BadParameters(format!("cannot read `{text}` as a rational"));
    if let Some((n, d)) = text.split_once('/') {
        let n: num_bigint::BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: num_bigint::BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok((BigRational::new(n, d), false));
    }
    if let Some((whole, frac)) = text.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        let n: num_bigint::BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(num_bigint::BigInt::from(10), frac.len());
        let q = BigRational::new(n, d);
        return Ok((if neg { -q } else { q }, true));
    }
    let n: num_bigint::BigInt = text.parse().map_err(|_| bad())?;
    Ok((BigRational::from_integer(n), false))
}

pub fn format_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}
