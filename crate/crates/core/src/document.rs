//! JSON documents for windows and patches. Letters are written by name so a
//! document can be read back without the alphabet that produced it.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphPatch, PqReport};
use crate::orbit::{format_rational, OrbitWindow, OverlayOptions, OverlayOrbit, SeedChoice, SeedSpec, WindowRow};
use crate::overlay::OverlaySystem;
use crate::real::bit_budget;
use crate::substitution::{SubstError, SubstitutionSystem};

/// Significant digits of the offsets written to window documents.
pub const DISPLAY_DIGITS: usize = 50;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Subst(#[from] SubstError),
    #[error("document has no {0} system")]
    MissingSystem(&'static str),
    #[error("unknown letter `{letter}` in row {row}")]
    UnknownLetter { row: i64, letter: String },
    #[error("inconsistent document: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Base,
    Overlay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemEntry {
    /// `first` or `second`.
    pub role: String,
    pub name: String,
    /// The system in `.sys` text form.
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowEntry {
    pub i: i64,
    pub j_lo: i64,
    pub letters: Vec<String>,
    pub core: Vec<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub origin: Vec<i64>,
    /// First-system letters under overlay cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<Vec<String>>,
    /// First-system letter counts from column 0 to `j_lo`, for overlay rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tile_origin: Option<Vec<i64>>,
}

/// Offsets of the whole first-system row `i`, which may be wider than the
/// overlay row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryEntry {
    pub i: i64,
    pub big_delta: i64,
    pub small_delta: i64,
    pub j_lo: i64,
    pub nabla: Vec<i64>,
    /// Display precision only.
    pub u: Vec<String>,
    pub v: Vec<String>,
    pub w: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub c: String,
    pub d: String,
    pub tie_left: bool,
    pub seed_spec: SeedSpec,
    pub seed_first: SeedChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_second: Option<SeedChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occurrence_second: Option<usize>,
    /// Horizontal row offsets; zero with global column indices.
    pub row_shift: Vec<i64>,
    pub bits: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowDocument {
    pub kind: WindowKind,
    pub systems: Vec<SystemEntry>,
    pub rows: Vec<RowEntry>,
    pub parents: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geometry: Vec<GeometryEntry>,
    pub metadata: Metadata,
}

fn entry(role: &str, sys: &SubstitutionSystem) -> SystemEntry {
    SystemEntry { role: role.into(), name: sys.name().into(), text: sys.to_text() }
}

fn names(sys: &SubstitutionSystem, letters: &[usize]) -> Vec<String> {
    letters.iter().map(|&l| sys.letters()[l].clone()).collect()
}

impl WindowDocument {
    /// Seeded window of one system. `(c, d)` only place the tiling.
    pub fn base(
        sys: &SubstitutionSystem,
        window: &OrbitWindow,
        seed: &SeedChoice,
        spec: &SeedSpec,
        c: &str,
        d: &str,
    ) -> Self {
        let rows = window
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| RowEntry {
                i: window.i_lo + r as i64,
                j_lo: row.j_lo,
                letters: names(sys, &row.letters),
                core: row.core.clone(),
                origin: row.origin.clone(),
                tiles: None,
                tile_origin: None,
            })
            .collect();
        Self {
            kind: WindowKind::Base,
            systems: vec![entry("first", sys)],
            rows,
            parents: window.parents.clone(),
            geometry: Vec::new(),
            metadata: Metadata {
                c: c.into(),
                d: d.into(),
                tie_left: false,
                seed_spec: spec.clone(),
                seed_first: seed.clone(),
                seed_second: None,
                occurrence_second: None,
                row_shift: vec![0; window.height()],
                bits: bit_budget(),
            },
        }
    }

    pub fn overlay(ov: &OverlaySystem, orbit: &OverlayOrbit, options: &OverlayOptions) -> Self {
        let n_a = ov.sys_a.size();
        let mut rows = Vec::with_capacity(orbit.window.height());
        for (r, row) in orbit.window.rows.iter().enumerate() {
            let alpha: Vec<usize> = row.letters.iter().map(|&x| ov.letter(x).alpha).collect();
            let tile_origin = orbit.base_a.rows.get(r).and_then(|a| {
                let t = row.j_lo - a.j_lo;
                (t >= 0).then(|| a.counts_to(n_a, t as usize)).flatten()
            });
            rows.push(RowEntry {
                i: orbit.window.i_lo + r as i64,
                j_lo: row.j_lo,
                letters: row.letters.iter().map(|&x| ov.format_letter(ov.letter(x))).collect(),
                core: row.core.clone(),
                origin: row.origin.clone(),
                tiles: Some(names(&ov.sys_a, &alpha)),
                tile_origin,
            });
        }
        let decimals = |xs: &[crate::real::Real]| xs.iter().map(|x| x.to_decimal(DISPLAY_DIGITS)).collect();
        let geometry = orbit
            .geometry
            .iter()
            .take(orbit.window.height())
            .map(|g| GeometryEntry {
                i: g.i,
                big_delta: g.big_delta,
                small_delta: g.small_delta,
                j_lo: g.j_lo,
                nabla: g.nabla.clone(),
                u: decimals(&g.u),
                v: decimals(&g.v),
                w: decimals(&g.w),
            })
            .collect();
        Self {
            kind: WindowKind::Overlay,
            systems: vec![entry("first", &ov.sys_a), entry("second", &ov.sys_b)],
            rows,
            parents: orbit.window.parents.clone(),
            geometry,
            metadata: Metadata {
                c: format_rational(&orbit.c),
                d: format_rational(&orbit.d),
                tie_left: options.tie_left,
                seed_spec: options.seed_a.clone(),
                seed_first: orbit.seed_a.clone(),
                seed_second: Some(orbit.seed_b.clone()),
                occurrence_second: Some(options.occurrence_b),
                row_shift: vec![0; orbit.window.height()],
                bits: bit_budget(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        doc.check_shape()?;
        Ok(doc)
    }

    fn check_shape(&self) -> Result<(), DocumentError> {
        let bad = |m: String| Err(DocumentError::Inconsistent(m));
        for (r, row) in self.rows.iter().enumerate() {
            if r > 0 && row.i != self.rows[r - 1].i + 1 {
                return bad(format!("row {} does not follow row {}", row.i, self.rows[r - 1].i));
            }
            if row.core.len() != row.letters.len() {
                return bad(format!("row {}: core flags and letters differ in length", row.i));
            }
            if row.tiles.as_ref().is_some_and(|t| t.len() != row.letters.len()) {
                return bad(format!("row {}: tiles and letters differ in length", row.i));
            }
        }
        if self.parents.len() != self.rows.len().saturating_sub(1) {
            return bad("one parent map per pair of rows expected".into());
        }
        for (r, ps) in self.parents.iter().enumerate() {
            if ps.len() != self.rows[r + 1].letters.len() || ps.iter().any(|&p| p >= self.rows[r].letters.len()) {
                return bad(format!("parent map below row {} does not fit", self.rows[r].i));
            }
        }
        Ok(())
    }

    pub fn system(&self, role: &'static str) -> Result<SubstitutionSystem, DocumentError> {
        let e = self.systems.iter().find(|s| s.role == role).ok_or(DocumentError::MissingSystem(role))?;
        Ok(SubstitutionSystem::parse(&e.text)?)
    }

    pub fn i_lo(&self) -> i64 {
        self.rows.first().map_or(0, |r| r.i)
    }

    /// The window with letters replaced by indices into the sorted list of
    /// distinct names, which is returned alongside.
    pub fn interned(&self) -> (OrbitWindow, Vec<String>) {
        let set: BTreeSet<&String> = self.rows.iter().flat_map(|r| &r.letters).collect();
        let names: Vec<String> = set.into_iter().cloned().collect();
        let window = self.window_with(|name| names.binary_search_by(|n| n.as_str().cmp(name)).ok());
        (window.expect("every name is interned"), names)
    }

    /// The window with letters looked up through `id`.
    pub fn window_with(&self, id: impl Fn(&str) -> Option<usize>) -> Result<OrbitWindow, DocumentError> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let letters = row
                .letters
                .iter()
                .map(|l| id(l).ok_or_else(|| DocumentError::UnknownLetter { row: row.i, letter: l.clone() }))
                .collect::<Result<_, _>>()?;
            rows.push(WindowRow { j_lo: row.j_lo, letters, core: row.core.clone(), origin: row.origin.clone() });
        }
        Ok(OrbitWindow { i_lo: self.i_lo(), rows, parents: self.parents.clone() })
    }

    /// The tiling of the first system: overlay cells are replaced by the
    /// first-system letters under them.
    pub fn tiling(&self) -> Result<(SubstitutionSystem, OrbitWindow), DocumentError> {
        let sys = self.system("first")?;
        let mut window = OrbitWindow { i_lo: self.i_lo(), rows: Vec::new(), parents: self.parents.clone() };
        for row in &self.rows {
            let (names, origin) = match (&row.tiles, &row.tile_origin) {
                (Some(t), o) => (t, o.clone().unwrap_or_default()),
                (None, _) => (&row.letters, row.origin.clone()),
            };
            let letters = names
                .iter()
                .map(|l| sys.letter_index(l).ok_or_else(|| DocumentError::UnknownLetter { row: row.i, letter: l.clone() }))
                .collect::<Result<_, _>>()?;
            window.rows.push(WindowRow { j_lo: row.j_lo, letters, core: row.core.clone(), origin });
        }
        Ok((sys, window))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchDocument {
    pub systems: Vec<SystemEntry>,
    pub patch: GraphPatch,
    /// First-system letter of every vertex when the labels are overlay letters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<PqReport>,
}

impl PatchDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, DocumentError> {
        let doc: Self = serde_json::from_str(text)?;
        let n = doc.patch.label_names.len();
        if doc.patch.vertices.iter().any(|v| v.label >= n) {
            return Err(DocumentError::Inconsistent("vertex label out of range".into()));
        }
        if doc.tiles.as_ref().is_some_and(|t| t.len() != doc.patch.vertices.len()) {
            return Err(DocumentError::Inconsistent("one tile letter per vertex expected".into()));
        }
        Ok(doc)
    }

    pub fn system(&self, role: &'static str) -> Result<SubstitutionSystem, DocumentError> {
        let e = self.systems.iter().find(|s| s.role == role).ok_or(DocumentError::MissingSystem(role))?;
        Ok(SubstitutionSystem::parse(&e.text)?)
    }

    /// First-system letter name of vertex `v`.
    pub fn tile_name(&self, v: usize) -> &str {
        match &self.tiles {
            Some(t) => &t[v],
            None => self.patch.label_name(v),
        }
    }
}
