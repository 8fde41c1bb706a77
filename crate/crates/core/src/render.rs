//! SVG pictures of orbit tilings in the horocyclic model. The cell in column
//! `j` of row `i` is the rectangle with upper left corner
//! `(c + e^d U, d - i log lambda)`, width `e^d lambda^{-i} |w|_nu` and height
//! `log lambda`, where `U` is the weighted length of the cells between column
//! 0 and column `j` scaled by `lambda^{-i}`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbit::OrbitWindow;
use crate::substitution::SubstitutionSystem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("row {0} stores no origin and does not hold column 0")]
    NoOrigin(i64),
    #[error("{what} at row {row}, column {column}: off by {gap:e} against a tolerance of {tol:e}")]
    Abutment { what: &'static str, row: i64, column: i64, gap: f64, tol: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TileRect {
    pub row: i64,
    pub column: i64,
    pub label: String,
    pub letter: usize,
    pub x: f64,
    /// Upper edge in model coordinates (y grows upward).
    pub y: f64,
    pub width: f64,
    pub height: f64,
    /// Local index of the parent in the row above.
    pub parent: Option<usize>,
    /// Whether the full production of the cell is in the next row.
    pub core: bool,
}

/// Rectangles of one tiling, grouped by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub rows: Vec<Vec<TileRect>>,
    pub stroke_only: bool,
}

/// Cell weights, growth rate and placement of a tiling.
#[derive(Clone, Debug)]
pub struct Placement {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub c: f64,
    pub d: f64,
}

pub fn layer(
    name: &str,
    sys: &SubstitutionSystem,
    window: &OrbitWindow,
    place: &Placement,
    stroke_only: bool,
) -> Result<Layer, RenderError> {
    let ed = place.d.exp();
    let height = place.lambda.ln();
    let mut rows = Vec::with_capacity(window.height());
    for (r, row) in window.rows.iter().enumerate() {
        let i = window.i_lo + r as i64;
        let scale = ed * place.lambda.powi(-(i as i32));
        let y = place.d - i as f64 * height;
        let mut rects = Vec::with_capacity(row.len());
        if row.is_empty() {
            rows.push(rects);
            continue;
        }
        // exact integer counts keep every corner independent of rounding in
        // the previous cells
        let mut counts = row.counts_to(sys.size(), 0).ok_or(RenderError::NoOrigin(i))?;
        for (t, &l) in row.letters.iter().enumerate() {
            let u: f64 = counts.iter().zip(&place.weights).map(|(&k, &w)| k as f64 * w).sum();
            rects.push(TileRect {
                row: i,
                column: row.j_lo + t as i64,
                label: sys.letters()[l].clone(),
                letter: l,
                x: place.c + scale * u,
                y,
                width: scale * place.weights[l],
                height,
                parent: if r == 0 { None } else { window.parents.get(r - 1).map(|p| p[t]) },
                core: row.core.get(t).copied().unwrap_or(false),
            });
            counts[l] += 1;
        }
        rows.push(rects);
    }
    Ok(Layer { name: name.into(), rows, stroke_only })
}

fn row_width(rects: &[TileRect]) -> f64 {
    match (rects.first(), rects.last()) {
        (Some(a), Some(b)) => b.x + b.width - a.x,
        _ => 0.0,
    }
}

/// Consecutive cells abut, rows abut vertically, and the children of a core
/// cell span exactly its extent, each within `rel` times the row width.
pub fn check_abutment(layer: &Layer, rel: f64) -> Result<(), RenderError> {
    for (r, rects) in layer.rows.iter().enumerate() {
        let tol = rel * row_width(rects).max(f64::MIN_POSITIVE);
        for w in rects.windows(2) {
            let gap = (w[0].x + w[0].width - w[1].x).abs();
            if gap > tol {
                return Err(RenderError::Abutment { what: "row gap", row: w[1].row, column: w[1].column, gap, tol });
            }
        }
        if let (Some(above), Some(cell)) = (r.checked_sub(1).and_then(|k| layer.rows.get(k)), rects.first()) {
            if let Some(top) = above.first() {
                let gap = (top.y - top.height - cell.y).abs();
                let tol = rel * top.height;
                if gap > tol {
                    return Err(RenderError::Abutment { what: "row height", row: cell.row, column: cell.column, gap, tol });
                }
            }
            let mut span: Vec<Option<(f64, f64)>> = vec![None; above.len()];
            for cell in rects {
                let Some(p) = cell.parent else { continue };
                let e = span[p].get_or_insert((cell.x, cell.x + cell.width));
                e.0 = e.0.min(cell.x);
                e.1 = e.1.max(cell.x + cell.width);
            }
            for (p, parent) in above.iter().enumerate() {
                let Some((lo, hi)) = span[p] else { continue };
                if !parent.core {
                    continue;
                }
                let gap = (lo - parent.x).abs().max((hi - parent.x - parent.width).abs());
                if gap > tol {
                    return Err(RenderError::Abutment {
                        what: "children span",
                        row: parent.row,
                        column: parent.column,
                        gap,
                        tol,
                    });
                }
            }
        }
    }
    Ok(())
}

const PALETTE: [&str; 8] = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5"];
const STROKES: [&str; 2] = ["#222222", "#c0392b"];

/// SVG 1.1 document; model y is flipped so that row 0 is on top.
pub fn svg(layers: &[Layer]) -> String {
    let all = layers.iter().flat_map(|l| l.rows.iter().flatten());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for t in all {
        x0 = x0.min(t.x);
        x1 = x1.max(t.x + t.width);
        y0 = y0.min(-t.y);
        y1 = y1.max(-t.y + t.height);
    }
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if !x0.is_finite() {
        out.push_str(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"1\" height=\"1\" viewBox=\"0 0 1 1\"></svg>\n",
        );
        return out;
    }
    let (w, h) = ((x1 - x0).max(1e-300), (y1 - y0).max(1e-300));
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"1200\" height=\"{}\" viewBox=\"{x0} {y0} {w} {h}\" preserveAspectRatio=\"none\">",
        (1200.0 * (h / w).clamp(0.25, 1.0)).round()
    );
    for (k, layer) in layers.iter().enumerate() {
        let stroke = STROKES[k % STROKES.len()];
        let _ = writeln!(out, "<g id=\"{}\" stroke=\"{stroke}\">", escape(&layer.name));
        for t in layer.rows.iter().flatten() {
            let fill = if layer.stroke_only { "none" } else { PALETTE[t.letter % PALETTE.len()] };
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" stroke-width=\"1\" vector-effect=\"non-scaling-stroke\" data-row=\"{}\" data-column=\"{}\" data-core=\"{}\"{}><title>{}</title></rect>",
                t.x,
                -t.y,
                t.width,
                t.height,
                t.row,
                t.column,
                u8::from(t.core),
                t.parent.map(|p| format!(" data-parent=\"{p}\"")).unwrap_or_default(),
                escape(&t.label)
            );
        }
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
