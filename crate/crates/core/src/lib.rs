pub mod poly;
pub mod real;
pub mod substitution;
pub mod overlay;
pub mod orbit;
pub mod graph;
pub mod pq;
pub mod document;
pub mod render;
