//! Netpbm rendering of collision maps.
//!
//! Rows are queries in input order, columns are rank positions. Colliding
//! relevant cells are green, colliding non-relevant cells red, the rest black.

use equirank_core::collision::{CellState, CollisionMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterKind {
    /// Binary portable pixmap (P6).
    Pixmap,
    /// Binary portable graymap (P5): 0, 128, 255.
    Graymap,
}

impl RasterKind {
    /// `.pgm` selects the graymap, anything else the pixmap.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => RasterKind::Graymap,
            _ => RasterKind::Pixmap,
        }
    }
}

pub fn encode(map: &CollisionMap, kind: RasterKind) -> Vec<u8> {
    let (w, h) = (map.cols(), map.rows());
    let magic = match kind {
        RasterKind::Pixmap => "P6",
        RasterKind::Graymap => "P5",
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    for r in 0..h {
        for &cell in map.row(r) {
            match kind {
                RasterKind::Pixmap => out.extend_from_slice(match cell {
                    CellState::NoCollision => &[0, 0, 0],
                    CellState::CollisionRelevant => &[0, 200, 0],
                    CellState::CollisionIrrelevant => &[220, 0, 0],
                }),
                RasterKind::Graymap => out.push(match cell {
                    CellState::NoCollision => 0,
                    CellState::CollisionIrrelevant => 128,
                    CellState::CollisionRelevant => 255,
                }),
            }
        }
    }
    out
}
