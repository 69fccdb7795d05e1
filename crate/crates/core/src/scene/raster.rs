use super::{Scene, GRID_CELLS};
use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Background,
    Clutter,
    Target,
}

/// Row-major grid; row `i` runs along +y, column `j` along +x.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub size: usize,
    pub cell_cm: f64,
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[i * self.size + j]
    }

    pub fn count(&self, kind: Cell) -> usize {
        self.cells.iter().filter(|c| **c == kind).count()
    }
}

/// World coordinates of the center of cell `(i, j)` on an `n x n` grid.
#[inline]
pub fn cell_center(workspace: f64, n: usize, i: usize, j: usize) -> Vec2 {
    let c = workspace / n as f64;
    Vec2::new((j as f64 + 0.5) * c, (i as f64 + 0.5) * c)
}

/// The 224 x 224 occupancy grid (0.2 cm cells on the default workspace).
pub fn rasterize(scene: &Scene) -> OccupancyGrid {
    rasterize_with(scene, GRID_CELLS)
}

/// Center-point containment on an `n x n` grid. Later objects win on shared
/// boundary cells, except that target cells are never overwritten.
pub fn rasterize_with(scene: &Scene, n: usize) -> OccupancyGrid {
    let w = scene.workspace();
    let cell_cm = w / n as f64;
    let mut cells = vec![Cell::Background; n * n];
    let index_range = |lo: f64, hi: f64| {
        let a = ((lo / cell_cm - 0.5).floor().max(0.0)) as usize;
        let b = ((hi / cell_cm - 0.5).ceil().max(0.0) as usize).min(n - 1);
        a..=b
    };
    for (spec, poly) in scene.specs().iter().zip(scene.footprints()) {
        let b = poly.bounds();
        let kind = if spec.is_target { Cell::Target } else { Cell::Clutter };
        for i in index_range(b.min.y, b.max.y) {
            for j in index_range(b.min.x, b.max.x) {
                if poly.contains(cell_center(w, n, i, j)) {
                    let c = &mut cells[i * n + j];
                    if *c != Cell::Target {
                        *c = kind;
                    }
                }
            }
        }
    }
    OccupancyGrid { size: n, cell_cm, cells }
}
