use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Obstacle,
    Pit,
    WhiteLine,
    Beacon(u32),
}

impl Cell {
    /// Cells the robot body cannot enter.
    pub fn blocks_motion(self) -> bool {
        matches!(self, Cell::Obstacle | Cell::Beacon(_))
    }

    pub fn legend(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Obstacle => '#',
            Cell::Pit => 'O',
            Cell::WhiteLine => '=',
            Cell::Beacon(_) => 'B',
        }
    }
}

/// Row-major grid. Cell `(ix, iy)` spans `[ix·s, (ix+1)·s) × [iy·s, (iy+1)·s)`
/// with `iy = 0` at the bottom of the map as written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    cells: Vec<Cell>,
}

impl TerrainGrid {
    pub fn new(width: usize, height: usize, cell_size: f64, cells: Vec<Cell>) -> TerrainGrid {
        assert_eq!(cells.len(), width * height, "cell count must match dimensions");
        TerrainGrid {
            width,
            height,
            cell_size,
            cells,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Out-of-bounds reads as `Obstacle`: the world is closed.
    pub fn cell(&self, ix: i64, iy: i64) -> Cell {
        if ix < 0 || iy < 0 || ix >= self.width as i64 || iy >= self.height as i64 {
            return Cell::Obstacle;
        }
        self.cells[iy as usize * self.width + ix as usize]
    }

    pub fn set(&mut self, ix: i64, iy: i64, cell: Cell) {
        if ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height {
            self.cells[iy as usize * self.width + ix as usize] = cell;
        }
    }

    pub fn index_of(&self, x: f64, y: f64) -> (i64, i64) {
        ((x / self.cell_size).floor() as i64, (y / self.cell_size).floor() as i64)
    }

    pub fn cell_at(&self, x: f64, y: f64) -> Cell {
        let (ix, iy) = self.index_of(x, y);
        self.cell(ix, iy)
    }

    pub fn center_of(&self, ix: i64, iy: i64) -> (f64, f64) {
        ((ix as f64 + 0.5) * self.cell_size, (iy as f64 + 0.5) * self.cell_size)
    }

    /// Marches a ray cell by cell and returns the distance to the boundary of
    /// the first cell satisfying `hits`, capped at `max_range`, together with
    /// that cell.
    pub fn cast(
        &self,
        origin: (f64, f64),
        angle: f64,
        max_range: f64,
        hits: impl Fn(Cell) -> bool,
    ) -> (f64, Option<Cell>) {
        let (dx, dy) = (angle.cos(), angle.sin());
        let (mut ix, mut iy) = self.index_of(origin.0, origin.1);
        let here = self.cell(ix, iy);
        if hits(here) {
            return (0.0, Some(here));
        }
        let s = self.cell_size;
        let axis = |pos: f64, dir: f64, idx: i64| -> (i64, f64, f64) {
            if dir > 0.0 {
                (1, ((idx + 1) as f64 * s - pos) / dir, s / dir)
            } else if dir < 0.0 {
                (-1, (idx as f64 * s - pos) / dir, -s / dir)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_x, mut t_x, dt_x) = axis(origin.0, dx, ix);
        let (step_y, mut t_y, dt_y) = axis(origin.1, dy, iy);
        loop {
            let t = if t_x < t_y {
                ix += step_x;
                let t = t_x;
                t_x += dt_x;
                t
            } else {
                iy += step_y;
                let t = t_y;
                t_y += dt_y;
                t
            };
            if t >= max_range {
                return (max_range, None);
            }
            let cell = self.cell(ix, iy);
            if hits(cell) {
                return (t.max(0.0), Some(cell));
            }
        }
    }

    /// Renders the map with the legend used by scenario files.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity((self.width + 1) * self.height);
        for iy in (0..self.height as i64).rev() {
            for ix in 0..self.width as i64 {
                out.push(self.cell(ix, iy).legend());
            }
            out.push('\n');
        }
        out
    }
}
