// SPDX-License-Identifier: Apache-2.0

//! Procedural floorplans. Layouts are built as metric wall rectangles on
//! `[0, extent]²` and rasterized: a cell is occupied when it overlaps a wall with
//! positive area. The same seed therefore yields the same building at any
//! resolution.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::floorplan::{Cell, OccupancyGrid};

/// Wall thickness in meters.
const WALL: f64 = 0.2;
/// Door opening in meters.
const DOOR: f64 = 1.0;
/// Smallest room side in meters.
const MIN_ROOM: f64 = 2.5;
/// Maze cell pitch in meters.
const MAZE_PITCH: f64 = 2.5;
/// Corridor width as a fraction of the extent.
const CORRIDOR_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloorplanStyle {
    Rooms,
    Maze,
    Corridor,
}

impl FromStr for FloorplanStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rooms" => Ok(Self::Rooms),
            "maze" => Ok(Self::Maze),
            "corridor" => Ok(Self::Corridor),
            other => Err(format!("unknown floorplan style '{other}' (rooms, maze, corridor)")),
        }
    }
}

impl fmt::Display for FloorplanStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rooms => "rooms",
            Self::Maze => "maze",
            Self::Corridor => "corridor",
        })
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    fn overlaps(&self, o: &Rect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    fn grown(&self, m: f64) -> Rect {
        Rect::new(self.x0 - m, self.y0 - m, self.x1 + m, self.y1 + m)
    }
}

/// Generates a floorplan with origin `(0, 0)` covering `extent_m` square.
///
/// The result has a fully occupied border and a single 4-connected free region.
pub fn gen_floorplan(seed: u64, extent_m: f64, style: FloorplanStyle, resolution: f64) -> Result<OccupancyGrid, SynthError> {
    if !(extent_m >= 2.0 && extent_m.is_finite()) {
        return Err(SynthError::InvalidParams(format!("extent must be at least 2 m, got {extent_m}")));
    }
    if !(resolution > 0.0 && resolution.is_finite() && resolution <= extent_m / 8.0) {
        return Err(SynthError::InvalidParams(format!(
            "resolution must be positive and at most extent/8, got {resolution}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walls = match style {
        FloorplanStyle::Rooms => rooms_layout(&mut rng, extent_m),
        FloorplanStyle::Maze => maze_layout(&mut rng, extent_m),
        FloorplanStyle::Corridor => corridor_layout(extent_m, CORRIDOR_FRACTION * extent_m),
    };
    Ok(rasterize(&walls, extent_m, resolution))
}

/// A closed straight corridor of the given width along x, centered in y.
pub fn gen_corridor(extent_m: f64, width_m: f64, resolution: f64) -> Result<OccupancyGrid, SynthError> {
    if !(extent_m >= 2.0 && width_m > 0.0 && width_m <= extent_m - 2.0 * WALL && resolution > 0.0) {
        return Err(SynthError::InvalidParams(format!(
            "corridor width {width_m} does not fit extent {extent_m}"
        )));
    }
    Ok(rasterize(&corridor_layout(extent_m, width_m), extent_m, resolution))
}

fn boundary(e: f64) -> Vec<Rect> {
    vec![
        Rect::new(0.0, 0.0, e, WALL),
        Rect::new(0.0, e - WALL, e, e),
        Rect::new(0.0, 0.0, WALL, e),
        Rect::new(e - WALL, 0.0, e, e),
    ]
}

fn corridor_layout(e: f64, width: f64) -> Vec<Rect> {
    let lo = (e - width) / 2.0;
    let hi = lo + width;
    let mut walls = boundary(e);
    walls.push(Rect::new(0.0, 0.0, e, lo));
    walls.push(Rect::new(0.0, hi, e, e));
    walls
}

/// Binary space partition into rooms joined by doors, with scattered obstacles.
fn rooms_layout(rng: &mut ChaCha8Rng, e: f64) -> Vec<Rect> {
    let mut walls = boundary(e);
    let mut doors: Vec<Rect> = Vec::new();
    let mut leaves = Vec::new();
    let mut stack = vec![(Rect::new(WALL, WALL, e - WALL, e - WALL), 0usize)];
    while let Some((r, depth)) = stack.pop() {
        let (w, h) = (r.x1 - r.x0, r.y1 - r.y0);
        let splittable = w.max(h) >= 2.0 * MIN_ROOM + WALL;
        let stop = depth >= 2 && rng.gen::<f64>() < 0.25;
        if !splittable || stop {
            leaves.push(r);
            continue;
        }
        let vertical = if (w - h).abs() < 0.2 * w.max(h) { rng.gen::<bool>() } else { w > h };
        let (lo, hi) = if vertical { (r.x0, r.x1) } else { (r.y0, r.y1) };
        if hi - lo < 2.0 * MIN_ROOM + WALL {
            leaves.push(r);
            continue;
        }
        let mut placed = None;
        for _ in 0..20 {
            let p = rng.gen_range(lo + MIN_ROOM..hi - MIN_ROOM - WALL);
            let wall = if vertical { Rect::new(p, r.y0, p + WALL, r.y1) } else { Rect::new(r.x0, p, r.x1, p + WALL) };
            if doors.iter().all(|d| !d.grown(0.3).overlaps(&wall)) {
                placed = Some(p);
                break;
            }
        }
        let Some(p) = placed else {
            leaves.push(r);
            continue;
        };
        let (a0, a1) = if vertical { (r.y0, r.y1) } else { (r.x0, r.x1) };
        let d = rng.gen_range(a0 + 0.3..a1 - 0.3 - DOOR);
        if vertical {
            walls.push(Rect::new(p, a0, p + WALL, d));
            walls.push(Rect::new(p, d + DOOR, p + WALL, a1));
            doors.push(Rect::new(p, d, p + WALL, d + DOOR));
            stack.push((Rect::new(r.x0, r.y0, p, r.y1), depth + 1));
            stack.push((Rect::new(p + WALL, r.y0, r.x1, r.y1), depth + 1));
        } else {
            walls.push(Rect::new(a0, p, d, p + WALL));
            walls.push(Rect::new(d + DOOR, p, a1, p + WALL));
            doors.push(Rect::new(d, p, d + DOOR, p + WALL));
            stack.push((Rect::new(r.x0, r.y0, r.x1, p), depth + 1));
            stack.push((Rect::new(r.x0, p + WALL, r.x1, r.y1), depth + 1));
        }
    }
    let margin = 0.7;
    for room in leaves {
        let count = rng.gen_range(0..=2);
        for _ in 0..count {
            let (sw, sh) = (rng.gen_range(0.3..1.0), rng.gen_range(0.3..1.0));
            let (xa, xb) = (room.x0 + margin, room.x1 - margin - sw);
            let (ya, yb) = (room.y0 + margin, room.y1 - margin - sh);
            if xa >= xb || ya >= yb {
                continue;
            }
            let (x, y) = (rng.gen_range(xa..xb), rng.gen_range(ya..yb));
            walls.push(Rect::new(x, y, x + sw, y + sh));
        }
    }
    walls
}

/// Depth-first perfect maze on a square lattice with a few extra openings.
fn maze_layout(rng: &mut ChaCha8Rng, e: f64) -> Vec<Rect> {
    let n = (((e - WALL) / MAZE_PITCH).floor() as usize).max(2);
    let c = (e - WALL) / n as f64;
    // passages east and north of each lattice cell
    let mut east = vec![false; n * n];
    let mut north = vec![false; n * n];
    let mut seen = vec![false; n * n];
    let mut stack = vec![(0usize, 0usize)];
    seen[0] = true;
    while let Some(&(i, j)) = stack.last() {
        let mut nbrs = Vec::with_capacity(4);
        if i + 1 < n && !seen[j * n + i + 1] {
            nbrs.push((i + 1, j));
        }
        if i > 0 && !seen[j * n + i - 1] {
            nbrs.push((i - 1, j));
        }
        if j + 1 < n && !seen[(j + 1) * n + i] {
            nbrs.push((i, j + 1));
        }
        if j > 0 && !seen[(j - 1) * n + i] {
            nbrs.push((i, j - 1));
        }
        match nbrs.choose(rng) {
            None => {
                stack.pop();
            }
            Some(&(a, b)) => {
                if a > i {
                    east[j * n + i] = true;
                } else if a < i {
                    east[j * n + a] = true;
                } else if b > j {
                    north[j * n + i] = true;
                } else {
                    north[b * n + i] = true;
                }
                seen[b * n + a] = true;
                stack.push((a, b));
            }
        }
    }
    let mut walls = boundary(e);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * c, j as f64 * c);
            if i + 1 < n && !east[j * n + i] && rng.gen::<f64>() > 0.1 {
                walls.push(Rect::new(x + c, y, x + c + WALL, y + c + WALL));
            }
            if j + 1 < n && !north[j * n + i] && rng.gen::<f64>() > 0.1 {
                walls.push(Rect::new(x, y + c, x + c + WALL, y + c + WALL));
            }
        }
    }
    walls
}

fn rasterize(walls: &[Rect], e: f64, res: f64) -> OccupancyGrid {
    let n = ((e / res) - 1e-9).ceil() as usize;
    let mut cells = vec![Cell::Free; n * n];
    let span = |a: f64, b: f64| {
        let lo = ((a / res) + 1e-9).floor().max(0.0) as usize;
        let hi = (((b / res) - 1e-9).ceil().max(0.0) as usize).min(n);
        lo..hi
    };
    for w in walls {
        for j in span(w.y0, w.y1) {
            for i in span(w.x0, w.x1) {
                cells[j * n + i] = Cell::Occupied;
            }
        }
    }
    for k in 0..n {
        cells[k] = Cell::Occupied;
        cells[(n - 1) * n + k] = Cell::Occupied;
        cells[k * n] = Cell::Occupied;
        cells[k * n + n - 1] = Cell::Occupied;
    }
    keep_largest_component(&mut cells, n, n);
    OccupancyGrid::new(n, n, res, (0.0, 0.0), cells).expect("rasterized grid is well formed")
}

/// Labels 4-connected free components; returns one label per cell (`usize::MAX`
/// for occupied) and the component sizes.
pub(crate) fn free_components(cells: &[Cell], w: usize, h: usize) -> (Vec<usize>, Vec<usize>) {
    let mut label = vec![usize::MAX; cells.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..cells.len() {
        if cells[start] != Cell::Free || label[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        label[start] = id;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            size += 1;
            let (i, j) = (c % w, c / w);
            let mut visit = |nc: usize| {
                if cells[nc] == Cell::Free && label[nc] == usize::MAX {
                    label[nc] = id;
                    queue.push_back(nc);
                }
            };
            if i > 0 {
                visit(c - 1);
            }
            if i + 1 < w {
                visit(c + 1);
            }
            if j > 0 {
                visit(c - w);
            }
            if j + 1 < h {
                visit(c + w);
            }
        }
        sizes.push(size);
    }
    (label, sizes)
}

fn keep_largest_component(cells: &mut [Cell], w: usize, h: usize) {
    let (label, sizes) = free_components(cells, w, h);
    let Some(best) = (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))) else {
        return;
    };
    for (c, l) in cells.iter_mut().zip(label) {
        if l != best {
            *c = Cell::Occupied;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(g: &OccupancyGrid) {
        let (w, h) = (g.width(), g.height());
        for k in 0..w {
            assert!(g.is_occupied(k, 0) && g.is_occupied(k, h - 1));
        }
        for k in 0..h {
            assert!(g.is_occupied(0, k) && g.is_occupied(w - 1, k));
        }
        let (_, sizes) = free_components(g.cells(), w, h);
        assert_eq!(sizes.len(), 1);
        assert!(g.free_count() as f64 >= 0.3 * (w * h) as f64, "free {}", g.free_count());
    }

    #[test]
    fn deterministic_in_seed() {
        for style in [FloorplanStyle::Rooms, FloorplanStyle::Maze] {
            let a = gen_floorplan(7, 20.0, style, 0.1).unwrap();
            let b = gen_floorplan(7, 20.0, style, 0.1).unwrap();
            let c = gen_floorplan(8, 20.0, style, 0.1).unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn corridor_is_straight_with_configured_width() {
        let g = gen_floorplan(1, 10.0, FloorplanStyle::Corridor, 0.1).unwrap();
        assert_eq!((g.width(), g.height()), (100, 100));
        check_invariants(&g);
        // free rows are the middle 40 % minus nothing, free columns span the walls
        let free_rows: Vec<usize> = (0..100).filter(|&j| !g.is_occupied(50, j)).collect();
        assert_eq!(free_rows.len(), 40);
        assert_eq!(free_rows[0], 30);
        for &j in &free_rows {
            for i in 2..98 {
                assert!(!g.is_occupied(i, j));
            }
        }
        let narrow = gen_corridor(10.0, 2.0, 0.1).unwrap();
        assert_eq!((0..100).filter(|&j| !narrow.is_occupied(50, j)).count(), 20);
    }

    #[test]
    fn fifty_seeds_connected() {
        for seed in 0..50u64 {
            let style = match seed % 3 {
                0 => FloorplanStyle::Rooms,
                1 => FloorplanStyle::Maze,
                _ => FloorplanStyle::Corridor,
            };
            let extent = 8.0 + (seed % 5) as f64 * 4.0;
            check_invariants(&gen_floorplan(seed, extent, style, 0.2).unwrap());
        }
    }

    #[test]
    fn acceptance_scale_rooms_at_two_resolutions() {
        for seed in 0..3 {
            let fine = gen_floorplan(seed, 30.0, FloorplanStyle::Rooms, 0.1).unwrap();
            let coarse = gen_floorplan(seed, 30.0, FloorplanStyle::Rooms, 0.25).unwrap();
            check_invariants(&fine);
            check_invariants(&coarse);
            assert_eq!((fine.width(), coarse.width()), (300, 120));
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(gen_floorplan(0, 1.0, FloorplanStyle::Rooms, 0.1).is_err());
        assert!(gen_floorplan(0, 10.0, FloorplanStyle::Rooms, 0.0).is_err());
        assert!(gen_corridor(10.0, 9.9, 0.1).is_err());
        assert_eq!("maze".parse::<FloorplanStyle>().unwrap(), FloorplanStyle::Maze);
        assert!("cave".parse::<FloorplanStyle>().is_err());
    }
}
