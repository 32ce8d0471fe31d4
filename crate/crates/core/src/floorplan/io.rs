// SPDX-License-Identifier: Apache-2.0

//! Grid file formats.
//!
//! `json-grid` (version 1):
//!
//! ```json
//! { "format_version": 1, "resolution": 0.1, "origin": [0.0, 0.0],
//!   "rows": ["#####", "#...#", "#####"] }
//! ```
//!
//! One character per cell, `.` free and `#` occupied, row 0 at the lowest y.
//!
//! `pgm-ascii`: a P2 image, top row first. Pixels below 128 are occupied. Resolution
//! and origin come from a [`GridMeta`] or a sidecar `<stem>.json` next to the image.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Cell, FloorplanError, OccupancyGrid};
use crate::pgm;

pub const JSON_GRID_VERSION: u32 = 1;

const OCCUPIED_BELOW: u32 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFormat {
    PgmAscii,
    JsonGrid,
}

impl GridFormat {
    /// Guess from the file extension: `.pgm` is pgm-ascii, anything else json-grid.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("pgm") => GridFormat::PgmAscii,
            _ => GridFormat::JsonGrid,
        }
    }
}

impl FromStr for GridFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pgm-ascii" | "pgm" => Ok(GridFormat::PgmAscii),
            "json-grid" | "json" => Ok(GridFormat::JsonGrid),
            _ => Err(format!("unknown grid format {s:?} (expected pgm-ascii or json-grid)")),
        }
    }
}

/// Georeferencing for image maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub resolution: f64,
    pub origin: [f64; 2],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGrid {
    format_version: u32,
    resolution: f64,
    origin: [f64; 2],
    rows: Vec<String>,
}

/// Loads a grid. `meta` overrides any pgm sidecar and is ignored for json-grid.
pub fn load_grid(
    path: &Path,
    format: GridFormat,
    meta: Option<GridMeta>,
) -> Result<OccupancyGrid, FloorplanError> {
    let text = std::fs::read_to_string(path).map_err(|source| FloorplanError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        GridFormat::JsonGrid => parse_json_grid(&text),
        GridFormat::PgmAscii => {
            let meta = match meta {
                Some(m) => m,
                None => read_sidecar(path)?,
            };
            parse_pgm(&text, meta)
        }
    }
}

fn read_sidecar(path: &Path) -> Result<GridMeta, FloorplanError> {
    let sidecar = path.with_extension("json");
    let text = std::fs::read_to_string(&sidecar).map_err(|_| {
        FloorplanError::MalformedFile(format!(
            "pgm map needs resolution/origin: no sidecar {} and no explicit metadata",
            sidecar.display()
        ))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| FloorplanError::MalformedFile(format!("{}: {e}", sidecar.display())))
}

pub fn parse_json_grid(text: &str) -> Result<OccupancyGrid, FloorplanError> {
    let raw: JsonGrid =
        serde_json::from_str(text).map_err(|e| FloorplanError::MalformedFile(e.to_string()))?;
    if raw.format_version != JSON_GRID_VERSION {
        return Err(FloorplanError::MalformedFile(format!(
            "unsupported format_version {}",
            raw.format_version
        )));
    }
    let height = raw.rows.len();
    let width = raw.rows.first().map_or(0, |r| r.chars().count());
    if width == 0 || height == 0 {
        return Err(FloorplanError::ZeroArea);
    }
    let mut cells = Vec::with_capacity(width * height);
    for (j, row) in raw.rows.iter().enumerate() {
        let n = row.chars().count();
        if n != width {
            return Err(FloorplanError::InconsistentDims(format!(
                "row {j} has {n} cells, expected {width}"
            )));
        }
        for ch in row.chars() {
            cells.push(match ch {
                '.' => Cell::Free,
                '#' => Cell::Occupied,
                other => {
                    return Err(FloorplanError::MalformedFile(format!(
                        "unexpected cell character {other:?} in row {j}"
                    )))
                }
            });
        }
    }
    OccupancyGrid::new(
        width,
        height,
        raw.resolution,
        (raw.origin[0], raw.origin[1]),
        cells,
    )
}

pub fn parse_pgm(text: &str, meta: GridMeta) -> Result<OccupancyGrid, FloorplanError> {
    let (width, height, _max, pixels) = pgm::decode_p2(text).map_err(FloorplanError::MalformedFile)?;
    if width == 0 || height == 0 {
        return Err(FloorplanError::ZeroArea);
    }
    if pixels.len() != width * height {
        return Err(FloorplanError::InconsistentDims(format!(
            "header says {width}x{height} but payload has {} pixels",
            pixels.len()
        )));
    }
    let mut cells = vec![Cell::Free; width * height];
    for (r, row) in pixels.chunks(width).enumerate() {
        let j = height - 1 - r;
        for (i, &p) in row.iter().enumerate() {
            if p < OCCUPIED_BELOW {
                cells[j * width + i] = Cell::Occupied;
            }
        }
    }
    OccupancyGrid::new(
        width,
        height,
        meta.resolution,
        (meta.origin[0], meta.origin[1]),
        cells,
    )
}

impl OccupancyGrid {
    pub fn to_json_grid(&self) -> String {
        let rows = (0..self.height())
            .map(|j| {
                (0..self.width())
                    .map(|i| if self.is_occupied(i, j) { '#' } else { '.' })
                    .collect()
            })
            .collect();
        let raw = JsonGrid {
            format_version: JSON_GRID_VERSION,
            resolution: self.resolution(),
            origin: [self.origin().0, self.origin().1],
            rows,
        };
        serde_json::to_string_pretty(&raw).expect("grid serializes")
    }

    /// Occupied cells as 0, free as 255.
    pub fn to_pgm(&self) -> String {
        let values: Vec<f64> = self
            .cells()
            .iter()
            .map(|c| if *c == Cell::Free { 1.0 } else { 0.0 })
            .collect();
        pgm::heatmap_p2(self.width(), self.height(), &values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn json_all_free() {
        let g = parse_json_grid(
            r##"{"format_version":1,"resolution":0.5,"origin":[1,2],"rows":["..",".."]}"##,
        )
        .unwrap();
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!(g.free_count(), 4);
        assert_eq!(g.origin(), (1.0, 2.0));
    }

    #[test]
    fn json_row_zero_is_lowest_y() {
        let g = parse_json_grid(
            r##"{"format_version":1,"resolution":1,"origin":[0,0],"rows":["#.",".."]}"##,
        )
        .unwrap();
        assert!(g.is_occupied(0, 0));
        assert!(!g.is_occupied(0, 1));
    }

    #[test]
    fn json_errors() {
        let ragged = r##"{"format_version":1,"resolution":1,"origin":[0,0],"rows":["..","."]}"##;
        assert!(matches!(parse_json_grid(ragged), Err(FloorplanError::InconsistentDims(_))));
        let empty = r##"{"format_version":1,"resolution":1,"origin":[0,0],"rows":[]}"##;
        assert!(matches!(parse_json_grid(empty), Err(FloorplanError::ZeroArea)));
        let bad_char = r##"{"format_version":1,"resolution":1,"origin":[0,0],"rows":["x"]}"##;
        assert!(matches!(parse_json_grid(bad_char), Err(FloorplanError::MalformedFile(_))));
        assert!(matches!(parse_json_grid("{"), Err(FloorplanError::MalformedFile(_))));
        let version = r##"{"format_version":2,"resolution":1,"origin":[0,0],"rows":["."]}"##;
        assert!(matches!(parse_json_grid(version), Err(FloorplanError::MalformedFile(_))));
    }

    #[test]
    fn pgm_threshold() {
        let meta = GridMeta {
            resolution: 0.1,
            origin: [0.0, 0.0],
        };
        let g = parse_pgm("P2\n2 1\n255\n0 255\n", meta).unwrap();
        assert_eq!(g.cell(0, 0), Cell::Occupied);
        assert_eq!(g.cell(1, 0), Cell::Free);
        let g = parse_pgm("P2\n3 1\n255\n127 128 200\n", meta).unwrap();
        assert_eq!(g.cells(), &[Cell::Occupied, Cell::Free, Cell::Free]);
    }

    #[test]
    fn pgm_errors() {
        let meta = GridMeta {
            resolution: 0.1,
            origin: [0.0, 0.0],
        };
        assert!(matches!(
            parse_pgm("P2\n2 2\n255\n0 0 0\n", meta),
            Err(FloorplanError::InconsistentDims(_))
        ));
        assert!(matches!(parse_pgm("P2\n0 2\n255\n", meta), Err(FloorplanError::ZeroArea)));
        assert!(matches!(parse_pgm("P5\n1 1\n255\n0", meta), Err(FloorplanError::MalformedFile(_))));
        assert!(matches!(parse_pgm("P2\n1 1\n255\nabc", meta), Err(FloorplanError::MalformedFile(_))));
    }

    #[test]
    fn load_with_sidecar_and_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "map.pgm", "P2\n2 2\n255\n0 255\n255 255\n");
        write_tmp(&dir, "map.json", r##"{"resolution":0.2,"origin":[-1.0,0.5]}"##);
        let g = load_grid(&p, GridFormat::PgmAscii, None).unwrap();
        assert_eq!(g.resolution(), 0.2);
        // top-left pixel is row j = 1
        assert!(g.is_occupied(0, 1));
        assert_eq!(g.free_count(), 3);

        let json = write_tmp(&dir, "map_grid.json", &g.to_json_grid());
        let back = load_grid(&json, GridFormat::JsonGrid, None).unwrap();
        assert_eq!(back, g);
        let meta = GridMeta {
            resolution: 0.2,
            origin: [-1.0, 0.5],
        };
        assert_eq!(parse_pgm(&g.to_pgm(), meta).unwrap(), g);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_grid(Path::new("/nonexistent/floor.json"), GridFormat::JsonGrid, None)
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/floor.json"));
    }
}
