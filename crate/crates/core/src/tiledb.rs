//! Georeferenced satellite tiles on a regular lattice.
//!
//! Tiles are metadata only (centre, fixed altitude, North-aligned heading).
//! Because the centres form a lattice, nearest-tile queries bucket by lattice
//! node and scan Chebyshev rings outward until the k-th candidate is closer
//! than anything an unscanned ring could hold.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

/// Altitude of every satellite tile above ground, metres.
pub const TILE_ALTITUDE: f64 = 300.0;
/// Heading of every satellite tile (North-aligned), degrees.
pub const TILE_HEADING: f64 = 0.0;
/// Default lattice spacing, metres.
pub const DEFAULT_SPACING: f64 = 50.0;
/// Default number of candidate tiles per query.
pub const DEFAULT_K: usize = 9;

pub const TILE_FILE_HEADER: &str = "#crossview-tiles-v1";

// relative slack for lattice membership and for the ring lower bound
const LATTICE_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum TileError {
    #[error("invalid grid bounds: {0}")]
    InvalidBounds(String),
    #[error("k = {k} outside 1..={available}")]
    InvalidK { k: usize, available: usize },
    #[error("non-finite query point")]
    NonFiniteQuery,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("tile file contains no tiles")]
    EmptySet,
    #[error("duplicate tile: {0}")]
    Duplicate(String),
    #[error("tile {id} at ({x}, {y}) is not on the lattice")]
    OffLattice { id: u32, x: f64, y: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TileError>;

/// One satellite tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileRecord {
    pub tile_id: u32,
    pub x: f64,
    pub y: f64,
}

impl TileRecord {
    pub fn center(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn altitude(&self) -> f64 {
        TILE_ALTITUDE
    }

    pub fn heading(&self) -> f64 {
        TILE_HEADING
    }

    /// Euclidean distance from the tile centre to `(x, y)`.
    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        let dx = self.x - x;
        let dy = self.y - y;
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
}

impl GridBounds {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, spacing: f64) -> Result<Self> {
        let b = Self {
            x_min,
            x_max,
            y_min,
            y_max,
            spacing,
        };
        b.validate()?;
        Ok(b)
    }

    fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.spacing];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(TileError::InvalidBounds("non-finite value".into()));
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(TileError::InvalidBounds(format!(
                "empty region x {}..{}, y {}..{}",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        if self.spacing <= 0.0 {
            return Err(TileError::InvalidBounds(format!(
                "spacing must be positive, got {}",
                self.spacing
            )));
        }
        Ok(())
    }

    fn nodes_along(&self, extent: f64) -> usize {
        (extent / self.spacing + LATTICE_SLACK).floor() as usize + 1
    }

    pub fn nx(&self) -> usize {
        self.nodes_along(self.x_max - self.x_min)
    }

    pub fn ny(&self) -> usize {
        self.nodes_along(self.y_max - self.y_min)
    }

    pub fn node_x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing
    }

    pub fn node_y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.spacing
    }
}

/// An immutable set of tiles with its lattice index.
#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    tiles: Vec<TileRecord>,
    bounds: GridBounds,
    nx: usize,
    ny: usize,
    // lattice node (j * nx + i) -> position in `tiles`
    nodes: Vec<Option<usize>>,
}

/// Full lattice over the bounds, ids assigned row-major from the south-west.
pub fn generate_grid(bounds: GridBounds) -> Result<TileSet> {
    bounds.validate()?;
    let (nx, ny) = (bounds.nx(), bounds.ny());
    let mut tiles = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            tiles.push(TileRecord {
                tile_id: (j * nx + i) as u32,
                x: bounds.node_x(i),
                y: bounds.node_y(j),
            });
        }
    }
    TileSet::from_tiles(bounds, tiles)
}

impl TileSet {
    /// Builds a set from explicit records (a subset of the lattice is fine).
    pub fn from_tiles(bounds: GridBounds, tiles: Vec<TileRecord>) -> Result<Self> {
        bounds.validate()?;
        if tiles.is_empty() {
            return Err(TileError::EmptySet);
        }
        let (nx, ny) = (bounds.nx(), bounds.ny());
        let mut nodes = vec![None; nx * ny];
        let mut ids = std::collections::HashSet::with_capacity(tiles.len());
        for (pos, t) in tiles.iter().enumerate() {
            if !ids.insert(t.tile_id) {
                return Err(TileError::Duplicate(format!("id {}", t.tile_id)));
            }
            let off = || TileError::OffLattice {
                id: t.tile_id,
                x: t.x,
                y: t.y,
            };
            let fi = ((t.x - bounds.x_min) / bounds.spacing).round();
            let fj = ((t.y - bounds.y_min) / bounds.spacing).round();
            if !(fi >= 0.0 && fj >= 0.0 && (fi as usize) < nx && (fj as usize) < ny) {
                return Err(off());
            }
            let (i, j) = (fi as usize, fj as usize);
            let slack = LATTICE_SLACK * bounds.spacing;
            if (t.x - bounds.node_x(i)).abs() > slack || (t.y - bounds.node_y(j)).abs() > slack {
                return Err(off());
            }
            let node = &mut nodes[j * nx + i];
            if node.is_some() {
                return Err(TileError::Duplicate(format!("centre ({}, {})", t.x, t.y)));
            }
            *node = Some(pos);
        }
        Ok(Self {
            tiles,
            bounds,
            nx,
            ny,
            nodes,
        })
    }

    pub fn tiles(&self) -> &[TileRecord] {
        &self.tiles
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn get(&self, tile_id: u32) -> Option<&TileRecord> {
        self.tiles.iter().find(|t| t.tile_id == tile_id)
    }

    /// The `k` tiles closest to `(x, y)`, sorted by distance then tile id.
    pub fn k_nearest(&self, x: f64, y: f64, k: usize) -> Result<Vec<TileRecord>> {
        if k == 0 || k > self.tiles.len() {
            return Err(TileError::InvalidK {
                k,
                available: self.tiles.len(),
            });
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(TileError::NonFiniteQuery);
        }
        let b = &self.bounds;
        let clamp = |u: f64, n: usize| u.round().clamp(0.0, (n - 1) as f64) as i64;
        let i0 = clamp((x - b.x_min) / b.spacing, self.nx);
        let j0 = clamp((y - b.y_min) / b.spacing, self.ny);
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let max_ring = i0.max(nx - 1 - i0).max(j0).max(ny - 1 - j0);

        let mut found: Vec<(f64, u32, usize)> = Vec::with_capacity(k + 16);
        let visit = |i: i64, j: i64, found: &mut Vec<(f64, u32, usize)>| {
            if i < 0 || j < 0 || i >= nx || j >= ny {
                return;
            }
            if let Some(pos) = self.nodes[(j * nx + i) as usize] {
                let t = &self.tiles[pos];
                found.push((t.distance_to(x, y), t.tile_id, pos));
            }
        };
        for r in 0..=max_ring {
            if r == 0 {
                visit(i0, j0, &mut found);
            } else {
                for i in (i0 - r)..=(i0 + r) {
                    visit(i, j0 - r, &mut found);
                    visit(i, j0 + r, &mut found);
                }
                for j in (j0 - r + 1)..(j0 + r) {
                    visit(i0 - r, j, &mut found);
                    visit(i0 + r, j, &mut found);
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let kth = found[k - 1].0;
                // every node in ring r+1 is at least (r + 0.5) spacings away
                let lower = (r as f64 + 0.5) * b.spacing;
                if kth < lower - 10.0 * LATTICE_SLACK * b.spacing {
                    break;
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(found[..k].iter().map(|&(_, _, pos)| self.tiles[pos]).collect())
    }

    pub fn to_text(&self) -> String {
        let b = &self.bounds;
        let mut out = String::with_capacity(32 * (self.tiles.len() + 2));
        out.push_str(TILE_FILE_HEADER);
        out.push('\n');
        let _ = writeln!(
            out,
            "bounds {} {} {} {} {}",
            b.x_min, b.x_max, b.y_min, b.y_max, b.spacing
        );
        for t in &self.tiles {
            let _ = writeln!(out, "{} {} {}", t.tile_id, t.x, t.y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let parse_err = |line: usize, msg: String| TileError::Parse { line, msg };

        match lines.next() {
            Some((_, h)) if h == TILE_FILE_HEADER => {}
            Some((n, h)) => {
                return Err(parse_err(
                    n,
                    format!("expected header `{TILE_FILE_HEADER}`, found `{h}`"),
                ))
            }
            None => return Err(parse_err(1, "empty file".into())),
        }
        let (n, meta) = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing bounds line".into()))?;
        let fields: Vec<&str> = meta.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "bounds" {
            return Err(parse_err(
                n,
                "expected `bounds x_min x_max y_min y_max spacing`".into(),
            ));
        }
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(n, format!("bad bounds value: {e}")))?;
        let bounds = GridBounds::new(nums[0], nums[1], nums[2], nums[3], nums[4])
            .map_err(|e| parse_err(n, e.to_string()))?;

        let mut tiles = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(parse_err(n, format!("expected `id x y`, found `{line}`")));
            }
            let tile_id = f[0]
                .parse::<u32>()
                .map_err(|e| parse_err(n, format!("bad tile id: {e}")))?;
            let x = f[1]
                .parse::<f64>()
                .map_err(|e| parse_err(n, format!("bad x: {e}")))?;
            let y = f[2]
                .parse::<f64>()
                .map_err(|e| parse_err(n, format!("bad y: {e}")))?;
            tiles.push(TileRecord { tile_id, x, y });
        }
        if tiles.is_empty() {
            return Err(TileError::EmptySet);
        }
        Self::from_tiles(bounds, tiles)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}
