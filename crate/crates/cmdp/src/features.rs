//! Feature maps `phi : S x A -> R^d` for linear action-value approximation.
//!
//! Two config-facing kinds: one-hot (exactly representable tabular case) and
//! tile coding over a 2-D grid with a separate feature block per action. A
//! table-backed kind exists for arbitrary fixed features in tests.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("tile sizes must be positive, got {0:?}")]
    ZeroTile((usize, usize)),
    #[error("grid dimensions must be positive, got {0:?}")]
    ZeroGrid((usize, usize)),
    #[error("need at least one tiling")]
    ZeroTilings,
    #[error("expected {expected} offsets, got {got}")]
    OffsetCount { expected: usize, got: usize },
    #[error("offset {0:?} must be smaller than the tile size per dimension")]
    OffsetTooLarge((usize, usize)),
    #[error("feature table shape mismatch: {0}")]
    TableShape(String),
}

/// Deterministic feature map over state-action pairs.
#[derive(Debug, Clone)]
pub enum FeatureMap {
    OneHot {
        n_states: usize,
        n_actions: usize,
    },
    TileCoding(TileCoding),
    /// Fixed dense table, one feature vector per `(s, a)` in row-major order.
    Table {
        n_states: usize,
        n_actions: usize,
        dim: usize,
        rows: Vec<Vec<f64>>,
    },
}

/// Binary tile-coding features over a `rows x cols` grid of states.
///
/// Each tiling partitions the grid into `ceil(rows/tile.0) * ceil(cols/tile.1)`
/// tiles; tiling `k` is shifted by `floor(k * tile / n_tilings)` cells per
/// dimension (indices clamp at the grid edge so every tiling has the same
/// tile count). Features are laid out block-diagonally per action, so
/// `d = n_tilings * tiles_per_tiling * n_actions` and exactly `n_tilings`
/// entries are active for any pair.
#[derive(Debug, Clone)]
pub struct TileCoding {
    pub grid: (usize, usize),
    pub n_actions: usize,
    pub tile: (usize, usize),
    pub n_tilings: usize,
    pub offsets: Vec<(usize, usize)>,
    tiles_per_dim: (usize, usize),
}

impl TileCoding {
    pub fn tiles_per_tiling(&self) -> usize {
        self.tiles_per_dim.0 * self.tiles_per_dim.1
    }
}

fn div_ceil(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

impl FeatureMap {
    /// One-hot over pairs: dimension `S * A`, the hot index is `s * A + a`.
    pub fn one_hot(n_states: usize, n_actions: usize) -> Self {
        FeatureMap::OneHot {
            n_states,
            n_actions,
        }
    }

    /// Tile coding; `offsets = None` uses the default shift rule.
    pub fn tile_coding(
        grid: (usize, usize),
        n_actions: usize,
        tile: (usize, usize),
        n_tilings: usize,
        offsets: Option<Vec<(usize, usize)>>,
    ) -> Result<Self, FeatureError> {
        if tile.0 == 0 || tile.1 == 0 {
            return Err(FeatureError::ZeroTile(tile));
        }
        if grid.0 == 0 || grid.1 == 0 {
            return Err(FeatureError::ZeroGrid(grid));
        }
        if n_tilings == 0 {
            return Err(FeatureError::ZeroTilings);
        }
        let offsets = match offsets {
            Some(o) => {
                if o.len() != n_tilings {
                    return Err(FeatureError::OffsetCount {
                        expected: n_tilings,
                        got: o.len(),
                    });
                }
                if let Some(&bad) = o.iter().find(|&&(r, c)| r >= tile.0 || c >= tile.1) {
                    return Err(FeatureError::OffsetTooLarge(bad));
                }
                o
            }
            None => (0..n_tilings)
                .map(|k| (k * tile.0 / n_tilings, k * tile.1 / n_tilings))
                .collect(),
        };
        let tiles_per_dim = (div_ceil(grid.0, tile.0), div_ceil(grid.1, tile.1));
        Ok(FeatureMap::TileCoding(TileCoding {
            grid,
            n_actions,
            tile,
            n_tilings,
            offsets,
            tiles_per_dim,
        }))
    }

    /// Arbitrary fixed features; `rows[s * n_actions + a]` is `phi(s, a)`.
    pub fn from_table(
        n_states: usize,
        n_actions: usize,
        dim: usize,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, FeatureError> {
        if rows.len() != n_states * n_actions {
            return Err(FeatureError::TableShape(format!(
                "{} rows for {} pairs",
                rows.len(),
                n_states * n_actions
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(FeatureError::TableShape(format!(
                "row {bad} has length {}, expected {dim}",
                rows[bad].len()
            )));
        }
        Ok(FeatureMap::Table {
            n_states,
            n_actions,
            dim,
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::OneHot {
                n_states,
                n_actions,
            } => n_states * n_actions,
            FeatureMap::TileCoding(tc) => tc.n_tilings * tc.tiles_per_tiling() * tc.n_actions,
            FeatureMap::Table { dim, .. } => *dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FeatureMap::OneHot { .. } => "one_hot",
            FeatureMap::TileCoding(_) => "tile_coding",
            FeatureMap::Table { .. } => "table",
        }
    }

    /// Indices of the nonzero (unit) entries; for the table kind this is the
    /// support of the stored vector.
    pub fn active_indices(&self, s: usize, a: usize) -> Vec<usize> {
        match self {
            FeatureMap::OneHot { n_actions, .. } => vec![s * n_actions + a],
            FeatureMap::TileCoding(tc) => {
                let (row, col) = (s / tc.grid.1, s % tc.grid.1);
                debug_assert!(row < tc.grid.0, "state {s} outside the grid");
                let block = tc.n_tilings * tc.tiles_per_tiling();
                (0..tc.n_tilings)
                    .map(|k| {
                        let (o_r, o_c) = tc.offsets[k];
                        let t_r = ((row + o_r) / tc.tile.0).min(tc.tiles_per_dim.0 - 1);
                        let t_c = ((col + o_c) / tc.tile.1).min(tc.tiles_per_dim.1 - 1);
                        a * block + k * tc.tiles_per_tiling() + t_r * tc.tiles_per_dim.1 + t_c
                    })
                    .collect()
            }
            FeatureMap::Table {
                rows, n_actions, ..
            } => rows[s * n_actions + a]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i)
                .collect(),
        }
    }

    /// Dense feature vector of length `dim()`.
    pub fn featurize(&self, s: usize, a: usize) -> Vec<f64> {
        match self {
            FeatureMap::Table {
                rows, n_actions, ..
            } => rows[s * n_actions + a].clone(),
            _ => {
                let mut phi = vec![0.0; self.dim()];
                for idx in self.active_indices(s, a) {
                    phi[idx] = 1.0;
                }
                phi
            }
        }
    }
}
