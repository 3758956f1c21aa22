//! Grid geometry, augmented occupancy grids (AOG) and predicted occupancy grids (POG).
//!
//! Coordinates are in the EGO frame: `x` points forward, `y` to the left, headings are
//! counter-clockwise from `+x`. Cell `(i, j)` is zero-based; `i` runs along `x` over the
//! `I` columns (cell length), `j` along `y` over the `J` rows (cell width).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pgm::GrayImage;
use crate::scenario::Scene;
use crate::{Error, Result};

/// Number of attributes per AOG cell: occupancy, velocity, orientation, a_x, a_y.
pub const CELL_ATTRIBUTES: usize = 5;

/// Snapping tolerance for points that sit on cell or footprint boundaries.
const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// `I`, cells along `x`.
    pub cols: usize,
    /// `J`, cells along `y`.
    pub rows: usize,
    pub cell_length: f64,
    pub cell_width: f64,
    /// World coordinates of the outer corner of cell `(0, 0)`.
    pub origin: [f64; 2],
    pub ego_cg: [f64; 2],
}

impl GridSpec {
    /// 40 m x 40 m at 0.5 m resolution (80 x 80 cells).
    pub fn full_scale() -> Self {
        GridSpec {
            cols: 80,
            rows: 80,
            cell_length: 0.5,
            cell_width: 0.5,
            origin: [0.0, -20.0],
            ego_cg: [2.5, 0.0],
        }
    }

    /// Same 40 m x 40 m area with `n x n` cells.
    pub fn square(n: usize) -> Self {
        let cell = 40.0 / n as f64;
        GridSpec {
            cols: n,
            rows: n,
            cell_length: cell,
            cell_width: cell,
            ..Self::full_scale()
        }
    }

    /// 20 x 20 cells of 2 m; flattens to 2000 values.
    pub fn desk() -> Self {
        Self::square(20)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::InvalidSpec("grid needs at least one row and column".into()));
        }
        if !(self.cell_length > 0.0 && self.cell_width > 0.0) {
            return Err(Error::InvalidSpec("cell sizes must be positive".into()));
        }
        if !self.origin.iter().chain(&self.ego_cg).all(|v| v.is_finite()) {
            return Err(Error::InvalidSpec("origin and ego placement must be finite".into()));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn flat_len(&self) -> usize {
        CELL_ATTRIBUTES * self.cell_count()
    }

    /// Linear cell index, row-major over `(j, i)`.
    pub fn linear(&self, cell: CellIndex) -> usize {
        cell.j * self.cols + cell.i
    }

    pub fn cell_at(&self, linear: usize) -> CellIndex {
        CellIndex {
            i: linear % self.cols,
            j: linear / self.cols,
        }
    }

    pub fn cell_center(&self, cell: CellIndex) -> [f64; 2] {
        [
            self.origin[0] + (cell.i as f64 + 0.5) * self.cell_length,
            self.origin[1] + (cell.j as f64 + 0.5) * self.cell_width,
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.cell_count()).map(|k| self.cell_at(k))
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: usize,
    pub j: usize,
}

impl CellIndex {
    pub fn new(i: usize, j: usize) -> Self {
        CellIndex { i, j }
    }
}

/// Maps a coordinate to a cell index along one axis; shared edges go to the lower index.
fn axis_index(value: f64, origin: f64, size: f64, count: usize) -> Option<usize> {
    let t = (value - origin) / size;
    if t < -BOUNDARY_EPS || t > count as f64 + BOUNDARY_EPS {
        return None;
    }
    let nearest = t.round();
    let idx = if (t - nearest).abs() <= BOUNDARY_EPS {
        // on an edge: belongs to the cell below it, except the outer lower edge
        (nearest as usize).max(1) - 1
    } else {
        t.floor() as usize
    };
    Some(idx.min(count - 1))
}

/// Returns the cell containing `point`, or `None` when it lies outside the grid.
pub fn world_to_cell(point: [f64; 2], spec: &GridSpec) -> Option<CellIndex> {
    let i = axis_index(point[0], spec.origin[0], spec.cell_length, spec.cols)?;
    let j = axis_index(point[1], spec.origin[1], spec.cell_width, spec.rows)?;
    Some(CellIndex { i, j })
}

/// Half-open containment `[lo, hi)` with boundary snapping.
fn within_half_open(v: f64, half: f64) -> bool {
    v >= -half - BOUNDARY_EPS && v < half - BOUNDARY_EPS
}

/// True when `point` lies in the oriented rectangle. Membership is half-open in the
/// rectangle's own frame: `[-length/2, length/2) x [-width/2, width/2)`.
pub fn footprint_contains(
    center: [f64; 2],
    orientation: f64,
    length: f64,
    width: f64,
    point: [f64; 2],
) -> bool {
    let (s, c) = orientation.sin_cos();
    let dx = point[0] - center[0];
    let dy = point[1] - center[1];
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    within_half_open(lx, 0.5 * length) && within_half_open(ly, 0.5 * width)
}

/// All cells whose center lies inside the oriented rectangle, sorted by `(j, i)`.
pub fn rasterize_footprint(
    center: [f64; 2],
    orientation: f64,
    length: f64,
    width: f64,
    spec: &GridSpec,
) -> Vec<CellIndex> {
    let (s, c) = orientation.sin_cos();
    let hx = 0.5 * (length * c.abs() + width * s.abs());
    let hy = 0.5 * (length * s.abs() + width * c.abs());
    let i_range = axis_span(center[0] - hx, center[0] + hx, spec.origin[0], spec.cell_length, spec.cols);
    let j_range = axis_span(center[1] - hy, center[1] + hy, spec.origin[1], spec.cell_width, spec.rows);
    let (Some((i0, i1)), Some((j0, j1))) = (i_range, j_range) else {
        return Vec::new();
    };
    let mut cells = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let cell = CellIndex { i, j };
            if footprint_contains(center, orientation, length, width, spec.cell_center(cell)) {
                cells.push(cell);
            }
        }
    }
    cells
}

/// Candidate index range whose cell centers may fall in `[lo, hi]`.
fn axis_span(lo: f64, hi: f64, origin: f64, size: f64, count: usize) -> Option<(usize, usize)> {
    let first = ((lo - origin) / size - 0.5).floor() - 1.0;
    let last = ((hi - origin) / size - 0.5).ceil() + 1.0;
    if last < 0.0 || first > (count - 1) as f64 {
        return None;
    }
    Some((first.max(0.0) as usize, (last as usize).min(count - 1)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellAttributes {
    pub occupied: bool,
    pub velocity: f64,
    pub orientation: f64,
    pub accel_long: f64,
    pub accel_lat: f64,
}

impl CellAttributes {
    pub const EMPTY: CellAttributes = CellAttributes {
        occupied: false,
        velocity: 0.0,
        orientation: 0.0,
        accel_long: 0.0,
        accel_lat: 0.0,
    };

    pub const ROAD: CellAttributes = CellAttributes {
        occupied: true,
        ..Self::EMPTY
    };

    pub fn to_array(self) -> [f64; CELL_ATTRIBUTES] {
        [
            if self.occupied { 1.0 } else { 0.0 },
            self.velocity,
            self.orientation,
            self.accel_long,
            self.accel_lat,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedOccupancyGrid {
    pub spec: GridSpec,
    /// Row-major over `(j, i)`, see [`GridSpec::linear`].
    pub cells: Vec<CellAttributes>,
    pub timestamp: f64,
}

impl AugmentedOccupancyGrid {
    pub fn empty(spec: GridSpec, timestamp: f64) -> Self {
        AugmentedOccupancyGrid {
            cells: vec![CellAttributes::EMPTY; spec.cell_count()],
            spec,
            timestamp,
        }
    }

    pub fn get(&self, cell: CellIndex) -> &CellAttributes {
        &self.cells[self.spec.linear(cell)]
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| c.occupied).count()
    }
}

/// Encodes a scene: vehicle cells `[1, v, psi, a_x, a_y]`, infrastructure cells
/// `[1, 0, 0, 0, 0]`, everything else zero. Vehicles (EGO included) win over road.
pub fn encode_aog(scene: &Scene, spec: &GridSpec) -> Result<AugmentedOccupancyGrid> {
    spec.validate()?;
    let mut aog = AugmentedOccupancyGrid::empty(*spec, scene.t0);
    for cell in &scene.road.infrastructure {
        if cell.i < spec.cols && cell.j < spec.rows {
            aog.cells[spec.linear(*cell)] = CellAttributes::ROAD;
        }
    }
    let mut owner: Vec<Option<u32>> = vec![None; spec.cell_count()];
    for vehicle in scene.vehicles() {
        let st = &vehicle.state;
        if ![st.x, st.y, st.v, st.psi, vehicle.accel_long, vehicle.accel_lat]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "participant {} has a non-finite state",
                vehicle.id
            )));
        }
        let attrs = CellAttributes {
            occupied: true,
            velocity: st.v,
            orientation: st.psi,
            accel_long: vehicle.accel_long,
            accel_lat: vehicle.accel_lat,
        };
        for cell in vehicle.footprint_cells(spec) {
            let k = spec.linear(cell);
            if let Some(other) = owner[k] {
                return Err(Error::OverlappingFootprints {
                    first: other,
                    second: vehicle.id,
                });
            }
            owner[k] = Some(vehicle.id);
            aog.cells[k] = attrs;
        }
    }
    Ok(aog)
}

/// Flattens in cell-major order: cell `(i, j)` occupies entries
/// `5 * (j * I + i) .. 5 * (j * I + i) + 5` as `[occupancy, v, psi, a_x, a_y]`.
pub fn flatten(aog: &AugmentedOccupancyGrid) -> Vec<f64> {
    let mut out = Vec::with_capacity(aog.spec.flat_len());
    for cell in &aog.cells {
        out.extend_from_slice(&cell.to_array());
    }
    out
}

/// Inverse of [`flatten`]. Occupancy entries must be exactly 0 or 1.
pub fn unflatten(values: &[f64], spec: &GridSpec, timestamp: f64) -> Result<AugmentedOccupancyGrid> {
    if values.len() != spec.flat_len() {
        return Err(Error::DimensionMismatch {
            expected: spec.flat_len(),
            got: values.len(),
        });
    }
    let cells = values
        .chunks_exact(CELL_ATTRIBUTES)
        .map(|c| {
            let occupied = match c[0] {
                v if v == 0.0 => false,
                v if v == 1.0 => true,
                v => {
                    return Err(Error::InvalidArgument(format!(
                        "occupancy flag must be 0 or 1, found {v}"
                    )))
                }
            };
            Ok(CellAttributes {
                occupied,
                velocity: c[1],
                orientation: c[2],
                accel_long: c[3],
                accel_lat: c[4],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AugmentedOccupancyGrid {
        spec: *spec,
        cells,
        timestamp,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictedOccupancyGrid {
    pub spec: GridSpec,
    /// Row-major over `(j, i)`.
    pub probs: Vec<f64>,
    pub t_pred: f64,
}

impl PredictedOccupancyGrid {
    pub fn zeros(spec: GridSpec, t_pred: f64) -> Self {
        PredictedOccupancyGrid {
            probs: vec![0.0; spec.cell_count()],
            spec,
            t_pred,
        }
    }

    pub fn get(&self, cell: CellIndex) -> f64 {
        self.probs[self.spec.linear(cell)]
    }

    pub fn set(&mut self, cell: CellIndex, p: f64) {
        let k = self.spec.linear(cell);
        self.probs[k] = p;
    }

    /// Renders the grid as an image with `x` pointing up and `y` pointing left, so the
    /// EGO drives toward the top edge. Pixel `(row, col)` shows cell
    /// `(I - 1 - row, J - 1 - col)`; the image is `J` wide and `I` tall.
    pub fn to_image(&self) -> GrayImage {
        let (cols, rows) = (self.spec.cols, self.spec.rows);
        let mut img = GrayImage::new(rows, cols);
        for r in 0..cols {
            for c in 0..rows {
                let p = self.get(CellIndex::new(cols - 1 - r, rows - 1 - c));
                img.set(r, c, (255.0 * p.clamp(0.0, 1.0)).round() as u8);
            }
        }
        img
    }
}

/// Writes the POG as a binary PGM with pixel `round(255 * p)`; see
/// [`PredictedOccupancyGrid::to_image`] for the orientation.
pub fn export_image(pog: &PredictedOccupancyGrid, path: &Path) -> Result<()> {
    pog.to_image().write(path)
}
