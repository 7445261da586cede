//! Bird's-eye-view geometry: the ego-centric ground plane, a square occupancy
//! grid over it, and rasterization of oriented boxes onto that grid.
//!
//! Conventions used throughout the crate:
//!
//! * The ego frame has +x forward and +y left; yaw is measured
//!   counter-clockwise from +x and normalized to `(-pi, pi]`.
//! * The grid covers `[-half_extent, +half_extent)` on both axes. Rows index
//!   the x axis, columns the y axis, and `(row, col) = (0, 0)` sits at the
//!   `(-x, -y)` corner.
//! * A cell belongs to a box footprint iff the cell's center lies inside the
//!   box rectangle, boundary included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalizes an angle in radians to the half-open interval `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let r = yaw.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r - std::f64::consts::TAU
    } else {
        r
    }
}

/// A 2D pose on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    /// Builds a pose, normalizing `yaw` to `(-pi, pi]`.
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2 {
            x,
            y,
            yaw: normalize_yaw(yaw),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Expresses a world-frame pose in the frame of `ego` (also world-frame).
pub fn ego_transform(world: Pose2, ego: Pose2) -> Pose2 {
    let dx = world.x - ego.x;
    let dy = world.y - ego.y;
    let (sin_e, cos_e) = ego.yaw.sin_cos();
    Pose2::new(
        dx * cos_e + dy * sin_e,
        -dx * sin_e + dy * cos_e,
        world.yaw - ego.yaw,
    )
}

/// Inverse of [`ego_transform`]: maps a pose in the frame of `ego` back to
/// the world frame.
pub fn ego_untransform(local: Pose2, ego: Pose2) -> Pose2 {
    let (sin_e, cos_e) = ego.yaw.sin_cos();
    Pose2::new(
        ego.x + local.x * cos_e - local.y * sin_e,
        ego.y + local.x * sin_e + local.y * cos_e,
        local.yaw + ego.yaw,
    )
}

/// Object categories carried by detections and predicted cells.
///
/// `Background` never labels a detection or a track; it is the grid's
/// "nothing predicted here" state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    Background,
    Vehicle,
    Pedestrian,
    Bike,
    Others,
}

impl ObjectClass {
    /// All classes a detection may carry (everything except `Background`).
    pub const DETECTABLE: [ObjectClass; 4] = [
        ObjectClass::Vehicle,
        ObjectClass::Pedestrian,
        ObjectClass::Bike,
        ObjectClass::Others,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectClass::Background => "background",
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Bike => "bike",
            ObjectClass::Others => "others",
        }
    }
}

impl std::fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid cell address: `row` indexes x (forward), `col` indexes y (left).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

/// Square grid over `[-half_extent, +half_extent)^2`, with `cell_size`
/// dividing the span exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    cell_size: f64,
    half_extent: f64,
    cells_per_side: usize,
}

impl GridSpec {
    /// `cell_size` and `half_extent` must be positive and finite, and
    /// `2 * half_extent` must be an integer multiple of `cell_size`.
    pub fn new(cell_size: f64, half_extent: f64) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::Config(format!(
                "grid cell_size must be positive and finite, got {cell_size}"
            )));
        }
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::Config(format!(
                "grid half_extent must be positive and finite, got {half_extent}"
            )));
        }
        let per_side = 2.0 * half_extent / cell_size;
        let rounded = per_side.round();
        if (per_side - rounded).abs() > 1e-9 || rounded < 1.0 {
            return Err(Error::Config(format!(
                "grid span 2*{half_extent} is not an integer multiple of cell_size {cell_size}"
            )));
        }
        Ok(GridSpec {
            cell_size,
            half_extent,
            cells_per_side: rounded as usize,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    /// Total number of cells (`cells_per_side` squared).
    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn contains(&self, idx: CellIndex) -> bool {
        idx.row < self.cells_per_side && idx.col < self.cells_per_side
    }

    /// Row-major offset of `idx` into a dense per-cell array.
    pub fn flat_index(&self, idx: CellIndex) -> usize {
        debug_assert!(self.contains(idx));
        idx.row * self.cells_per_side + idx.col
    }

    /// Center of cell `idx` in the grid frame. Out-of-range indices are a
    /// caller bug.
    pub fn cell_center(&self, idx: CellIndex) -> (f64, f64) {
        assert!(self.contains(idx), "cell index {idx:?} out of range");
        (
            -self.half_extent + (idx.row as f64 + 0.5) * self.cell_size,
            -self.half_extent + (idx.col as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing the point, or `None` when the point falls outside the
    /// grid. Each axis covers the half-open span `[-half_extent, half_extent)`.
    pub fn point_to_cell(&self, x: f64, y: f64) -> Option<CellIndex> {
        let row = (x + self.half_extent) / self.cell_size;
        let col = (y + self.half_extent) / self.cell_size;
        if row < 0.0 || col < 0.0 {
            return None;
        }
        let (row, col) = (row.floor() as usize, col.floor() as usize);
        if row >= self.cells_per_side || col >= self.cells_per_side {
            return None;
        }
        Some(CellIndex { row, col })
    }
}

/// Oriented 3D bounding box: center, size as (length, width, height), yaw
/// about the vertical axis. Length runs along the box's forward direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb3 {
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
}

impl Obb3 {
    pub fn validate(&self) -> Result<()> {
        if !self.center.iter().all(|v| v.is_finite()) || !self.yaw.is_finite() {
            return Err(Error::Data("box center and yaw must be finite".into()));
        }
        if !self.size.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::Data(format!(
                "box size must be positive and finite, got {:?}",
                self.size
            )));
        }
        Ok(())
    }
}

/// A box footprint on the ground plane: center, (length, width), yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObbBev {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub yaw: f64,
}

impl ObbBev {
    /// True when the point lies inside the rectangle, boundary included.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let dx = x - self.center[0];
        let dy = y - self.center[1];
        let (sin_yaw, cos_yaw) = self.yaw.sin_cos();
        let u = dx * cos_yaw + dy * sin_yaw;
        let v = -dx * sin_yaw + dy * cos_yaw;
        u.abs() <= self.size[0] * 0.5 && v.abs() <= self.size[1] * 0.5
    }
}

/// Drops the vertical axis of a 3D box, keeping center, planar size, and yaw.
pub fn project_to_bev(box3: &Obb3) -> ObbBev {
    ObbBev {
        center: [box3.center[0], box3.center[1]],
        size: [box3.size[0], box3.size[1]],
        yaw: box3.yaw,
    }
}

/// Grid cells whose centers lie inside the box rectangle (boundary included),
/// in ascending `(row, col)` order with no duplicates. Boxes partly or fully
/// outside the grid yield only their in-grid cells.
///
/// Candidates are restricted to the box's axis-aligned bounds plus one cell
/// of margin; each candidate is then tested exactly.
pub fn rasterize(obb: &ObbBev, grid: &GridSpec) -> Vec<CellIndex> {
    let (sin_yaw, cos_yaw) = obb.yaw.sin_cos();
    let half_l = obb.size[0] * 0.5;
    let half_w = obb.size[1] * 0.5;
    // Axis-aligned half-extents of the rotated rectangle.
    let ext_x = half_l * cos_yaw.abs() + half_w * sin_yaw.abs();
    let ext_y = half_l * sin_yaw.abs() + half_w * cos_yaw.abs();

    let n = grid.cells_per_side() as i64;
    let h = grid.half_extent();
    let cs = grid.cell_size();
    let clamp_lo = |v: f64| (((v + h) / cs).floor() as i64 - 1).max(0);
    let clamp_hi = |v: f64| (((v + h) / cs).floor() as i64 + 1).min(n - 1);
    let row_lo = clamp_lo(obb.center[0] - ext_x);
    let row_hi = clamp_hi(obb.center[0] + ext_x);
    let col_lo = clamp_lo(obb.center[1] - ext_y);
    let col_hi = clamp_hi(obb.center[1] + ext_y);

    let mut cells = Vec::new();
    for row in row_lo..=row_hi {
        for col in col_lo..=col_hi {
            let idx = CellIndex {
                row: row as usize,
                col: col as usize,
            };
            let (x, y) = grid.cell_center(idx);
            if obb.contains_point(x, y) {
                cells.push(idx);
            }
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// Reference rasterizer: tests every cell in the grid, no candidate
    /// pruning. Kept deliberately independent of `rasterize`'s bounds logic.
    fn rasterize_brute_force(obb: &ObbBev, grid: &GridSpec) -> Vec<CellIndex> {
        let mut cells = Vec::new();
        for row in 0..grid.cells_per_side() {
            for col in 0..grid.cells_per_side() {
                let idx = CellIndex { row, col };
                let (x, y) = grid.cell_center(idx);
                if obb.contains_point(x, y) {
                    cells.push(idx);
                }
            }
        }
        cells
    }

    fn grid(cell_size: f64, half_extent: f64) -> GridSpec {
        GridSpec::new(cell_size, half_extent).unwrap()
    }

    #[test]
    fn normalize_yaw_lands_in_half_open_interval() {
        assert_eq!(normalize_yaw(0.0), 0.0);
        assert_eq!(normalize_yaw(PI), PI);
        assert_eq!(normalize_yaw(-PI), PI);
        assert!((normalize_yaw(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_yaw(-FRAC_PI_2) + FRAC_PI_2).abs() < 1e-12);
        assert!((normalize_yaw(2.5 * PI) - 0.5 * PI).abs() < 1e-12);
        for k in -7..=7 {
            let y = normalize_yaw(0.3 + k as f64 * std::f64::consts::TAU);
            assert!((y - 0.3).abs() < 1e-9);
        }
    }

    #[test]
    fn ego_transform_matches_worked_example() {
        // A point one meter ahead of the origin, seen by an ego at the origin
        // facing +y, appears one meter to the ego's right.
        let world = Pose2::new(1.0, 0.0, 0.0);
        let ego = Pose2::new(0.0, 0.0, FRAC_PI_2);
        let local = ego_transform(world, ego);
        assert!(local.x.abs() < 1e-12);
        assert!((local.y - (-1.0)).abs() < 1e-12);
        assert!((local.yaw - (-FRAC_PI_2)).abs() < 1e-12);
    }

    #[test]
    fn ego_untransform_inverts_ego_transform() {
        let ego = Pose2::new(3.2, -1.7, 0.8);
        let world = Pose2::new(-4.0, 9.5, -2.3);
        let back = ego_untransform(ego_transform(world, ego), ego);
        assert!((back.x - world.x).abs() < 1e-9);
        assert!((back.y - world.y).abs() < 1e-9);
        assert!((normalize_yaw(back.yaw - world.yaw)).abs() < 1e-9);
    }

    #[test]
    fn grid_spec_rejects_bad_parameters() {
        assert!(GridSpec::new(0.0, 32.0).is_err());
        assert!(GridSpec::new(-0.25, 32.0).is_err());
        assert!(GridSpec::new(0.25, 0.0).is_err());
        assert!(GridSpec::new(f64::NAN, 32.0).is_err());
        // 2 * 32 / 0.3 is not an integer.
        assert!(GridSpec::new(0.3, 32.0).is_err());
        let g = grid(0.25, 32.0);
        assert_eq!(g.cells_per_side(), 256);
        assert_eq!(g.cell_count(), 256 * 256);
    }

    #[test]
    fn cell_center_matches_worked_example() {
        // 4-cell-per-side grid over [-2, 2): cell (0, 0) is centered at
        // (-1.5, -1.5).
        let g = grid(1.0, 2.0);
        assert_eq!(g.cell_center(CellIndex { row: 0, col: 0 }), (-1.5, -1.5));
        assert_eq!(g.cell_center(CellIndex { row: 3, col: 1 }), (1.5, -0.5));
    }

    #[test]
    fn point_to_cell_round_trips_cell_centers() {
        let g = grid(0.5, 8.0);
        for row in 0..g.cells_per_side() {
            for col in 0..g.cells_per_side() {
                let idx = CellIndex { row, col };
                let (x, y) = g.cell_center(idx);
                assert_eq!(g.point_to_cell(x, y), Some(idx));
            }
        }
    }

    #[test]
    fn point_to_cell_is_half_open_per_axis() {
        let g = grid(1.0, 2.0);
        assert_eq!(
            g.point_to_cell(-2.0, -2.0),
            Some(CellIndex { row: 0, col: 0 })
        );
        assert_eq!(g.point_to_cell(2.0, 0.0), None);
        assert_eq!(g.point_to_cell(0.0, 2.0), None);
        assert_eq!(g.point_to_cell(-2.001, 0.0), None);
        assert_eq!(
            g.point_to_cell(1.999, 1.999),
            Some(CellIndex { row: 3, col: 3 })
        );
    }

    #[test]
    fn rasterize_axis_aligned_box_covers_expected_cell_block() {
        // 4 m x 2 m box at the origin on a 0.5 m grid. The box corners land
        // on cell corners, so the footprint is exactly 8 x 4 cells.
        let g = grid(0.5, 8.0);
        let obb = ObbBev {
            center: [0.0, 0.0],
            size: [4.0, 2.0],
            yaw: 0.0,
        };
        let cells = rasterize(&obb, &g);
        assert_eq!(cells.len(), 32);
        assert_eq!(cells, rasterize_brute_force(&obb, &g));
        for c in &cells {
            assert!((12..20).contains(&c.row), "row {} outside block", c.row);
            assert!((14..18).contains(&c.col), "col {} outside block", c.col);
        }
    }

    #[test]
    fn rasterize_includes_boundary_cells() {
        // 1 m x 1 m box at the origin on a 1 m grid: the box edges pass
        // exactly through the four nearest cell centers, which all count.
        let g = grid(1.0, 2.0);
        let obb = ObbBev {
            center: [0.0, 0.0],
            size: [1.0, 1.0],
            yaw: 0.0,
        };
        let cells = rasterize(&obb, &g);
        assert_eq!(
            cells,
            vec![
                CellIndex { row: 1, col: 1 },
                CellIndex { row: 1, col: 2 },
                CellIndex { row: 2, col: 1 },
                CellIndex { row: 2, col: 2 },
            ]
        );
    }

    #[test]
    fn rasterize_tiny_box_on_a_cell_center_yields_that_cell() {
        let g = grid(0.5, 8.0);
        let obb = ObbBev {
            center: [0.25, 0.25],
            size: [0.1, 0.1],
            yaw: 0.0,
        };
        let cells = rasterize(&obb, &g);
        assert_eq!(cells, vec![g.point_to_cell(0.25, 0.25).unwrap()]);
    }

    #[test]
    fn rasterize_box_outside_grid_is_empty() {
        let g = grid(0.5, 8.0);
        let obb = ObbBev {
            center: [18.0, 0.0],
            size: [4.0, 2.0],
            yaw: 0.3,
        };
        assert!(rasterize(&obb, &g).is_empty());
    }

    #[test]
    fn rasterize_clips_partially_outside_box_to_grid() {
        let g = grid(0.5, 8.0);
        let obb = ObbBev {
            center: [7.9, 0.0],
            size: [4.0, 2.0],
            yaw: 0.0,
        };
        let cells = rasterize(&obb, &g);
        assert!(!cells.is_empty());
        assert_eq!(cells, rasterize_brute_force(&obb, &g));
        assert!(cells.iter().all(|c| g.contains(*c)));
    }

    #[test]
    fn rasterize_output_is_sorted_and_unique() {
        let g = grid(0.25, 8.0);
        let obb = ObbBev {
            center: [1.3, -2.1],
            size: [4.5, 1.8],
            yaw: 0.7,
        };
        let cells = rasterize(&obb, &g);
        assert!(cells.windows(2).all(|w| w[0] < w[1]));
    }

    proptest::proptest! {
        #[test]
        fn prop_rasterize_matches_brute_force(
            cx in -12.0f64..12.0,
            cy in -12.0f64..12.0,
            len in 0.3f64..6.0,
            wid in 0.3f64..3.0,
            yaw in -PI..PI,
        ) {
            let g = grid(0.5, 8.0);
            let obb = ObbBev { center: [cx, cy], size: [len, wid], yaw };
            proptest::prop_assert_eq!(rasterize(&obb, &g), rasterize_brute_force(&obb, &g));
        }

        #[test]
        fn prop_rotating_by_pi_preserves_footprint(
            cx in -6.0f64..6.0,
            cy in -6.0f64..6.0,
            len in 0.3f64..5.0,
            wid in 0.3f64..2.5,
            yaw in -3.0f64..3.0,
        ) {
            let g = grid(0.5, 8.0);
            let a = ObbBev { center: [cx, cy], size: [len, wid], yaw };
            let b = ObbBev { center: [cx, cy], size: [len, wid], yaw: yaw + PI };
            proptest::prop_assert_eq!(rasterize(&a, &g), rasterize(&b, &g));
        }

        #[test]
        fn prop_enlarging_a_box_never_loses_cells(
            cx in -6.0f64..6.0,
            cy in -6.0f64..6.0,
            len in 0.3f64..4.0,
            wid in 0.3f64..2.0,
            yaw in -PI..PI,
            scale in 1.1f64..3.0,
        ) {
            let g = grid(0.5, 8.0);
            let small = ObbBev { center: [cx, cy], size: [len, wid], yaw };
            let large = ObbBev { center: [cx, cy], size: [len * scale, wid * scale], yaw };
            let small_cells = rasterize(&small, &g);
            let large_cells = rasterize(&large, &g);
            for c in &small_cells {
                proptest::prop_assert!(large_cells.binary_search(c).is_ok());
            }
        }

        #[test]
        fn prop_ego_transform_round_trips(
            wx in -50.0f64..50.0,
            wy in -50.0f64..50.0,
            wyaw in -PI..PI,
            ex in -50.0f64..50.0,
            ey in -50.0f64..50.0,
            eyaw in -PI..PI,
        ) {
            let world = Pose2::new(wx, wy, wyaw);
            let ego = Pose2::new(ex, ey, eyaw);
            let back = ego_untransform(ego_transform(world, ego), ego);
            proptest::prop_assert!((back.x - world.x).abs() < 1e-8);
            proptest::prop_assert!((back.y - world.y).abs() < 1e-8);
            proptest::prop_assert!(normalize_yaw(back.yaw - world.yaw).abs() < 1e-8);
        }

        #[test]
        fn prop_normalize_yaw_is_idempotent_and_in_range(yaw in -100.0f64..100.0) {
            let n = normalize_yaw(yaw);
            proptest::prop_assert!(n > -PI && n <= PI);
            proptest::prop_assert_eq!(normalize_yaw(n), n);
        }
    }
}
