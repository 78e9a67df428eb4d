//! Projection of 3D Gaussians to screen space and tile binning.

use crate::types::{CameraIntrinsics, Gaussian3D, GaussianId, Pose};
use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

/// Camera-frame depth below which Gaussians are culled.
pub const NEAR_PLANE: f64 = 0.01;

/// Anti-aliasing dilation added to both diagonal entries of the screen-space
/// covariance, in px^2.
pub const COV2D_DILATION: f64 = 0.3;

/// A Gaussian projected onto the imaging plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian2D {
    pub id: GaussianId,
    /// Center in pixel coordinates.
    pub mean2d: Vector2<f64>,
    /// Screen-space covariance, symmetric positive-definite after dilation.
    pub cov2d: Matrix2<f64>,
    /// Camera-frame z, strictly greater than [`NEAR_PLANE`].
    pub depth: f64,
    pub opacity: f64,
    pub color: Vector3<f64>,
}

/// Affine Jacobian of the pinhole projection at a camera-frame point.
pub fn projection_jacobian(intr: &CameraIntrinsics, p_cam: &Vector3<f64>) -> Matrix2x3<f64> {
    let z = p_cam.z;
    let z2 = z * z;
    Matrix2x3::new(
        intr.fx / z,
        0.0,
        -intr.fx * p_cam.x / z2,
        0.0,
        intr.fy / z,
        -intr.fy * p_cam.y / z2,
    )
}

/// Projects Gaussians to 2D, silently culling anything at or in front of the
/// near plane. The screen-space covariance is `J W Σ W^T J^T` plus the
/// diagonal dilation.
pub fn project_gaussians(
    gaussians: &[Gaussian3D],
    pose: &Pose,
    intr: &CameraIntrinsics,
) -> Vec<Gaussian2D> {
    let w = pose.rotation_matrix();
    let mut out = Vec::with_capacity(gaussians.len());
    for g in gaussians {
        let p_cam = pose.transform_point(&g.mu);
        if p_cam.z <= NEAR_PLANE {
            continue;
        }
        let (u, v) = intr.project(&p_cam);
        let jac = projection_jacobian(intr, &p_cam);
        let cov_cam: Matrix3<f64> = w * g.covariance() * w.transpose();
        let mut cov2d: Matrix2<f64> = jac * cov_cam * jac.transpose();
        cov2d[(0, 0)] += COV2D_DILATION;
        cov2d[(1, 1)] += COV2D_DILATION;
        out.push(Gaussian2D {
            id: g.id,
            mean2d: Vector2::new(u, v),
            cov2d,
            depth: p_cam.z,
            opacity: g.opacity,
            color: g.color,
        });
    }
    out
}

/// Regular tile grid over the image, row-major tile ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrid {
    pub tile_size: usize,
    pub width: usize,
    pub height: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

impl TileGrid {
    pub fn new(width: usize, height: usize, tile_size: usize) -> Self {
        assert!(tile_size > 0);
        Self {
            tile_size,
            width,
            height,
            tiles_x: width.div_ceil(tile_size),
            tiles_y: height.div_ceil(tile_size),
        }
    }

    pub fn tile_count(&self) -> usize {
        self.tiles_x * self.tiles_y
    }

    /// Pixel rectangle of a tile as half-open ranges `(x0, y0, x1, y1)`.
    pub fn tile_rect(&self, tile_id: usize) -> (usize, usize, usize, usize) {
        let tx = tile_id % self.tiles_x;
        let ty = tile_id / self.tiles_x;
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        (
            x0,
            y0,
            (x0 + self.tile_size).min(self.width),
            (y0 + self.tile_size).min(self.height),
        )
    }
}

/// Axis-aligned bounding box of the 3-sigma ellipse of a projected Gaussian,
/// in pixel-center coordinates.
pub fn support_aabb(g: &Gaussian2D) -> (f64, f64, f64, f64) {
    let rx = 3.0 * g.cov2d[(0, 0)].max(0.0).sqrt();
    let ry = 3.0 * g.cov2d[(1, 1)].max(0.0).sqrt();
    (
        g.mean2d.x - rx,
        g.mean2d.y - ry,
        g.mean2d.x + rx,
        g.mean2d.y + ry,
    )
}

/// All tiles whose pixel rectangle intersects the 3-sigma AABB of `g`.
/// Tiles are compared as closed intervals over their pixel centers.
pub fn intersect_tiles(g: &Gaussian2D, grid: &TileGrid) -> Vec<usize> {
    let (min_x, min_y, max_x, max_y) = support_aabb(g);
    if max_x < 0.0
        || max_y < 0.0
        || min_x > (grid.width - 1) as f64
        || min_y > (grid.height - 1) as f64
    {
        return Vec::new();
    }
    let ts = grid.tile_size as f64;
    // Tile tx spans pixel centers [tx*ts, tx*ts + ts - 1]; first tile whose
    // last center reaches min_x, last tile whose first center is before max_x.
    let tx0 = (((min_x - (ts - 1.0)) / ts).ceil().max(0.0)) as usize;
    let ty0 = (((min_y - (ts - 1.0)) / ts).ceil().max(0.0)) as usize;
    let tx1 = ((max_x / ts).floor() as usize).min(grid.tiles_x - 1);
    let ty1 = ((max_y / ts).floor() as usize).min(grid.tiles_y - 1);
    let mut tiles = Vec::with_capacity((tx1 - tx0 + 1) * (ty1 - ty0 + 1));
    for ty in ty0..=ty1 {
        for tx in tx0..=tx1 {
            tiles.push(ty * grid.tiles_x + tx);
        }
    }
    tiles
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub id: GaussianId,
    pub depth: f64,
}

/// Per-tile list of intersecting Gaussians, sorted ascending by depth with
/// ties broken by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTable {
    pub tile_id: usize,
    pub entries: Vec<TableEntry>,
}

pub fn build_gaussian_tables(g2ds: &[Gaussian2D], grid: &TileGrid) -> Vec<GaussianTable> {
    let mut tables: Vec<GaussianTable> = (0..grid.tile_count())
        .map(|tile_id| GaussianTable {
            tile_id,
            entries: Vec::new(),
        })
        .collect();
    for g in g2ds {
        for tile in intersect_tiles(g, grid) {
            tables[tile].entries.push(TableEntry {
                id: g.id,
                depth: g.depth,
            });
        }
    }
    for table in &mut tables {
        table
            .entries
            .sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.id.cmp(&b.id)));
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Scene;
    use nalgebra::UnitQuaternion;

    fn tiny_gaussian(id: GaussianId, mean: Vector2<f64>, depth: f64) -> Gaussian2D {
        Gaussian2D {
            id,
            mean2d: mean,
            cov2d: Matrix2::new(0.01, 0.0, 0.0, 0.01),
            depth,
            opacity: 1.0,
            color: Vector3::new(1.0, 1.0, 1.0),
        }
    }

    #[test]
    fn optical_axis_projects_to_principal_point() {
        let intr = CameraIntrinsics::new(100.0, 100.0, 31.5, 23.5, 64, 48);
        let g = Gaussian3D::new(
            0,
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.1, 0.1, 0.1),
            UnitQuaternion::identity(),
            1.0,
            Vector3::new(1.0, 0.0, 0.0),
        );
        let projected = project_gaussians(&[g], &Pose::identity(), &intr);
        assert_eq!(projected.len(), 1);
        assert_eq!(projected[0].mean2d, Vector2::new(31.5, 23.5));
        assert_eq!(projected[0].depth, 1.0);
    }

    #[test]
    fn near_plane_culls() {
        let intr = CameraIntrinsics::centered(100.0, 100.0, 64, 48);
        let mut scene = Scene::new();
        for (i, z) in [0.0, 0.01, -2.0, 0.5].iter().enumerate() {
            scene.push(Gaussian3D::new(
                i as GaussianId,
                Vector3::new(0.0, 0.0, *z),
                Vector3::new(0.1, 0.1, 0.1),
                UnitQuaternion::identity(),
                1.0,
                Vector3::new(1.0, 1.0, 1.0),
            ));
        }
        let projected = project_gaussians(&scene.gaussians, &Pose::identity(), &intr);
        assert_eq!(projected.len(), 1);
        assert_eq!(projected[0].id, 3);
    }

    #[test]
    fn tiny_gaussian_hits_exactly_its_tile() {
        let grid = TileGrid::new(64, 64, 16);
        let g = tiny_gaussian(0, Vector2::new(24.0, 8.0), 1.0);
        assert_eq!(intersect_tiles(&g, &grid), vec![1]);
    }

    #[test]
    fn straddling_gaussian_hits_both_tiles() {
        let grid = TileGrid::new(64, 32, 16);
        // Centered on the boundary between tile 2 and tile 3 of the bottom row.
        let g = Gaussian2D {
            id: 7,
            mean2d: Vector2::new(47.8, 24.0),
            cov2d: Matrix2::new(1.0, 0.0, 0.0, 1.0),
            depth: 2.0,
            opacity: 1.0,
            color: Vector3::zeros(),
        };
        assert_eq!(intersect_tiles(&g, &grid), vec![6, 7]);
    }

    #[test]
    fn off_image_gaussian_has_no_tiles() {
        let grid = TileGrid::new(64, 64, 16);
        let g = tiny_gaussian(0, Vector2::new(-50.0, -50.0), 1.0);
        assert!(intersect_tiles(&g, &grid).is_empty());
    }

    #[test]
    fn tables_sort_by_depth_then_id() {
        let grid = TileGrid::new(16, 16, 16);
        let g2ds = vec![
            tiny_gaussian(0, Vector2::new(8.0, 8.0), 3.0),
            tiny_gaussian(1, Vector2::new(8.0, 8.0), 1.0),
            tiny_gaussian(2, Vector2::new(8.0, 8.0), 2.0),
            tiny_gaussian(3, Vector2::new(8.0, 8.0), 2.0),
        ];
        let tables = build_gaussian_tables(&g2ds, &grid);
        let ids: Vec<GaussianId> = tables[0].entries.iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![1, 2, 3, 0]);
    }

    #[test]
    fn empty_scene_gives_empty_tables() {
        let grid = TileGrid::new(32, 32, 16);
        let tables = build_gaussian_tables(&[], &grid);
        assert_eq!(tables.len(), 4);
        assert!(tables.iter().all(|t| t.entries.is_empty()));
    }
}
