//! Cloud normalization, Chamfer distance, voxelization and volumetric IoU.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Axis-aligned bounding box as `(min, max)`.
pub fn bounding_box(points: &[Point3<f64>]) -> (Point3<f64>, Point3<f64>) {
    let mut lo = Point3::from(Vector3::repeat(f64::INFINITY));
    let mut hi = Point3::from(Vector3::repeat(f64::NEG_INFINITY));
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

/// Centers the bounding box at the origin and scales its diagonal to 1.
pub fn normalize_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (lo, hi) = bounding_box(&cloud.points);
    let diagonal = (hi - lo).norm();
    if !(diagonal > 1e-12) {
        return Err(Error::DegenerateCloud);
    }
    let center = nalgebra::center(&lo, &hi);
    let scale = 1.0 / diagonal;
    Ok(PointCloud {
        points: cloud
            .points
            .iter()
            .map(|p| Point3::from((p - center) * scale))
            .collect(),
    })
}

/// Uniform hash grid answering exact nearest-neighbor queries.
struct NeighborGrid<'a> {
    points: &'a [Point3<f64>],
    origin: Point3<f64>,
    cell: f64,
    dims: [i64; 3],
    /// `starts[c]..starts[c + 1]` indexes `order` for cell `c`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> NeighborGrid<'a> {
    fn new(points: &'a [Point3<f64>]) -> Self {
        let (lo, hi) = bounding_box(points);
        let extent = hi - lo;
        let n = points.len() as f64;
        // about two points per cell for volumetric data
        let volume = extent.iter().map(|e| e.max(1e-9)).product::<f64>();
        let mut cell = (2.0 * volume / n).cbrt();
        let longest = extent.max();
        if !(cell > 0.0) || !cell.is_finite() {
            cell = 1.0;
        }
        // limit the cell count along the longest axis
        cell = cell.max(longest / 256.0).max(1e-9);
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as i64 + 1).max(1));
        let mut grid = Self {
            points,
            origin: lo,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let total = (dims[0] * dims[1] * dims[2]) as usize;
        let keys: Vec<usize> = points
            .iter()
            .map(|p| grid.flat(grid.cell_of(p)).expect("indexed point lies in grid"))
            .collect();
        let mut counts = vec![0usize; total + 1];
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 0..total {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0usize; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            order[fill[k]] = i;
            fill[k] += 1;
        }
        grid.starts = counts;
        grid.order = order;
        grid
    }

    fn cell_of(&self, p: &Point3<f64>) -> [i64; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            // saturate far-away queries instead of overflowing
            c.clamp(-1e15, 1e15) as i64
        })
    }

    fn flat(&self, c: [i64; 3]) -> Option<usize> {
        if (0..3).all(|a| c[a] >= 0 && c[a] < self.dims[a]) {
            Some(((c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]) as usize)
        } else {
            None
        }
    }

    /// Euclidean distance from `q` to its nearest indexed point.
    fn nearest(&self, q: &Point3<f64>) -> f64 {
        let c = self.cell_of(q);
        // Chebyshev ring distance from the query cell to the grid
        let start = (0..3)
            .map(|a| (-c[a]).max(c[a] - (self.dims[a] - 1)).max(0))
            .max()
            .unwrap_or(0);
        let last = (0..3)
            .map(|a| c[a].max(self.dims[a] - 1 - c[a]).max(0))
            .max()
            .unwrap_or(0);
        let mut best_sq = f64::INFINITY;
        let mut r = start;
        loop {
            for z in (c[2] - r).max(0)..=(c[2] + r).min(self.dims[2] - 1) {
                for y in (c[1] - r).max(0)..=(c[1] + r).min(self.dims[1] - 1) {
                    let on_shell_zy = (z - c[2]).abs() == r || (y - c[1]).abs() == r;
                    let xs: Vec<i64> = if on_shell_zy {
                        ((c[0] - r).max(0)..=(c[0] + r).min(self.dims[0] - 1)).collect()
                    } else {
                        [c[0] - r, c[0] + r]
                            .into_iter()
                            .filter(|&x| x >= 0 && x < self.dims[0])
                            .collect()
                    };
                    for x in xs {
                        let Some(k) = self.flat([x, y, z]) else { continue };
                        for &i in &self.order[self.starts[k]..self.starts[k + 1]] {
                            let d = (self.points[i] - q).norm_squared();
                            if d < best_sq {
                                best_sq = d;
                            }
                        }
                    }
                }
            }
            // anything unvisited lies at least r cells away
            let bound = r as f64 * self.cell;
            if r >= last || best_sq <= bound * bound {
                break;
            }
            r += 1;
        }
        best_sq.sqrt()
    }
}

fn mean_nearest(from: &[Point3<f64>], to: &NeighborGrid<'_>) -> f64 {
    let mut sum = 0.0;
    for p in from {
        sum += to.nearest(p);
    }
    sum / from.len() as f64
}

/// Symmetric Chamfer distance: mean nearest-neighbor distance from each cloud
/// to the other, summed. Exact nearest neighbors.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let grid_a = NeighborGrid::new(&a.points);
    let grid_b = NeighborGrid::new(&b.points);
    Ok(mean_nearest(&a.points, &grid_b) + mean_nearest(&b.points, &grid_a))
}

/// Chamfer distance multiplied by 100, the convention of published tables.
pub fn chamfer_distance_x100(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(100.0 * chamfer_distance(a, b)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub resolution: usize,
    pub min: Point3<f64>,
    pub max: Point3<f64>,
    /// `occupancy[(z * R + y) * R + x]`.
    pub occupancy: Vec<bool>,
    /// Points that fell outside the bounds and were ignored.
    pub out_of_bounds: usize,
}

impl VoxelGrid {
    pub fn occupied(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.resolution + y) * self.resolution + x
    }
}

/// Default voxelization bounds: the cube holding a normalized cloud.
pub fn unit_bounds() -> (Point3<f64>, Point3<f64>) {
    (Point3::new(-0.5, -0.5, -0.5), Point3::new(0.5, 0.5, 0.5))
}

/// Marks every voxel that contains at least one point. Cells are half-open;
/// points exactly on the upper bound go to the last cell.
pub fn voxelize(
    cloud: &[Point3<f64>],
    resolution: usize,
    bounds: (Point3<f64>, Point3<f64>),
) -> Result<VoxelGrid> {
    let (min, max) = bounds;
    if resolution == 0 {
        return Err(Error::BadParams("voxel resolution must be >= 1".into()));
    }
    if (0..3).any(|a| !(max[a] > min[a])) {
        return Err(Error::BadParams("voxel bounds are degenerate".into()));
    }
    let r = resolution;
    let mut grid = VoxelGrid {
        resolution: r,
        min,
        max,
        occupancy: vec![false; r * r * r],
        out_of_bounds: 0,
    };
    'points: for p in cloud {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            if !(p[a] >= min[a] && p[a] <= max[a]) {
                grid.out_of_bounds += 1;
                continue 'points;
            }
            let t = (p[a] - min[a]) / (max[a] - min[a]) * r as f64;
            idx[a] = (t.floor() as usize).min(r - 1);
        }
        let k = grid.index(idx[0], idx[1], idx[2]);
        grid.occupancy[k] = true;
    }
    Ok(grid)
}

/// `|A and B| / |A or B|`, 1 when both grids are empty.
pub fn volumetric_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    if a.resolution != b.resolution || a.min != b.min || a.max != b.max {
        return Err(Error::GridMismatch);
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.occupancy.iter().zip(&b.occupancy) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}
