//! Binary silhouettes, exact Euclidean distance transform, the smoothed
//! silhouette field and bilinear value/gradient sampling.

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Binary mask, row-major, `1` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySilhouette {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<u8>,
}

impl BinarySilhouette {
    pub fn new(width: usize, height: usize, mask: Vec<u8>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: width * height,
                actual: mask.len(),
            });
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::BadParams("silhouette values must be 0 or 1".into()));
        }
        Ok(Self { width, height, mask })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut mask = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                mask.push(f(row, col) as u8);
            }
        }
        Self { width, height, mask }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.width + col] == 1
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }

    /// The mask as a real-valued grid.
    pub fn to_grid(&self) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.mask.iter().map(|&v| v as f64).collect(),
        }
    }

    /// Copy with `pad` background pixels added on every side.
    pub fn padded(&self, pad: usize) -> Self {
        let width = self.width + 2 * pad;
        let height = self.height + 2 * pad;
        let mut mask = vec![0u8; width * height];
        for row in 0..self.height {
            let dst = (row + pad) * width + pad;
            mask[dst..dst + self.width]
                .copy_from_slice(&self.mask[row * self.width..(row + 1) * self.width]);
        }
        Self { width, height, mask }
    }
}

/// Row-major real grid whose sample `(row, col)` sits at `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }
}

/// What a grid looks like outside its sample positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Border {
    /// Coordinates are clamped to the outermost sample centers.
    Clamp,
    /// Samples outside the grid read as zero.
    Zero,
}

/// The bilinear cell containing `uv` along with the interpolation weights and
/// whether the gradient along each axis is live.
struct Cell {
    x0: isize,
    y0: isize,
    fx: f64,
    fy: f64,
    live_x: bool,
    live_y: bool,
}

fn locate_axis(coord: f64, len: usize, border: Border) -> (isize, f64, bool) {
    let x = coord - 0.5;
    match border {
        Border::Clamp => {
            let max = (len - 1) as f64;
            if len == 1 {
                return (0, 0.0, false);
            }
            let live = x > 0.0 && x < max;
            let xc = x.clamp(0.0, max);
            let x0 = (xc.floor() as isize).min(len as isize - 2);
            (x0, xc - x0 as f64, live)
        }
        Border::Zero => {
            let x0 = x.floor();
            (x0 as isize, x - x0, true)
        }
    }
}

impl Cell {
    fn new(grid: &Grid, uv: Vector2<f64>, border: Border) -> Self {
        let (x0, fx, live_x) = locate_axis(uv.x, grid.width, border);
        let (y0, fy, live_y) = locate_axis(uv.y, grid.height, border);
        Self {
            x0,
            y0,
            fx,
            fy,
            live_x,
            live_y,
        }
    }

    /// Corner values `[top-left, top-right, bottom-left, bottom-right]`.
    fn corners(&self, grid: &Grid) -> [f64; 4] {
        let fetch = |r: isize, c: isize| -> f64 {
            if r < 0 || c < 0 || r >= grid.height as isize || c >= grid.width as isize {
                0.0
            } else {
                grid.at(r as usize, c as usize)
            }
        };
        let x1 = if grid.width == 1 { self.x0 } else { self.x0 + 1 };
        let y1 = if grid.height == 1 { self.y0 } else { self.y0 + 1 };
        [
            fetch(self.y0, self.x0),
            fetch(self.y0, x1),
            fetch(y1, self.x0),
            fetch(y1, x1),
        ]
    }
}

pub fn sample_with(grid: &Grid, uv: Vector2<f64>, border: Border) -> f64 {
    let cell = Cell::new(grid, uv, border);
    let [a, b, c, d] = cell.corners(grid);
    let (fx, fy) = (cell.fx, cell.fy);
    (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
}

/// Exact gradient of the bilinear interpolant, in value per pixel.
pub fn gradient_with(grid: &Grid, uv: Vector2<f64>, border: Border) -> Vector2<f64> {
    let cell = Cell::new(grid, uv, border);
    let [a, b, c, d] = cell.corners(grid);
    let (fx, fy) = (cell.fx, cell.fy);
    let du = if cell.live_x {
        (1.0 - fy) * (b - a) + fy * (d - c)
    } else {
        0.0
    };
    let dv = if cell.live_y {
        (1.0 - fx) * (c - a) + fx * (d - b)
    } else {
        0.0
    };
    Vector2::new(du, dv)
}

/// Bilinear interpolation with coordinates clamped to the border sample positions.
pub fn bilinear_sample(grid: &Grid, uv: Vector2<f64>) -> f64 {
    sample_with(grid, uv, Border::Clamp)
}

/// Gradient of [`bilinear_sample`]; zero along an axis where the coordinate is clamped.
pub fn bilinear_gradient(grid: &Grid, uv: Vector2<f64>) -> Vector2<f64> {
    gradient_with(grid, uv, Border::Clamp)
}

/// Value used for "no foreground seen yet" in the lower-envelope passes.
const FAR: f64 = 1e20;

/// Squared distance transform of a sampled 1-D function via the lower envelope
/// of parabolas rooted at each sample.
fn lower_envelope_1d(f: &[f64], out: &mut [f64], vertex: &mut [usize], boundary: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    vertex[0] = 0;
    boundary[0] = f64::NEG_INFINITY;
    boundary[1] = f64::INFINITY;
    let intersect = |q: usize, v: usize| -> f64 {
        let (qf, vf) = (q as f64, v as f64);
        ((f[q] + qf * qf) - (f[v] + vf * vf)) / (2.0 * (qf - vf))
    };
    for q in 1..n {
        let mut s = intersect(q, vertex[k]);
        // boundary[0] is -inf, so this stops at k == 0
        while s <= boundary[k] {
            k -= 1;
            s = intersect(q, vertex[k]);
        }
        k += 1;
        vertex[k] = q;
        boundary[k] = s;
        boundary[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while boundary[k + 1] < qf {
            k += 1;
        }
        let v = vertex[k];
        let dv = qf - v as f64;
        *o = dv * dv + f[v];
    }
}

/// Exact Euclidean distance (in pixels) from each pixel center to the nearest
/// foreground pixel center; zero on foreground.
pub fn distance_transform_l2(sil: &BinarySilhouette) -> Result<Grid> {
    if sil.foreground_count() == 0 {
        return Err(Error::EmptyForeground);
    }
    let (w, h) = (sil.width, sil.height);
    let mut sq: Vec<f64> = sil
        .mask
        .iter()
        .map(|&v| if v == 1 { 0.0 } else { FAR })
        .collect();

    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut vertex = vec![0usize; n];
    let mut boundary = vec![0.0; n + 1];

    // columns
    for col in 0..w {
        for row in 0..h {
            f[row] = sq[row * w + col];
        }
        lower_envelope_1d(&f[..h], &mut out[..h], &mut vertex, &mut boundary);
        for row in 0..h {
            sq[row * w + col] = out[row];
        }
    }
    // rows
    for row in 0..h {
        f[..w].copy_from_slice(&sq[row * w..(row + 1) * w]);
        lower_envelope_1d(&f[..w], &mut out[..w], &mut vertex, &mut boundary);
        sq[row * w..(row + 1) * w].copy_from_slice(&out[..w]);
    }

    Ok(Grid {
        width: w,
        height: h,
        data: sq.into_iter().map(f64::sqrt).collect(),
    })
}

/// Silhouette with its background replaced by a normalized distance ramp.
///
/// Values live on the padded frame: image coordinate `uv` corresponds to
/// `uv + (pad, pad)` in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedField {
    pub width: usize,
    pub height: usize,
    pub pad: usize,
    pub values: Grid,
    /// Identifier of the silhouette this field was built from, if any.
    pub source: Option<String>,
}

impl SmoothedField {
    /// Width and height of the padded frame.
    pub fn padded_size(&self) -> (usize, usize) {
        (self.values.width, self.values.height)
    }

    /// Diagonal of the padded frame in pixels.
    pub fn diagonal(&self) -> f64 {
        let (w, h) = self.padded_size();
        ((w * w + h * h) as f64).sqrt()
    }

    /// Lower bound of the background values.
    pub fn epsilon(&self) -> f64 {
        let (w, h) = self.padded_size();
        1.0 / (2.0 * w.max(h) as f64)
    }

    fn to_padded(&self, uv: Vector2<f64>) -> Vector2<f64> {
        uv + Vector2::repeat(self.pad as f64)
    }

    /// Field value at an (unpadded) image coordinate.
    pub fn sample(&self, uv: Vector2<f64>) -> f64 {
        bilinear_sample(&self.values, self.to_padded(uv))
    }

    pub fn gradient(&self, uv: Vector2<f64>) -> Vector2<f64> {
        bilinear_gradient(&self.values, self.to_padded(uv))
    }
}

/// Builds the smoothed field: `1` on foreground and, on background,
/// `1 - d / diagonal` min-max normalized into `[eps, 1 - eps]`.
pub fn build_smoothed_field(sil: &BinarySilhouette, pad: usize) -> Result<SmoothedField> {
    let padded = sil.padded(pad);
    let fg = padded.foreground_count();
    if fg == 0 {
        return Err(Error::EmptyForeground);
    }
    if fg == padded.mask.len() {
        return Err(Error::EmptyBackground);
    }
    let dist = distance_transform_l2(&padded)?;
    let (w, h) = (padded.width, padded.height);
    let diagonal = ((w * w + h * h) as f64).sqrt();
    let eps = 1.0 / (2.0 * w.max(h) as f64);

    let raw: Vec<f64> = dist.data.iter().map(|d| 1.0 - d / diagonal).collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (r, &m) in raw.iter().zip(&padded.mask) {
        if m == 0 {
            lo = lo.min(*r);
            hi = hi.max(*r);
        }
    }
    let span = hi - lo;
    let data = raw
        .iter()
        .zip(&padded.mask)
        .map(|(r, &m)| {
            if m == 1 {
                1.0
            } else {
                // all background pixels equidistant: treat them as nearest
                let t = if span > 0.0 { (r - lo) / span } else { 1.0 };
                eps + (1.0 - 2.0 * eps) * t
            }
        })
        .collect();

    Ok(SmoothedField {
        width: sil.width,
        height: sil.height,
        pad,
        values: Grid {
            width: w,
            height: h,
            data,
        },
        source: None,
    })
}
