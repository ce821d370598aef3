//! Distance fields over the local bird's-eye occupancy grid.
//!
//! [`distance_transform`] is the exact Euclidean transform computed with the
//! separable lower-envelope-of-parabolas algorithm (one pass per axis over
//! squared cell distances). [`esdf`] subtracts the transform of the
//! complemented grid, so values are positive in free space and negative
//! inside obstacles.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Pose2};
use crate::scalar::Scalar;

pub const DEFAULT_OUTSIDE_VALUE: f64 = -5.0;

/// Placement and size of a grid. Cell `(i, j)` covers
/// `[i*res, (i+1)*res) x [j*res, (j+1)*res)` in the grid frame; `origin` is the
/// pose of the grid frame expressed in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry<T> {
    pub origin: Pose2<T>,
    pub resolution: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Scalar> GridGeometry<T> {
    /// Grid of `length x lateral` meters centered on and aligned with the
    /// vehicle (`x` forward, `y` left).
    pub fn centered(length: T, lateral: T, resolution: T) -> Result<Self> {
        if !(resolution > T::zero() && length > T::zero() && lateral > T::zero()) {
            return Err(Error::InvalidArgument("grid dimensions must be positive".into()));
        }
        let w = (length / resolution).round();
        let h = (lateral / resolution).round();
        let tol = T::c(1e-6);
        if (w * resolution - length).abs() > tol || (h * resolution - lateral).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution} does not divide grid size {length} x {lateral}"
            )));
        }
        let half = T::c(0.5);
        Ok(Self {
            origin: Pose2::new(-length * half, -lateral * half, T::zero()),
            resolution,
            width: w.to_usize().unwrap(),
            height: h.to_usize().unwrap(),
        })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    /// Cell center in the vehicle frame.
    pub fn cell_center(&self, i: usize, j: usize) -> Point2<T> {
        let half = T::c(0.5);
        self.origin.transform_point(Point2::new(
            (T::c(i as f64) + half) * self.resolution,
            (T::c(j as f64) + half) * self.resolution,
        ))
    }

    /// Length of the grid diagonal in meters.
    pub fn diagonal(&self) -> T {
        self.resolution * T::c(self.width as f64).hypot(T::c(self.height as f64))
    }
}

/// Row-major 2D grid of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D<T, V = T> {
    pub geometry: GridGeometry<T>,
    values: Vec<V>,
}

/// `true` marks an occupied cell.
pub type OccupancyGrid<T> = Grid2D<T, bool>;

impl<T: Scalar, V: Clone> Grid2D<T, V> {
    pub fn filled(geometry: GridGeometry<T>, value: V) -> Self {
        Self {
            values: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn from_values(geometry: GridGeometry<T>, values: Vec<V>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "grid has {} cells but {} values were given",
                geometry.len(),
                values.len()
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &V {
        &self.values[self.geometry.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: V) {
        let k = self.geometry.index(i, j);
        self.values[k] = v;
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn map<U>(&self, f: impl Fn(&V) -> U) -> Grid2D<T, U> {
        Grid2D {
            geometry: self.geometry,
            values: self.values.iter().map(f).collect(),
        }
    }
}

pub fn complement<T: Scalar>(occ: &OccupancyGrid<T>) -> OccupancyGrid<T> {
    occ.map(|&o| !o)
}

/// 1D squared distance transform of `f` (sources are `0`, others `inf`)
/// via the lower envelope of parabolas. Infinite entries never become
/// envelope sites.
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k: isize = -1;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let fq = f[q] + (q * q) as f64;
        loop {
            if k < 0 {
                k = 0;
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                break;
            }
            let p = v[k as usize];
            let s = (fq - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k as usize] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k as usize] = q;
            z[k as usize] = s;
            break;
        }
    }
    if k < 0 {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let top = k as usize;
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while k < top && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Squared distance, in cells, from each cell to the nearest occupied cell;
/// `inf` when nothing is occupied.
pub fn squared_cell_distances<T: Scalar>(occ: &OccupancyGrid<T>) -> Vec<f64> {
    let (w, h) = (occ.width(), occ.height());
    let n = w.max(h);
    let mut buf_in = vec![0.0; n];
    let mut buf_out = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    let mut cols = vec![0.0; w * h];
    for i in 0..w {
        for j in 0..h {
            buf_in[j] = if *occ.get(i, j) { 0.0 } else { f64::INFINITY };
        }
        edt_1d(&buf_in[..h], &mut buf_out[..h], &mut v, &mut z);
        for j in 0..h {
            cols[j * w + i] = buf_out[j];
        }
    }
    let mut out = vec![0.0; w * h];
    for j in 0..h {
        edt_1d(&cols[j * w..(j + 1) * w], &mut out[j * w..(j + 1) * w], &mut v, &mut z);
    }
    out
}

/// Euclidean distance in meters from each cell center to the nearest
/// occupied cell center, capped at the grid diagonal.
pub fn distance_transform<T: Scalar>(occ: &OccupancyGrid<T>) -> Grid2D<T, T> {
    let cap = occ.geometry.diagonal();
    let res = occ.geometry.resolution;
    let values = squared_cell_distances(occ)
        .into_iter()
        .map(|d2| {
            if d2.is_finite() {
                (T::c(d2.sqrt()) * res).min(cap)
            } else {
                cap
            }
        })
        .collect();
    Grid2D {
        geometry: occ.geometry,
        values,
    }
}

/// Signed distance field: `D(occ) - D(complement(occ))`.
pub fn esdf<T: Scalar>(occ: &OccupancyGrid<T>) -> Grid2D<T, T> {
    let outside = distance_transform(occ);
    let inside = distance_transform(&complement(occ));
    Grid2D {
        geometry: occ.geometry,
        values: outside
            .values
            .iter()
            .zip(&inside.values)
            .map(|(&a, &b)| a - b)
            .collect(),
    }
}

/// Map-frame view of a vehicle-frame field under a pose hypothesis.
#[derive(Debug, Clone, Copy)]
pub struct EsdfSampler<'a, T> {
    pub esdf: &'a Grid2D<T, T>,
    /// Hypothesized vehicle pose in the map frame.
    pub anchor: Pose2<T>,
    pub outside_value: T,
}

impl<'a, T: Scalar> EsdfSampler<'a, T> {
    pub fn new(esdf: &'a Grid2D<T, T>, anchor: Pose2<T>, outside_value: T) -> Self {
        Self {
            esdf,
            anchor,
            outside_value,
        }
    }

    pub fn with_anchor(&self, anchor: Pose2<T>) -> Self {
        Self { anchor, ..*self }
    }

    /// Bilinear sample at a map-frame point.
    pub fn sample(&self, map_point: Point2<T>) -> T {
        self.sample_vehicle(self.anchor.inverse_transform_point(map_point))
    }

    /// Bilinear sample at a vehicle-frame point.
    pub fn sample_vehicle(&self, vehicle_point: Point2<T>) -> T {
        let g = &self.esdf.geometry;
        let local = g.origin.inverse_transform_point(vehicle_point);
        let res = g.resolution;
        let (w, h) = (g.width, g.height);
        let extent_x = res * T::c(w as f64);
        let extent_y = res * T::c(h as f64);
        if !(local.x >= T::zero() && local.y >= T::zero() && local.x <= extent_x && local.y <= extent_y) {
            return self.outside_value;
        }
        let half = T::c(0.5);
        let max_u = T::c((w - 1) as f64);
        let max_v = T::c((h - 1) as f64);
        let u = (local.x / res - half).max(T::zero()).min(max_u);
        let v = (local.y / res - half).max(T::zero()).min(max_v);
        let i0 = u.floor().to_usize().unwrap_or(0).min(w - 1);
        let j0 = v.floor().to_usize().unwrap_or(0).min(h - 1);
        let i1 = (i0 + 1).min(w - 1);
        let j1 = (j0 + 1).min(h - 1);
        let fx = u - T::c(i0 as f64);
        let fy = v - T::c(j0 as f64);
        let e = self.esdf;
        let top = *e.get(i0, j0) * (T::one() - fx) + *e.get(i1, j0) * fx;
        if fy == T::zero() {
            return top;
        }
        let bottom = *e.get(i0, j1) * (T::one() - fx) + *e.get(i1, j1) * fx;
        top * (T::one() - fy) + bottom * fy
    }
}

#[derive(Serialize)]
struct GridSidecar {
    width: usize,
    height: usize,
    resolution: f64,
    origin_x: f64,
    origin_y: f64,
    origin_theta: f64,
    min_value: f64,
    max_value: f64,
}

/// Writes the grid as a binary graymap (`P5`, row 0 at the bottom) with a JSON
/// sidecar holding its placement and the value range mapped to 0..255.
pub fn write_pgm<T: Scalar>(grid: &Grid2D<T, T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let vals: Vec<f64> = grid.values().iter().map(|v| v.to_f64_lossy()).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w, h) = (grid.width(), grid.height());
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for j in (0..h).rev() {
        for i in 0..w {
            let v = vals[grid.geometry.index(i, j)];
            bytes.push((((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(&bytes).map_err(io_err)?;

    let g = &grid.geometry;
    let sidecar = GridSidecar {
        width: w,
        height: h,
        resolution: g.resolution.to_f64_lossy(),
        origin_x: g.origin.x.to_f64_lossy(),
        origin_y: g.origin.y.to_f64_lossy(),
        origin_theta: g.origin.theta.to_f64_lossy(),
        min_value: lo,
        max_value: hi,
    };
    let meta = path.with_extension("json");
    std::fs::write(&meta, serde_json::to_string_pretty(&sidecar).expect("serializable"))
        .map_err(|source| Error::Io { path: meta, source })
}
