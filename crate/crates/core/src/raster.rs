//! Regular cubic rasters in ℝⁿ, region rasterization and the exact
//! Euclidean distance transform used by the distance and topology code.

use crate::error::{Error, Result};
use crate::spectrum::Point;

/// Default cap on raster cells.
pub const DEFAULT_CELL_CAP: u128 = 1 << 26;

#[derive(Clone, Debug)]
pub struct Raster {
    lo: Vec<f64>,
    pitch: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl Raster {
    /// Raster of pitch `pitch` whose cell centers start at `lo` and reach
    /// at least `hi` on every axis.
    pub fn covering(lo: &[f64], hi: &[f64], pitch: f64, cap: u128) -> Result<Self> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid("raster resolution must be positive"));
        }
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / pitch).ceil().max(0.0) as usize + 1)
            .collect();
        let cells = shape
            .iter()
            .fold(1u128, |acc, &s| acc.saturating_mul(s as u128));
        if cells > cap {
            return Err(Error::ResourceLimit {
                what: "raster cells",
                requested: cells,
                cap,
            });
        }
        let mut strides = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * shape[i + 1];
        }
        Ok(Self {
            lo: lo.to_vec(),
            pitch,
            shape,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn unflat(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        for (axis, s) in self.strides.iter().enumerate() {
            out[axis] = flat / s;
            flat %= s;
        }
        out
    }

    pub fn cell_center(&self, flat: usize) -> Point {
        self.unflat(flat)
            .iter()
            .zip(&self.lo)
            .map(|(&i, lo)| lo + i as f64 * self.pitch)
            .collect()
    }

    fn axis_range(&self, axis: usize, a: f64, b: f64) -> Option<(usize, usize)> {
        let lo = ((a - self.lo[axis]) / self.pitch).ceil().max(0.0);
        let hi = ((b - self.lo[axis]) / self.pitch).floor();
        let max = (self.shape[axis] - 1) as f64;
        if hi < 0.0 || lo > max || lo > hi {
            return None;
        }
        Some((lo as usize, hi.min(max) as usize))
    }

    fn nearest_cell(&self, p: &[f64]) -> usize {
        let idx: Vec<usize> = p
            .iter()
            .enumerate()
            .map(|(axis, &x)| {
                let i = ((x - self.lo[axis]) / self.pitch).round().max(0.0) as usize;
                i.min(self.shape[axis] - 1)
            })
            .collect();
        self.flat(&idx)
    }

    /// Visits every cell whose multi-index lies in the inclusive box.
    fn for_each_in_box(&self, ranges: &[(usize, usize)], mut f: impl FnMut(usize, &[usize])) {
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            f(self.flat(&idx), &idx);
            let mut axis = ranges.len();
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                if idx[axis] < ranges[axis].1 {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = ranges[axis].0;
            }
        }
    }

    /// Cells whose centers lie in the union of closed balls. The cell
    /// nearest each center is always marked so tiny balls are not lost.
    pub fn rasterize_balls(&self, centers: &[Point], radius: f64) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let r2 = radius * radius * (1.0 + 1e-12) + 1e-24;
        for c in centers {
            mask[self.nearest_cell(c)] = true;
            let ranges: Option<Vec<_>> = (0..self.dim())
                .map(|axis| self.axis_range(axis, c[axis] - radius, c[axis] + radius))
                .collect();
            let Some(ranges) = ranges else { continue };
            self.for_each_in_box(&ranges, |flat, idx| {
                let d2: f64 = idx
                    .iter()
                    .enumerate()
                    .map(|(axis, &i)| {
                        let x = self.lo[axis] + i as f64 * self.pitch - c[axis];
                        x * x
                    })
                    .sum();
                if d2 <= r2 {
                    mask[flat] = true;
                }
            });
        }
        mask
    }

    /// Cells whose centers lie in the union of closed axis-aligned cubes
    /// `[corner, corner + side]`.
    pub fn rasterize_boxes(&self, corners: &[Point], side: f64) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        let eps = 1e-12 * (1.0 + side);
        for c in corners {
            let ranges: Option<Vec<_>> = (0..self.dim())
                .map(|axis| self.axis_range(axis, c[axis] - eps, c[axis] + side + eps))
                .collect();
            match ranges {
                Some(ranges) => self.for_each_in_box(&ranges, |flat, _| mask[flat] = true),
                None => {
                    let mid: Vec<f64> = c.iter().map(|x| x + side / 2.0).collect();
                    mask[self.nearest_cell(&mid)] = true;
                }
            }
        }
        mask
    }

    /// Squared Euclidean distance, in cell units, from every cell to the
    /// nearest marked cell; `f64::INFINITY` everywhere if nothing is marked.
    pub fn squared_distance_transform(&self, mask: &[bool]) -> Vec<f64> {
        let mut dist: Vec<f64> = mask
            .iter()
            .map(|&m| if m { 0.0 } else { f64::INFINITY })
            .collect();
        let longest = self.shape.iter().copied().max().unwrap_or(1);
        let mut line = vec![0.0; longest];
        let mut out = vec![0.0; longest];
        let mut hull_pos = vec![0usize; longest];
        let mut hull_cut = vec![0.0; longest + 1];
        for axis in 0..self.dim() {
            let len = self.shape[axis];
            let stride = self.strides[axis];
            for start in 0..self.len() {
                if !(start / stride).is_multiple_of(len) {
                    continue;
                }
                for i in 0..len {
                    line[i] = dist[start + i * stride];
                }
                transform_line(&line[..len], &mut out[..len], &mut hull_pos, &mut hull_cut);
                for i in 0..len {
                    dist[start + i * stride] = out[i];
                }
            }
        }
        dist
    }
}

/// One-dimensional lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn transform_line(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        out.fill(f64::INFINITY);
        return;
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let meet = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = meet(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}
