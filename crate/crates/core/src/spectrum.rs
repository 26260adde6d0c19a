//! The lattice grid, ordered bump products, synthetic spectra, witnesses
//! built from commuting tuples, containment and Hausdorff distance.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    bump_value, func_calc, joint_eigenbasis, op_norm, spectral_norm, CMatrix, Eigen, OperatorTuple,
    PiecewiseLinearFn,
};
use crate::raster::{Raster, DEFAULT_CELL_CAP};

pub type Point = Vec<f64>;

/// Default cap on enumerated grid points and on evaluated centers.
pub const DEFAULT_GRID_CAP: u128 = 1 << 24;

/// Centers whose bump-product norm falls short of `1 − η` by at most this
/// much are still included.
pub const BORDERLINE_TOL: f64 = 1e-9;

/// Tolerance for treating a witness tuple as exactly commuting.
pub const WITNESS_COMMUTATOR_TOL: f64 = 1e-10;

/// Joint eigenvalue vectors closer than this are merged.
pub const JOINT_MERGE_TOL: f64 = 1e-9;

const GEOM_EPS: f64 = 1e-12;

/// The lattice `{ m/k : m ∈ ℤⁿ, |m_j| ≤ M k }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub n: usize,
    #[serde(rename = "M")]
    pub norm_bound: f64,
    pub k: u64,
}

impl Lattice {
    pub fn new(n: usize, norm_bound: f64, k: u64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("lattice needs n >= 1 and k >= 1"));
        }
        if !(norm_bound > 0.0 && norm_bound.is_finite()) {
            return Err(Error::invalid("norm bound must be positive"));
        }
        Ok(Self { n, norm_bound, k })
    }

    /// Largest admissible `|m_j|`, i.e. `⌊M k⌋`.
    pub fn max_step(&self) -> i64 {
        (self.norm_bound * self.k as f64 + 1e-9).floor() as i64
    }

    pub fn point_count(&self) -> u128 {
        let per_axis = (2 * self.max_step() + 1) as u128;
        (0..self.n).fold(1u128, |acc, _| acc.saturating_mul(per_axis))
    }

    pub fn coordinate(&self, m: i64) -> f64 {
        m as f64 / self.k as f64
    }
}

/// `k = min{ l : (M+1)/l < η/(1+2√n) }`.
pub fn required_k(n: usize, norm_bound: f64, eta: f64) -> u64 {
    let target = eta / (1.0 + 2.0 * (n as f64).sqrt());
    let guess = ((norm_bound + 1.0) / target).floor().max(1.0) as u64;
    let mut l = guess.saturating_sub(2).max(1);
    while (norm_bound + 1.0) / (l as f64) >= target {
        l += 1;
    }
    l
}

/// The grid `D^η` for a given ambient dimension, norm bound and resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lattice: Lattice,
    pub eta: f64,
}

impl GridSpec {
    pub fn new(n: usize, norm_bound: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
        }
        let lattice = Lattice::new(n, norm_bound, 1)?;
        let k = required_k(n, norm_bound, eta);
        Ok(Self {
            lattice: Lattice { k, ..lattice },
            eta,
        })
    }

    pub fn k(&self) -> u64 {
        self.lattice.k
    }

    pub fn n(&self) -> usize {
        self.lattice.n
    }
}

/// Lattice points in lexicographic order.
pub fn grid_points(lattice: &Lattice, cap: u128) -> Result<Vec<Point>> {
    let count = lattice.point_count();
    if count > cap {
        return Err(Error::ResourceLimit {
            what: "grid points",
            requested: count,
            cap,
        });
    }
    let mk = lattice.max_step();
    let mut out = Vec::with_capacity(count as usize);
    let mut m = vec![-mk; lattice.n];
    loop {
        out.push(m.iter().map(|&v| lattice.coordinate(v)).collect());
        let mut axis = lattice.n;
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            if m[axis] < mk {
                m[axis] += 1;
                break;
            }
            m[axis] = -mk;
        }
    }
}

/// A finite union of closed balls of common radius centered on a lattice `P_k`.
///
/// Centers are deduplicated and kept in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct BallUnion {
    n: usize,
    radius: f64,
    k: u64,
    steps: Vec<Vec<i64>>,
}

impl BallUnion {
    /// Builds a union from lattice step vectors `m` (center = `m/k`).
    pub fn from_steps(n: usize, radius: f64, k: u64, mut steps: Vec<Vec<i64>>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("ball union needs n >= 1 and k >= 1"));
        }
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius must be nonnegative"));
        }
        if steps.iter().any(|s| s.len() != n) {
            return Err(Error::invalid(format!(
                "every center must have {n} coordinates"
            )));
        }
        steps.sort();
        steps.dedup();
        Ok(Self {
            n,
            radius,
            k,
            steps,
        })
    }

    /// Builds a union from float centers, which must lie on `P_k`.
    pub fn new(n: usize, radius: f64, k: u64, centers: &[Point]) -> Result<Self> {
        let mut steps = Vec::with_capacity(centers.len());
        for c in centers {
            let s: Vec<i64> = c.iter().map(|x| (x * k as f64).round() as i64).collect();
            let off_lattice = c
                .iter()
                .zip(&s)
                .any(|(x, &m)| (x * k as f64 - m as f64).abs() > 1e-6);
            if off_lattice {
                return Err(Error::invalid(format!(
                    "center {c:?} is not on the 1/{k} lattice"
                )));
            }
            steps.push(s);
        }
        Self::from_steps(n, radius, k, steps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Vec<i64>] {
        &self.steps
    }

    pub fn centers(&self) -> Vec<Point> {
        self.steps.iter().map(|s| self.center_of(s)).collect()
    }

    fn center_of(&self, s: &[i64]) -> Point {
        s.iter().map(|&m| m as f64 / self.k as f64).collect()
    }

    /// Same centers, radius grown by `r`.
    pub fn dilate(&self, r: f64) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::invalid("dilation radius must be nonnegative"));
        }
        Ok(Self {
            radius: self.radius + r,
            ..self.clone()
        })
    }

    /// Euclidean distance from `p` to the union (0 inside).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        self.steps
            .iter()
            .map(|s| euclid(&self.center_of(s), p) - self.radius)
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.distance_to(p) <= GEOM_EPS
    }

    /// Axis-aligned bounding box `(lo, hi)` of the union.
    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.n];
        let mut hi = vec![f64::NEG_INFINITY; self.n];
        for c in self.centers() {
            for i in 0..self.n {
                lo[i] = lo[i].min(c[i] - self.radius);
                hi[i] = hi[i].max(c[i] + self.radius);
            }
        }
        Some((lo, hi))
    }
}

#[derive(Serialize, Deserialize)]
struct BallUnionJson {
    n: usize,
    eta: f64,
    k: u64,
    centers: Vec<Point>,
}

impl Serialize for BallUnion {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BallUnionJson {
            n: self.n,
            eta: self.radius,
            k: self.k,
            centers: self.centers(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BallUnion {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = BallUnionJson::deserialize(d)?;
        BallUnion::new(j.n, j.eta, j.k, &j.centers).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Multiplication order of the bump factors, as a permutation of `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorOrder(Vec<usize>);

impl FactorOrder {
    pub fn ascending(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn descending(n: usize) -> Self {
        Self((0..n).rev().collect())
    }

    pub fn custom(order: Vec<usize>) -> Result<Self> {
        let mut seen = order.clone();
        seen.sort_unstable();
        if seen != (0..order.len()).collect::<Vec<_>>() {
            return Err(Error::invalid(format!("{order:?} is not a permutation")));
        }
        Ok(Self(order))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    /// Skip centers ruled out by a single factor or by a partial product.
    pub prefilter: bool,
    /// `None` means ascending `1..n`.
    pub order: Option<FactorOrder>,
    /// Cap on evaluated centers.
    pub cap: u128,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            prefilter: true,
            order: None,
            cap: DEFAULT_GRID_CAP,
        }
    }
}

/// `‖θ_{ξ_1,η}(T_1) ⋯ θ_{ξ_n,η}(T_n)‖` computed densely, factors in the
/// given order.
///
/// This is the direct route; [`synthetic_spectrum_with`] evaluates the same
/// quantity in compressed eigen-coordinates.
pub fn big_theta_norm_ordered(
    tuple: &OperatorTuple,
    xi: &[f64],
    eta: f64,
    order: &FactorOrder,
) -> Result<f64> {
    if xi.len() != tuple.n() || order.as_slice().len() != tuple.n() {
        return Err(Error::invalid("center, order and tuple must share n"));
    }
    let mut prod: Option<CMatrix> = None;
    for &i in order.as_slice() {
        let f = PiecewiseLinearFn::bump(xi[i], eta)?;
        let factor = func_calc(&tuple.ops()[i], &f).into_matrix();
        prod = Some(match prod {
            None => factor,
            Some(p) => p * factor,
        });
    }
    Ok(spectral_norm(&prod.expect("n >= 1")))
}

/// Ordered bump-product norm with the ascending factor order.
pub fn big_theta_norm(tuple: &OperatorTuple, xi: &[f64], eta: f64) -> Result<f64> {
    big_theta_norm_ordered(tuple, xi, eta, &FactorOrder::ascending(tuple.n()))
}

/// Per-axis data for compressed product evaluation.
struct AxisData {
    eigen: Eigen,
    /// `U_this* U_next` for the next factor in multiplication order.
    gram_next: Option<CMatrix>,
    /// Lattice steps whose single-factor norm passes the threshold.
    candidates: Vec<i64>,
}

struct Evaluator<'a> {
    axes: Vec<AxisData>,
    order: &'a [usize],
    k: f64,
    eta: f64,
    threshold: f64,
    prefilter: bool,
    evaluated: AtomicU64,
    cap: u128,
}

impl Evaluator<'_> {
    fn window(&self, axis: usize, m: i64) -> (std::ops::Range<usize>, Vec<f64>) {
        let c = m as f64 / self.k;
        let e = &self.axes[axis].eigen;
        let range = e.index_range(c - self.eta, c + self.eta);
        let w = e.values[range.clone()]
            .iter()
            .map(|&t| bump_value(c, self.eta, t))
            .collect();
        (range, w)
    }

    fn bump(&self) -> Result<()> {
        let done = self.evaluated.fetch_add(1, Ordering::Relaxed) as u128 + 1;
        if done > self.cap {
            return Err(Error::ResourceLimit {
                what: "evaluated centers",
                requested: done,
                cap: self.cap,
            });
        }
        Ok(())
    }

    /// Depth-first extension of a partial product `prefix` that currently
    /// ends on factor `level - 1` restricted to eigen-indices `cols`.
    fn extend(
        &self,
        level: usize,
        prefix: &CMatrix,
        cols: std::ops::Range<usize>,
        steps: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) -> Result<()> {
        let n = self.order.len();
        let prev = &self.axes[level - 1];
        let gram = prev.gram_next.as_ref().expect("not the last factor");
        let carried = prefix * gram.rows(cols.start, cols.len());
        let col_weight: Vec<f64> = (0..carried.ncols())
            .map(|c| carried.column(c).norm_squared())
            .collect();
        let axis = &self.axes[level];
        for &m in &axis.candidates {
            let (range, w) = self.window(level, m);
            if self.prefilter {
                let frob: f64 = range
                    .clone()
                    .zip(&w)
                    .map(|(c, wc)| wc * wc * col_weight[c])
                    .sum();
                if frob.sqrt() < self.threshold {
                    continue;
                }
            }
            let mut next = carried.columns(range.start, range.len()).into_owned();
            for (j, &wj) in w.iter().enumerate() {
                next.column_mut(j).scale_mut(wj);
            }
            steps[self.order[level]] = m;
            if level + 1 == n {
                self.bump()?;
                if spectral_norm(&next) >= self.threshold {
                    out.push(steps.clone());
                }
            } else {
                if self.prefilter && spectral_norm(&next) < self.threshold {
                    continue;
                }
                self.extend(level + 1, &next, range, steps, out)?;
            }
        }
        Ok(())
    }

    fn roots(&self) -> &[i64] {
        &self.axes[0].candidates
    }

    fn run_root(&self, m: i64) -> Result<Vec<Vec<i64>>> {
        let n = self.order.len();
        let mut steps = vec![0i64; n];
        steps[self.order[0]] = m;
        let (range, w) = self.window(0, m);
        let mut out = Vec::new();
        if n == 1 {
            self.bump()?;
            let best = w.iter().fold(0.0_f64, |a, &b| a.max(b));
            if best >= self.threshold {
                out.push(steps);
            }
            return Ok(out);
        }
        let mut prefix = CMatrix::zeros(range.len(), range.len());
        for (j, &wj) in w.iter().enumerate() {
            prefix[(j, j)] = wj.into();
        }
        self.extend(1, &prefix, range, &mut steps, &mut out)?;
        Ok(out)
    }
}

/// `sSp^η(T)` with default options.
pub fn synthetic_spectrum(tuple: &OperatorTuple, eta: f64) -> Result<BallUnion> {
    synthetic_spectrum_with(tuple, eta, &SpectrumOptions::default())
}

/// The union of closed `η`-balls around the points `x` of `D^η` with
/// `‖Θ_{x,η}(T)‖ ≥ 1 − η`.
///
/// Each factor `θ(T_i) = V_i W_i V_i*` is compressed to the eigenvectors
/// `V_i` whose eigenvalues lie within `η` of the center coordinate, so the
/// product norm equals the norm of `W_1 (V_1*V_2) W_2 ⋯ W_n`. With the
/// prefilter on, single factors, partial products and a Frobenius bound on
/// each extension prune centers whose norm cannot reach the threshold.
pub fn synthetic_spectrum_with(
    tuple: &OperatorTuple,
    eta: f64,
    opts: &SpectrumOptions,
) -> Result<BallUnion> {
    let n = tuple.n();
    let spec = GridSpec::new(n, tuple.norm_bound(), eta)?;
    let lattice = spec.lattice;
    let order = opts
        .order
        .clone()
        .unwrap_or_else(|| FactorOrder::ascending(n));
    if order.as_slice().len() != n {
        return Err(Error::invalid("factor order length differs from n"));
    }
    if !opts.prefilter && lattice.point_count() > opts.cap {
        return Err(Error::ResourceLimit {
            what: "evaluated centers",
            requested: lattice.point_count(),
            cap: opts.cap,
        });
    }
    let threshold = 1.0 - eta - BORDERLINE_TOL;
    let k = lattice.k as f64;
    let mk = lattice.max_step();
    let eigens: Vec<Eigen> = order
        .as_slice()
        .iter()
        .map(|&i| tuple.ops()[i].eigen())
        .collect();
    let mut axes = Vec::with_capacity(n);
    for (l, eigen) in eigens.iter().enumerate() {
        let gram_next = eigens
            .get(l + 1)
            .map(|next| eigen.vectors.adjoint() * &next.vectors);
        let candidates = (-mk..=mk)
            .filter(|&m| {
                if !opts.prefilter {
                    return true;
                }
                let c = m as f64 / k;
                let r = eigen.index_range(c - eta, c + eta);
                eigen.values[r]
                    .iter()
                    .any(|&t| bump_value(c, eta, t) >= threshold)
            })
            .collect();
        axes.push(AxisData {
            eigen: eigen.clone(),
            gram_next,
            candidates,
        });
    }
    let eval = Evaluator {
        axes,
        order: order.as_slice(),
        k,
        eta,
        threshold,
        prefilter: opts.prefilter,
        evaluated: AtomicU64::new(0),
        cap: opts.cap,
    };
    let chunks: Vec<Vec<Vec<i64>>> = eval
        .roots()
        .par_iter()
        .map(|&m| eval.run_root(m))
        .collect::<Result<_>>()?;
    let steps = chunks.into_iter().flatten().collect();
    BallUnion::from_steps(n, eta, lattice.k, steps)
}

/// Synthetic spectrum of a commutative tuple given by samples of its joint
/// spectrum: the product norm is the supremum of `Π θ(x_i)` over samples.
pub fn sampled_synthetic_spectrum(samples: &[Point], spec: &GridSpec) -> Result<BallUnion> {
    let n = spec.n();
    if samples.iter().any(|p| p.len() != n) {
        return Err(Error::invalid("samples must have n coordinates"));
    }
    let eta = spec.eta;
    let k = spec.k() as f64;
    let mk = spec.lattice.max_step();
    let threshold = 1.0 - eta - BORDERLINE_TOL;
    let mut best: HashMap<Vec<i64>, f64> = HashMap::new();
    for p in samples {
        let ranges: Vec<(i64, i64)> = p
            .iter()
            .map(|&x| {
                let lo = ((x - eta) * k).ceil() as i64;
                let hi = ((x + eta) * k).floor() as i64;
                (lo.max(-mk), hi.min(mk))
            })
            .collect();
        if ranges.iter().any(|(a, b)| a > b) {
            continue;
        }
        let mut m: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        'odometer: loop {
            let v: f64 = m
                .iter()
                .zip(p)
                .map(|(&mi, &x)| bump_value(mi as f64 / k, eta, x))
                .product();
            if v > 0.0 {
                let e = best.entry(m.clone()).or_insert(0.0);
                *e = e.max(v);
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    break 'odometer;
                }
                axis -= 1;
                if m[axis] < ranges[axis].1 {
                    m[axis] += 1;
                    break;
                }
                m[axis] = ranges[axis].0;
            }
        }
    }
    let steps = best
        .into_iter()
        .filter(|(_, v)| *v >= threshold)
        .map(|(s, _)| s)
        .collect();
    BallUnion::from_steps(n, eta, spec.k(), steps)
}

/// A region for containment tests: a finite point set or a ball union.
#[derive(Clone, Copy, Debug)]
pub enum Region<'a> {
    Points(&'a [Point]),
    Balls(&'a BallUnion),
}

impl Region<'_> {
    fn n(&self) -> Option<usize> {
        match self {
            Region::Points(p) => p.first().map(|x| x.len()),
            Region::Balls(b) => Some(b.n()),
        }
    }

    fn radius(&self) -> f64 {
        match self {
            Region::Points(_) => 0.0,
            Region::Balls(b) => b.radius(),
        }
    }

    fn centers(&self) -> Vec<Point> {
        match self {
            Region::Points(p) => p.to_vec(),
            Region::Balls(b) => b.centers(),
        }
    }
}

/// Uniform hash grid for "is any center within `reach` of `q`" queries.
struct CenterIndex {
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<Point>>,
}

impl CenterIndex {
    fn new(centers: Vec<Point>, cell: f64) -> Self {
        let cell = cell.max(1e-6);
        let mut buckets: HashMap<Vec<i64>, Vec<Point>> = HashMap::new();
        for c in centers {
            let key = c.iter().map(|x| (x / cell).floor() as i64).collect();
            buckets.entry(key).or_default().push(c);
        }
        Self { cell, buckets }
    }

    fn any_within(&self, q: &[f64], reach: f64) -> bool {
        if reach < 0.0 {
            return false;
        }
        let reach2 = reach * reach + GEOM_EPS;
        let home: Vec<i64> = q.iter().map(|x| (x / self.cell).floor() as i64).collect();
        let span = (reach / self.cell).ceil() as i64;
        let hit = |key: &Vec<i64>| {
            self.buckets.get(key).is_some_and(|pts| {
                pts.iter()
                    .any(|c| c.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= reach2)
            })
        };
        if hit(&home) {
            return true;
        }
        let n = q.len();
        let mut off = vec![-span; n];
        loop {
            let key: Vec<i64> = home.iter().zip(&off).map(|(h, o)| h + o).collect();
            if off.iter().any(|&o| o != 0) && hit(&key) {
                return true;
            }
            let mut axis = n;
            loop {
                if axis == 0 {
                    return false;
                }
                axis -= 1;
                if off[axis] < span {
                    off[axis] += 1;
                    break;
                }
                off[axis] = -span;
            }
        }
    }
}

/// Unit directions sampling the sphere `S^{n-1}` at angular spacing `step`.
fn sphere_directions(n: usize, step: f64) -> Vec<Point> {
    match n {
        1 => vec![vec![-1.0], vec![1.0]],
        2 => {
            let m = ((2.0 * std::f64::consts::PI / step).ceil() as usize).max(8);
            (0..m)
                .map(|i| {
                    let a = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        3 => {
            let m = ((4.0 * std::f64::consts::PI / (step * step)).ceil() as usize).max(26);
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..m)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            for axis in 0..n {
                for s in [-1.0, 1.0] {
                    let mut d = vec![0.0; n];
                    d[axis] = s;
                    dirs.push(d);
                }
            }
            for mask in 0..(1usize << n) {
                let d: Point = (0..n)
                    .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 } / (n as f64).sqrt())
                    .collect();
                dirs.push(d);
            }
            dirs
        }
    }
}

/// Whether every point of `inner` lies within `slack` of `outer`.
///
/// Finite point sets are tested pointwise. For a ball union the center and
/// the boundary sphere of every ball, sampled at spacing `radius/20`, are
/// tested; a ball contained in a single outer ball is accepted directly.
pub fn containment_check(inner: Region<'_>, outer: Region<'_>, slack: f64) -> Result<bool> {
    let (Some(ni), Some(no)) = (inner.n(), outer.n()) else {
        // An empty inner set is contained in anything; nothing nonempty is
        // contained in an empty outer set.
        return Ok(match inner {
            Region::Points(p) => p.is_empty(),
            Region::Balls(b) => b.is_empty(),
        });
    };
    if ni != no {
        return Err(Error::invalid(format!(
            "ambient dimensions differ: {ni} vs {no}"
        )));
    }
    let reach = outer.radius() + slack;
    let index = CenterIndex::new(outer.centers(), reach);
    let lattice: Option<(HashSet<&Vec<i64>>, u64)> = match outer {
        Region::Balls(b) => Some((b.steps().iter().collect(), b.k())),
        Region::Points(_) => None,
    };
    match inner {
        Region::Points(points) => Ok(points.par_iter().all(|p| index.any_within(p, reach))),
        Region::Balls(balls) => {
            let r_in = balls.radius();
            let dirs = if r_in > 0.0 {
                sphere_directions(ni, 1.0 / 20.0)
            } else {
                Vec::new()
            };
            let ok = balls.centers().par_iter().all(|c| {
                if let Some((set, k)) = &lattice {
                    let near: Vec<i64> = c.iter().map(|x| (x * *k as f64).round() as i64).collect();
                    if set.contains(&near) {
                        let oc: Point = near.iter().map(|&m| m as f64 / *k as f64).collect();
                        if euclid(&oc, c) + r_in <= reach + GEOM_EPS {
                            return true;
                        }
                    }
                }
                if index.any_within(c, reach - r_in) {
                    return true;
                }
                if !index.any_within(c, reach) {
                    return false;
                }
                dirs.iter().all(|d| {
                    let q: Point = c.iter().zip(d).map(|(x, u)| x + r_in * u).collect();
                    index.any_within(&q, reach)
                })
            });
            Ok(ok)
        }
    }
}

/// Discrete Hausdorff distance between the rasterizations of two ball
/// unions on a common cubic grid of pitch `resolution`.
///
/// The result is within `√n · resolution` of the exact distance.
pub fn hausdorff_distance(a: &BallUnion, b: &BallUnion, resolution: f64) -> Result<f64> {
    hausdorff_distance_capped(a, b, resolution, DEFAULT_CELL_CAP)
}

pub fn hausdorff_distance_capped(
    a: &BallUnion,
    b: &BallUnion,
    resolution: f64,
    cap: u128,
) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::invalid("ball unions live in different dimensions"));
    }
    let (Some((alo, ahi)), Some((blo, bhi))) = (a.bounding_box(), b.bounding_box()) else {
        return Err(Error::EmptyRegion);
    };
    let lo: Point = alo.iter().zip(&blo).map(|(x, y)| x.min(*y)).collect();
    let hi: Point = ahi.iter().zip(&bhi).map(|(x, y)| x.max(*y)).collect();
    let raster = Raster::covering(&lo, &hi, resolution, cap)?;
    let ma = raster.rasterize_balls(&a.centers(), a.radius());
    let mb = raster.rasterize_balls(&b.centers(), b.radius());
    let da = raster.squared_distance_transform(&ma);
    let db = raster.squared_distance_transform(&mb);
    let directed = |mask: &[bool], dist: &[f64]| {
        mask.iter()
            .zip(dist)
            .filter(|(m, _)| **m)
            .map(|(_, d)| *d)
            .fold(0.0_f64, f64::max)
    };
    let d2 = directed(&ma, &db).max(directed(&mb, &da));
    Ok(d2.sqrt() * resolution)
}

/// Joint spectrum of a commuting tuple with near-duplicates merged,
/// lexicographically sorted.
pub fn joint_spectrum(commuting: &OperatorTuple) -> Vec<Point> {
    let (_, pts) = joint_eigenbasis(commuting.ops());
    merge_points(pts, JOINT_MERGE_TOL)
}

pub(crate) fn merge_points(mut pts: Vec<Point>, tol: f64) -> Vec<Point> {
    pts.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut kept: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts {
        if !kept.iter().any(|q| euclid(q, &p) <= tol) {
            kept.push(p);
        }
    }
    kept
}

/// A near-spectrum witnessed by an exactly commuting tuple `S`, with
/// `L(f) = f(S)`.
#[derive(Clone, Debug)]
pub struct NearSpectrumWitness {
    pub eta: f64,
    /// Joint spectrum of `S`, deduplicated and sorted.
    pub points: Vec<Point>,
    /// `‖S_j − T_j‖` per coordinate.
    pub distances: Vec<f64>,
    pub commuting: OperatorTuple,
}

#[derive(Serialize)]
struct WitnessJson<'a> {
    eta: f64,
    points: &'a [Point],
    distances: &'a [f64],
}

impl Serialize for NearSpectrumWitness {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WitnessJson {
            eta: self.eta,
            points: &self.points,
            distances: &self.distances,
        }
        .serialize(s)
    }
}

/// Margins of the three near-spectrum conditions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    /// `max_j ‖S_j − T_j‖`.
    pub max_distance: f64,
    /// `L` is a homomorphism, so the defect is zero.
    pub multiplicativity_defect: f64,
    /// Holds automatically: `‖f(S)‖ = 1` whenever `f = 1` on a ball centered in the joint spectrum.
    pub condition_iii: bool,
    pub valid: bool,
}

pub fn near_spectrum_witness(
    tuple: &OperatorTuple,
    commuting: &OperatorTuple,
    eta: f64,
) -> Result<(NearSpectrumWitness, WitnessReport)> {
    if tuple.n() != commuting.n() || tuple.dim() != commuting.dim() {
        return Err(Error::invalid("witness tuple must match n and dim"));
    }
    let worst = commuting.max_commutator_norm();
    if worst > WITNESS_COMMUTATOR_TOL {
        return Err(Error::InvalidWitness(format!(
            "tuple does not commute: commutator norm {worst:.3e}"
        )));
    }
    let distances: Vec<f64> = tuple
        .ops()
        .iter()
        .zip(commuting.ops())
        .map(|(t, s)| op_norm(&s.sub(t).expect("dims checked")))
        .collect();
    let max_distance = distances.iter().fold(0.0_f64, |a, &b| a.max(b));
    let witness = NearSpectrumWitness {
        eta,
        points: joint_spectrum(commuting),
        distances,
        commuting: commuting.clone(),
    };
    let report = WitnessReport {
        max_distance,
        multiplicativity_defect: 0.0,
        condition_iii: true,
        valid: max_distance < eta,
    };
    Ok((witness, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{random_almost_commuting, AlmostCommutingGenerator, HermitianMatrix};

    fn diag_tuple(diags: &[&[f64]]) -> OperatorTuple {
        OperatorTuple::unit(
            diags
                .iter()
                .map(|d| HermitianMatrix::from_real_diagonal(d).unwrap())
                .collect(),
        )
        .unwrap()
    }

    /// Oracle: evaluate every grid point with the dense product.
    fn brute_force_centers(t: &OperatorTuple, eta: f64) -> Vec<Vec<i64>> {
        let spec = GridSpec::new(t.n(), t.norm_bound(), eta).unwrap();
        let k = spec.k() as f64;
        grid_points(&spec.lattice, DEFAULT_GRID_CAP)
            .unwrap()
            .into_iter()
            .filter(|x| big_theta_norm(t, x, eta).unwrap() >= 1.0 - eta - BORDERLINE_TOL)
            .map(|x| x.iter().map(|v| (v * k).round() as i64).collect())
            .collect()
    }

    #[test]
    fn grid_examples() {
        let l = Lattice::new(1, 1.0, 2).unwrap();
        assert_eq!(
            grid_points(&l, DEFAULT_GRID_CAP).unwrap(),
            vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]
        );
        let l = Lattice::new(2, 1.0, 1).unwrap();
        let pts = grid_points(&l, DEFAULT_GRID_CAP).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![-1.0, -1.0]);
        assert_eq!(pts[1], vec![-1.0, 0.0]);
        let spec = GridSpec::new(2, 1.0, 0.1).unwrap();
        assert_eq!(spec.k(), 77);
        assert_eq!(spec.lattice.point_count(), 155 * 155);
        assert_eq!(
            grid_points(&spec.lattice, DEFAULT_GRID_CAP).unwrap().len(),
            24025
        );
        let err = grid_points(&spec.lattice, 1000).unwrap_err();
        assert_eq!(
            err,
            Error::ResourceLimit {
                what: "grid points",
                requested: 24025,
                cap: 1000
            }
        );
    }

    #[test]
    fn required_k_is_minimal() {
        for n in 1..=3 {
            for &eta in &[0.05, 0.1, 0.2, 0.3, 0.5] {
                for &m in &[1.0, 1.3, 2.0] {
                    let k = required_k(n, m, eta);
                    let target = eta / (1.0 + 2.0 * (n as f64).sqrt());
                    assert!((m + 1.0) / (k as f64) < target);
                    assert!(k == 1 || (m + 1.0) / ((k - 1) as f64) >= target);
                }
            }
        }
    }

    #[test]
    fn big_theta_examples() {
        let t = diag_tuple(&[&[0.0, 1.0], &[0.0, 1.0]]);
        assert!((big_theta_norm(&t, &[0.0, 0.0], 0.1).unwrap() - 1.0).abs() < 1e-12);
        assert!(big_theta_norm(&t, &[0.0, 1.0], 0.1).unwrap() < 1e-12);
        let s = diag_tuple(&[&[-1.0, 0.0, 1.0]]);
        assert!((big_theta_norm(&s, &[0.16], 0.2).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn commuting_pair_spectrum_matches_brute_force() {
        let t = diag_tuple(&[&[0.0, 1.0], &[0.0, 1.0]]);
        let s = synthetic_spectrum(&t, 0.2).unwrap();
        let oracle = brute_force_centers(&t, 0.2);
        assert_eq!(s.steps(), &oracle[..]);
        let k = s.k() as f64;
        let has = |x: f64, y: f64| {
            s.steps()
                .contains(&vec![(x * k).round() as i64, (y * k).round() as i64])
        };
        assert!(has(0.0, 0.0) && has(1.0, 1.0) && !has(0.0, 1.0));
        for c in s.centers() {
            let near = [[0.0, 0.0], [1.0, 1.0]]
                .iter()
                .any(|e| (c[0] - e[0]).abs() <= 0.16 + 1e-9 && (c[1] - e[1]).abs() <= 0.16 + 1e-9);
            assert!(near, "{c:?}");
        }
    }

    #[test]
    fn single_operator_spectrum_is_window_of_eigenvalues() {
        let t = diag_tuple(&[&[-1.0, 0.0, 1.0]]);
        let s = synthetic_spectrum(&t, 0.2).unwrap();
        let k = s.k();
        assert_eq!(k, 31);
        let expect: Vec<Vec<i64>> = (-31..=31)
            .filter(|&m| {
                let x = m as f64 / 31.0;
                [-1.0, 0.0, 1.0]
                    .iter()
                    .any(|e: &f64| (x - e).abs() <= 0.16 + 1e-9)
            })
            .map(|m| vec![m])
            .collect();
        assert_eq!(s.steps(), &expect[..]);
    }

    #[test]
    fn zero_tuple_spectrum_contains_origin() {
        let t = OperatorTuple::unit(vec![HermitianMatrix::zeros(3); 2]).unwrap();
        for &eta in &[0.1, 0.2, 0.3] {
            let s = synthetic_spectrum(&t, eta).unwrap();
            assert!(s.steps().contains(&vec![0, 0]));
            let budget = eta - eta * (1.0 - eta) / 4.0;
            for c in s.centers() {
                assert!(c.iter().all(|x| x.abs() <= budget + 1e-9));
            }
        }
    }

    #[test]
    fn compressed_route_agrees_with_dense_route() {
        for seed in 0..6 {
            let t = random_almost_commuting(2, 5, 0.3, seed).unwrap();
            let fast = synthetic_spectrum(&t, 0.3).unwrap();
            assert_eq!(
                fast.steps(),
                &brute_force_centers(&t, 0.3)[..],
                "seed {seed}"
            );
        }
        let t = random_almost_commuting(3, 4, 0.5, 99).unwrap();
        let fast = synthetic_spectrum(&t, 0.5).unwrap();
        assert_eq!(fast.steps(), &brute_force_centers(&t, 0.5)[..]);
    }

    #[test]
    fn factor_order_is_a_parameter() {
        let t = random_almost_commuting(2, 6, 0.5, 4).unwrap();
        let rev = SpectrumOptions {
            order: Some(FactorOrder::descending(2)),
            ..Default::default()
        };
        let s = synthetic_spectrum_with(&t, 0.2, &rev).unwrap();
        let spec = GridSpec::new(2, 1.0, 0.2).unwrap();
        let k = spec.k() as f64;
        let dense: Vec<Vec<i64>> = grid_points(&spec.lattice, DEFAULT_GRID_CAP)
            .unwrap()
            .into_iter()
            .filter(|x| {
                big_theta_norm_ordered(&t, x, 0.2, &FactorOrder::descending(2)).unwrap()
                    >= 1.0 - 0.2 - BORDERLINE_TOL
            })
            .map(|x| x.iter().map(|v| (v * k).round() as i64).collect())
            .collect();
        assert_eq!(s.steps(), &dense[..]);
        assert!(FactorOrder::custom(vec![0, 0]).is_err());
    }

    #[test]
    fn prefilter_does_not_change_centers() {
        for seed in 0..10 {
            let t = random_almost_commuting(2, 12, 0.05, seed).unwrap();
            let on = synthetic_spectrum(&t, 0.1).unwrap();
            let off = synthetic_spectrum_with(
                &t,
                0.1,
                &SpectrumOptions {
                    prefilter: false,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(on, off);
        }
    }

    #[test]
    fn evaluation_cap_is_reported() {
        let t = random_almost_commuting(2, 4, 0.05, 1).unwrap();
        let opts = SpectrumOptions {
            prefilter: false,
            cap: 100,
            ..Default::default()
        };
        assert!(synthetic_spectrum_with(&t, 0.1, &opts)
            .unwrap_err()
            .is_resource_limit());
    }

    #[test]
    fn hausdorff_examples() {
        let a = BallUnion::new(2, 0.1, 10, &[vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(hausdorff_distance(&a, &a, 0.01).unwrap(), 0.0);
        let p = BallUnion::new(2, 0.1, 10, &[vec![0.0, 0.0]]).unwrap();
        let q = BallUnion::new(2, 0.1, 10, &[vec![0.3, 0.0]]).unwrap();
        let d = hausdorff_distance(&p, &q, 0.005).unwrap();
        assert!((d - 0.3).abs() <= 0.005 * 2f64.sqrt(), "{d}");
        let empty = BallUnion::new(2, 0.1, 10, &[]).unwrap();
        assert_eq!(
            hausdorff_distance(&p, &empty, 0.01),
            Err(Error::EmptyRegion)
        );
    }

    #[test]
    fn hausdorff_matches_sampling_oracle() {
        use rand::{Rng, SeedableRng};
        // A ⊂ B, so d_H = sup over B of dist(·, A).
        let a = BallUnion::new(2, 0.1, 20, &[vec![0.0, 0.0], vec![0.25, 0.1]]).unwrap();
        let b = BallUnion::new(
            2,
            0.15,
            20,
            &[vec![0.0, 0.0], vec![0.25, 0.1], vec![-0.3, 0.4]],
        )
        .unwrap();
        let res = 0.01;
        let d = hausdorff_distance(&a, &b, res).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (lo, hi) = b.bounding_box().unwrap();
        let mut sup = 0.0_f64;
        for _ in 0..400_000 {
            let p = vec![
                rng.random_range(lo[0]..hi[0]),
                rng.random_range(lo[1]..hi[1]),
            ];
            if b.contains(&p) {
                sup = sup.max(a.distance_to(&p));
            }
        }
        assert!((d - sup).abs() <= 2f64.sqrt() * res, "{d} vs {sup}");
    }

    #[test]
    fn containment_examples() {
        let x = BallUnion::new(2, 0.1, 20, &[vec![0.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(containment_check(Region::Balls(&x), Region::Balls(&x), 0.0).unwrap());
        let shifted = BallUnion::new(2, 0.1, 20, &[vec![0.05, 0.0], vec![0.55, 0.5]]).unwrap();
        assert!(containment_check(Region::Balls(&shifted), Region::Balls(&x), 0.1).unwrap());
        assert!(!containment_check(Region::Balls(&shifted), Region::Balls(&x), 0.0).unwrap());
        let a = vec![vec![0.0, 0.0]];
        let b = vec![vec![1.0, 0.0]];
        assert!(!containment_check(Region::Points(&a), Region::Points(&b), 0.1).unwrap());
        assert!(containment_check(Region::Points(&a), Region::Points(&b), 1.0).unwrap());
    }

    #[test]
    fn dilation_keeps_centers() {
        let x = BallUnion::new(1, 0.1, 10, &[vec![0.3]]).unwrap();
        assert_eq!(x.dilate(0.0).unwrap(), x);
        let y = x.dilate(0.05).unwrap();
        assert!((y.radius() - 0.15).abs() < 1e-15);
        assert_eq!(y.steps(), x.steps());
    }

    #[test]
    fn ball_union_json_validates_lattice() {
        let x = BallUnion::new(2, 0.1, 77, &[vec![3.0 / 77.0, -1.0 / 77.0]]).unwrap();
        let s = crate::json::to_string(&x).unwrap();
        assert!(s.starts_with("{\"n\":2,\"eta\":"));
        let back: BallUnion = crate::json::from_str(&s).unwrap();
        assert_eq!(back, x);
        let bad = "{\"n\":1,\"eta\":0.1,\"k\":10,\"centers\":[[0.123]]}";
        assert!(crate::json::from_str::<BallUnion>(bad).is_err());
    }

    #[test]
    fn witness_examples() {
        let t = diag_tuple(&[&[0.0, 0.5], &[0.2, -0.3]]);
        let (w, r) = near_spectrum_witness(&t, &t, 0.1).unwrap();
        assert!(r.valid && r.max_distance == 0.0);
        assert_eq!(w.points, vec![vec![0.0, 0.2], vec![0.5, -0.3]]);

        let g = AlmostCommutingGenerator::new(2, 8, 0.05)
            .with_perturbation(1e-3)
            .generate(3)
            .unwrap();
        let (_, r) = near_spectrum_witness(&g.perturbed, &g.commuting, 0.1).unwrap();
        assert!(r.valid && (r.max_distance - 1e-3).abs() < 1e-9);

        let far = diag_tuple(&[&[0.5, 1.0], &[0.7, 0.2]]);
        let (_, r) = near_spectrum_witness(&t, &far, 0.1).unwrap();
        assert!(!r.valid && (r.max_distance - 0.5).abs() < 1e-12);

        let x = HermitianMatrix::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let z = HermitianMatrix::from_real_diagonal(&[0.5, -0.5]).unwrap();
        let nc = OperatorTuple::unit(vec![x, z]).unwrap();
        assert!(matches!(
            near_spectrum_witness(&t, &nc, 0.1),
            Err(Error::InvalidWitness(_))
        ));
    }
}
