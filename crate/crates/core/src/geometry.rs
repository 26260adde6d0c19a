//! Lattice bricks, brick covers and the planar topology of regions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Raster, DEFAULT_CELL_CAP};
use crate::spectrum::{BallUnion, Point};

const FACE_TOL: f64 = 1e-9;

/// A finite union of closed cubes `[ξ, ξ + 1/k]ⁿ` with corners `ξ ∈ P_k`
/// inside `[−1, 1]ⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrickSet {
    n: usize,
    k: u64,
    steps: Vec<Vec<i64>>,
}

impl BrickSet {
    pub fn from_steps(n: usize, k: u64, mut steps: Vec<Vec<i64>>) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::invalid("brick set needs n >= 1 and k >= 1"));
        }
        let k_i = k as i64;
        for s in &steps {
            if s.len() != n {
                return Err(Error::invalid(format!(
                    "every corner must have {n} coordinates"
                )));
            }
            if s.iter().any(|&m| m < -k_i || m + 1 > k_i) {
                return Err(Error::invalid(format!(
                    "brick with corner {s:?}/{k} leaves the unit cube"
                )));
            }
        }
        steps.sort();
        steps.dedup();
        Ok(Self { n, k, steps })
    }

    pub fn new(n: usize, k: u64, corners: &[Point]) -> Result<Self> {
        let mut steps = Vec::with_capacity(corners.len());
        for c in corners {
            let s: Vec<i64> = c.iter().map(|x| (x * k as f64).round() as i64).collect();
            if c.iter()
                .zip(&s)
                .any(|(x, &m)| (x * k as f64 - m as f64).abs() > 1e-6)
            {
                return Err(Error::invalid(format!(
                    "corner {c:?} is not on the 1/{k} lattice"
                )));
            }
            steps.push(s);
        }
        Self::from_steps(n, k, steps)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn side(&self) -> f64 {
        1.0 / self.k as f64
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

    pub fn corners(&self) -> Vec<Point> {
        self.steps
            .iter()
            .map(|s| s.iter().map(|&m| m as f64 / self.k as f64).collect())
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let k = self.k as f64;
        self.steps.iter().any(|s| {
            s.iter().zip(p).all(|(&m, &x)| {
                let t = x * k - m as f64;
                (-FACE_TOL..=1.0 + FACE_TOL).contains(&t)
            })
        })
    }

    /// Euclidean distance from `p` to the union of bricks.
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        let h = self.side();
        self.steps
            .iter()
            .map(|s| {
                s.iter()
                    .zip(p)
                    .map(|(&m, &x)| {
                        let lo = m as f64 * h;
                        let d = (lo - x).max(x - lo - h).max(0.0);
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bounding_box(&self) -> Option<(Point, Point)> {
        if self.is_empty() {
            return None;
        }
        let h = self.side();
        let mut lo = vec![f64::INFINITY; self.n];
        let mut hi = vec![f64::NEG_INFINITY; self.n];
        for s in &self.steps {
            for i in 0..self.n {
                lo[i] = lo[i].min(s[i] as f64 * h);
                hi[i] = hi[i].max(s[i] as f64 * h + h);
            }
        }
        Some((lo, hi))
    }
}

#[derive(Serialize, Deserialize)]
struct BrickSetJson {
    n: usize,
    k: u64,
    corners: Vec<Point>,
}

impl Serialize for BrickSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BrickSetJson {
            n: self.n,
            k: self.k,
            corners: self.corners(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BrickSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = BrickSetJson::deserialize(d)?;
        BrickSet::new(j.n, j.k, &j.corners).map_err(serde::de::Error::custom)
    }
}

/// All bricks of side `1/k` whose closed box meets `points`. A point on a
/// shared face belongs to every brick touching it.
pub fn brick_cover(points: &[Point], k: u64) -> Result<BrickSet> {
    let Some(first) = points.first() else {
        return Err(Error::EmptyInput("brick cover of an empty point set"));
    };
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let n = first.len();
    let k_i = k as i64;
    let mut steps = Vec::new();
    for p in points {
        if p.len() != n {
            return Err(Error::invalid("points differ in dimension"));
        }
        if p.iter().any(|x| !(x.abs() <= 1.0 + FACE_TOL)) {
            return Err(Error::invalid(format!(
                "point {p:?} lies outside [-1, 1]^{n}"
            )));
        }
        let per_axis: Vec<Vec<i64>> = p
            .iter()
            .map(|&x| {
                let t = x * k as f64;
                let nearest = t.round();
                let mut ms = if (t - nearest).abs() <= FACE_TOL {
                    vec![nearest as i64 - 1, nearest as i64]
                } else {
                    vec![t.floor() as i64]
                };
                for m in &mut ms {
                    *m = (*m).clamp(-k_i, k_i - 1);
                }
                ms.dedup();
                ms
            })
            .collect();
        let mut idx = vec![0usize; n];
        loop {
            steps.push(
                idx.iter()
                    .enumerate()
                    .map(|(a, &i)| per_axis[a][i])
                    .collect(),
            );
            let mut axis = n;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                if idx[axis] + 1 < per_axis[axis].len() {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    BrickSet::from_steps(n, k, steps)
}

/// Same centers, radius grown by `r`.
pub fn dilate(region: &BallUnion, r: f64) -> Result<BallUnion> {
    region.dilate(r)
}

/// A planar region to analyse.
#[derive(Clone, Copy, Debug)]
pub enum PlanarRegion<'a> {
    Balls(&'a BallUnion),
    Bricks(&'a BrickSet),
}

impl PlanarRegion<'_> {
    fn n(&self) -> usize {
        match self {
            PlanarRegion::Balls(b) => b.n(),
            PlanarRegion::Bricks(b) => b.n(),
        }
    }

    /// The radius, or the brick side.
    fn scale(&self) -> f64 {
        match self {
            PlanarRegion::Balls(b) => b.radius(),
            PlanarRegion::Bricks(b) => b.side(),
        }
    }

    fn bounding_box(&self) -> Option<(Point, Point)> {
        match self {
            PlanarRegion::Balls(b) => b.bounding_box(),
            PlanarRegion::Bricks(b) => b.bounding_box(),
        }
    }

    pub fn distance_to(&self, p: &[f64]) -> f64 {
        match self {
            PlanarRegion::Balls(b) => b.distance_to(p),
            PlanarRegion::Bricks(b) => b.distance_to(p),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hole {
    pub representative: Point,
    pub cell_count: usize,
    /// Centers of the raster cells making up the hole.
    #[serde(skip)]
    pub cells: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionTopology {
    pub component_count: usize,
    pub holes: Vec<Hole>,
    pub resolution: f64,
}

/// Connected components of the region and bounded components of its
/// complement, found by flood fill on a raster of pitch `resolution`.
///
/// The region uses 8-connectivity and the complement 4-connectivity.
pub fn region_topology(region: PlanarRegion<'_>, resolution: f64) -> Result<RegionTopology> {
    region_topology_capped(region, resolution, DEFAULT_CELL_CAP)
}

pub fn region_topology_capped(
    region: PlanarRegion<'_>,
    resolution: f64,
    cap: u128,
) -> Result<RegionTopology> {
    let n = region.n();
    if n != 2 {
        return Err(Error::UnsupportedDimension {
            n,
            reason: "region topology is planar only",
        });
    }
    let r = region.scale();
    if !(resolution > 0.0) || resolution > r / 10.0 * (1.0 + 1e-9) {
        return Err(Error::invalid(format!(
            "resolution {resolution} must lie in (0, {}]",
            r / 10.0
        )));
    }
    let Some((blo, bhi)) = region.bounding_box() else {
        return Err(Error::EmptyRegion);
    };
    let lo: Point = blo.iter().map(|&x| x.min(-1.0) - 2.0 * r).collect();
    let hi: Point = bhi.iter().map(|&x| x.max(1.0) + 2.0 * r).collect();
    let raster = Raster::covering(&lo, &hi, resolution, cap)?;
    let mask = match region {
        PlanarRegion::Balls(b) => raster.rasterize_balls(&b.centers(), b.radius()),
        PlanarRegion::Bricks(b) => raster.rasterize_boxes(&b.corners(), b.side()),
    };
    let shape = [raster.shape()[0], raster.shape()[1]];

    let (_, component_count) = label(&mask, shape, true);
    let complement: Vec<bool> = mask.iter().map(|m| !m).collect();
    let (labels, count) = label(&complement, shape, false);

    let mut bounded = vec![true; count];
    for (flat, &l) in labels.iter().enumerate() {
        if l == usize::MAX {
            continue;
        }
        let (i, j) = (flat / shape[1], flat % shape[1]);
        if i == 0 || j == 0 || i + 1 == shape[0] || j + 1 == shape[1] {
            bounded[l] = false;
        }
    }
    let dist = raster.squared_distance_transform(&mask);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for (flat, &l) in labels.iter().enumerate() {
        if l != usize::MAX && bounded[l] {
            members[l].push(flat);
        }
    }
    let holes = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|cells| {
            let centers: Vec<Point> = cells.iter().map(|&c| raster.cell_center(c)).collect();
            let mut centroid = [0.0; 2];
            for c in &centers {
                centroid[0] += c[0] / centers.len() as f64;
                centroid[1] += c[1] / centers.len() as f64;
            }
            let best = cells.iter().map(|&c| dist[c]).fold(0.0_f64, f64::max);
            let representative = cells
                .iter()
                .zip(&centers)
                .filter(|(c, _)| dist[**c] >= best - 1e-9)
                .map(|(_, p)| p)
                .min_by(|a, b| {
                    let da = (a[0] - centroid[0]).powi(2) + (a[1] - centroid[1]).powi(2);
                    let db = (b[0] - centroid[0]).powi(2) + (b[1] - centroid[1]).powi(2);
                    da.total_cmp(&db)
                })
                .cloned()
                .expect("hole is nonempty");
            Hole {
                representative,
                cell_count: cells.len(),
                cells: centers,
            }
        })
        .collect();
    Ok(RegionTopology {
        component_count,
        holes,
        resolution,
    })
}

/// Labels the `true` cells of a 2-D mask into connected components, in
/// first-visit raster order. Unmarked cells get `usize::MAX`.
fn label(mask: &[bool], shape: [usize; 2], diagonal: bool) -> (Vec<usize>, usize) {
    let [rows, cols] = shape;
    let mut labels = vec![usize::MAX; mask.len()];
    let mut count = 0;
    let mut queue = VecDeque::new();
    let steps: &[(isize, isize)] = if diagonal {
        &[
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ]
    } else {
        &[(-1, 0), (0, -1), (0, 1), (1, 0)]
    };
    for start in 0..mask.len() {
        if !mask[start] || labels[start] != usize::MAX {
            continue;
        }
        labels[start] = count;
        queue.push_back(start);
        while let Some(cur) = queue.pop_front() {
            let (i, j) = ((cur / cols) as isize, (cur % cols) as isize);
            for (di, dj) in steps {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= rows as isize || b >= cols as isize {
                    continue;
                }
                let next = a as usize * cols + b as usize;
                if mask[next] && labels[next] == usize::MAX {
                    labels[next] = count;
                    queue.push_back(next);
                }
            }
        }
        count += 1;
    }
    (labels, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ring(count: usize, radius: f64, ball: f64, k: u64) -> BallUnion {
        let centers: Vec<Point> = (0..count)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
                vec![
                    (radius * a.cos() * k as f64).round() / k as f64,
                    (radius * a.sin() * k as f64).round() / k as f64,
                ]
            })
            .collect();
        BallUnion::new(2, ball, k, &centers).unwrap()
    }

    #[test]
    fn brick_cover_examples() {
        let b = brick_cover(&[vec![0.05, 0.05]], 10).unwrap();
        assert_eq!(b.steps(), &[vec![0, 0]]);
        let b = brick_cover(&[vec![0.0, 0.0]], 10).unwrap();
        assert_eq!(
            b.steps(),
            &[vec![-1, -1], vec![-1, 0], vec![0, -1], vec![0, 0]]
        );
        let b = brick_cover(&[vec![1.0, -1.0]], 10).unwrap();
        assert_eq!(b.steps(), &[vec![9, -10]]);
        assert_eq!(
            brick_cover(&[], 10),
            Err(Error::EmptyInput("brick cover of an empty point set"))
        );
        assert!(brick_cover(&[vec![1.5]], 10).is_err());
    }

    #[test]
    fn brick_cover_facts_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let n = 1 + trial % 3;
            let k = [5, 10, 20][(trial / 3) % 3];
            let pts: Vec<Point> = (0..50)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect())
                .collect();
            let cover = brick_cover(&pts, k).unwrap();
            for p in &pts {
                assert!(cover.contains(p));
            }
            for corner in cover.corners() {
                let single = BrickSet::new(n, k, &[corner]).unwrap();
                assert!(pts.iter().any(|p| single.contains(p)));
            }
            let bound = (n as f64).sqrt() / k as f64;
            for _ in 0..200 {
                let mut z: Point = cover.corners()[rng.random_range(0..cover.len())].clone();
                for x in &mut z {
                    *x += rng.random_range(0.0..=1.0) / k as f64;
                }
                let d = pts
                    .iter()
                    .map(|p| crate::spectrum::euclid(p, &z))
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn topology_examples() {
        let one = BallUnion::new(2, 0.15, 20, &[vec![0.0, 0.0]]).unwrap();
        let t = region_topology(PlanarRegion::Balls(&one), 0.005).unwrap();
        assert_eq!((t.component_count, t.holes.len()), (1, 0));

        let r = ring(12, 0.5, 0.15, 100);
        let t = region_topology(PlanarRegion::Balls(&r), 0.005).unwrap();
        assert_eq!((t.component_count, t.holes.len()), (1, 1));
        let rep = &t.holes[0].representative;
        assert!(rep[0].hypot(rep[1]) < 0.05, "{rep:?}");
        assert!(t.holes[0].cells.iter().any(|c| c[0].hypot(c[1]) < 0.005));

        let two = BallUnion::new(2, 0.1, 10, &[vec![-0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        let t = region_topology(PlanarRegion::Balls(&two), 0.01).unwrap();
        assert_eq!((t.component_count, t.holes.len()), (2, 0));
    }

    #[test]
    fn topology_is_resolution_stable_and_representatives_clear() {
        for (count, radius) in [(12, 0.5), (16, 0.7), (8, 0.3)] {
            let r = ring(count, radius, 0.15, 100);
            let a = region_topology(PlanarRegion::Balls(&r), 0.01).unwrap();
            let b = region_topology(PlanarRegion::Balls(&r), 0.005).unwrap();
            assert_eq!(a.component_count, b.component_count);
            assert_eq!(a.holes.len(), b.holes.len());
            for h in a.holes.iter().chain(&b.holes) {
                assert!(r.distance_to(&h.representative) >= 0.005);
            }
        }
    }

    #[test]
    fn topology_of_brick_frame() {
        let mut corners = Vec::new();
        for m in -3..3 {
            for l in -3..3 {
                if m == -3 || m == 2 || l == -3 || l == 2 {
                    corners.push(vec![m, l]);
                }
            }
        }
        let frame = BrickSet::from_steps(2, 10, corners).unwrap();
        let t = region_topology(PlanarRegion::Bricks(&frame), 0.01).unwrap();
        assert_eq!((t.component_count, t.holes.len()), (1, 1));
        assert!(t.holes[0].representative.iter().all(|x| x.abs() < 0.1));
    }

    #[test]
    fn topology_rejects_other_dimensions_and_coarse_rasters() {
        let b = BallUnion::new(1, 0.1, 10, &[vec![0.0]]).unwrap();
        assert!(matches!(
            region_topology(PlanarRegion::Balls(&b), 0.01),
            Err(Error::UnsupportedDimension { n: 1, .. })
        ));
        let b = BallUnion::new(2, 0.1, 10, &[vec![0.0, 0.0]]).unwrap();
        assert!(region_topology(PlanarRegion::Balls(&b), 0.05).is_err());
    }

    #[test]
    fn dilation_preserves_containment() {
        use crate::spectrum::{containment_check, Region};
        let a = BallUnion::new(2, 0.1, 20, &[vec![0.0, 0.0]]).unwrap();
        let b = BallUnion::new(2, 0.2, 20, &[vec![0.0, 0.0], vec![0.5, 0.0]]).unwrap();
        assert!(containment_check(Region::Balls(&a), Region::Balls(&b), 0.0).unwrap());
        let (da, db) = (dilate(&a, 0.05).unwrap(), dilate(&b, 0.05).unwrap());
        assert!(containment_check(Region::Balls(&da), Region::Balls(&db), 0.0).unwrap());
    }

    #[test]
    fn brick_json_round_trip() {
        let b = brick_cover(&[vec![0.33, -0.71]], 20).unwrap();
        let s = crate::json::to_string(&b).unwrap();
        let back: BrickSet = crate::json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert!(
            crate::json::from_str::<BrickSet>("{\"n\":1,\"k\":2,\"corners\":[[1.0]]}").is_err()
        );
    }
}
