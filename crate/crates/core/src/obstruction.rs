//! Obstructions to commuting approximation and the commuting approximant
//! search: the Bott certificate for triples, spin triples, Jacobi joint
//! diagonalization and the hole-index check for symbol models.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{region_topology, PlanarRegion};
use crate::operator::{c64, op_norm, CMatrix, HermitianMatrix, OperatorTuple};
use crate::spectrum::{sampled_synthetic_spectrum, BallUnion, GridSpec, Point};
use crate::symbol::{fredholm_index, symbol_curve, SymbolOperator};

/// Certificates whose smallest `|eigenvalue|` is at or below this are singular.
pub const BOTT_GAP_TOL: f64 = 1e-8;

/// Circle samples used for the symbol-side spectrum.
pub const SYMBOL_SAMPLES: usize = 4096;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_SWEEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BottReport {
    pub value: i64,
    pub gap: f64,
    pub certified_lower_bound: f64,
}

/// `B = [[H3, H1 − iH2], [H1 + iH2, −H3]]`.
pub fn bott_matrix(
    h1: &HermitianMatrix,
    h2: &HermitianMatrix,
    h3: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let d = h1.dim();
    if h2.dim() != d || h3.dim() != d {
        return Err(Error::invalid(
            "certificate needs three matrices of one dimension",
        ));
    }
    let i = c64(0.0, 1.0);
    let upper = h1.matrix() - h2.matrix() * i;
    let lower = h1.matrix() + h2.matrix() * i;
    let mut b = CMatrix::zeros(2 * d, 2 * d);
    b.view_mut((0, 0), (d, d)).copy_from(h3.matrix());
    b.view_mut((0, d), (d, d)).copy_from(&upper);
    b.view_mut((d, 0), (d, d)).copy_from(&lower);
    b.view_mut((d, d), (d, d)).copy_from(&(-h3.matrix()));
    HermitianMatrix::new(b)
}

/// Half the signature of the certificate and its spectral gap at zero.
pub fn bott_index(
    h1: &HermitianMatrix,
    h2: &HermitianMatrix,
    h3: &HermitianMatrix,
) -> Result<BottReport> {
    let values = bott_matrix(h1, h2, h3)?.eigen().values;
    let gap = values.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if !(gap > BOTT_GAP_TOL) {
        return Err(Error::GaplessCertificate { gap });
    }
    let pos = values.iter().filter(|&&v| v > 0.0).count() as i64;
    let neg = values.len() as i64 - pos;
    Ok(BottReport {
        value: (pos - neg) / 2,
        gap,
        certified_lower_bound: gap / 3.0,
    })
}

fn triple(tuple: &OperatorTuple) -> Result<[&HermitianMatrix; 3]> {
    match tuple.ops() {
        [a, b, c] => Ok([a, b, c]),
        _ => Err(Error::invalid(format!(
            "expected a triple, got n = {}",
            tuple.n()
        ))),
    }
}

pub fn bott_index_of(tuple: &OperatorTuple) -> Result<BottReport> {
    let [a, b, c] = triple(tuple)?;
    bott_index(a, b, c)
}

/// `(J_x/j, J_y/j, J_z/j)` in the spin-`j` representation of dimension `2j + 1`.
pub fn spin_triple(j: f64) -> Result<OperatorTuple> {
    let twice = (2.0 * j).round();
    if !(j >= 0.5) || (2.0 * j - twice).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "spin {j} must be a positive half-integer"
        )));
    }
    let d = twice as usize + 1;
    let m = |a: usize| j - a as f64;
    // Basis ordered m = j, j−1, …, −j; J₊ raises m.
    let mut plus = CMatrix::zeros(d, d);
    for a in 1..d {
        let mm = m(a);
        plus[(a - 1, a)] = c64((j * (j + 1.0) - mm * (mm + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    let jx = (&plus + &minus) * c64(0.5 / j, 0.0);
    let jy = (&plus - &minus) * c64(0.0, -0.5 / j);
    let jz = CMatrix::from_fn(d, d, |a, b| {
        if a == b {
            c64(m(a) / j, 0.0)
        } else {
            c64(0.0, 0.0)
        }
    });
    OperatorTuple::unit(vec![
        HermitianMatrix::new(jx)?,
        HermitianMatrix::new(jy)?,
        HermitianMatrix::new(jz)?,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DistanceCertificate {
    pub bound: f64,
    pub bott: BottReport,
    /// A commuting triple whose own certificate is singular escapes the
    /// signature argument; the bound covers gapped commuting triples only.
    pub excludes_singular_commuting: bool,
}

/// `gap/3`: no commuting triple with a gapped certificate lies within
/// this distance of `tuple` in every coordinate.
pub fn certified_distance_bound(tuple: &OperatorTuple) -> Result<DistanceCertificate> {
    let bott = bott_index_of(tuple)?;
    if bott.value == 0 {
        return Err(Error::NoObstruction);
    }
    Ok(DistanceCertificate {
        bound: bott.certified_lower_bound,
        bott,
        excludes_singular_commuting: true,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximantReport {
    #[serde(rename = "S")]
    pub commuting: OperatorTuple,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    pub sweeps: usize,
    pub off_diag_residual: f64,
    /// Off-diagonal objective before the first sweep and after each sweep.
    pub objective_history: Vec<f64>,
    pub converged: bool,
}

fn off_diagonal(mats: &[CMatrix]) -> f64 {
    mats.iter()
        .map(|a| {
            let mut s = 0.0;
            for q in 0..a.ncols() {
                for p in 0..a.nrows() {
                    if p != q {
                        s += a[(p, q)].norm_sqr();
                    }
                }
            }
            s
        })
        .sum()
}

/// Top eigenvector of a symmetric 3×3 matrix.
fn top_eigenvector(g: [[f64; 3]; 3]) -> [f64; 3] {
    let m = nalgebra::Matrix3::from_fn(|i, j| g[i][j]);
    let eig = nalgebra::SymmetricEigen::new(m);
    let (best, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
    let v = eig.eigenvectors.column(best);
    [v[0], v[1], v[2]]
}

/// Applies `A ← R* A R` with `R` the identity outside the `(p, q)` plane
/// and `[[c, −s̄], [s, c]]` inside it.
fn rotate(a: &mut CMatrix, p: usize, q: usize, c: f64, s: Complex64) {
    let sc = s.conj();
    for r in 0..a.nrows() {
        let (ap, aq) = (a[(r, p)], a[(r, q)]);
        a[(r, p)] = ap * c + aq * s;
        a[(r, q)] = -ap * sc + aq * c;
    }
    for col in 0..a.ncols() {
        let (ap, aq) = (a[(p, col)], a[(q, col)]);
        a[(p, col)] = ap * c + aq * sc;
        a[(q, col)] = -ap * s + aq * c;
    }
}

fn rotate_columns(u: &mut CMatrix, p: usize, q: usize, c: f64, s: Complex64) {
    let sc = s.conj();
    for r in 0..u.nrows() {
        let (up, uq) = (u[(r, p)], u[(r, q)]);
        u[(r, p)] = up * c + uq * s;
        u[(r, q)] = -up * sc + uq * c;
    }
}

/// Joint approximate diagonalization by cyclic complex Jacobi sweeps.
///
/// The starting basis diagonalizes a generic real combination of the
/// members. Each plane rotation is the exact minimizer of the joint
/// off-diagonal mass in its `(p, q)` block. The commuting approximant is
/// `S_j = U diag(U* T_j U) U*`.
pub fn joint_diagonalize(
    tuple: &OperatorTuple,
    tol: f64,
    max_sweeps: usize,
) -> Result<ApproximantReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    if max_sweeps == 0 {
        return Err(Error::invalid("max_sweeps must be positive"));
    }
    let d = tuple.dim();
    let weights = [
        1.0,
        0.577_215_664_9,
        std::f64::consts::FRAC_1_PI,
        0.236_067_977_5,
    ];
    let mut combo = tuple.ops()[0].matrix() * c64(0.0, 0.0);
    for (j, op) in tuple.ops().iter().enumerate() {
        let w = weights
            .get(j)
            .copied()
            .unwrap_or(1.0 / (j as f64 + 2.0).sqrt());
        combo += op.matrix() * c64(w, 0.0);
    }
    let mut u = HermitianMatrix::new(combo)?.eigen().vectors;
    let mut mats: Vec<CMatrix> = tuple
        .ops()
        .iter()
        .map(|op| u.adjoint() * op.matrix() * &u)
        .collect();

    let mut history = vec![off_diagonal(&mats)];
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        for p in 0..d {
            for q in p + 1..d {
                let mut g = [[0.0; 3]; 3];
                for a in &mats {
                    let h = [
                        a[(p, p)].re - a[(q, q)].re,
                        2.0 * a[(p, q)].re,
                        2.0 * a[(p, q)].im,
                    ];
                    for (r, hr) in h.iter().enumerate() {
                        for (s, hs) in h.iter().enumerate() {
                            g[r][s] += hr * hs;
                        }
                    }
                }
                let [mut x, mut y, mut z] = top_eigenvector(g);
                if x < 0.0 {
                    (x, y, z) = (-x, -y, -z);
                }
                let c = ((x + 1.0) / 2.0).sqrt();
                let s = c64(y, -z) / (2.0 * c);
                if s.norm() < 1e-300 {
                    continue;
                }
                for a in &mut mats {
                    rotate(a, p, q, c, s);
                }
                rotate_columns(&mut u, p, q, c, s);
            }
        }
        sweeps += 1;
        let obj = off_diagonal(&mats);
        let prev = *history.last().expect("nonempty");
        history.push(obj);
        if prev - obj < tol {
            converged = true;
            break;
        }
    }

    let mut ops = Vec::with_capacity(tuple.n());
    let mut distances = Vec::with_capacity(tuple.n());
    for (a, t) in mats.iter().zip(tuple.ops()) {
        let diag: Vec<f64> = (0..d).map(|i| a[(i, i)].re).collect();
        let s = HermitianMatrix::from_eigenbasis(&u, &diag);
        distances.push(op_norm(&t.sub(&s)?));
        ops.push(s);
    }
    let bound = ops.iter().map(op_norm).fold(tuple.norm_bound(), f64::max);
    let commuting = OperatorTuple::new(ops, bound)?;
    let max_distance = distances.iter().fold(0.0_f64, |m, &v| m.max(v));
    Ok(ApproximantReport {
        commuting,
        distances,
        max_distance,
        sweeps,
        off_diag_residual: *history.last().expect("nonempty"),
        objective_history: history,
        converged,
    })
}

/// The symbol-side synthetic spectrum of the pair `(Re s, Im s)`, with the
/// product norm replaced by its supremum over `SYMBOL_SAMPLES` circle points.
pub fn symbol_spectrum(op: &SymbolOperator, eta: f64) -> Result<(BallUnion, f64)> {
    let curve = symbol_curve(op, SYMBOL_SAMPLES.max(8 * op.bandwidth()))?;
    let samples: Vec<Point> = curve.iter().map(|z| vec![z.re, z.im]).collect();
    let reach = samples
        .iter()
        .flatten()
        .fold(1.0_f64, |m, v| m.max(v.abs()));
    let spec = GridSpec::new(2, reach, eta)?;
    let spectrum = sampled_synthetic_spectrum(&samples, &spec)?;
    let max_step = (0..curve.len())
        .map(|j| (curve[(j + 1) % curve.len()] - curve[j]).norm())
        .fold(0.0_f64, f64::max);
    // Each bump is 4/η-Lipschitz per coordinate.
    let error = 4.0 * std::f64::consts::SQRT_2 / eta * max_step;
    Ok((spectrum, error))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoleVerdict {
    pub lambda: [f64; 2],
    pub index: i64,
    pub cell_count: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexCheckReport {
    pub eta: f64,
    pub samples: usize,
    /// Bound on the product-norm error from sampling the circle.
    pub sampling_error_bound: f64,
    pub component_count: usize,
    pub holes: Vec<HoleVerdict>,
    pub pass: bool,
}

/// Index of `λ − T` at one point of every hole of the symbol-side
/// synthetic spectrum; the hypothesis holds iff every index vanishes.
pub fn index_hypothesis_check(op: &SymbolOperator, eta: f64) -> Result<IndexCheckReport> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    let (spectrum, sampling_error_bound) = symbol_spectrum(op, eta)?;
    let topo = region_topology(PlanarRegion::Balls(&spectrum), eta / 20.0)?;
    let mut holes = Vec::with_capacity(topo.holes.len());
    for h in &topo.holes {
        let lambda = c64(h.representative[0], h.representative[1]);
        let w = fredholm_index(op, lambda)?;
        holes.push(HoleVerdict {
            lambda: w.lambda,
            index: w.index,
            cell_count: h.cell_count,
            pass: w.index == 0,
        });
    }
    let pass = holes.iter().all(|h| h.pass);
    Ok(IndexCheckReport {
        eta,
        samples: SYMBOL_SAMPLES,
        sampling_error_bound,
        component_count: topo.component_count,
        holes,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{commutator_norm, random_hermitian_with_norm, AlmostCommutingGenerator};

    fn pauli() -> [HermitianMatrix; 3] {
        let x = HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let y = HermitianMatrix::new(CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
        ))
        .unwrap();
        let z = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap();
        [x, y, z]
    }

    #[test]
    fn half_spin_is_pauli_and_certificate_matches_direct_solve() {
        let t = spin_triple(0.5).unwrap();
        for (a, b) in t.ops().iter().zip(pauli()) {
            assert!((a.matrix() - b.matrix()).norm() < 1e-14);
        }
        // B = σx⊗σx + σy⊗σy + σz⊗σz has eigenvalues 1, 1, 1, −3.
        let r = bott_index_of(&t).unwrap();
        assert_eq!(r.value, 1);
        assert!((r.gap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spin_twenty() {
        let t = spin_triple(20.0).unwrap();
        assert_eq!(t.dim(), 41);
        for (_, c) in t.pairwise_commutator_norms() {
            assert!((c - 0.05).abs() < 1e-9, "{c}");
        }
        let cas = t.ops().iter().fold(CMatrix::zeros(41, 41), |acc, h| {
            acc + h.matrix() * h.matrix()
        });
        assert!((cas - CMatrix::identity(41, 41) * c64(21.0 / 20.0, 0.0)).norm() < 1e-10);
        let r = bott_index_of(&t).unwrap();
        assert_eq!(r.value, 1);
        assert!(r.gap > 0.0 && r.certified_lower_bound == r.gap / 3.0);
        let swapped = bott_index(&t.ops()[1], &t.ops()[0], &t.ops()[2]).unwrap();
        assert_eq!(swapped.value, -1);
        assert!(spin_triple(0.3).is_err());
    }

    #[test]
    fn commuting_triples_have_no_obstruction() {
        let t = OperatorTuple::unit(vec![
            HermitianMatrix::from_real_diagonal(&[0.6, 0.0, -0.8]).unwrap(),
            HermitianMatrix::from_real_diagonal(&[0.8, 0.0, 0.0]).unwrap(),
            HermitianMatrix::from_real_diagonal(&[0.0, 1.0, 0.6]).unwrap(),
        ])
        .unwrap();
        assert_eq!(bott_index_of(&t).unwrap().value, 0);
        assert_eq!(certified_distance_bound(&t), Err(Error::NoObstruction));
        let zero = OperatorTuple::unit(vec![HermitianMatrix::zeros(2); 3]).unwrap();
        assert!(matches!(
            bott_index_of(&zero),
            Err(Error::GaplessCertificate { .. })
        ));
    }

    #[test]
    fn bound_scales_with_the_triple() {
        let t = spin_triple(5.0).unwrap();
        let base = certified_distance_bound(&t).unwrap().bound;
        for c in [0.95, 0.99] {
            let scaled = OperatorTuple::unit(t.ops().iter().map(|h| h.scale(c)).collect()).unwrap();
            let b = certified_distance_bound(&scaled).unwrap().bound;
            assert!((b - c * base).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobi_examples() {
        let g = AlmostCommutingGenerator::new(3, 12, 0.1)
            .with_perturbation(0.0)
            .generate(2)
            .unwrap();
        let r = joint_diagonalize(&g.commuting, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert_eq!(r.sweeps, 1);
        assert!(r.max_distance <= 1e-10, "{}", r.max_distance);

        let eps = 0.01;
        let t1 = HermitianMatrix::from_real_rows(&[vec![0.0, eps], vec![eps, 0.0]]).unwrap();
        let t2 = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap();
        let r = joint_diagonalize(
            &OperatorTuple::unit(vec![t1, t2]).unwrap(),
            DEFAULT_TOL,
            DEFAULT_MAX_SWEEPS,
        )
        .unwrap();
        assert!((r.max_distance - eps).abs() < 1e-12, "{}", r.max_distance);
        assert!(r.distances[1] < 1e-12);
    }

    #[test]
    fn jacobi_descends_and_commutes() {
        for seed in 0..8 {
            let g = AlmostCommutingGenerator::new(2 + seed as usize % 2, 16, 0.2)
                .generate(seed)
                .unwrap();
            let r = joint_diagonalize(&g.perturbed, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
            for w in r.objective_history.windows(2) {
                assert!(
                    w[1] <= w[0] * (1.0 + 1e-12) + 1e-15,
                    "{:?}",
                    r.objective_history
                );
            }
            assert!(r.commuting.max_commutator_norm() <= 1e-10);
            for (d, (t, s)) in r
                .distances
                .iter()
                .zip(g.perturbed.ops().iter().zip(r.commuting.ops()))
            {
                assert!((d - op_norm(&t.sub(s).unwrap())).abs() <= 1e-9);
            }
        }
        let t = spin_triple(4.0).unwrap();
        let r = joint_diagonalize(&t, DEFAULT_TOL, DEFAULT_MAX_SWEEPS).unwrap();
        assert!(r.max_distance >= certified_distance_bound(&t).unwrap().bound);
    }

    #[test]
    fn bott_value_survives_small_perturbations() {
        let t = spin_triple(3.0).unwrap();
        let base = bott_index_of(&t).unwrap();
        for seed in 0..10 {
            let ops: Vec<HermitianMatrix> = t
                .ops()
                .iter()
                .enumerate()
                .map(|(j, h)| {
                    h.add(&random_hermitian_with_norm(
                        7,
                        0.95 * base.gap / 3.0,
                        10 * seed + j as u64,
                    ))
                    .unwrap()
                })
                .collect();
            let (a, b, c) = (&ops[0], &ops[1], &ops[2]);
            assert_eq!(bott_index(a, b, c).unwrap().value, base.value);
        }
        assert!(commutator_norm(&t.ops()[0], &t.ops()[1]).unwrap() > 0.0);
    }

    #[test]
    fn index_check_examples() {
        let shift = index_hypothesis_check(&SymbolOperator::shift(), 0.1).unwrap();
        assert!(!shift.pass);
        assert_eq!(shift.holes.len(), 1);
        assert_eq!(shift.holes[0].index, -1);
        let l = shift.holes[0].lambda;
        assert!(l[0].hypot(l[1]) < 0.2, "{l:?}");

        let laurent = SymbolOperator::from_real(&[(-1, 0.5), (1, 0.5)]).unwrap();
        let r = index_hypothesis_check(&laurent, 0.1).unwrap();
        assert!(r.pass && r.holes.is_empty());
        assert_eq!(r.component_count, 1);

        let cubic = SymbolOperator::from_real(&[(1, 0.7), (2, 0.3)]).unwrap();
        let r = index_hypothesis_check(&cubic, 0.1).unwrap();
        assert!(!r.pass);
        assert!(r.holes.iter().all(|h| h.index < 0));
    }
}
