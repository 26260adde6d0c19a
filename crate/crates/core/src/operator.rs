//! Dense Hermitian matrices, their functional calculus, and seeded
//! generators of almost-commuting tuples.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Slack on the tuple norm bound.
pub const NORM_BOUND_SLACK: f64 = 1e-9;

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest singular value of an arbitrary complex matrix.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.adjoint()
    } else {
        m.adjoint() * m
    };
    if gram.nrows() == 1 {
        return gram[(0, 0)].re.max(0.0).sqrt();
    }
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v))
        .sqrt()
}

/// Eigenvalues of an arbitrary complex matrix, read off its Schur form.
pub fn complex_eigenvalues(m: &CMatrix) -> Vec<Complex64> {
    let (_, t) = Schur::new(m.clone()).unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Spectral decomposition `A = U diag(values) U*` with ascending values.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Eigen {
    /// Indices `lo..hi` of the eigenvalues lying in the closed interval `[a, b]`.
    pub fn index_range(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let lo = self.values.partition_point(|&v| v < a);
        let hi = self.values.partition_point(|&v| v <= b);
        lo..hi.max(lo)
    }
}

fn hermitian_eigen(m: &CMatrix) -> Eigen {
    let dim = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Eigen { values, vectors }
}

/// A dense complex self-adjoint matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates and symmetrizes `m` as `(m + m*)/2`.
    ///
    /// Rejects non-square, empty or non-finite input, and input whose
    /// largest deviation from its adjoint exceeds `1e-12 (1 + max |entry|)`.
    pub fn new(m: CMatrix) -> Result<Self> {
        let dim = m.nrows();
        if dim == 0 || m.ncols() != dim {
            return Err(Error::invalid(format!(
                "matrix must be square with dim >= 1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let max_entry = m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let mut deviation = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                deviation = deviation.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if deviation > HERMITIAN_TOL * (1.0 + max_entry) {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian: deviation {deviation:.3e}"
            )));
        }
        let sym = (&m + m.adjoint()).scale(0.5);
        Ok(Self { m: sym })
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid("rows must form a square array"));
        }
        Self::new(CMatrix::from_fn(dim, dim, |i, j| c64(rows[i][j], 0.0)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        Self::new(CMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                c64(diag[i], 0.0)
            } else {
                c64(0.0, 0.0)
            }
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMatrix::zeros(dim.max(1), dim.max(1)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMatrix::identity(dim.max(1), dim.max(1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn eigen(&self) -> Eigen {
        hermitian_eigen(&self.m)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: self.m.scale(c) }
    }

    /// `self + other`; dims must match.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            m: &self.m + &other.m,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        Ok(Self {
            m: &self.m - &other.m,
        })
    }

    /// `U diag(values) U*` for a unitary `u`.
    pub(crate) fn from_eigenbasis(u: &CMatrix, values: &[f64]) -> Self {
        let mut scaled = u.clone();
        for (j, &v) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        let m = scaled * u.adjoint();
        Self {
            m: (&m + m.adjoint()).scale(0.5),
        }
    }
}

fn check_dims(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Wire form `{"dim": d, "re": [[..]], "im": [[..]]}`, row-major.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        let d = j.dim;
        let shape_ok = j.re.len() == d
            && j.im.len() == d
            && j.re.iter().all(|r| r.len() == d)
            && j.im.iter().all(|r| r.len() == d);
        if !shape_ok {
            return Err(Error::invalid(format!(
                "matrix arrays do not match dim {d}"
            )));
        }
        HermitianMatrix::new(CMatrix::from_fn(d, d, |r, c| c64(j.re[r][c], j.im[r][c])))
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(h: HermitianMatrix) -> Self {
        let d = h.dim();
        let row = |f: fn(&Complex64) -> f64, r: usize| (0..d).map(|c| f(&h.m[(r, c)])).collect();
        MatrixJson {
            dim: d,
            re: (0..d).map(|r| row(|z| z.re, r)).collect(),
            im: (0..d).map(|r| row(|z| z.im, r)).collect(),
        }
    }
}

/// Largest absolute eigenvalue. Non-finite input is rejected when the
/// matrix is constructed, so this cannot fail.
pub fn op_norm(a: &HermitianMatrix) -> f64 {
    let eig = SymmetricEigen::new(a.m.clone());
    eig.eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `‖AB − BA‖`, computed as the spectral radius of the Hermitian `i[A, B]`.
pub fn commutator_norm(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    check_dims(a, b)?;
    let ab = &a.m * &b.m;
    let comm = &ab - ab.adjoint();
    let herm = comm * c64(0.0, 1.0);
    let eig = SymmetricEigen::new((&herm + herm.adjoint()).scale(0.5));
    Ok(eig
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Piecewise linear function on the real line, extended constantly beyond
/// its first and last breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearFn {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinearFn {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput(
                "piecewise linear function needs a breakpoint",
            ));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::invalid("breakpoints must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid(
                "breakpoint abscissas must be strictly increasing",
            ));
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    /// The identity on `[lo, hi]`, constant outside.
    pub fn identity_on(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, lo), (hi, hi)])
    }

    /// The trapezoidal bump: 1 within `3η/4` of `center`, 0 beyond `η`,
    /// linear in between.
    pub fn bump(center: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::invalid("bump width must be positive"));
        }
        Self::new(vec![
            (center - eta, 0.0),
            (center - 0.75 * eta, 1.0),
            (center + 0.75 * eta, 1.0),
            (center + eta, 0.0),
        ])
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, t: f64) -> f64 {
        let pts = &self.points;
        let first = pts[0];
        let last = pts[pts.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let i = pts.partition_point(|p| p.0 <= t);
        let (x0, y0) = pts[i - 1];
        let (x1, y1) = pts[i];
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    /// `self ∘ inner`, again piecewise linear.
    pub fn compose(&self, inner: &PiecewiseLinearFn) -> PiecewiseLinearFn {
        let mut xs: Vec<f64> = inner.points.iter().map(|p| p.0).collect();
        for w in inner.points.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if y0 == y1 {
                continue;
            }
            for &(b, _) in &self.points {
                let s = (b - y0) / (y1 - y0);
                if s > 0.0 && s < 1.0 {
                    xs.push(x0 + s * (x1 - x0));
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + b.abs()));
        let points = xs
            .into_iter()
            .map(|x| (x, self.eval(inner.eval(x))))
            .collect();
        PiecewiseLinearFn { points }
    }
}

/// Value of the bump `θ_{center, η}` at `t`.
#[inline]
pub fn bump_value(center: f64, eta: f64, t: f64) -> f64 {
    let d = (t - center).abs();
    if d <= 0.75 * eta {
        1.0
    } else if d >= eta {
        0.0
    } else {
        4.0 * (eta - d) / eta
    }
}

/// `f(A) = U f(Λ) U*`.
pub fn func_calc(a: &HermitianMatrix, f: &PiecewiseLinearFn) -> HermitianMatrix {
    let eig = a.eigen();
    let vals: Vec<f64> = eig.values.iter().map(|&v| f.eval(v)).collect();
    HermitianMatrix::from_eigenbasis(&eig.vectors, &vals)
}

/// An ordered tuple of Hermitian matrices with a shared dimension and a
/// common norm bound `M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleJson", into = "TupleJson")]
pub struct OperatorTuple {
    ops: Vec<HermitianMatrix>,
    norm_bound: f64,
}

impl OperatorTuple {
    pub fn new(ops: Vec<HermitianMatrix>, norm_bound: f64) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::EmptyInput(
                "operator tuple needs at least one member",
            ));
        }
        if !(norm_bound.is_finite() && norm_bound > 0.0) {
            return Err(Error::invalid("norm bound must be positive and finite"));
        }
        let dim = ops[0].dim();
        if ops.iter().any(|o| o.dim() != dim) {
            return Err(Error::invalid("tuple members must share one dimension"));
        }
        for (j, o) in ops.iter().enumerate() {
            let nrm = op_norm(o);
            if nrm > norm_bound + NORM_BOUND_SLACK {
                return Err(Error::invalid(format!(
                    "member {j} has norm {nrm} above the bound {norm_bound}"
                )));
            }
        }
        Ok(Self { ops, norm_bound })
    }

    /// Tuple with `M = 1`.
    pub fn unit(ops: Vec<HermitianMatrix>) -> Result<Self> {
        Self::new(ops, 1.0)
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn ops(&self) -> &[HermitianMatrix] {
        &self.ops
    }

    pub fn into_ops(self) -> Vec<HermitianMatrix> {
        self.ops
    }

    /// Commutator norms for every pair `i < j`, in lexicographic order.
    pub fn pairwise_commutator_norms(&self) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                let c = commutator_norm(&self.ops[i], &self.ops[j]).expect("dims are shared");
                out.push(((i, j), c));
            }
        }
        out
    }

    pub fn max_commutator_norm(&self) -> f64 {
        self.pairwise_commutator_norms()
            .into_iter()
            .fold(0.0, |acc, (_, c)| acc.max(c))
    }
}

#[derive(Serialize, Deserialize)]
struct TupleJson {
    n: usize,
    dim: usize,
    #[serde(rename = "M")]
    m: f64,
    ops: Vec<HermitianMatrix>,
}

impl TryFrom<TupleJson> for OperatorTuple {
    type Error = Error;

    fn try_from(j: TupleJson) -> Result<Self> {
        if j.ops.len() != j.n {
            return Err(Error::invalid(format!(
                "n = {} but {} ops given",
                j.n,
                j.ops.len()
            )));
        }
        if j.ops.iter().any(|o| o.dim() != j.dim) {
            return Err(Error::invalid(format!("ops do not match dim {}", j.dim)));
        }
        OperatorTuple::new(j.ops, j.m)
    }
}

impl From<OperatorTuple> for TupleJson {
    fn from(t: OperatorTuple) -> Self {
        TupleJson {
            n: t.n(),
            dim: t.dim(),
            m: t.norm_bound,
            ops: t.ops,
        }
    }
}

/// Shared eigenbasis of a commuting tuple together with the joint
/// eigenvalue vector of each basis column.
///
/// Each operator refines the eigenspace clusters left by its predecessors,
/// so degenerate members are handled without a generic random combination.
pub fn joint_eigenbasis(ops: &[HermitianMatrix]) -> (CMatrix, Vec<Vec<f64>>) {
    const CLUSTER_TOL: f64 = 1e-8;
    let dim = ops[0].dim();
    let mut blocks: Vec<CMatrix> = vec![CMatrix::identity(dim, dim)];
    for op in ops {
        let scale = 1.0 + op_norm(op);
        let mut next = Vec::with_capacity(blocks.len());
        for q in &blocks {
            let compressed = q.adjoint() * op.matrix() * q;
            let compressed = (&compressed + compressed.adjoint()).scale(0.5);
            let eig = hermitian_eigen(&compressed);
            let rotated = q * &eig.vectors;
            let mut start = 0;
            for i in 1..=eig.values.len() {
                let split = i == eig.values.len()
                    || eig.values[i] - eig.values[i - 1] > CLUSTER_TOL * scale;
                if split {
                    next.push(rotated.columns(start, i - start).into_owned());
                    start = i;
                }
            }
        }
        blocks = next;
    }
    let mut u = CMatrix::zeros(dim, dim);
    let mut col = 0;
    for b in &blocks {
        for c in 0..b.ncols() {
            u.set_column(col, &b.column(c));
            col += 1;
        }
    }
    let points = (0..dim)
        .map(|c| {
            let v = u.column(c);
            ops.iter()
                .map(|op| (v.adjoint() * op.matrix() * v)[(0, 0)].re)
                .collect()
        })
        .collect();
    (u, points)
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c64(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
    q
}

fn random_hermitian(dim: usize, norm: f64, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        c64(StandardNormal.sample(rng), StandardNormal.sample(rng))
    });
    let h = HermitianMatrix {
        m: (&g + g.adjoint()).scale(0.5),
    };
    let current = op_norm(&h);
    if current > 0.0 {
        h.scale(norm / current)
    } else {
        h
    }
}

/// Uniformly random Hermitian matrix direction scaled to operator norm `norm`.
pub fn random_hermitian_with_norm(dim: usize, norm: f64, seed: u64) -> HermitianMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hermitian(dim, norm, &mut rng)
}

/// Seeded generator of almost-commuting tuples: a commuting tuple that is
/// simultaneously diagonal in a random unitary basis, plus independent
/// Hermitian perturbations.
#[derive(Clone, Copy, Debug)]
pub struct AlmostCommutingGenerator {
    pub n: usize,
    pub dim: usize,
    pub delta: f64,
    /// Operator norm of each perturbation; defaults to `delta / 5`, which
    /// keeps `4δ/5 + 2δ²/25 < δ`.
    pub perturbation: f64,
}

/// Output of [`AlmostCommutingGenerator::generate`].
#[derive(Clone, Debug)]
pub struct GeneratedTuple {
    pub commuting: OperatorTuple,
    pub perturbed: OperatorTuple,
}

impl AlmostCommutingGenerator {
    pub fn new(n: usize, dim: usize, delta: f64) -> Self {
        Self {
            n,
            dim,
            delta,
            perturbation: delta / 5.0,
        }
    }

    pub fn with_perturbation(mut self, norm: f64) -> Self {
        self.perturbation = norm;
        self
    }

    pub fn generate(&self, seed: u64) -> Result<GeneratedTuple> {
        if self.n == 0 || self.dim == 0 {
            return Err(Error::invalid("n and dim must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.perturbation >= 0.0 && self.perturbation.is_finite()) {
            return Err(Error::invalid("perturbation norm must be nonnegative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(self.dim, &mut rng);
        let spread = Uniform::new_inclusive(-1.0 + self.delta, 1.0 - self.delta)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let mut commuting = Vec::with_capacity(self.n);
        let mut perturbed = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let vals: Vec<f64> = (0..self.dim).map(|_| spread.sample(&mut rng)).collect();
            let base = HermitianMatrix::from_eigenbasis(&u, &vals);
            let pert = if self.perturbation > 0.0 {
                let e = random_hermitian(self.dim, self.perturbation, &mut rng);
                let t = base.add(&e)?;
                let nrm = op_norm(&t);
                if nrm > 1.0 {
                    t.scale(1.0 / nrm)
                } else {
                    t
                }
            } else {
                base.clone()
            };
            commuting.push(base);
            perturbed.push(pert);
        }
        Ok(GeneratedTuple {
            commuting: OperatorTuple::unit(commuting)?,
            perturbed: OperatorTuple::unit(perturbed)?,
        })
    }
}

/// Tuple with `‖T_j‖ ≤ 1` and pairwise commutators below `delta`.
pub fn random_almost_commuting(
    n: usize,
    dim: usize,
    delta: f64,
    seed: u64,
) -> Result<OperatorTuple> {
    Ok(AlmostCommutingGenerator::new(n, dim, delta)
        .generate(seed)?
        .perturbed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pauli_x() -> HermitianMatrix {
        HermitianMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn op_norm_examples() {
        let d = HermitianMatrix::from_real_diagonal(&[3.0, -5.0]).unwrap();
        assert!((op_norm(&d) - 5.0).abs() < 1e-12);
        assert_eq!(op_norm(&HermitianMatrix::zeros(4)), 0.0);
        assert!((op_norm(&pauli_x()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_and_non_hermitian_rejected() {
        let nan = CMatrix::from_element(2, 2, c64(f64::NAN, 0.0));
        assert!(matches!(
            HermitianMatrix::new(nan),
            Err(Error::InvalidInput(_))
        ));
        let skew =
            CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(2., 0.), c64(0., 0.)]);
        assert!(HermitianMatrix::new(skew).is_err());
        let noisy = CMatrix::from_row_slice(
            2,
            2,
            &[c64(0., 0.), c64(1.0 + 1e-13, 0.), c64(1., 0.), c64(0., 0.)],
        );
        let h = HermitianMatrix::new(noisy).unwrap();
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }

    #[test]
    fn commutator_examples() {
        let a = HermitianMatrix::from_real_diagonal(&[1.0, 2.0]).unwrap();
        let b = HermitianMatrix::from_real_diagonal(&[3.0, 4.0]).unwrap();
        assert!(commutator_norm(&a, &b).unwrap() < 1e-14);
        let z = HermitianMatrix::from_real_diagonal(&[1.0, -1.0]).unwrap();
        assert!((commutator_norm(&pauli_x(), &z).unwrap() - 2.0).abs() < 1e-12);
        assert!(commutator_norm(&pauli_x(), &pauli_x()).unwrap() < 1e-14);
        assert!(commutator_norm(&a, &HermitianMatrix::zeros(3)).is_err());
    }

    #[test]
    fn func_calc_examples() {
        let tuple = random_almost_commuting(1, 6, 0.1, 3).unwrap();
        let a = &tuple.ops()[0];
        let id = func_calc(a, &PiecewiseLinearFn::identity_on(-1.0, 1.0).unwrap());
        let err = (id.matrix() - a.matrix())
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()));
        assert!(err <= 1e-10, "{err}");

        let d = HermitianMatrix::from_real_diagonal(&[0.3, -0.7]).unwrap();
        let one = func_calc(&d, &PiecewiseLinearFn::constant(1.0));
        assert!((one.matrix() - CMatrix::identity(2, 2)).norm() < 1e-12);

        let d = HermitianMatrix::from_real_diagonal(&[0.05, 0.2]).unwrap();
        let th = func_calc(&d, &PiecewiseLinearFn::bump(0.0, 0.1).unwrap());
        let expect = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert!((th.matrix() - expect.matrix()).norm() < 1e-12);
        assert!(commutator_norm(&th, &d).unwrap() < 1e-9);
    }

    #[test]
    fn bump_value_matches_piecewise_form() {
        let f = PiecewiseLinearFn::bump(0.16, 0.2).unwrap();
        assert!((f.eval(0.0) - 0.8).abs() < 1e-12);
        assert!((bump_value(0.16, 0.2, 0.0) - 0.8).abs() < 1e-12);
        for i in 0..200 {
            let t = -0.5 + i as f64 * 0.005;
            assert!((f.eval(t) - bump_value(0.16, 0.2, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn piecewise_rejects_unsorted() {
        assert!(PiecewiseLinearFn::new(vec![(1.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(PiecewiseLinearFn::new(vec![]).is_err());
    }

    #[test]
    fn generator_examples() {
        let t = random_almost_commuting(2, 8, 1e-2, 7).unwrap();
        assert!(t.max_commutator_norm() < 1e-2);
        let single = random_almost_commuting(1, 5, 0.1, 1).unwrap();
        assert_eq!(single.n(), 1);
        assert!(single.pairwise_commutator_norms().is_empty());
        let exact = AlmostCommutingGenerator::new(3, 10, 0.1)
            .with_perturbation(0.0)
            .generate(4)
            .unwrap();
        assert!(exact.perturbed.max_commutator_norm() < 1e-12);
        assert!(random_almost_commuting(2, 4, 0.0, 1).is_err());
        let again = random_almost_commuting(2, 8, 1e-2, 7).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn joint_eigenbasis_recovers_spectrum() {
        let g = AlmostCommutingGenerator::new(2, 6, 0.1)
            .with_perturbation(0.0)
            .generate(9)
            .unwrap();
        let (u, pts) = joint_eigenbasis(g.commuting.ops());
        let unit = u.adjoint() * &u;
        assert!((unit - CMatrix::identity(6, 6)).norm() < 1e-10);
        for (j, op) in g.commuting.ops().iter().enumerate() {
            let mut ours: Vec<f64> = pts.iter().map(|p| p[j]).collect();
            ours.sort_by(f64::total_cmp);
            for (a, b) in ours.iter().zip(op.eigen().values.iter()) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let t = random_almost_commuting(2, 3, 0.1, 5).unwrap();
        let s = crate::json::to_string(&t).unwrap();
        assert!(s.starts_with("{\"n\":2,\"dim\":3,\"M\":"));
        let back: OperatorTuple = crate::json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    fn diag_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0..1.0_f64, 1..12)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn composition_matches_nested_calculus(values in diag_strategy(), c in -0.8..0.8_f64, s in 0.2..1.5_f64) {
            let a = HermitianMatrix::from_real_diagonal(&values).unwrap();
            let inner = PiecewiseLinearFn::new(vec![(-1.0, -s), (0.0, c * s), (1.0, s)]).unwrap();
            let outer = PiecewiseLinearFn::bump(0.1, 0.5).unwrap();
            let composed = func_calc(&a, &outer.compose(&inner));
            let nested = func_calc(&func_calc(&a, &inner), &outer);
            prop_assert!((composed.matrix() - nested.matrix()).norm() < 1e-8);
        }

        #[test]
        fn calculus_preserves_commutation(seed in 0u64..1000, c in -1.0..1.0_f64) {
            let g = AlmostCommutingGenerator::new(2, 6, 0.1).with_perturbation(0.0).generate(seed).unwrap();
            let f = PiecewiseLinearFn::bump(c, 0.3).unwrap();
            let fa = func_calc(&g.commuting.ops()[0], &f);
            prop_assert!(commutator_norm(&fa, &g.commuting.ops()[1]).unwrap() < 1e-8);
        }

        #[test]
        fn norm_is_subadditive_and_submultiplicative(s1 in 0u64..10_000, s2 in 0u64..10_000, dim in 1usize..8) {
            let a = random_hermitian_with_norm(dim, 0.7, s1);
            let b = random_hermitian_with_norm(dim, 1.3, s2);
            let sum = op_norm(&a.add(&b).unwrap());
            prop_assert!(sum <= op_norm(&a) + op_norm(&b) + 1e-12);
            let prod = spectral_norm(&(a.matrix() * b.matrix()));
            prop_assert!(prod <= op_norm(&a) * op_norm(&b) + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn generator_meets_budget(seed in 0u64..u64::MAX, n in 1usize..=4, dim in 1usize..=64, which in 0usize..3) {
            let delta = [1e-1, 1e-2, 1e-3][which];
            let t = random_almost_commuting(n, dim, delta, seed).unwrap();
            prop_assert!(t.max_commutator_norm() < delta);
            prop_assert!(t.ops().iter().all(|o| op_norm(o) <= 1.0 + 1e-9));
        }
    }
}
