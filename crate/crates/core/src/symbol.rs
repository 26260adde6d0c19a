//! Banded Toeplitz models on a one-sided sequence space: symbol curves,
//! winding numbers, finite truncations and ramped truncation families.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{c64, commutator_norm, spectral_norm, CMatrix, HermitianMatrix};

/// Largest admissible coefficient mass `Σ|c_m|`.
pub const COEFF_MASS_BOUND: f64 = 2.0;

/// Points closer than this to the symbol curve are treated as lying on it.
pub const CURVE_TOL: f64 = 1e-6;

/// Hard cap on winding samples.
pub const WINDING_SAMPLE_CAP: usize = 1 << 20;

/// `T = Σ c_m S^m` with `S` the unilateral shift and `S^{−m} = (S*)^m`.
///
/// Matrix entries are `T[i, j] = c_{i−j}` and the symbol is `s(z) = Σ c_m z^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolOperator {
    coeffs: BTreeMap<i32, Complex64>,
}

impl SymbolOperator {
    pub fn new(coeffs: impl IntoIterator<Item = (i32, Complex64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (m, c) in coeffs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::invalid("symbol coefficients must be finite"));
            }
            *map.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        map.retain(|_, c| c.norm() > 0.0);
        if map.is_empty() {
            return Err(Error::invalid("symbol needs a nonzero coefficient"));
        }
        let mass: f64 = map.values().map(|c| c.norm()).sum();
        if mass > COEFF_MASS_BOUND + 1e-12 {
            return Err(Error::invalid(format!(
                "coefficient mass {mass} exceeds {COEFF_MASS_BOUND}"
            )));
        }
        Ok(Self { coeffs: map })
    }

    pub fn from_real(coeffs: &[(i32, f64)]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&(m, c)| (m, c64(c, 0.0))))
    }

    /// The unilateral shift, `s(z) = z`.
    pub fn shift() -> Self {
        Self::from_real(&[(1, 1.0)]).expect("valid")
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, m: i32) -> Complex64 {
        self.coeffs.get(&m).copied().unwrap_or_default()
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs
            .keys()
            .map(|m| m.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn coefficient_mass(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Real coefficients with `c_{−m} = c_m`: the curve is a real interval.
    pub fn is_normal_model(&self) -> bool {
        self.coeffs
            .iter()
            .all(|(&m, c)| c.im == 0.0 && (self.coeff(-m) - c).norm() <= 1e-15)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().map(|(&m, c)| c * z.powi(m)).sum()
    }

    /// `s(e^{iφ})`.
    pub fn eval_angle(&self, phi: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&m, c)| c * Complex64::from_polar(1.0, m as f64 * phi))
            .sum()
    }
}

#[derive(Serialize, Deserialize)]
struct SymbolJson {
    coeffs: BTreeMap<String, [f64; 2]>,
}

impl Serialize for SymbolOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(m, c)| (m.to_string(), [c.re, c.im]))
            .collect();
        SymbolJson { coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymbolOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = SymbolJson::deserialize(d)?;
        let mut coeffs = Vec::with_capacity(j.coeffs.len());
        for (key, [re, im]) in j.coeffs {
            let m: i32 = key
                .trim()
                .parse()
                .map_err(|_| D::Error::custom(format!("bad band offset {key:?}")))?;
            coeffs.push((m, c64(re, im)));
        }
        SymbolOperator::new(coeffs).map_err(D::Error::custom)
    }
}

/// `s(e^{2πi j/samples})` for `j = 0, …, samples − 1`.
pub fn symbol_curve(op: &SymbolOperator, samples: usize) -> Result<Vec<Complex64>> {
    if samples == 0 || samples < 8 * op.bandwidth() {
        return Err(Error::invalid(format!(
            "need at least {} curve samples",
            (8 * op.bandwidth()).max(1)
        )));
    }
    Ok((0..samples)
        .map(|j| op.eval_angle(2.0 * PI * j as f64 / samples as f64))
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindingReport {
    pub lambda: [f64; 2],
    pub winding: i64,
    pub index: i64,
    pub min_curve_distance: f64,
    pub samples: usize,
}

/// Winding number of `s(e^{iφ}) − λ` around the origin and the index
/// `−winding` of `T − λ`.
///
/// The circle is resampled with twice as many points until every angular
/// step is below `π/2`.
pub fn fredholm_index(op: &SymbolOperator, lambda: Complex64) -> Result<WindingReport> {
    if !(lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::invalid("lambda must be finite"));
    }
    let mut samples = (16 * op.bandwidth()).max(64);
    loop {
        let values: Vec<Complex64> = (0..samples)
            .map(|j| op.eval_angle(2.0 * PI * j as f64 / samples as f64) - lambda)
            .collect();
        let min_curve_distance = values
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min);
        if min_curve_distance < CURVE_TOL {
            return Err(Error::PointInEssentialSpectrum {
                distance: min_curve_distance,
            });
        }
        let mut total = 0.0;
        let mut resolved = true;
        for j in 0..samples {
            let step = (values[(j + 1) % samples] / values[j]).arg();
            if step.abs() >= PI / 2.0 {
                resolved = false;
                break;
            }
            total += step;
        }
        if resolved {
            let winding = (total / (2.0 * PI)).round() as i64;
            return Ok(WindingReport {
                lambda: [lambda.re, lambda.im],
                winding,
                index: -winding,
                min_curve_distance,
                samples,
            });
        }
        if samples * 2 > WINDING_SAMPLE_CAP {
            return Err(Error::WindingNotResolved {
                cap: WINDING_SAMPLE_CAP,
            });
        }
        samples *= 2;
    }
}

/// The `N × N` compression of the band operator: `A[i, j] = c_{i−j}`.
pub fn band_matrix(op: &SymbolOperator, size: usize) -> CMatrix {
    CMatrix::from_fn(size, size, |i, j| op.coeff(i as i32 - j as i32))
}

/// Hermitian parts `T1 = (A + A*)/2` and `T2 = (A − A*)/(2i)`.
pub fn hermitian_parts(a: &CMatrix) -> (HermitianMatrix, HermitianMatrix) {
    let adj = a.adjoint();
    let half = c64(0.5, 0.0);
    let t1 = (a + &adj) * half;
    let t2 = (a - &adj) * c64(0.0, -0.5);
    (
        HermitianMatrix::new(t1).expect("hermitian by construction"),
        HermitianMatrix::new(t2).expect("hermitian by construction"),
    )
}

/// Hermitian parts of the `N × N` truncation.
pub fn truncate(op: &SymbolOperator, size: usize) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if size < 2 * op.bandwidth() + 1 {
        return Err(Error::invalid(format!(
            "truncation size {size} must be at least {}",
            2 * op.bandwidth() + 1
        )));
    }
    Ok(hermitian_parts(&band_matrix(op, size)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RampShape {
    #[default]
    Linear,
    Step,
}

/// Truncations `(1 − e) A (1 − e)` with `e` a diagonal ramp.
///
/// The window `g = 1 − e` vanishes on the first `n0` indices, rises
/// linearly over `w` indices and descends symmetrically at the far end of
/// the matrix so that the truncation boundary carries no corner defect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationFamily {
    #[serde(flatten)]
    pub base: SymbolOperator,
    #[serde(rename = "N")]
    pub size: usize,
    pub n0: usize,
    pub w: usize,
    #[serde(default)]
    pub ramp: RampShape,
}

impl TruncationFamily {
    pub fn new(
        base: SymbolOperator,
        size: usize,
        n0: usize,
        w: usize,
        ramp: RampShape,
    ) -> Result<Self> {
        let fam = Self {
            base,
            size,
            n0,
            w,
            ramp,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.w == 0 {
            return Err(Error::invalid("ramp width must be positive"));
        }
        let need = 2 * (self.n0 + self.w) + 2 * self.base.bandwidth();
        if need > self.size {
            return Err(Error::invalid(format!(
                "N = {} is too small: both ramps and the band need {need}",
                self.size
            )));
        }
        Ok(())
    }

    /// Diagonal of `1 − e`.
    pub fn window(&self) -> Vec<f64> {
        let n = self.size;
        let rise = |i: usize| match self.ramp {
            RampShape::Linear => {
                ((i as f64 - self.n0 as f64 + 1.0) / self.w as f64).clamp(0.0, 1.0)
            }
            RampShape::Step => {
                if i >= self.n0 {
                    1.0
                } else {
                    0.0
                }
            }
        };
        (0..n).map(|i| rise(i).min(rise(n - 1 - i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuasicentralDiagnostics {
    /// `‖T1 T2 − T2 T1‖`.
    pub commutator_norm: f64,
    /// `‖eA − Ae‖` against the untruncated band matrix.
    pub ramp_commutator: f64,
}

#[derive(Clone, Debug)]
pub struct QuasicentralPair {
    pub t1: HermitianMatrix,
    pub t2: HermitianMatrix,
    pub diagnostics: QuasicentralDiagnostics,
}

pub fn quasicentral_family(fam: &TruncationFamily) -> Result<QuasicentralPair> {
    fam.validate()?;
    let a = band_matrix(&fam.base, fam.size);
    let g = fam.window();
    let ramped = CMatrix::from_fn(fam.size, fam.size, |i, j| a[(i, j)] * (g[i] * g[j]));
    let (t1, t2) = hermitian_parts(&ramped);
    let commutator_norm = commutator_norm(&t1, &t2)?;
    let ramp_comm = CMatrix::from_fn(fam.size, fam.size, |i, j| {
        a[(i, j)] * ((1.0 - g[i]) - (1.0 - g[j]))
    });
    let ramp_commutator = spectral_norm(&ramp_comm);
    Ok(QuasicentralPair {
        t1,
        t2,
        diagnostics: QuasicentralDiagnostics {
            commutator_norm,
            ramp_commutator,
        },
    })
}
