//! Composition operators `C_φ` on `L²(ℝⁿ, ρ(‖x‖²) dx)` for invertible linear
//! `φ`, with `ρ` a power series with nonnegative coefficients. Closed forms
//! only: no discretization of `ℝⁿ` is built.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result, WcoError};
use crate::properties::{Property, PropertyReport, Witness};

/// Default half-width of the sampling box `[−r, r]ⁿ`.
pub const DEFAULT_BOX: f64 = 10.0;

/// Relative slack allowed in the sampled density inequality.
pub const INEQUALITY_SLACK: f64 = 1e-12;

/// `ρ(z) = Σ a_k z^k`. With `is_polynomial = false` the coefficients are a
/// truncation of a genuinely entire series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntireSeriesDensity {
    coefficients: Vec<f64>,
    is_polynomial: bool,
}

impl EntireSeriesDensity {
    pub fn new(coefficients: Vec<f64>, is_polynomial: bool) -> Result<Self> {
        if coefficients.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return input_err("coefficients must be finite and nonnegative");
        }
        if !coefficients.iter().skip(1).any(|a| *a > 0.0) {
            return input_err("some coefficient of positive degree must be positive");
        }
        Ok(Self { coefficients, is_polynomial })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(coefficients, true)
    }

    /// `ρ(z) = A z + B`.
    pub fn affine(a: f64, b: f64) -> Result<Self> {
        Self::polynomial(vec![b, a])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn is_polynomial(&self) -> bool {
        self.is_polynomial
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }
}

/// Invertible `φ` on `ℝⁿ` and the Gram matrix of the inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    phi: DMatrix<f64>,
    phi_inv: DMatrix<f64>,
    gram: DMatrix<f64>,
    gram_factor: DMatrix<f64>,
    det: f64,
}

impl LinearSystem {
    pub fn new(phi: DMatrix<f64>, gram: DMatrix<f64>) -> Result<Self> {
        let n = phi.nrows();
        if n == 0 || !phi.is_square() || gram.shape() != (n, n) {
            return input_err("phi and the Gram matrix must be square of the same size");
        }
        if (&gram - gram.transpose()).amax() > 1e-12 * gram.amax().max(1.0) {
            return input_err("the Gram matrix must be symmetric");
        }
        let chol = Cholesky::new(gram.clone()).ok_or_else(|| WcoError::Input("the Gram matrix is not positive definite".into()))?;
        let det = phi.determinant();
        let phi_inv = phi.clone().try_inverse().filter(|_| det != 0.0 && det.is_finite());
        let Some(phi_inv) = phi_inv else {
            return input_err("phi is not invertible");
        };
        Ok(Self { phi, phi_inv, gram, gram_factor: chol.l(), det })
    }

    /// Euclidean inner product.
    pub fn euclidean(phi: DMatrix<f64>) -> Result<Self> {
        let n = phi.nrows();
        Self::new(phi, DMatrix::identity(n, n))
    }

    /// `φ(x) = α x` on `ℝ`.
    pub fn scalar(alpha: f64) -> Result<Self> {
        Self::euclidean(DMatrix::from_element(1, 1, alpha))
    }

    pub fn dim(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn norm_sq(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.gram * x))
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi * x
    }

    pub fn apply_inverse(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi_inv * x
    }

    /// Operator norm of `m` for the norm induced by the Gram matrix `G = LLᵀ`:
    /// the largest singular value of `Lᵀ m L⁻ᵀ`.
    pub fn operator_norm(&self, m: &DMatrix<f64>) -> f64 {
        let lt = self.gram_factor.transpose();
        let lt_inv = lt.clone().try_inverse().expect("Cholesky factor is invertible");
        (&lt * m * lt_inv).singular_values().max()
    }

    pub fn inverse_norm(&self) -> f64 {
        self.operator_norm(&self.phi_inv)
    }

    /// The system of `φ²`.
    pub fn squared(&self) -> Result<Self> {
        Self::new(&self.phi * &self.phi, self.gram.clone())
    }
}

/// `h_φ(x) = ρ(‖φ⁻¹x‖²) / (|det φ| ρ(‖x‖²))`.
pub fn h_phi(sys: &LinearSystem, rho: &EntireSeriesDensity, x: &[f64]) -> Result<f64> {
    if x.len() != sys.dim() {
        return input_err(format!("point has {} coordinates, expected {}", x.len(), sys.dim()));
    }
    let x = DVector::from_column_slice(x);
    let denominator = rho.eval(sys.norm_sq(&x));
    if denominator <= 0.0 {
        return Err(WcoError::Singular(format!("ρ(‖x‖²) = 0 at x = {:?}", x.as_slice())));
    }
    Ok(rho.eval(sys.norm_sq(&sys.apply_inverse(&x))) / (sys.det.abs() * denominator))
}

/// Polynomial `ρ`: always bounded. Otherwise bounded iff `‖φ⁻¹‖ ≤ 1`.
pub fn is_bounded(sys: &LinearSystem, rho: &EntireSeriesDensity) -> PropertyReport {
    let inv = sys.inverse_norm();
    if rho.is_polynomial() {
        return PropertyReport::holds(Property::Bounded, 0.0).with_note(format!("polynomial density; ‖φ⁻¹‖ = {inv}"));
    }
    let tol = 1e-12;
    let witness = (inv > 1.0 + tol).then(|| Witness::Norm { metric: "‖φ⁻¹‖".into(), value: inv, threshold: 1.0 });
    PropertyReport::from_check(Property::Bounded, tol, witness).with_note(format!("non-polynomial density; ‖φ⁻¹‖ = {inv}"))
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Halton points with a seeded Cranley–Patterson rotation, mapped into `[−r, r]ⁿ`.
pub fn sample_points(dim: usize, samples: usize, seed: u64, half_width: f64) -> Result<Vec<Vec<f64>>> {
    if dim == 0 || dim > PRIMES.len() {
        return input_err(format!("dimension must be in 1..={}", PRIMES.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    Ok((1..=samples as u64)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let u = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                    (2.0 * u - 1.0) * half_width
                })
                .collect()
        })
        .collect())
}

/// Both sides of `ρ²(‖x‖²) ≤ ρ(‖φ⁻¹x‖²) ρ(‖φx‖²)`.
pub fn density_inequality_sides(sys: &LinearSystem, rho: &EntireSeriesDensity, x: &[f64]) -> (f64, f64) {
    let x = DVector::from_column_slice(x);
    let r = rho.eval(sys.norm_sq(&x));
    let lhs = r * r;
    let rhs = rho.eval(sys.norm_sq(&sys.apply_inverse(&x))) * rho.eval(sys.norm_sq(&sys.apply(&x)));
    (lhs, rhs)
}

/// Samples the density inequality; fails on any excess beyond the relative
/// slack, with the worst point as witness.
pub fn check_sad06(sys: &LinearSystem, rho: &EntireSeriesDensity, samples: usize, seed: u64, half_width: f64) -> Result<PropertyReport> {
    let points = sample_points(sys.dim(), samples, seed, half_width)?;
    let mut worst: Option<(f64, Vec<f64>, f64, f64)> = None;
    for p in points {
        let (lhs, rhs) = density_inequality_sides(sys, rho, &p);
        let excess = (lhs - rhs) / 1f64.max(lhs.abs()).max(rhs.abs());
        if worst.as_ref().is_none_or(|w| excess > w.0) {
            worst = Some((excess, p, lhs, rhs));
        }
    }
    let witness = worst
        .filter(|w| w.0 > INEQUALITY_SLACK)
        .map(|(_, coordinates, lhs, rhs)| Witness::Point { coordinates, lhs, rhs });
    Ok(PropertyReport::from_check(Property::DensityInequality, INEQUALITY_SLACK, witness))
}

/// For `ρ(z) = Az + B` and `φ(x) = αx` on `ℝ`, with `t = x²`: the left side
/// `ρ(t/α²)ρ(α²t) − ρ²(t)` and the expanded right side `AB(α² + 1/α² − 2)t`,
/// together with the magnitude of the terms that cancel.
pub fn affine_reduction(a: f64, b: f64, alpha: f64, t: f64) -> (f64, f64, f64) {
    let rho = |z: f64| a * z + b;
    let a2 = alpha * alpha;
    let product = rho(t / a2) * rho(a2 * t);
    let square = rho(t) * rho(t);
    (product - square, a * b * (a2 + 1.0 / a2 - 2.0) * t, product.abs().max(square.abs()))
}

/// Weak centeredness of `C_φ` for invertible `φ` is structural: `E_φ` is the
/// identity. Reported together with `‖φ⁻¹‖` and the boundedness verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeaklyCenteredFlag {
    pub report: PropertyReport,
    pub inverse_norm: f64,
    pub bounded: bool,
}

pub fn weakly_centered_flag(sys: &LinearSystem, rho: &EntireSeriesDensity) -> WeaklyCenteredFlag {
    WeaklyCenteredFlag {
        report: PropertyReport::holds(Property::WeaklyCentered, 0.0)
            .with_note("φ is invertible, so the conditional expectation is the identity"),
        inverse_norm: sys.inverse_norm(),
        bounded: is_bounded(sys, rho).verdict,
    }
}
