//! Dense matrix realization of `C_{φ,w}` in the orthonormal basis
//! `e_x = χ_{x}/√μ({x})`, used as an independent check on every closed form.
//!
//! A function `f` has coordinates `f(x)√μ({x})` in this basis; multiplication
//! operators are diagonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::measure_space::{Atom, DiscreteMeasureSpace, ScalarField};
use crate::properties::{is_hyponormal, is_weakly_centered, Property, PropertyReport, Witness};
use crate::transforms::projection_p;
use crate::wco_model::{radon_nikodym, WcoSystem};

pub type CMatrix = DMatrix<Complex64>;

/// Relative singular-value cutoff below which a singular value counts as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// Relative gap below which neighbouring eigenvalues share one projector.
pub const EIGEN_CLUSTER: f64 = 1e-8;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    basis: Vec<Atom>,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, basis: Vec<Atom>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() != basis.len() || basis.is_empty() {
            return input_err(format!(
                "matrix of shape {}x{} does not fit a basis of {} atoms",
                entries.nrows(),
                entries.ncols(),
                basis.len()
            ));
        }
        Ok(Self { entries, basis })
    }

    /// A matrix over an anonymous counting basis.
    pub fn from_entries(entries: CMatrix) -> Result<Self> {
        let basis = (0..entries.nrows()).map(|i| Atom { id: i.to_string(), mass: 1.0 }).collect();
        Self::new(entries, basis)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn basis(&self) -> &[Atom] {
        &self.basis
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), basis: self.basis.clone() }
    }

    /// Row-major `[re, im]` pairs.
    pub fn rows(&self) -> Vec<Vec<Complex64>> {
        self.entries.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

impl Serialize for OperatorMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Dump<'a> {
            dim: usize,
            basis: &'a [Atom],
            rows: Vec<Vec<Complex64>>,
        }
        Dump { dim: self.dim(), basis: &self.basis, rows: self.rows() }.serialize(ser)
    }
}

/// `entry[y][x] = w(y)·[φ(y) = x]·√(μ({y})/μ({x}))`.
pub fn to_matrix(sys: &WcoSystem) -> OperatorMatrix {
    let n = sys.len();
    let space = sys.space();
    let mut m = CMatrix::zeros(n, n);
    for y in 0..n {
        let x = sys.phi()[y];
        m[(y, x)] = sys.w()[y] * (space.mass(y) / space.mass(x)).sqrt();
    }
    OperatorMatrix { entries: m, basis: space.atoms().to_vec() }
}

pub fn coordinates(space: &DiscreteMeasureSpace, f: &[Complex64]) -> DVector<Complex64> {
    DVector::from_iterator(f.len(), f.iter().enumerate().map(|(x, v)| v * space.mass(x).sqrt()))
}

pub fn function_from_coordinates(space: &DiscreteMeasureSpace, v: &DVector<Complex64>) -> ScalarField {
    v.iter().enumerate().map(|(x, c)| c / space.mass(x).sqrt()).collect()
}

/// Matrix of a linear map on functions, by evaluating it on the basis.
pub fn from_linear_map<F>(space: &DiscreteMeasureSpace, map: F) -> Result<OperatorMatrix>
where
    F: Fn(&[Complex64]) -> Result<ScalarField>,
{
    let n = space.len();
    let mut m = CMatrix::zeros(n, n);
    for x in 0..n {
        let mut e = vec![ZERO; n];
        e[x] = Complex64::new(1.0 / space.mass(x).sqrt(), 0.0);
        let image = map(&e)?;
        space.check_len("image", image.len())?;
        m.set_column(x, &coordinates(space, &image));
    }
    OperatorMatrix::new(m, space.atoms().to_vec())
}

/// Multiplication by a real function.
pub fn multiplication_matrix(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|v| Complex64::new(*v, 0.0))))
}

/// Singular value decomposition `T = W Σ V*` with descending `Σ`.
// nalgebra's SVD can return factors that do not reconstruct the input
// (seen on 6×6 weighted permutations), so faer does this one job.
pub fn svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, c) = m.shape();
    let mat = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = mat.svd().expect("SVD of a finite matrix converges");
    let (u, v) = (svd.U(), svd.V());
    let values = svd.S().column_vector().iter().map(|z| z.re).collect();
    (CMatrix::from_fn(r, r, |i, j| u[(i, j)]), values, CMatrix::from_fn(c, c, |i, j| v[(i, j)]))
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd(m).1.first().copied().unwrap_or(0.0)
}

fn scale(norm: f64, power: i32) -> f64 {
    1f64.max(norm.powi(power))
}

/// `‖TT*T*T − T*TTT*‖ / max(1, ‖T‖⁴)`.
pub fn weak_centered_commutator(m: &OperatorMatrix) -> f64 {
    let t = &m.entries;
    let ts = t.adjoint();
    let a = t * &ts;
    let b = &ts * t;
    spectral_norm(&(&a * &b - &b * &a)) / scale(spectral_norm(t), 4)
}

/// `‖T*TT − TT*T‖ / max(1, ‖T‖³)`.
pub fn quasinormal_commutator(m: &OperatorMatrix) -> f64 {
    let t = &m.entries;
    let ts = t.adjoint();
    let b = &ts * t;
    spectral_norm(&(&b * t - t * &b)) / scale(spectral_norm(t), 3)
}

/// `‖ |T||T*| − |T*||T| ‖ / max(1, ‖T‖²)`.
pub fn moduli_commutator(m: &OperatorMatrix) -> f64 {
    let p = svd_polar(m);
    let abs = &p.modulus;
    let abs_adj = &p.modulus_adjoint;
    spectral_norm(&(abs * abs_adj - abs_adj * abs)) / scale(p.norm(), 2)
}

/// Smallest eigenvalue of `T*T − TT*`, divided by `max(1, ‖T‖²)`.
pub fn hyponormality_margin(m: &OperatorMatrix) -> f64 {
    let t = &m.entries;
    let ts = t.adjoint();
    min_eigenvalue(&(&ts * t - t * &ts)) / scale(spectral_norm(t), 2)
}

/// Smallest eigenvalue of `TT* − T*T`, divided by `max(1, ‖T‖²)`.
pub fn cohyponormality_margin(m: &OperatorMatrix) -> f64 {
    let t = &m.entries;
    let ts = t.adjoint();
    min_eigenvalue(&(t * &ts - &ts * t)) / scale(spectral_norm(t), 2)
}

/// Largest scaled commutator among `{T*ⁿTⁿ, TᵐT*ᵐ : 1 ≤ n, m ≤ depth}`.
pub fn centered_commutator(m: &OperatorMatrix, depth: usize) -> f64 {
    let t = &m.entries;
    let ts = t.adjoint();
    let mut family = Vec::with_capacity(2 * depth);
    let mut pow = t.clone();
    let mut pow_adj = ts.clone();
    for _ in 0..depth {
        family.push(&pow_adj * &pow);
        family.push(&pow * &pow_adj);
        pow = &pow * t;
        pow_adj = &pow_adj * &ts;
    }
    let norms: Vec<f64> = family.iter().map(spectral_norm).collect();
    let mut worst: f64 = 0.0;
    for i in 0..family.len() {
        for j in i + 1..family.len() {
            let c = &family[i] * &family[j] - &family[j] * &family[i];
            worst = worst.max(spectral_norm(&c) / 1f64.max(norms[i] * norms[j]));
        }
    }
    worst
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(m)).eigenvalues.min()
}

/// `T = U|T|` from the singular value decomposition `T = WΣV*`:
/// `|T| = VΣV*`, `|T*| = WΣW*`, `U = W_r V_r*` over the retained singular values.
#[derive(Debug, Clone)]
pub struct SvdPolar {
    pub phase: CMatrix,
    pub modulus: CMatrix,
    pub modulus_adjoint: CMatrix,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub cutoff: f64,
    left: CMatrix,
    right: CMatrix,
}

impl SvdPolar {
    pub fn norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn rank(&self) -> usize {
        self.singular_values.iter().filter(|s| **s > self.cutoff).count()
    }

    fn diagonal(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        multiplication_matrix(&self.singular_values.iter().map(|s| f(*s)).collect::<Vec<_>>())
    }

    /// `|T|^exponent`, with `0^e = 0` for `e > 0` and `|T|^0 = I`.
    pub fn modulus_power(&self, exponent: f64) -> CMatrix {
        if exponent == 0.0 {
            let n = self.right.nrows();
            return CMatrix::identity(n, n);
        }
        &self.right * self.diagonal(|s| if s > self.cutoff { s.powf(exponent) } else { 0.0 }) * self.right.adjoint()
    }

    /// Orthogonal projector onto the closure of the range.
    pub fn range_projector(&self) -> CMatrix {
        &self.left * self.diagonal(|s| if s > self.cutoff { 1.0 } else { 0.0 }) * self.left.adjoint()
    }
}

pub fn svd_polar(m: &OperatorMatrix) -> SvdPolar {
    svd_polar_with_cutoff(m, SINGULAR_CUTOFF)
}

pub fn svd_polar_with_cutoff(m: &OperatorMatrix, relative_cutoff: f64) -> SvdPolar {
    let (left, singular_values, right) = svd(&m.entries);
    let cutoff = relative_cutoff * singular_values.first().copied().unwrap_or(0.0);
    let mut p = SvdPolar {
        phase: CMatrix::zeros(0, 0),
        modulus: CMatrix::zeros(0, 0),
        modulus_adjoint: CMatrix::zeros(0, 0),
        singular_values,
        cutoff,
        left,
        right,
    };
    let sig = p.diagonal(|s| s);
    p.phase = &p.left * p.diagonal(|s| if s > cutoff { 1.0 } else { 0.0 }) * p.right.adjoint();
    p.modulus = &p.right * &sig * p.right.adjoint();
    p.modulus_adjoint = &p.left * &sig * p.left.adjoint();
    p
}

/// `Δ_α(T) = |T|^α U |T|^{1−α}`.
pub fn aluthge_matrix(m: &OperatorMatrix, alpha: f64) -> Result<OperatorMatrix> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return input_err(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    let p = svd_polar(m);
    let entries = p.modulus_power(alpha) * &p.phase * p.modulus_power(1.0 - alpha);
    OperatorMatrix::new(entries, m.basis.clone())
}

/// A finite union of real intervals; `None` endpoints are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSet {
    pub intervals: Vec<Interval>,
}

impl RealSet {
    pub fn all() -> Self {
        Self { intervals: vec![Interval { lo: None, hi: None, lo_closed: false, hi_closed: false }] }
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn point(t: f64) -> Self {
        Self { intervals: vec![Interval { lo: Some(t), hi: Some(t), lo_closed: true, hi_closed: true }] }
    }

    /// `(−∞, t]`.
    pub fn at_most(t: f64) -> Self {
        Self { intervals: vec![Interval { lo: None, hi: Some(t), lo_closed: false, hi_closed: true }] }
    }

    /// `ℝ ∖ {t}`.
    pub fn except(t: f64) -> Self {
        Self {
            intervals: vec![
                Interval { lo: None, hi: Some(t), lo_closed: false, hi_closed: false },
                Interval { lo: Some(t), hi: None, lo_closed: false, hi_closed: false },
            ],
        }
    }

    /// Membership with a slack of `1e-9·max(1, |t|)`: closed endpoints
    /// absorb nearby values and open endpoints exclude them.
    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-9 * 1f64.max(t.abs());
        self.intervals.iter().any(|iv| {
            let above = match iv.lo {
                None => true,
                Some(lo) if iv.lo_closed => t >= lo - slack,
                Some(lo) => t > lo + slack,
            };
            let below = match iv.hi {
                None => true,
                Some(hi) if iv.hi_closed => t <= hi + slack,
                Some(hi) => t < hi - slack,
            };
            above && below
        })
    }
}

/// Eigenvalues of a Hermitian matrix grouped into clusters, each with its projector.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub projectors: Vec<CMatrix>,
}

impl SpectralDecomposition {
    pub fn of_hermitian(m: &CMatrix) -> Self {
        let n = m.nrows();
        let eig = SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (lo, hi) = match (order.first(), order.last()) {
            (Some(&a), Some(&b)) => (eig.eigenvalues[a], eig.eigenvalues[b]),
            _ => return Self { eigenvalues: Vec::new(), projectors: Vec::new() },
        };
        let gap = EIGEN_CLUSTER * 1f64.max(hi - lo);
        let mut eigenvalues = Vec::new();
        let mut projectors: Vec<CMatrix> = Vec::new();
        let mut members: Vec<usize> = Vec::new();
        let mut flush = |members: &mut Vec<usize>| {
            let mean = members.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / members.len() as f64;
            let mut p = CMatrix::zeros(n, n);
            for &i in members.iter() {
                let v = eig.eigenvectors.column(i);
                p += v * v.adjoint();
            }
            eigenvalues.push(mean);
            projectors.push(p);
            members.clear();
        };
        for &i in &order {
            if let Some(&last) = members.last() {
                if eig.eigenvalues[i] - eig.eigenvalues[last] > gap {
                    flush(&mut members);
                }
            }
            members.push(i);
        }
        flush(&mut members);
        Self { eigenvalues, projectors }
    }

    /// `E(σ)`: the sum of projectors whose eigenvalue lies in `σ`.
    pub fn measure(&self, sigma: &RealSet) -> CMatrix {
        let n = self.projectors.first().map_or(0, |p| p.nrows());
        let mut acc = CMatrix::zeros(n, n);
        for (lambda, p) in self.eigenvalues.iter().zip(&self.projectors) {
            if sigma.contains(*lambda) {
                acc += p;
            }
        }
        acc
    }

    pub fn reconstruct(&self) -> CMatrix {
        let n = self.projectors.first().map_or(0, |p| p.nrows());
        let mut acc = CMatrix::zeros(n, n);
        for (lambda, p) in self.eigenvalues.iter().zip(&self.projectors) {
            acc += p.scale(*lambda);
        }
        acc
    }
}

/// Matrix of `P f = w·E(f_w)`, built by evaluating the closed form on the basis.
pub fn projection_matrix(sys: &WcoSystem) -> OperatorMatrix {
    from_linear_map(sys.space(), |f| projection_p(sys, f)).expect("projection preserves length")
}

fn indicator(values: &[f64], sigma: &RealSet) -> Vec<f64> {
    values.iter().map(|v| if sigma.contains(*v) { 1.0 } else { 0.0 }).collect()
}

/// `E_B(σ) = M_{χ_{h⁻¹(σ)}}` for `B = T*T`.
pub fn spectral_measure_b(sys: &WcoSystem, sigma: &RealSet) -> OperatorMatrix {
    let h = radon_nikodym(sys).h;
    OperatorMatrix {
        entries: multiplication_matrix(&indicator(&h, sigma)),
        basis: sys.space().atoms().to_vec(),
    }
}

/// `E_A(σ) = M_{χ_{(h∘φ)⁻¹(σ)}} P + χ_σ(0)(I − P)` for `A = TT*`.
pub fn spectral_measure_a(sys: &WcoSystem, sigma: &RealSet) -> OperatorMatrix {
    let h = radon_nikodym(sys).h;
    let h_phi: Vec<f64> = sys.phi().iter().map(|&z| h[z]).collect();
    let p = projection_matrix(sys).entries;
    let n = sys.len();
    let mut entries = multiplication_matrix(&indicator(&h_phi, sigma)) * &p;
    if sigma.contains(0.0) {
        entries += CMatrix::identity(n, n) - &p;
    }
    OperatorMatrix { entries, basis: sys.space().atoms().to_vec() }
}

/// `ker T* = {0}`, judged by the smallest singular value.
pub fn adjoint_kernel_trivial(m: &OperatorMatrix) -> bool {
    svd_polar(m).rank() == m.dim()
}

fn threshold_grid(a: &SpectralDecomposition, b: &SpectralDecomposition) -> Vec<f64> {
    let mut grid: Vec<f64> = a.eigenvalues.iter().chain(&b.eigenvalues).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// `F_B(t) ≤ F_A(t)` at every eigenvalue of `A` or `B`, where `F_Y(t) = E_Y((−∞, t])`
/// comes from the eigendecomposition of `Y`.
pub fn olson_order_check(sys: &WcoSystem, tol: f64) -> PropertyReport {
    if !is_weakly_centered(sys, tol).verdict {
        return PropertyReport::not_applicable(Property::OlsonOrder, tol, "system is not weakly centered");
    }
    if !is_hyponormal(sys, tol).verdict {
        return PropertyReport::not_applicable(Property::OlsonOrder, tol, "system is not hyponormal");
    }
    let t = to_matrix(sys).entries;
    let a = SpectralDecomposition::of_hermitian(&(&t * t.adjoint()));
    let b = SpectralDecomposition::of_hermitian(&(t.adjoint() * &t));
    let mut worst: Option<(f64, f64)> = None;
    for level in threshold_grid(&a, &b) {
        let sigma = RealSet::at_most(level);
        let gap = min_eigenvalue(&(a.measure(&sigma) - b.measure(&sigma)));
        if worst.is_none_or(|(g, _)| gap < g) {
            worst = Some((gap, level));
        }
    }
    match worst {
        Some((gap, level)) if gap < -tol => PropertyReport::fails(
            Property::OlsonOrder,
            tol,
            Witness::Eigenvalue { min_eigenvalue: gap, floor: -tol, threshold: Some(level) },
        ),
        _ => PropertyReport::holds(Property::OlsonOrder, tol),
    }
}

/// `E_A((−∞,t])T = T E_B((−∞,t])` with the closed-form spectral measures, at
/// every level of `h` and `h∘φ`. Requires `ker T* = {0}`.
pub fn intertwining_check(sys: &WcoSystem, tol: f64) -> PropertyReport {
    let m = to_matrix(sys);
    if !adjoint_kernel_trivial(&m) {
        return PropertyReport::not_applicable(Property::SpectralIntertwining, tol, "adjoint has a nontrivial kernel");
    }
    let t = &m.entries;
    let h = radon_nikodym(sys).h;
    let mut grid: Vec<f64> = h.iter().copied().chain(sys.phi().iter().map(|&z| h[z])).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let norm = scale(spectral_norm(t), 1);
    for level in grid {
        let sigma = RealSet::at_most(level);
        let lhs = spectral_measure_a(sys, &sigma).entries * t;
        let rhs = t * spectral_measure_b(sys, &sigma).entries;
        let defect = spectral_norm(&(lhs - rhs)) / norm;
        if defect > tol {
            return PropertyReport::fails(
                Property::SpectralIntertwining,
                tol,
                Witness::Norm { metric: format!("intertwining defect at t = {level}"), value: defect, threshold: tol },
            );
        }
    }
    PropertyReport::holds(Property::SpectralIntertwining, tol)
}

pub(crate) fn identity_like(n: usize) -> CMatrix {
    CMatrix::from_diagonal_element(n, n, ONE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::approx_eq;
    use crate::transforms::{aluthge_system, phase_system, polar};
    use crate::wco_model::operator_norm;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn sample() -> WcoSystem {
        let space = DiscreteMeasureSpace::from_masses(&[1.0, 0.5, 2.0, 3.0, 0.25, 1.5]).unwrap();
        let w = ScalarField(vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(0.0, 2.0),
            c(0.0),
            Complex64::new(-0.7, 0.1),
            c(1.3),
            c(0.4),
        ]);
        WcoSystem::new(space, vec![1, 1, 0, 0, 3, 4], w).unwrap()
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_system_gives_identity_matrix() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![0, 1, 2], ScalarField::from_real(&[1.0; 3])).unwrap();
        assert_eq!(to_matrix(&sys).entries, identity_like(3));
    }

    #[test]
    fn hand_evaluated_entries() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2).unwrap(), vec![0, 0], ScalarField::from_real(&[1.0, 1.0])).unwrap();
        let m = to_matrix(&sys).entries;
        assert_eq!(m.column(0).iter().copied().collect::<Vec<_>>(), vec![c(1.0), c(1.0)]);
        assert_eq!(m.column(1).iter().copied().collect::<Vec<_>>(), vec![c(0.0), c(0.0)]);

        let sys = sys.with_space(DiscreteMeasureSpace::from_masses(&[1.0, 4.0]).unwrap()).unwrap();
        assert_eq!(to_matrix(&sys).entries[(1, 0)], c(2.0));
    }

    #[test]
    fn matrix_acts_as_weighted_composition() {
        let sys = sample();
        let m = to_matrix(&sys).entries;
        for k in 0..20 {
            let f: Vec<Complex64> = (0..sys.len()).map(|x| Complex64::new(((k * 7 + x * 3) % 11) as f64 - 5.0, ((k + x) % 5) as f64)).collect();
            let direct: Vec<Complex64> = (0..sys.len()).map(|x| sys.w()[x] * f[sys.phi()[x]]).collect();
            let via = function_from_coordinates(sys.space(), &(&m * coordinates(sys.space(), &f)));
            for x in 0..sys.len() {
                assert!((via[x] - direct[x]).norm() <= 1e-12 * 1f64.max(direct[x].norm()));
            }
        }
    }

    #[test]
    fn norm_matches_largest_singular_value() {
        let sys = sample();
        assert!(approx_eq(spectral_norm(to_matrix(&sys).entries()), operator_norm(&sys), 1e-12));
    }

    #[test]
    fn normal_matrix_has_vanishing_commutators() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![1, 2, 0], ScalarField::from_real(&[2.0, 2.0, 2.0])).unwrap();
        let m = to_matrix(&sys);
        assert!(weak_centered_commutator(&m) < 1e-12);
        assert!(moduli_commutator(&m) < 1e-12);
        assert!(quasinormal_commutator(&m) < 1e-12);
    }

    #[test]
    fn nilpotent_two_by_two_has_commuting_moduli() {
        // |T| and |T*| project onto orthogonal lines, so they commute
        let mut e = CMatrix::zeros(2, 2);
        e[(1, 0)] = c(1.0);
        let m = OperatorMatrix::from_entries(e).unwrap();
        assert!(moduli_commutator(&m) < 1e-14);
        assert!(weak_centered_commutator(&m) < 1e-14);
        assert!(hyponormality_margin(&m) < -0.5);
    }

    #[test]
    fn unequal_sibling_densities_break_moduli_commutation() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(4).unwrap(), vec![0, 0, 0, 1], ScalarField::from_real(&[0.0, 1.0, 1.0, 1.0])).unwrap();
        let m = to_matrix(&sys);
        assert!(moduli_commutator(&m) > 0.1);
        assert!(weak_centered_commutator(&m) > 0.01);
    }

    #[test]
    fn polar_of_diagonal_and_unitary() {
        let mut d = CMatrix::zeros(2, 2);
        d[(0, 0)] = c(2.0);
        let p = svd_polar(&OperatorMatrix::from_entries(d.clone()).unwrap());
        let mut u = CMatrix::zeros(2, 2);
        u[(0, 0)] = c(1.0);
        assert!(max_abs(&(&p.phase - &u)) < 1e-14);
        assert!(max_abs(&(&p.modulus - &d)) < 1e-14);

        let mut r = CMatrix::zeros(2, 2);
        r[(0, 1)] = Complex64::new(0.0, 1.0);
        r[(1, 0)] = c(1.0);
        let p = svd_polar(&OperatorMatrix::from_entries(r.clone()).unwrap());
        assert!(max_abs(&(&p.phase - &r)) < 1e-14);
        assert!(max_abs(&(&p.modulus - identity_like(2))) < 1e-14);
    }

    #[test]
    fn polar_factors_match_closed_form() {
        let sys = sample();
        let m = to_matrix(&sys);
        let p = svd_polar(&m);
        assert!(max_abs(&(&p.phase * &p.modulus - m.entries())) < 1e-12);
        let closed = polar(&sys);
        let phase = to_matrix(&phase_system(&sys)).entries;
        assert!(max_abs(&(&p.phase - phase)) < 1e-8);
        assert!(max_abs(&(&p.modulus - multiplication_matrix(&closed.modulus_density))) < 1e-8);
    }

    #[test]
    fn aluthge_matrix_matches_weight_formula() {
        let sys = sample();
        let m = to_matrix(&sys);
        for alpha in [0.25, 0.5, 1.0] {
            let lhs = aluthge_matrix(&m, alpha).unwrap().entries;
            let rhs = to_matrix(&aluthge_system(&sys, alpha).unwrap()).entries;
            assert!(spectral_norm(&(lhs - rhs)) < 1e-8, "alpha {alpha}");
        }
        let p = svd_polar(&m);
        let endpoint = aluthge_matrix(&m, 1.0).unwrap().entries;
        assert!(spectral_norm(&(endpoint - &p.modulus * &p.phase)) < 1e-12);
        assert!(aluthge_matrix(&m, 0.0).is_err());
    }

    #[test]
    fn spectral_decomposition_reconstructs() {
        let t = to_matrix(&sample()).entries;
        let a = &t * t.adjoint();
        let d = SpectralDecomposition::of_hermitian(&a);
        assert!(max_abs(&(d.reconstruct() - &a)) < 1e-12);
        let total: CMatrix = d.projectors.iter().fold(CMatrix::zeros(6, 6), |acc, p| acc + p);
        assert!(max_abs(&(total - identity_like(6))) < 1e-12);
        for (i, p) in d.projectors.iter().enumerate() {
            for (j, q) in d.projectors.iter().enumerate() {
                let expected = if i == j { p.clone() } else { CMatrix::zeros(6, 6) };
                assert!(max_abs(&(p * q - expected)) < 1e-12);
            }
        }
    }

    #[test]
    fn real_set_membership() {
        assert!(RealSet::all().contains(-3.0));
        assert!(RealSet::point(0.0).contains(1e-12));
        assert!(!RealSet::except(0.0).contains(1e-12));
        assert!(RealSet::except(0.0).contains(1e-3));
        assert!(RealSet::at_most(2.0).contains(2.0));
        assert!(!RealSet::at_most(2.0).contains(2.1));
        assert!(!RealSet::empty().contains(0.0));
    }

    #[test]
    fn spectral_measures_on_kernel_example() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2).unwrap(), vec![0, 0], ScalarField::from_real(&[1.0, 0.0])).unwrap();
        assert_eq!(spectral_measure_b(&sys, &RealSet::all()).entries, identity_like(2));
        let zero = spectral_measure_b(&sys, &RealSet::point(0.0)).entries;
        assert_eq!(zero, multiplication_matrix(&[0.0, 1.0]));
        assert!(max_abs(&(spectral_measure_a(&sys, &RealSet::all()).entries - identity_like(2))) < 1e-14);
    }

    #[test]
    fn spectral_measures_match_eigenprojectors() {
        let sys = sample();
        let t = to_matrix(&sys).entries;
        let a = SpectralDecomposition::of_hermitian(&(&t * t.adjoint()));
        let b = SpectralDecomposition::of_hermitian(&(t.adjoint() * &t));
        let mut sets = vec![RealSet::all(), RealSet::point(0.0), RealSet::except(0.0)];
        for lambda in a.eigenvalues.iter().chain(&b.eigenvalues) {
            sets.push(RealSet::at_most(*lambda));
            sets.push(RealSet::point(*lambda));
        }
        for s in &sets {
            assert!(max_abs(&(spectral_measure_a(&sys, s).entries - a.measure(s))) < 1e-9);
            assert!(max_abs(&(spectral_measure_b(&sys, s).entries - b.measure(s))) < 1e-9);
        }
    }

    #[test]
    fn adjoint_consistency_via_inner_products() {
        let sys = sample();
        let t = to_matrix(&sys).entries;
        let ts = t.adjoint();
        for k in 0..20 {
            let f = DVector::from_iterator(6, (0..6).map(|i| Complex64::new(((k + i) % 4) as f64 - 1.5, (i * k % 3) as f64)));
            let g = DVector::from_iterator(6, (0..6).map(|i| Complex64::new((i % 3) as f64, ((k * i) % 5) as f64 - 2.0)));
            let lhs = (&t * &f).dotc(&g);
            let rhs = f.dotc(&(&ts * &g));
            assert!((lhs - rhs).norm() <= 1e-10 * 1f64.max(lhs.norm()));
        }
    }

    #[test]
    fn tt_adjoint_is_multiplication_times_projection() {
        let sys = sample();
        let t = to_matrix(&sys).entries;
        let h = radon_nikodym(&sys).h;
        let h_phi: Vec<f64> = sys.phi().iter().map(|&z| h[z]).collect();
        let rhs = multiplication_matrix(&h_phi) * projection_matrix(&sys).entries;
        assert!(max_abs(&(&t * t.adjoint() - rhs)) < 1e-9);
        let p = projection_matrix(&sys).entries;
        assert!(max_abs(&(&p * &p - &p)) < 1e-10);
        assert!(max_abs(&(p.adjoint() - &p)) < 1e-10);
    }

    #[test]
    fn olson_order_on_kernel_example_and_normal() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2).unwrap(), vec![0, 0], ScalarField::from_real(&[1.0, 0.0])).unwrap();
        assert!(olson_order_check(&sys, 1e-9).verdict);
        let normal = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![2, 0, 1], ScalarField::from_real(&[1.0, -1.0, 1.0])).unwrap();
        assert!(olson_order_check(&normal, 1e-9).verdict);
        assert!(intertwining_check(&normal, 1e-9).verdict);
        let not_wc = sample();
        let report = olson_order_check(&not_wc, 1e-9);
        assert!(!report.verdict);
    }
}
