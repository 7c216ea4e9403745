//! Closed-form decision procedures for operator classes of `C_{φ,w}`, each
//! returning a verdict with a witness. Cohyponormality and centeredness
//! have no closed form here and go through the matrix oracle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::matrix_oracle::{centered_commutator, cohyponormality_margin, to_matrix};
use crate::measure_space::approx_eq;
use crate::wco_model::{conditional_expectation_real, radon_nikodym, WcoSystem};

/// Largest power used by [`is_centered`].
pub const MAX_CENTERED_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    WeaklyCentered,
    WeaklyCenteredAlpha,
    Quasinormal,
    Hyponormal,
    Cohyponormal,
    Centered,
    IsometryMultiple,
    UnweightedTreeCriterion,
    PhaseUnitary,
    OlsonOrder,
    SpectralIntertwining,
    InvariantSubspace,
    Bounded,
    DensityInequality,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails,
    NotApplicable,
}

/// Evidence attached to a failed (or inapplicable) verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Two atoms that should carry equal values.
    AtomPair { first: String, second: String, first_value: f64, second_value: f64 },
    /// An atom whose value is compared with the value at its image.
    AtomImage { atom: String, image: String, value: f64, image_value: f64 },
    /// Siblings `first_child`, `second_child` of `vertex` with different child sums.
    TreeTriple { vertex: String, first_child: String, second_child: String, first_sum: f64, second_sum: f64 },
    Norm { metric: String, value: f64, threshold: f64 },
    Eigenvalue { min_eigenvalue: f64, floor: f64, threshold: Option<f64> },
    /// An atom outside a subspace that is mapped into it.
    Escape { atom: String, image: String },
    Point { coordinates: Vec<f64>, lhs: f64, rhs: f64 },
    Hypothesis { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: Property,
    pub verdict: bool,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    pub witness: Option<Witness>,
    pub tolerance_used: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl PropertyReport {
    pub fn holds(property: Property, tol: f64) -> Self {
        Self { property, verdict: true, outcome: Outcome::Holds, alpha: None, witness: None, tolerance_used: tol, note: None }
    }

    pub fn fails(property: Property, tol: f64, witness: Witness) -> Self {
        Self { property, verdict: false, outcome: Outcome::Fails, alpha: None, witness: Some(witness), tolerance_used: tol, note: None }
    }

    pub fn not_applicable(property: Property, tol: f64, reason: impl Into<String>) -> Self {
        Self {
            property,
            verdict: false,
            outcome: Outcome::NotApplicable,
            alpha: None,
            witness: Some(Witness::Hypothesis { reason: reason.into() }),
            tolerance_used: tol,
            note: None,
        }
    }

    pub fn from_check(property: Property, tol: f64, failure: Option<Witness>) -> Self {
        match failure {
            None => Self::holds(property, tol),
            Some(w) => Self::fails(property, tol, w),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }
}

fn pair(sys: &WcoSystem, a: usize, b: usize, va: f64, vb: f64) -> Witness {
    Witness::AtomPair { first: sys.space().id(a).into(), second: sys.space().id(b).into(), first_value: va, second_value: vb }
}

/// First pair of `μ_w`-atoms in one fiber whose values differ beyond `tol`.
fn fiber_mismatch(sys: &WcoSystem, values: &[f64], tol: f64, skip: impl Fn(usize) -> bool) -> Option<Witness> {
    let weighted = sys.weighted_masses();
    for block in sys.fibers().blocks() {
        let atoms: Vec<usize> = block.iter().copied().filter(|&x| weighted[x] > 0.0 && !skip(x)).collect();
        for (i, &a) in atoms.iter().enumerate() {
            for &b in &atoms[i + 1..] {
                if !approx_eq(values[a], values[b], tol) {
                    return Some(pair(sys, a, b, values[a], values[b]));
                }
            }
        }
    }
    None
}

/// `h` is constant on the `μ_w`-atoms of every fiber.
pub fn is_weakly_centered(sys: &WcoSystem, tol: f64) -> PropertyReport {
    weakly_centered_from_density(sys, &radon_nikodym(sys).h, tol)
}

/// [`is_weakly_centered`] against a caller-supplied `h`.
pub fn weakly_centered_from_density(sys: &WcoSystem, h: &[f64], tol: f64) -> PropertyReport {
    PropertyReport::from_check(Property::WeaklyCentered, tol, fiber_mismatch(sys, h, tol, |_| false))
}

/// `h^α = E(h^α)` a.e. `[μ_w]`, `α ≠ 0`.
///
/// For `α < 0` the power is taken only where `h > 0`. A fiber whose
/// weighted atoms all have `h = 0` is skipped; a fiber mixing `h = 0` and
/// `h > 0` weighted atoms makes the check not applicable unless some other
/// fiber already fails.
pub fn is_weakly_centered_alpha(sys: &WcoSystem, alpha: f64, tol: f64) -> Result<PropertyReport> {
    weakly_centered_alpha_from_density(sys, &radon_nikodym(sys).h, alpha, tol)
}

pub fn weakly_centered_alpha_from_density(sys: &WcoSystem, h: &[f64], alpha: f64, tol: f64) -> Result<PropertyReport> {
    if alpha == 0.0 || !alpha.is_finite() {
        return input_err(format!("alpha must be a nonzero real, got {alpha}"));
    }
    let prop = Property::WeaklyCenteredAlpha;
    let weighted = sys.weighted_masses();
    if alpha > 0.0 {
        let powered: Vec<f64> = h.iter().map(|v| v.max(0.0).powf(alpha)).collect();
        let expected = conditional_expectation_real(sys, &powered)?;
        let failure = (0..sys.len()).find(|&x| weighted[x] > 0.0 && !approx_eq(powered[x], expected[x], tol));
        let witness = failure.map(|x| Witness::AtomImage {
            atom: sys.space().id(x).into(),
            image: sys.space().id(sys.phi()[x]).into(),
            value: powered[x],
            image_value: expected[x],
        });
        return Ok(PropertyReport::from_check(prop, tol, witness).with_alpha(alpha));
    }

    let mut mixed: Option<(usize, usize)> = None;
    for block in sys.fibers().blocks() {
        let atoms: Vec<usize> = block.iter().copied().filter(|&x| weighted[x] > 0.0).collect();
        let (zero, positive): (Vec<usize>, Vec<usize>) = atoms.iter().partition(|&&x| h[x] <= 0.0);
        if positive.is_empty() {
            continue;
        }
        if let (Some(&z), None) = (zero.first(), mixed) {
            mixed = Some((z, positive[0]));
        }
        let mass: f64 = positive.iter().map(|&x| weighted[x]).sum();
        let mean = positive.iter().map(|&x| weighted[x] * h[x].powf(alpha)).sum::<f64>() / mass;
        if let Some(&x) = positive.iter().find(|&&x| !approx_eq(h[x].powf(alpha), mean, tol)) {
            let witness = Witness::AtomImage {
                atom: sys.space().id(x).into(),
                image: sys.space().id(sys.phi()[x]).into(),
                value: h[x].powf(alpha),
                image_value: mean,
            };
            return Ok(PropertyReport::fails(prop, tol, witness).with_alpha(alpha));
        }
    }
    Ok(match mixed {
        Some((z, p)) => PropertyReport::not_applicable(
            prop,
            tol,
            format!(
                "negative power undefined: `{}` has h = 0 while its fiber-mate `{}` has h > 0",
                sys.space().id(z),
                sys.space().id(p)
            ),
        ),
        None => PropertyReport::holds(prop, tol),
    }
    .with_alpha(alpha))
}

fn image_check(sys: &WcoSystem, h: &[f64], ok: impl Fn(f64, f64) -> bool) -> Option<Witness> {
    sys.weighted_support()
        .find(|&x| !ok(h[x], h[sys.phi()[x]]))
        .map(|x| Witness::AtomImage {
            atom: sys.space().id(x).into(),
            image: sys.space().id(sys.phi()[x]).into(),
            value: h[x],
            image_value: h[sys.phi()[x]],
        })
}

/// `h = h∘φ` a.e. `[μ_w]`.
pub fn is_quasinormal(sys: &WcoSystem, tol: f64) -> PropertyReport {
    quasinormal_from_density(sys, &radon_nikodym(sys).h, tol)
}

pub fn quasinormal_from_density(sys: &WcoSystem, h: &[f64], tol: f64) -> PropertyReport {
    PropertyReport::from_check(Property::Quasinormal, tol, image_check(sys, h, |v, img| approx_eq(v, img, tol)))
}

/// `h∘φ ≤ h` a.e. `[μ_w]`.
pub fn is_hyponormal(sys: &WcoSystem, tol: f64) -> PropertyReport {
    hyponormal_from_density(sys, &radon_nikodym(sys).h, tol)
}

pub fn hyponormal_from_density(sys: &WcoSystem, h: &[f64], tol: f64) -> PropertyReport {
    let ok = |v: f64, img: f64| img <= v + tol * 1f64.max(v.abs()).max(img.abs());
    PropertyReport::from_check(Property::Hyponormal, tol, image_check(sys, h, ok))
}

/// `TT* − T*T ⪰ 0` up to the floor `−tol`, on the matrix.
pub fn is_cohyponormal(sys: &WcoSystem, tol: f64) -> PropertyReport {
    let margin = cohyponormality_margin(&to_matrix(sys));
    let witness = (margin < -tol).then_some(Witness::Eigenvalue { min_eigenvalue: margin, floor: -tol, threshold: None });
    PropertyReport::from_check(Property::Cohyponormal, tol, witness)
}

/// `{T*ⁿTⁿ, TᵐT*ᵐ : n, m ≤ depth}` commute pairwise, on the matrix.
pub fn is_centered(sys: &WcoSystem, depth: usize, tol: f64) -> Result<PropertyReport> {
    if depth == 0 || depth > MAX_CENTERED_DEPTH {
        return input_err(format!("depth must be in 1..={MAX_CENTERED_DEPTH}, got {depth}"));
    }
    let value = centered_commutator(&to_matrix(sys), depth);
    let witness = (value > tol).then(|| Witness::Norm { metric: format!("largest power-family commutator, depth {depth}"), value, threshold: tol });
    Ok(PropertyReport::from_check(Property::Centered, tol, witness))
}

/// `h` constant on all of `X`.
pub fn is_isometry_multiple(sys: &WcoSystem, tol: f64) -> PropertyReport {
    isometry_multiple_from_density(sys, &radon_nikodym(sys).h, tol)
}

pub fn isometry_multiple_from_density(sys: &WcoSystem, h: &[f64], tol: f64) -> PropertyReport {
    let lo = (0..h.len()).min_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    let hi = (0..h.len()).max_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    let witness = (!approx_eq(h[lo], h[hi], tol)).then(|| pair(sys, lo, hi, h[lo], h[hi]));
    PropertyReport::from_check(Property::IsometryMultiple, tol, witness)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{DiscreteMeasureSpace, ScalarField};
    use crate::transforms::phase_system;
    use num_complex::Complex64;

    const TOL: f64 = 1e-9;

    fn sys(masses: &[f64], phi: Vec<usize>, w: &[f64]) -> WcoSystem {
        WcoSystem::new(DiscreteMeasureSpace::from_masses(masses).unwrap(), phi, ScalarField::from_real(w)).unwrap()
    }

    #[test]
    fn injective_maps_are_weakly_centered() {
        let s = sys(&[1.0, 2.0, 5.0], vec![1, 2, 0], &[3.0, 0.1, 1.0]);
        assert!(is_weakly_centered(&s, TOL).verdict);
        for alpha in [0.5, 2.0, -1.0] {
            assert!(is_weakly_centered_alpha(&s, alpha, TOL).unwrap().verdict);
        }
    }

    #[test]
    fn failing_report_carries_witness() {
        // fiber {0, 1} over atom 0; children of 0 and 1 carry different mass
        let s = sys(&[1.0; 4], vec![0, 0, 0, 1], &[0.0, 1.0, 1.0, 1.0]);
        let r = is_weakly_centered(&s, TOL);
        assert!(!r.verdict);
        assert_eq!(r.outcome, Outcome::Fails);
        assert!(matches!(r.witness, Some(Witness::AtomPair { ref first, ref second, .. }) if first == "1" && second == "2"));
    }

    #[test]
    fn alpha_zero_is_rejected() {
        let s = sys(&[1.0], vec![0], &[1.0]);
        assert!(is_weakly_centered_alpha(&s, 0.0, TOL).is_err());
    }

    #[test]
    fn two_cycle_quasinormal_iff_equal_masses() {
        let eq = sys(&[2.0, 2.0], vec![1, 0], &[1.0, 1.0]);
        assert!(is_quasinormal(&eq, TOL).verdict);
        let uneq = sys(&[1.0, 3.0], vec![1, 0], &[1.0, 1.0]);
        let h = radon_nikodym(&uneq).h;
        assert!(approx_eq(h[0], 3.0, 1e-15) && approx_eq(h[1], 1.0 / 3.0, 1e-15));
        assert!(!is_quasinormal(&uneq, TOL).verdict);
    }

    #[test]
    fn kernel_example_is_hyponormal_not_isometric() {
        let s = sys(&[1.0, 1.0], vec![0, 0], &[1.0, 0.0]);
        assert_eq!(radon_nikodym(&s).h.0, vec![1.0, 0.0]);
        assert!(is_hyponormal(&s, TOL).verdict);
        assert!(!is_isometry_multiple(&s, TOL).verdict);
    }

    #[test]
    fn identity_satisfies_everything() {
        let s = sys(&[0.5, 2.0], vec![0, 1], &[1.0, 1.0]);
        for r in [
            is_weakly_centered(&s, TOL),
            is_quasinormal(&s, TOL),
            is_hyponormal(&s, TOL),
            is_cohyponormal(&s, TOL),
            is_isometry_multiple(&s, TOL),
            is_centered(&s, 4, TOL).unwrap(),
        ] {
            assert!(r.verdict, "{:?}", r.property);
        }
    }

    #[test]
    fn centered_depth_is_bounded() {
        let s = sys(&[1.0], vec![0], &[1.0]);
        assert!(is_centered(&s, 0, TOL).is_err());
        assert!(is_centered(&s, 9, TOL).is_err());
    }

    #[test]
    fn scaling_keeps_isometry_multiple_verdict() {
        let s = sys(&[1.0, 1.0, 1.0], vec![1, 2, 0], &[1.0, 1.0, 1.0]);
        let scaled = s.scale_weight(Complex64::new(0.0, -3.0)).unwrap();
        assert!(is_isometry_multiple(&s, TOL).verdict);
        assert!(is_isometry_multiple(&scaled, TOL).verdict);
    }

    #[test]
    fn negative_alpha_on_mixed_fiber_is_not_applicable() {
        // 0 and 1 share the fiber over 0; h(0) > 0, h(1) = 0
        let s = sys(&[1.0; 3], vec![0, 0, 0], &[1.0, 1.0, 1.0]);
        let h = radon_nikodym(&s).h;
        assert_eq!(h.0, vec![3.0, 0.0, 0.0]);
        let r = is_weakly_centered_alpha(&s, -1.0, TOL).unwrap();
        assert_eq!(r.outcome, Outcome::NotApplicable);
        assert!(!is_weakly_centered(&s, TOL).verdict);
    }

    #[test]
    fn phase_of_weakly_centered_system_with_vanishing_density() {
        // path r -> a -> b: weakly centered, but h(b) = 0 at a μ_w-atom, and
        // the phase (a truncated shift) is not quasinormal
        let s = sys(&[1.0; 3], vec![0, 0, 1], &[0.0, 1.0, 1.0]);
        assert!(is_weakly_centered(&s, TOL).verdict);
        assert!(!is_quasinormal(&phase_system(&s), TOL).verdict);
    }
}
