//! Invariant subspaces of `C_{φ,w}` built from the level sets of `h`, and a
//! growth diagnostic for the gap between `Δ_{1/2}(C_{φ,w})` and `C_{φ,w_{1/2}}`
//! on truncations of a bilateral shift.
//!
//! At finite dimension hyponormal operators are normal, so invariant
//! subspaces exist for classical reasons. What is checked here is the
//! specific construction `χ_{h>t₀}L²(μ)` (and the kernel / range branches).

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::matrix_oracle::{identity_like, multiplication_matrix, spectral_norm, svd_polar, to_matrix};
use crate::measure_space::{DiscreteMeasureSpace, ScalarField};
use crate::properties::{is_hyponormal, is_weakly_centered, Property, PropertyReport, Witness};
use crate::wco_model::{cond_exp_pullback_real, radon_nikodym, WcoSystem};

/// Threshold of the matrix invariance check `‖(I − P_S) T P_S‖`.
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubspaceKind {
    /// `χ_{h>t₀} L²(μ)`.
    LevelSet,
    /// `ker C = χ_{h=0} L²(μ)`.
    Kernel,
    /// Closure of the range; `atoms` lists the fibers that generate it.
    RangeClosure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceDescriptor {
    pub kind: SubspaceKind,
    pub atoms: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum InvariantSearch {
    Found { subspace: SubspaceDescriptor },
    NotApplicable { reason: String },
}

fn ids(space: &DiscreteMeasureSpace, atoms: impl IntoIterator<Item = usize>) -> Vec<String> {
    atoms.into_iter().map(|x| space.id(x).to_string()).collect()
}

/// Distinct values of `h`, ascending, merged within `tol`.
fn levels(h: &[f64], tol: f64) -> Vec<f64> {
    let mut sorted = h.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for v in sorted {
        match out.last() {
            Some(&last) if crate::approx_eq(last, v, tol) => {}
            _ => out.push(v),
        }
    }
    out
}

/// The case analysis for weakly centered hyponormal systems: kernel,
/// then closure of the range, then the top level set of `h`.
pub fn find_invariant(sys: &WcoSystem, tol: f64) -> InvariantSearch {
    if !is_weakly_centered(sys, tol).verdict {
        return InvariantSearch::NotApplicable { reason: "system is not weakly centered".into() };
    }
    if !is_hyponormal(sys, tol).verdict {
        return InvariantSearch::NotApplicable { reason: "system is not hyponormal".into() };
    }
    let h = radon_nikodym(sys).h;
    let n = sys.len();
    let space = sys.space();

    let kernel: Vec<usize> = (0..n).filter(|&x| h[x] == 0.0).collect();
    if !kernel.is_empty() && kernel.len() < n {
        return InvariantSearch::Found {
            subspace: SubspaceDescriptor { kind: SubspaceKind::Kernel, atoms: ids(space, kernel), threshold: None },
        };
    }

    let m = to_matrix(sys);
    let polar = svd_polar(&m);
    let rank = polar.rank();
    if rank > 0 && rank < n {
        let generators = (0..n).filter(|&z| h[z] > 0.0);
        return InvariantSearch::Found {
            subspace: SubspaceDescriptor { kind: SubspaceKind::RangeClosure, atoms: ids(space, generators), threshold: None },
        };
    }

    let lv = levels(&h, tol);
    if lv.len() < 2 {
        return InvariantSearch::NotApplicable { reason: "scalar multiple of an isometry".into() };
    }
    let t0 = (lv[lv.len() - 2] + lv[lv.len() - 1]) / 2.0;
    let atoms = (0..n).filter(|&x| h[x] > t0);
    InvariantSearch::Found {
        subspace: SubspaceDescriptor { kind: SubspaceKind::LevelSet, atoms: ids(space, atoms), threshold: Some(t0) },
    }
}

/// Combinatorial check (no weighted atom outside `S` maps into `S`) plus
/// the matrix check `‖(I − P_S) T P_S‖ ≤ 1e-10`. For the range closure only
/// the matrix check applies, with `P_S` the range projector.
pub fn verify_invariant(sys: &WcoSystem, subspace: &SubspaceDescriptor) -> Result<PropertyReport> {
    let prop = Property::InvariantSubspace;
    let space = sys.space();
    let members: BTreeSet<usize> = space.resolve(subspace.atoms.iter().map(String::as_str))?;
    let m = to_matrix(sys);
    let t = m.entries();
    let n = sys.len();

    let projector = match subspace.kind {
        SubspaceKind::RangeClosure => svd_polar(&m).range_projector(),
        _ => {
            let escape = sys.weighted_support().find(|&y| members.contains(&sys.phi()[y]) && !members.contains(&y));
            if let Some(y) = escape {
                return Ok(PropertyReport::fails(
                    prop,
                    INVARIANCE_TOLERANCE,
                    Witness::Escape { atom: space.id(y).into(), image: space.id(sys.phi()[y]).into() },
                ));
            }
            let d: Vec<f64> = (0..n).map(|x| if members.contains(&x) { 1.0 } else { 0.0 }).collect();
            multiplication_matrix(&d)
        }
    };
    let leak = spectral_norm(&((identity_like(n) - &projector) * t * &projector));
    if leak > INVARIANCE_TOLERANCE {
        return Ok(PropertyReport::fails(
            prop,
            INVARIANCE_TOLERANCE,
            Witness::Norm { metric: "‖(I − P_S) T P_S‖".into(), value: leak, threshold: INVARIANCE_TOLERANCE },
        ));
    }
    let report = PropertyReport::holds(prop, INVARIANCE_TOLERANCE);
    let trivial = match subspace.kind {
        SubspaceKind::RangeClosure => {
            let r = svd_polar(&m).rank();
            r == 0 || r == n
        }
        _ => members.is_empty() || members.len() == n,
    };
    Ok(if trivial { report.with_note("trivial subspace") } else { report })
}

/// Truncation of the bilateral shift on the window `[−3, 3·n_max + 2]`:
/// `φ(k) = k − 1` (the left end is fixed with weight 0), and for `n ≥ 1`
/// `w(3n) = 1`, `w(3n + 1) = n²`, `w(3n + 2) = 1/n²`; `w = 1` elsewhere.
pub fn rudy_system(n_max: usize) -> Result<WcoSystem> {
    if n_max < 2 {
        return input_err(format!("n_max must be at least 2, got {n_max}"));
    }
    let lo: i64 = -3;
    let hi: i64 = 3 * n_max as i64 + 2;
    let points: Vec<i64> = (lo..=hi).collect();
    let space = DiscreteMeasureSpace::new(points.iter().map(|k| crate::Atom { id: k.to_string(), mass: 1.0 }).collect())?;
    let phi: Vec<usize> = (0..points.len()).map(|i| i.saturating_sub(1)).collect();
    let w: ScalarField = points
        .iter()
        .map(|&k| {
            let v = if k == lo {
                0.0
            } else if k >= 3 {
                let n = (k / 3) as f64;
                match k % 3 {
                    0 => 1.0,
                    1 => n * n,
                    _ => 1.0 / (n * n),
                }
            } else {
                1.0
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    WcoSystem::new(space, phi, w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub n: usize,
    pub atom: String,
    pub sqrt_h: f64,
    pub pulled_back_mean: f64,
    pub ratio: f64,
}

/// `r(x) = √h(x) / (1 + (E(√h)∘φ⁻¹)(x)·√h(x))` at `x = 3n`, `n = 1..=n_max`.
pub fn aluthge_domain_gap(n_max: usize) -> Result<Vec<GrowthRow>> {
    let sys = rudy_system(n_max)?;
    let sqrt_h: Vec<f64> = radon_nikodym(&sys).h.iter().map(|v| v.sqrt()).collect();
    let pulled = cond_exp_pullback_real(&sys, &sqrt_h)?;
    (1..=n_max)
        .map(|n| {
            let atom = (3 * n).to_string();
            let x = sys.space().index_of(&atom)?;
            Ok(GrowthRow {
                n,
                atom,
                sqrt_h: sqrt_h[x],
                pulled_back_mean: pulled[x],
                ratio: sqrt_h[x] / (1.0 + pulled[x] * sqrt_h[x]),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::approx_eq;

    const TOL: f64 = 1e-9;

    fn sys(masses: &[f64], phi: Vec<usize>, w: &[f64]) -> WcoSystem {
        WcoSystem::new(DiscreteMeasureSpace::from_masses(masses).unwrap(), phi, ScalarField::from_real(w)).unwrap()
    }

    #[test]
    fn kernel_example_gives_kernel_and_level_set() {
        let s = sys(&[1.0, 1.0], vec![0, 0], &[1.0, 0.0]);
        let InvariantSearch::Found { subspace } = find_invariant(&s, TOL) else { panic!("expected a subspace") };
        assert_eq!(subspace.kind, SubspaceKind::Kernel);
        assert_eq!(subspace.atoms, vec!["1".to_string()]);
        assert!(verify_invariant(&s, &subspace).unwrap().verdict);

        let level = SubspaceDescriptor { kind: SubspaceKind::LevelSet, atoms: vec!["0".into()], threshold: Some(0.5) };
        assert!(verify_invariant(&s, &level).unwrap().verdict);
    }

    #[test]
    fn isometry_multiple_is_excluded() {
        let s = sys(&[1.0, 1.0, 1.0], vec![1, 2, 0], &[2.0, -2.0, 2.0]);
        assert_eq!(find_invariant(&s, TOL), InvariantSearch::NotApplicable { reason: "scalar multiple of an isometry".into() });
    }

    #[test]
    fn level_set_on_normal_system() {
        // two cycles with different constant densities
        let s = sys(&[1.0; 5], vec![1, 0, 3, 4, 2], &[1.0, 1.0, 2.0, 2.0, 2.0]);
        let InvariantSearch::Found { subspace } = find_invariant(&s, TOL) else { panic!() };
        assert_eq!(subspace.kind, SubspaceKind::LevelSet);
        assert_eq!(subspace.atoms, vec!["2", "3", "4"]);
        assert!(approx_eq(subspace.threshold.unwrap(), 2.5, 1e-15));
        assert!(verify_invariant(&s, &subspace).unwrap().verdict);
    }

    #[test]
    fn non_invariant_set_is_rejected() {
        let s = sys(&[1.0; 3], vec![1, 2, 0], &[1.0, 1.0, 1.0]);
        let bad = SubspaceDescriptor { kind: SubspaceKind::LevelSet, atoms: vec!["1".into()], threshold: None };
        let r = verify_invariant(&s, &bad).unwrap();
        assert!(!r.verdict);
        assert!(matches!(r.witness, Some(Witness::Escape { ref atom, .. }) if atom == "0"));
    }

    #[test]
    fn trivial_subspaces_pass_with_flag() {
        let s = sys(&[1.0; 3], vec![1, 2, 0], &[1.0, 3.0, 1.0]);
        let all = SubspaceDescriptor { kind: SubspaceKind::LevelSet, atoms: vec!["0".into(), "1".into(), "2".into()], threshold: None };
        let none = SubspaceDescriptor { kind: SubspaceKind::LevelSet, atoms: vec![], threshold: None };
        for d in [all, none] {
            let r = verify_invariant(&s, &d).unwrap();
            assert!(r.verdict);
            assert_eq!(r.note.as_deref(), Some("trivial subspace"));
        }
    }

    #[test]
    fn range_closure_branch_verifies() {
        // not reachable from find_invariant at finite dimension (ker C and
        // ker C* are both trivial or both not), so exercised directly
        let s = sys(&[1.0; 3], vec![0, 0, 1], &[0.0, 1.0, 1.0]);
        let d = SubspaceDescriptor { kind: SubspaceKind::RangeClosure, atoms: vec!["0".into(), "1".into()], threshold: None };
        assert!(verify_invariant(&s, &d).unwrap().verdict);
    }

    #[test]
    fn rudy_rows() {
        assert!(aluthge_domain_gap(1).is_err());
        let rows = aluthge_domain_gap(20).unwrap();
        assert_eq!(rows.len(), 20);
        for r in &rows {
            let n2 = (r.n * r.n) as f64;
            assert!(approx_eq(r.sqrt_h, n2, 1e-12));
            assert!(approx_eq(r.pulled_back_mean, 1.0 / n2, 1e-12));
            assert!(approx_eq(r.ratio, n2 / 2.0, 1e-12));
        }
        let s = rudy_system(20).unwrap();
        assert!(is_weakly_centered(&s, TOL).verdict);
    }
}
