//! Closed form against matrix oracle, system by system.
//!
//! [`check_system`] runs every comparison on one system; [`run_fuzz`] does it
//! over a seeded battery in parallel and shrinks any counterexample.
//! [`Mutation`] lets the harness corrupt the closed-form `h` on purpose, to
//! confirm that the comparisons can actually fail.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::generate::{random_system, rng_for, SystemKind};
use crate::invariant_subspaces::{find_invariant, verify_invariant, InvariantSearch};
use crate::matrix_oracle::{
    aluthge_matrix, cohyponormality_margin, hyponormality_margin, intertwining_check, moduli_commutator,
    multiplication_matrix, olson_order_check, quasinormal_commutator, spectral_measure_a, spectral_measure_b,
    spectral_norm, svd_polar, to_matrix, weak_centered_commutator, OperatorMatrix, RealSet, SpectralDecomposition,
};
use crate::measure_space::{approx_eq, push_forward_indices, Atom, DiscreteMeasureSpace, ScalarField};
use crate::properties::{
    hyponormal_from_density, isometry_multiple_from_density, quasinormal_from_density,
    weakly_centered_alpha_from_density, weakly_centered_from_density, Outcome,
};
use crate::transforms::{aluthge_system, phase_system};
use crate::wco_model::{radon_nikodym, WcoSystem};

/// Threshold on matrix metrics for polar and Aluthge comparisons.
pub const FACTOR_TOLERANCE: f64 = 1e-8;
/// Threshold for spectral projector comparisons.
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;
/// Relative threshold for the Radon–Nikodym subset identity.
pub const RADON_NIKODYM_TOLERANCE: f64 = 1e-10;
/// Exhaustive subset enumeration up to this many atoms.
pub const EXHAUSTIVE_SUBSETS: usize = 10;

pub const POWER_EXPONENTS: [f64; 3] = [0.5, 2.0, -1.0];
pub const ALUTHGE_EXPONENTS: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    WeaklyCenteredCommutator,
    WeaklyCenteredModuli,
    WeaklyCenteredPowers,
    QuasinormalCommutator,
    HyponormalMargin,
    CohyponormalImpliesWeaklyCentered,
    IsometryMultiple,
    Norm,
    Polar,
    Aluthge,
    RadonNikodym,
    SpectralMeasures,
    PhaseQuasinormal,
    OlsonOrder,
    Intertwining,
    InvariantSubspace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail { detail: String },
    Skip { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: Check,
    #[serde(flatten)]
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    #[default]
    None,
    /// Flip the sign of `h` at its largest value before the density-based checks.
    NegateHAtArgmax,
}

impl Mutation {
    fn apply(self, mut h: Vec<f64>) -> Vec<f64> {
        if self == Mutation::NegateHAtArgmax {
            if let Some(k) = (0..h.len()).max_by(|&a, &b| h[a].total_cmp(&h[b])) {
                h[k] = -h[k];
            }
        }
        h
    }
}

fn agree(check: Check, closed: bool, oracle: bool, metric: f64) -> CheckResult {
    let status = if closed == oracle {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail { detail: format!("closed form says {closed}, oracle says {oracle} (metric {metric:.3e})") }
    };
    CheckResult { check, status }
}

fn bound(check: Check, value: f64, limit: f64, what: &str) -> CheckResult {
    let status = if value <= limit {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail { detail: format!("{what} = {value:.3e} exceeds {limit:.1e}") }
    };
    CheckResult { check, status }
}

fn skip(check: Check, reason: impl Into<String>) -> CheckResult {
    CheckResult { check, status: CheckStatus::Skip { reason: reason.into() } }
}

/// `‖U − Ũ‖` and `‖|T| − M_{√h}‖ / max(1, ‖T‖)`, with `Ũ` the matrix of the
/// phase system and `U`, `|T|` from the SVD.
pub fn polar_errors(sys: &WcoSystem, m: &OperatorMatrix) -> (f64, f64) {
    let p = svd_polar(m);
    let phase = to_matrix(&phase_system(sys)).into_entries();
    let sqrt_h: Vec<f64> = radon_nikodym(sys).h.iter().map(|v| v.sqrt()).collect();
    let modulus = multiplication_matrix(&sqrt_h);
    (spectral_norm(&(&p.phase - phase)), spectral_norm(&(&p.modulus - modulus)) / 1f64.max(p.norm()))
}

/// `‖Δ_α(T) − C_{φ,w_α}‖ / max(1, ‖T‖)`.
pub fn aluthge_error(sys: &WcoSystem, m: &OperatorMatrix, alpha: f64) -> Result<f64> {
    let oracle = aluthge_matrix(m, alpha)?;
    let closed = to_matrix(&aluthge_system(sys, alpha)?);
    Ok(spectral_norm(&(oracle.entries() - closed.entries())) / 1f64.max(spectral_norm(m.entries())))
}

/// Largest relative gap between `μ_w(φ⁻¹(Δ))` and `Σ_Δ h μ` over all subsets
/// (up to [`EXHAUSTIVE_SUBSETS`] atoms) or 256 seeded random ones.
pub fn radon_nikodym_error(sys: &WcoSystem, h: &[f64]) -> (f64, usize) {
    let n = sys.len();
    let space = sys.space();
    let density: Vec<f64> = sys.w().iter().map(|v| v.norm_sqr()).collect();
    let subsets: Vec<BTreeSet<usize>> = if n <= EXHAUSTIVE_SUBSETS {
        (0u32..1 << n).map(|mask| (0..n).filter(|&x| mask >> x & 1 == 1).collect()).collect()
    } else {
        let mut rng = rng_for(n as u64, 0);
        (0..256).map(|_| (0..n).filter(|_| rng.random_bool(0.5)).collect()).collect()
    };
    let worst = subsets
        .iter()
        .map(|delta| {
            let pushed = push_forward_indices(space, sys.phi(), &density, delta);
            let integral: f64 = delta.iter().map(|&x| h[x] * space.mass(x)).sum();
            (pushed - integral).abs() / 1f64.max(pushed.abs()).max(integral.abs())
        })
        .fold(0.0, f64::max);
    (worst, subsets.len())
}

/// Largest `‖E_Y(σ) − closed form‖` for `Y ∈ {A, B}` over `ℝ`, `{0}`, `ℝ∖{0}`
/// and every `(−∞, λ]`, `{λ}` at eigenvalues `λ` of `A` or `B`.
pub fn spectral_error(sys: &WcoSystem, m: &OperatorMatrix) -> f64 {
    let t = m.entries();
    let a = SpectralDecomposition::of_hermitian(&(t * t.adjoint()));
    let b = SpectralDecomposition::of_hermitian(&(t.adjoint() * t));
    let mut sets = vec![RealSet::all(), RealSet::point(0.0), RealSet::except(0.0)];
    for lambda in a.eigenvalues.iter().chain(&b.eigenvalues) {
        sets.push(RealSet::at_most(*lambda));
        sets.push(RealSet::point(*lambda));
    }
    sets.iter()
        .map(|s| {
            let ea = spectral_norm(&(spectral_measure_a(sys, s).entries() - a.measure(s)));
            let eb = spectral_norm(&(spectral_measure_b(sys, s).entries() - b.measure(s)));
            ea.max(eb)
        })
        .fold(0.0, f64::max)
}

/// Runs every comparison on one system.
pub fn check_system(sys: &WcoSystem, tol: f64, mutation: Mutation) -> Result<Vec<CheckResult>> {
    let m = to_matrix(sys);
    let true_h = radon_nikodym(sys).h.into_inner();
    let h = mutation.apply(true_h.clone());
    let mut out = Vec::new();

    let wc = weakly_centered_from_density(sys, &h, tol).verdict;
    let wc_metric = weak_centered_commutator(&m);
    out.push(agree(Check::WeaklyCenteredCommutator, wc, wc_metric <= tol, wc_metric));
    let moduli = moduli_commutator(&m);
    out.push(agree(Check::WeaklyCenteredModuli, wc, moduli <= tol, moduli));

    let mut powers = CheckStatus::Pass;
    let mut not_applicable = Vec::new();
    for alpha in POWER_EXPONENTS {
        let report = weakly_centered_alpha_from_density(sys, &h, alpha, tol)?;
        match report.outcome {
            Outcome::NotApplicable => not_applicable.push(alpha),
            _ if report.verdict != wc => {
                powers = CheckStatus::Fail { detail: format!("alpha {alpha} gives {}, weakly centered gives {wc}", report.verdict) };
                break;
            }
            _ => {}
        }
    }
    if matches!(powers, CheckStatus::Pass) && !not_applicable.is_empty() && wc {
        powers = CheckStatus::Fail { detail: format!("alpha {not_applicable:?} not applicable on a weakly centered system") };
    }
    out.push(CheckResult { check: Check::WeaklyCenteredPowers, status: powers });

    let qn = quasinormal_from_density(sys, &h, tol).verdict;
    let qn_metric = quasinormal_commutator(&m);
    out.push(agree(Check::QuasinormalCommutator, qn, qn_metric <= tol, qn_metric));

    let hypo = hyponormal_from_density(sys, &h, tol).verdict;
    let hypo_margin = hyponormality_margin(&m);
    out.push(agree(Check::HyponormalMargin, hypo, hypo_margin >= -tol, hypo_margin));

    let co_margin = cohyponormality_margin(&m);
    out.push(if co_margin >= -tol {
        agree(Check::CohyponormalImpliesWeaklyCentered, wc, true, co_margin)
    } else {
        skip(Check::CohyponormalImpliesWeaklyCentered, "not cohyponormal")
    });

    let iso = isometry_multiple_from_density(sys, &h, tol).verdict;
    let svd = svd_polar(&m);
    let s_max = svd.norm();
    let s_min = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(agree(Check::IsometryMultiple, iso, approx_eq(s_min, s_max, tol), s_max - s_min));

    let closed_norm = h.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0).sqrt();
    out.push(bound(Check::Norm, (closed_norm - s_max).abs() / 1f64.max(s_max), tol, "relative norm gap"));

    let (phase_err, modulus_err) = polar_errors(sys, &m);
    out.push(bound(Check::Polar, phase_err.max(modulus_err), FACTOR_TOLERANCE, "polar factor gap"));

    let mut worst = 0.0f64;
    for alpha in ALUTHGE_EXPONENTS {
        worst = worst.max(aluthge_error(sys, &m, alpha)?);
    }
    out.push(bound(Check::Aluthge, worst, FACTOR_TOLERANCE, "Aluthge gap"));

    let (rn, _) = radon_nikodym_error(sys, &h);
    out.push(bound(Check::RadonNikodym, rn, RADON_NIKODYM_TOLERANCE, "subset mismatch"));

    out.push(bound(Check::SpectralMeasures, spectral_error(sys, &m), SPECTRAL_TOLERANCE, "projector gap"));

    // the phase of a weakly centered system is quasinormal exactly when
    // h > 0 on every weighted atom
    out.push(if wc {
        let positive = sys.weighted_support().all(|x| h[x] > 0.0);
        agree(Check::PhaseQuasinormal, positive, quasinormal_commutator(&to_matrix(&phase_system(sys))) <= tol, 0.0)
    } else {
        skip(Check::PhaseQuasinormal, "not weakly centered")
    });

    if wc && hypo {
        let olson = olson_order_check(sys, tol);
        out.push(CheckResult {
            check: Check::OlsonOrder,
            status: match olson.outcome {
                Outcome::Holds => CheckStatus::Pass,
                Outcome::Fails => CheckStatus::Fail { detail: format!("{:?}", olson.witness) },
                Outcome::NotApplicable => CheckStatus::Skip { reason: olson.note.unwrap_or_default() },
            },
        });
        let tw = intertwining_check(sys, SPECTRAL_TOLERANCE);
        out.push(CheckResult {
            check: Check::Intertwining,
            status: match tw.outcome {
                Outcome::Holds => CheckStatus::Pass,
                Outcome::Fails => CheckStatus::Fail { detail: format!("{:?}", tw.witness) },
                Outcome::NotApplicable => CheckStatus::Skip { reason: tw.note.unwrap_or_default() },
            },
        });
        out.push(invariant_result(sys, &true_h, tol)?);
    } else {
        for check in [Check::OlsonOrder, Check::Intertwining, Check::InvariantSubspace] {
            out.push(skip(check, "not weakly centered and hyponormal"));
        }
    }
    Ok(out)
}

fn invariant_result(sys: &WcoSystem, h: &[f64], tol: f64) -> Result<CheckResult> {
    let check = Check::InvariantSubspace;
    let constant = h.iter().all(|v| approx_eq(*v, h[0], tol));
    Ok(match find_invariant(sys, tol) {
        InvariantSearch::Found { subspace } => {
            let report = verify_invariant(sys, &subspace)?;
            let nontrivial = report.note.is_none();
            if report.verdict && nontrivial {
                CheckResult { check, status: CheckStatus::Pass }
            } else {
                CheckResult { check, status: CheckStatus::Fail { detail: format!("{subspace:?} rejected: {:?}", report.witness) } }
            }
        }
        InvariantSearch::NotApplicable { reason } if constant => CheckResult { check, status: CheckStatus::Skip { reason } },
        InvariantSearch::NotApplicable { reason } => {
            CheckResult { check, status: CheckStatus::Fail { detail: format!("nonconstant h but no subspace: {reason}") } }
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub index: usize,
    pub kind: SystemKind,
    pub check: Check,
    pub detail: String,
    pub minimized: WcoSystem,
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzSummary {
    pub count: usize,
    pub seed: u64,
    pub max_atoms: usize,
    pub tolerance: f64,
    pub mutation: Mutation,
    pub systems_failed: usize,
    pub checks: BTreeMap<Check, Tally>,
    pub counterexamples: Vec<Counterexample>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.systems_failed == 0
    }
}

fn failing(results: &[CheckResult], check: Check) -> bool {
    results.iter().any(|r| r.check == check && matches!(r.status, CheckStatus::Fail { .. }))
}

fn remove_atom(sys: &WcoSystem, k: usize) -> Result<WcoSystem> {
    let keep: Vec<usize> = (0..sys.len()).filter(|&x| x != k).collect();
    let new_index = |x: usize| if x > k { x - 1 } else { x };
    let atoms: Vec<Atom> = keep.iter().map(|&x| sys.space().atoms()[x].clone()).collect();
    let phi = keep.iter().map(|&y| if sys.phi()[y] == k { new_index(y) } else { new_index(sys.phi()[y]) }).collect();
    let w: ScalarField = keep.iter().map(|&y| sys.w()[y]).collect();
    WcoSystem::new(DiscreteMeasureSpace::new(atoms)?, phi, w)
}

/// Greedy shrinking: drop atoms, zero weights, reset masses to 1 and strip
/// weight phases while the given check keeps failing.
pub fn minimize(sys: &WcoSystem, check: Check, tol: f64, mutation: Mutation) -> WcoSystem {
    let still_fails = |s: &WcoSystem| check_system(s, tol, mutation).is_ok_and(|r| failing(&r, check));
    let mut current = sys.clone();
    loop {
        let n = current.len();
        let mut candidates: Vec<WcoSystem> = Vec::new();
        if n > 1 {
            candidates.extend((0..n).filter_map(|k| remove_atom(&current, k).ok()));
        }
        for k in 0..n {
            let mut w = current.w().clone();
            if w[k].norm() > 0.0 {
                w[k] = Complex64::new(0.0, 0.0);
                candidates.extend(current.with_weight(w).ok());
            }
            let mut w = current.w().clone();
            if w[k].im != 0.0 || w[k].re < 0.0 {
                w[k] = Complex64::new(w[k].norm(), 0.0);
                candidates.extend(current.with_weight(w).ok());
            }
            if current.space().mass(k) != 1.0 {
                let mut masses = current.space().masses();
                masses[k] = 1.0;
                let atoms = current.space().atoms().iter().zip(&masses).map(|(a, &mass)| Atom { id: a.id.clone(), mass }).collect();
                candidates.extend(DiscreteMeasureSpace::new(atoms).and_then(|s| current.with_space(s)).ok());
            }
        }
        match candidates.into_iter().find(|c| still_fails(c)) {
            Some(smaller) => current = smaller,
            None => return current,
        }
    }
}

/// Checks `count` seeded systems in parallel; results are ordered by index.
pub fn run_fuzz(count: usize, seed: u64, max_atoms: usize, tol: f64, mutation: Mutation) -> Result<FuzzSummary> {
    let per_system: Vec<(usize, SystemKind, WcoSystem, Vec<CheckResult>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let g = random_system(seed, i, max_atoms)?;
            let results = check_system(&g.system, tol, mutation)?;
            Ok((i, g.kind, g.system, results))
        })
        .collect::<Result<_>>()?;

    let mut checks: BTreeMap<Check, Tally> = BTreeMap::new();
    let mut failed_systems = Vec::new();
    for (i, kind, sys, results) in &per_system {
        let mut any = None;
        for r in results {
            let tally = checks.entry(r.check).or_default();
            match &r.status {
                CheckStatus::Pass => tally.passed += 1,
                CheckStatus::Skip { .. } => tally.skipped += 1,
                CheckStatus::Fail { detail } => {
                    tally.failed += 1;
                    any.get_or_insert((r.check, detail.clone()));
                }
            }
        }
        if let Some((check, detail)) = any {
            failed_systems.push((*i, *kind, sys.clone(), check, detail));
        }
    }
    let systems_failed = failed_systems.len();
    let counterexamples = failed_systems
        .into_par_iter()
        .take_any(5)
        .map(|(index, kind, sys, check, detail)| Counterexample { index, kind, check, detail, minimized: minimize(&sys, check, tol, mutation) })
        .collect::<Vec<_>>();
    let mut counterexamples = counterexamples;
    counterexamples.sort_by_key(|c| c.index);
    Ok(FuzzSummary { count, seed, max_atoms, tolerance: tol, mutation, systems_failed, checks, counterexamples })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-9;

    fn statuses(sys: &WcoSystem, mutation: Mutation) -> Vec<CheckResult> {
        check_system(sys, TOL, mutation).unwrap()
    }

    #[test]
    fn clean_system_passes_everything() {
        let sys = WcoSystem::new(
            DiscreteMeasureSpace::from_masses(&[1.0, 2.0, 0.5, 3.0]).unwrap(),
            vec![1, 2, 2, 0],
            ScalarField::from_real(&[1.0, -0.5, 2.0, 0.0]),
        )
        .unwrap();
        for r in statuses(&sys, Mutation::None) {
            assert!(!matches!(r.status, CheckStatus::Fail { .. }), "{r:?}");
        }
    }

    #[test]
    fn mutation_is_caught() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![1, 2, 0], ScalarField::from_real(&[1.0, 2.0, 1.0]))
            .unwrap();
        let results = statuses(&sys, Mutation::NegateHAtArgmax);
        assert!(failing(&results, Check::Norm));
        assert!(failing(&results, Check::RadonNikodym));
    }

    #[test]
    fn small_fuzz_is_clean() {
        let summary = run_fuzz(150, 42, 8, TOL, Mutation::None).unwrap();
        assert!(summary.passed(), "{:#?}", summary.counterexamples);
        let total = summary.checks[&Check::Norm];
        assert_eq!(total.passed, 150);
    }

    #[test]
    fn mutated_fuzz_reports_shrunk_counterexamples() {
        let summary = run_fuzz(40, 1, 6, TOL, Mutation::NegateHAtArgmax).unwrap();
        assert!(!summary.passed());
        assert!(!summary.counterexamples.is_empty());
        for c in &summary.counterexamples {
            assert!(c.minimized.len() <= 6);
            assert!(failing(&check_system(&c.minimized, TOL, Mutation::NegateHAtArgmax).unwrap(), c.check));
        }
    }

    #[test]
    fn empty_fuzz() {
        let summary = run_fuzz(0, 42, 8, TOL, Mutation::None).unwrap();
        assert!(summary.passed());
        assert!(summary.checks.is_empty());
    }

    #[test]
    fn minimize_removes_irrelevant_atoms() {
        let sys = WcoSystem::new(
            DiscreteMeasureSpace::from_masses(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap(),
            vec![1, 2, 0, 4, 3],
            ScalarField::from_real(&[1.0, 1.5, 1.0, 0.7, 0.2]),
        )
        .unwrap();
        let small = minimize(&sys, Check::Norm, TOL, Mutation::NegateHAtArgmax);
        assert_eq!(small.len(), 1);
    }
}
