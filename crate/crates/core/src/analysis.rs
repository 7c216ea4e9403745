//! Whole-system reports: everything the closed forms say about one system,
//! and the same system seen through the matrix oracle. Both serialize to
//! JSON and render as plain text tables carrying the same data.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::battery::{check_system, CheckResult, CheckStatus, Mutation};
use crate::error::Result;
use crate::gaussian_example::{
    affine_reduction, check_sad06, is_bounded, sample_points, weakly_centered_flag, EntireSeriesDensity, LinearSystem,
};
use crate::invariant_subspaces::{find_invariant, verify_invariant, InvariantSearch};
use crate::matrix_oracle::{
    cohyponormality_margin, hyponormality_margin, moduli_commutator, quasinormal_commutator, svd_polar, to_matrix,
    weak_centered_commutator,
};
use crate::properties::{
    is_centered, is_cohyponormal, is_hyponormal, is_isometry_multiple, is_quasinormal, is_weakly_centered,
    is_weakly_centered_alpha, PropertyReport, Witness,
};
use crate::transforms::{aluthge_weight, polar};
use crate::tree_shifts::{phase_is_unitary, tree_to_wco, tree_weakly_centered, unweighted_tree_criterion, TreeShift};
use crate::wco_model::{conditional_expectation_real, operator_norm, radon_nikodym, WcoSystem};

/// Exponents of the α-power weak-centeredness criterion shown in reports.
pub const REPORT_POWERS: [f64; 3] = [0.5, 2.0, -1.0];
/// Aluthge exponents tabulated in reports.
pub const REPORT_ALUTHGE: [f64; 3] = [0.25, 0.5, 1.0];
/// Power depth used for the centeredness check.
pub const REPORT_CENTERED_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomRow {
    pub atom: String,
    pub mass: f64,
    pub image: String,
    pub w: Complex64,
    pub h: f64,
    pub conditional_h: f64,
    pub phase_weight: Complex64,
    /// `w_α` for each exponent in [`AnalysisReport::aluthge_alphas`].
    pub aluthge_weights: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub atoms: usize,
    pub tolerance: f64,
    pub norm: f64,
    pub aluthge_alphas: Vec<f64>,
    pub rows: Vec<AtomRow>,
    pub properties: Vec<PropertyReport>,
}

pub fn analyze(sys: &WcoSystem, tol: f64) -> Result<AnalysisReport> {
    let h = radon_nikodym(sys).h.into_inner();
    let e_h = conditional_expectation_real(sys, &h)?;
    let phase = polar(sys).phase_weight;
    let aluthge = REPORT_ALUTHGE.iter().map(|&a| aluthge_weight(sys, a)).collect::<Result<Vec<_>>>()?;
    let space = sys.space();
    let rows = (0..sys.len())
        .map(|x| AtomRow {
            atom: space.id(x).to_string(),
            mass: space.mass(x),
            image: space.id(sys.phi()[x]).to_string(),
            w: sys.w()[x],
            h: h[x],
            conditional_h: e_h[x],
            phase_weight: phase[x],
            aluthge_weights: aluthge.iter().map(|a| a.w_alpha[x]).collect(),
        })
        .collect();

    let mut properties = vec![is_weakly_centered(sys, tol)];
    for alpha in REPORT_POWERS {
        properties.push(is_weakly_centered_alpha(sys, alpha, tol)?);
    }
    properties.push(is_quasinormal(sys, tol));
    properties.push(is_hyponormal(sys, tol));
    properties.push(is_cohyponormal(sys, tol));
    properties.push(is_centered(sys, REPORT_CENTERED_DEPTH, tol)?);
    properties.push(is_isometry_multiple(sys, tol));

    Ok(AnalysisReport {
        atoms: sys.len(),
        tolerance: tol,
        norm: operator_norm(sys),
        aluthge_alphas: REPORT_ALUTHGE.to_vec(),
        rows,
        properties,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub atoms: usize,
    pub tolerance: f64,
    pub closed_form_norm: f64,
    pub matrix_norm: f64,
    pub rank: usize,
    pub metrics: Vec<Metric>,
    pub agreements: Vec<CheckResult>,
}

impl OracleReport {
    /// No closed-form verdict disagrees with the matrix.
    pub fn all_agree(&self) -> bool {
        self.agreements.iter().all(|c| !matches!(c.status, CheckStatus::Fail { .. }))
    }
}

pub fn oracle(sys: &WcoSystem, tol: f64) -> Result<OracleReport> {
    let m = to_matrix(sys);
    let svd = svd_polar(&m);
    let metric = |name: &str, value: f64| Metric { name: name.into(), value };
    Ok(OracleReport {
        atoms: sys.len(),
        tolerance: tol,
        closed_form_norm: operator_norm(sys),
        matrix_norm: svd.norm(),
        rank: svd.rank(),
        metrics: vec![
            metric("weakly_centered_commutator", weak_centered_commutator(&m)),
            metric("moduli_commutator", moduli_commutator(&m)),
            metric("quasinormal_commutator", quasinormal_commutator(&m)),
            metric("hyponormality_margin", hyponormality_margin(&m)),
            metric("cohyponormality_margin", cohyponormality_margin(&m)),
        ],
        agreements: check_system(sys, tol, Mutation::None)?,
    })
}

pub fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

pub fn describe_witness(w: &Witness) -> String {
    match w {
        Witness::AtomPair { first, second, first_value, second_value } => {
            format!("{first}={first_value:.6} vs {second}={second_value:.6}")
        }
        Witness::AtomImage { atom, image, value, image_value } => {
            format!("{atom}={value:.6}, image {image}={image_value:.6}")
        }
        Witness::TreeTriple { vertex, first_child, second_child, first_sum, second_sum } => {
            format!("under {vertex}: {first_child} sum {first_sum:.6} vs {second_child} sum {second_sum:.6}")
        }
        Witness::Norm { metric, value, threshold } => format!("{metric} = {value:.3e} > {threshold:.1e}"),
        Witness::Eigenvalue { min_eigenvalue, floor, threshold } => match threshold {
            Some(t) => format!("min eigenvalue {min_eigenvalue:.3e} < {floor:.1e} at t = {t:.6}"),
            None => format!("min eigenvalue {min_eigenvalue:.3e} < {floor:.1e}"),
        },
        Witness::Escape { atom, image } => format!("{atom} outside maps to {image} inside"),
        Witness::Point { coordinates, lhs, rhs } => format!("at {coordinates:?}: {lhs:.6e} > {rhs:.6e}"),
        Witness::Hypothesis { reason } => reason.clone(),
    }
}

/// One line per report: name, outcome, exponent, witness, note.
pub fn property_line(r: &PropertyReport) -> String {
    let mut name = r.property.to_string();
    if let Some(a) = r.alpha {
        name = format!("{name}[{a}]");
    }
    let outcome = serde_json::to_value(r.outcome).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    let mut line = format!("{name:<28} {:<5} {outcome:<14}", r.verdict);
    if let Some(w) = &r.witness {
        let _ = write!(line, " {}", describe_witness(w));
    }
    if let Some(n) = &r.note {
        let _ = write!(line, " ({n})");
    }
    line.trim_end().to_string()
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "atoms {}  norm {:.9}  tolerance {:e}", self.atoms, self.norm, self.tolerance)?;
        write!(f, "{:<10} {:>10} {:<10} {:>24} {:>12} {:>12} {:>24}", "atom", "mass", "image", "w", "h", "E(h)", "phase")?;
        for a in &self.aluthge_alphas {
            write!(f, " {:>24}", format!("w_{a}"))?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(
                f,
                "{:<10} {:>10.6} {:<10} {:>24} {:>12.6} {:>12.6} {:>24}",
                r.atom,
                r.mass,
                r.image,
                fmt_complex(r.w),
                r.h,
                r.conditional_h,
                fmt_complex(r.phase_weight)
            )?;
            for w in &r.aluthge_weights {
                write!(f, " {:>24}", fmt_complex(*w))?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        for p in &self.properties {
            writeln!(f, "{}", property_line(p))?;
        }
        Ok(())
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "atoms {}  rank {}  norm closed-form {:.12}  matrix {:.12}  tolerance {:e}",
            self.atoms, self.rank, self.closed_form_norm, self.matrix_norm, self.tolerance
        )?;
        for m in &self.metrics {
            writeln!(f, "{:<28} {:.3e}", m.name, m.value)?;
        }
        writeln!(f)?;
        for c in &self.agreements {
            let check = serde_json::to_value(c.check).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            match &c.status {
                CheckStatus::Pass => writeln!(f, "{check:<40} pass")?,
                CheckStatus::Fail { detail } => writeln!(f, "{check:<40} FAIL {detail}")?,
                CheckStatus::Skip { reason } => writeln!(f, "{check:<40} skip {reason}")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexRow {
    pub vertex: String,
    pub parent: Option<String>,
    pub lambda: Complex64,
    pub child_sum: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeReport {
    pub vertices: usize,
    pub interior_only: bool,
    pub rows: Vec<VertexRow>,
    pub weighted: PropertyReport,
    pub unweighted: PropertyReport,
    pub phase_unitary: PropertyReport,
    pub weakly_centered_commutator: f64,
}

pub fn analyze_tree(shift: &TreeShift, interior_only: bool, tol: f64) -> TreeReport {
    let tree = shift.tree();
    let sums = shift.child_sums();
    let rows = (0..tree.len())
        .map(|v| VertexRow {
            vertex: tree.id(v).to_string(),
            parent: tree.parent(v).map(|p| tree.id(p).to_string()),
            lambda: shift.lambda()[v],
            child_sum: sums[v],
            truncated: tree.is_truncated(v),
        })
        .collect();
    TreeReport {
        vertices: tree.len(),
        interior_only,
        rows,
        weighted: tree_weakly_centered(shift, interior_only, tol),
        unweighted: unweighted_tree_criterion(tree, interior_only),
        phase_unitary: phase_is_unitary(shift, tol),
        weakly_centered_commutator: weak_centered_commutator(&to_matrix(&tree_to_wco(shift))),
    }
}

impl fmt::Display for TreeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vertices {}  interior_only {}", self.vertices, self.interior_only)?;
        writeln!(f, "{:<10} {:<10} {:>24} {:>12} truncated", "vertex", "parent", "lambda", "child_sum")?;
        for r in &self.rows {
            let parent = r.parent.as_deref().unwrap_or("-");
            writeln!(f, "{:<10} {:<10} {:>24} {:>12.6} {}", r.vertex, parent, fmt_complex(r.lambda), r.child_sum, r.truncated)?;
        }
        writeln!(f)?;
        for p in [&self.weighted, &self.unweighted, &self.phase_unitary] {
            writeln!(f, "{}", property_line(p))?;
        }
        writeln!(f, "{:<28} {:.3e}", "weakly_centered_commutator", self.weakly_centered_commutator)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub search: InvariantSearch,
    pub verification: Option<PropertyReport>,
}

pub fn invariant(sys: &WcoSystem, tol: f64) -> Result<InvariantReport> {
    let search = find_invariant(sys, tol);
    let verification = match &search {
        InvariantSearch::Found { subspace } => Some(verify_invariant(sys, subspace)?),
        InvariantSearch::NotApplicable { .. } => None,
    };
    Ok(InvariantReport { search, verification })
}

impl fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.search {
            InvariantSearch::Found { subspace } => {
                let kind = serde_json::to_value(subspace.kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                write!(f, "found {kind}: {{{}}}", subspace.atoms.join(", "))?;
                if let Some(t) = subspace.threshold {
                    write!(f, "  threshold {t:.9}")?;
                }
                writeln!(f)?;
            }
            InvariantSearch::NotApplicable { reason } => writeln!(f, "not applicable: {reason}")?,
        }
        if let Some(v) = &self.verification {
            writeln!(f, "{}", property_line(v))?;
        }
        Ok(())
    }
}

/// Settings of one Gaussian-density run with `φ = αI` on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussParams {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
    pub is_polynomial: bool,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussReport {
    pub params: GaussParams,
    pub inverse_norm: f64,
    pub weakly_centered: PropertyReport,
    pub bounded: PropertyReport,
    pub density_inequality: PropertyReport,
    /// Largest `|lhs − rhs| / max(1, magnitude)` of the affine reduction over
    /// the samples; present for affine `ρ` in one dimension.
    pub reduction_error: Option<f64>,
}

pub fn gauss(params: &GaussParams) -> Result<GaussReport> {
    let rho = EntireSeriesDensity::new(params.coefficients.clone(), params.is_polynomial)?;
    let sys = LinearSystem::euclidean(DMatrix::identity(params.dim, params.dim) * params.alpha)?;
    let flag = weakly_centered_flag(&sys, &rho);
    let density_inequality = check_sad06(&sys, &rho, params.samples, params.seed, params.half_width)?;
    let reduction_error = (params.dim == 1 && params.coefficients.len() == 2)
        .then(|| -> Result<f64> {
            let (b, a) = (params.coefficients[0], params.coefficients[1]);
            let points = sample_points(1, params.samples, params.seed, params.half_width)?;
            Ok(points
                .iter()
                .map(|p| {
                    let (lhs, rhs, magnitude) = affine_reduction(a, b, params.alpha, p[0] * p[0]);
                    (lhs - rhs).abs() / magnitude.max(1.0)
                })
                .fold(0.0, f64::max))
        })
        .transpose()?;
    Ok(GaussReport {
        params: params.clone(),
        inverse_norm: flag.inverse_norm,
        weakly_centered: flag.report,
        bounded: is_bounded(&sys, &rho),
        density_inequality,
        reduction_error,
    })
}

impl fmt::Display for GaussReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        writeln!(
            f,
            "alpha {}  coefficients {:?}  polynomial {}  dim {}  samples {}  seed {}  box [-{hw}, {hw}]",
            p.alpha,
            p.coefficients,
            p.is_polynomial,
            p.dim,
            p.samples,
            p.seed,
            hw = p.half_width
        )?;
        writeln!(f, "{:<28} {:.9}", "inverse_norm", self.inverse_norm)?;
        for r in [&self.weakly_centered, &self.bounded, &self.density_inequality] {
            writeln!(f, "{}", property_line(r))?;
        }
        if let Some(e) = self.reduction_error {
            writeln!(f, "{:<28} {e:.3e}", "reduction_error")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{DiscreteMeasureSpace, ScalarField};

    fn identity(n: usize) -> WcoSystem {
        WcoSystem::new(DiscreteMeasureSpace::counting(n).unwrap(), (0..n).collect(), ScalarField::from_real(&vec![1.0; n]))
            .unwrap()
    }

    #[test]
    fn identity_system_satisfies_everything() {
        let report = analyze(&identity(3), 1e-9).unwrap();
        assert!(report.properties.iter().all(|p| p.verdict), "{report}");
        assert!(report.rows.iter().all(|r| r.h == 1.0 && r.conditional_h == 1.0));
        assert_eq!(report.norm, 1.0);
        assert_eq!(report.properties.len(), 9);
    }

    #[test]
    fn oracle_agrees_on_identity() {
        let report = oracle(&identity(4), 1e-9).unwrap();
        assert!(report.all_agree(), "{report}");
        assert_eq!(report.rank, 4);
        assert!((report.matrix_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_mentions_every_property() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![0, 0, 1], ScalarField::from_real(&[1.0, 2.0, 1.0]))
            .unwrap();
        let report = analyze(&sys, 1e-9).unwrap();
        let text = report.to_string();
        for p in &report.properties {
            assert!(text.contains(&p.property.to_string()));
        }
        assert!(!report.properties[0].verdict);
        assert!(text.contains("fails"));
    }

    #[test]
    fn kernel_system_yields_verified_subspace() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2).unwrap(), vec![0, 0], ScalarField::from_real(&[1.0, 0.0])).unwrap();
        let report = invariant(&sys, 1e-9).unwrap();
        assert!(matches!(report.search, InvariantSearch::Found { .. }));
        assert!(report.verification.unwrap().verdict);
    }

    #[test]
    fn gauss_report_in_one_dimension() {
        let params = GaussParams {
            alpha: 2.0,
            coefficients: vec![0.5, 2.0],
            is_polynomial: true,
            dim: 1,
            samples: 200,
            seed: 42,
            half_width: 10.0,
        };
        let report = gauss(&params).unwrap();
        assert!(report.density_inequality.verdict && report.bounded.verdict);
        assert!(report.reduction_error.unwrap() <= 1e-12);
        assert!((report.inverse_norm - 0.5).abs() < 1e-12);
    }
}
