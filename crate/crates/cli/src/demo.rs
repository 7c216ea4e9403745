//! Built-in examples: the two-branch tree, the tree with a zero-weight leaf, the shifted
//! window growth table, the one-dimensional Gaussian case and a 2-atom
//! system with a kernel.

use std::fmt;

use clap::ValueEnum;
use num_complex::Complex64;
use serde::Serialize;
use wco_core::analysis::{self, AnalysisReport, GaussParams, GaussReport, InvariantReport, TreeReport};
use wco_core::gaussian_example::DEFAULT_BOX;
use wco_core::invariant_subspaces::{aluthge_domain_gap, GrowthRow};
use wco_core::tree_shifts::{build_zero_leaf_tree, build_t2infty, tree_to_wco};
use wco_core::{DiscreteMeasureSpace, ScalarField, WcoSystem};

use crate::CliError;

/// Depth of the truncated trees.
pub const TREE_DEPTH: usize = 4;
pub const GROWTH_WINDOW: usize = 20;
pub const GAUSS_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoName {
    #[value(name = "blackblack")]
    Blackblack,
    #[value(name = "blackblackplus")]
    Blackblackplus,
    #[value(name = "rudy")]
    Rudy,
    #[value(name = "gauss1d")]
    Gauss1d,
    #[value(name = "kernel2")]
    Kernel2,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub demo: DemoName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<InvariantReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gauss: Option<GaussReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<Vec<GrowthRow>>,
}

impl DemoReport {
    fn new(demo: DemoName) -> Self {
        Self { demo, tree: None, analysis: None, invariant: None, gauss: None, growth: None }
    }
}

pub fn run(name: DemoName, alpha: f64, seed: u64, tol: f64) -> Result<DemoReport, CliError> {
    let mut report = DemoReport::new(name);
    match name {
        DemoName::Blackblack | DemoName::Blackblackplus => {
            let (shift, interior_only) = if name == DemoName::Blackblack {
                (build_t2infty(Complex64::new(alpha, 0.0), TREE_DEPTH)?, true)
            } else {
                (build_zero_leaf_tree(TREE_DEPTH)?, false)
            };
            report.tree = Some(analysis::analyze_tree(&shift, interior_only, tol));
            report.analysis = Some(analysis::analyze(&tree_to_wco(&shift), tol)?);
        }
        DemoName::Rudy => report.growth = Some(aluthge_domain_gap(GROWTH_WINDOW)?),
        DemoName::Gauss1d => {
            let params = GaussParams {
                alpha: 2.0,
                coefficients: vec![0.5, 2.0],
                is_polynomial: true,
                dim: 1,
                samples: GAUSS_SAMPLES,
                seed,
                half_width: DEFAULT_BOX,
            };
            report.gauss = Some(analysis::gauss(&params)?);
        }
        DemoName::Kernel2 => {
            let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2)?, vec![0, 0], ScalarField::from_real(&[1.0, 0.0]))?;
            report.invariant = Some(analysis::invariant(&sys, tol)?);
            report.analysis = Some(analysis::analyze(&sys, tol)?);
        }
    }
    Ok(report)
}

impl fmt::Display for DemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self.demo).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        writeln!(f, "demo {name}")?;
        if let Some(t) = &self.tree {
            writeln!(f, "\n[tree]\n{t}")?;
        }
        if let Some(i) = &self.invariant {
            writeln!(f, "\n[invariant]\n{i}")?;
        }
        if let Some(a) = &self.analysis {
            writeln!(f, "\n[analysis]\n{a}")?;
        }
        if let Some(g) = &self.gauss {
            writeln!(f, "\n[gauss]\n{g}")?;
        }
        if let Some(rows) = &self.growth {
            writeln!(f, "\n[growth]\n{:>4} {:>8} {:>14} {:>18} {:>14}", "n", "atom", "sqrt_h", "pulled_back_mean", "ratio")?;
            for r in rows {
                writeln!(f, "{:>4} {:>8} {:>14.6} {:>18.6} {:>14.6}", r.n, r.atom, r.sqrt_h, r.pulled_back_mean, r.ratio)?;
            }
        }
        Ok(())
    }
}
