//! Finite discrete measure spaces and scalar functions on them.
//!
//! Every subset of the atom set is measurable and every atom carries a
//! strictly positive mass, so `μ`-null sets are empty. Derived measures
//! such as `μ_w` can have null atoms; "almost everywhere" statements
//! against them go through [`AeContext`].

use std::collections::{BTreeSet, HashMap};
use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result, WcoError};

/// Relative tolerance used when none is given explicitly.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn approx_eq_complex(a: Complex64, b: Complex64, tol: f64) -> bool {
    (a - b).norm() <= tol * 1f64.max(a.norm()).max(b.norm())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: String,
    pub mass: f64,
}

/// `(X, 2^X, μ)` with finitely many atoms of positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct DiscreteMeasureSpace {
    atoms: Vec<Atom>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    atoms: Vec<Atom>,
}

impl TryFrom<SpaceRepr> for DiscreteMeasureSpace {
    type Error = WcoError;
    fn try_from(repr: SpaceRepr) -> Result<Self> {
        DiscreteMeasureSpace::new(repr.atoms)
    }
}

impl From<DiscreteMeasureSpace> for SpaceRepr {
    fn from(space: DiscreteMeasureSpace) -> Self {
        SpaceRepr { atoms: space.atoms }
    }
}

impl DiscreteMeasureSpace {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return input_err("a measure space needs at least one atom");
        }
        let mut index = HashMap::with_capacity(atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            if !(atom.mass.is_finite() && atom.mass > 0.0) {
                return input_err(format!(
                    "atom `{}` has mass {}; masses must be finite and > 0",
                    atom.id, atom.mass
                ));
            }
            if index.insert(atom.id.clone(), i).is_some() {
                return input_err(format!("duplicate atom id `{}`", atom.id));
            }
        }
        Ok(Self { atoms, index })
    }

    /// Atoms named `"0"`, `"1"`, ... with the given masses.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        Self::new(
            masses
                .iter()
                .enumerate()
                .map(|(i, &mass)| Atom { id: i.to_string(), mass })
                .collect(),
        )
    }

    pub fn counting(n: usize) -> Result<Self> {
        Self::from_masses(&vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mass(&self, x: usize) -> f64 {
        self.atoms[x].mass
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }

    pub fn id(&self, x: usize) -> &str {
        &self.atoms[x].id
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| WcoError::UnknownAtom(id.to_string()))
    }

    /// Resolves a set of atom ids to sorted, deduplicated indices.
    pub fn resolve<'a, I>(&self, ids: I) -> Result<BTreeSet<usize>>
    where
        I: IntoIterator<Item = &'a str>,
    {
        ids.into_iter().map(|id| self.index_of(id)).collect()
    }

    /// The same atoms with every mass multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.atoms
                .iter()
                .map(|a| Atom { id: a.id.clone(), mass: a.mass * c })
                .collect(),
        )
    }

    pub(crate) fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return input_err(format!(
                "{what} has {len} values but the space has {} atoms",
                self.len()
            ));
        }
        Ok(())
    }
}

/// A complex function on the atoms, stored in atom order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField(pub Vec<Complex64>);

/// A nonnegative real function on the atoms (densities, `h`, `|w|²`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Density(pub Vec<f64>);

impl ScalarField {
    pub fn constant(n: usize, c: Complex64) -> Self {
        Self(vec![c; n])
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

impl Density {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// At a finite space every value is finite; kept for callers that
    /// handle extended-real densities.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Essential supremum with respect to `μ` (all atoms have positive mass).
    pub fn ess_sup(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn as_field(&self) -> ScalarField {
        ScalarField::from_real(&self.0)
    }
}

macro_rules! vec_newtype {
    ($name:ty, $elem:ty) => {
        impl Deref for $name {
            type Target = [$elem];
            fn deref(&self) -> &[$elem] {
                &self.0
            }
        }
        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [$elem] {
                &mut self.0
            }
        }
        impl From<Vec<$elem>> for $name {
            fn from(v: Vec<$elem>) -> Self {
                Self(v)
            }
        }
        impl FromIterator<$elem> for $name {
            fn from_iter<I: IntoIterator<Item = $elem>>(iter: I) -> Self {
                Self(iter.into_iter().collect())
            }
        }
    };
}

vec_newtype!(ScalarField, Complex64);
vec_newtype!(Density, f64);

/// `Σ_{x ∈ subset} f(x) μ({x})`.
pub fn integrate<'a, I>(space: &DiscreteMeasureSpace, f: &[Complex64], subset: I) -> Result<Complex64>
where
    I: IntoIterator<Item = &'a str>,
{
    space.check_len("integrand", f.len())?;
    let idx = space.resolve(subset)?;
    Ok(idx.into_iter().map(|x| f[x] * space.mass(x)).sum())
}

/// `ν(φ^{-1}(target))` where `dν = weight_density · dμ`, summed straight
/// from the definition.
pub fn push_forward_measure<'a, I>(
    space: &DiscreteMeasureSpace,
    phi: &[usize],
    weight_density: &[f64],
    target: I,
) -> Result<f64>
where
    I: IntoIterator<Item = &'a str>,
{
    space.check_len("phi", phi.len())?;
    space.check_len("weight density", weight_density.len())?;
    if let Some(&bad) = phi.iter().find(|&&z| z >= space.len()) {
        return input_err(format!("phi maps to index {bad} outside the space"));
    }
    if let Some(&bad) = weight_density.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return input_err(format!("weight density value {bad} is not a finite nonnegative number"));
    }
    let target = space.resolve(target)?;
    Ok(push_forward_indices(space, phi, weight_density, &target))
}

pub(crate) fn push_forward_indices(
    space: &DiscreteMeasureSpace,
    phi: &[usize],
    weight_density: &[f64],
    target: &BTreeSet<usize>,
) -> f64 {
    (0..space.len())
        .filter(|y| target.contains(&phi[*y]))
        .map(|y| weight_density[y] * space.mass(y))
        .sum()
}

/// Reference measure for "a.e. [ν]" comparisons, given atom by atom.
#[derive(Debug, Clone, PartialEq)]
pub struct AeContext {
    reference_weights: Vec<f64>,
}

impl AeContext {
    pub fn new(space: &DiscreteMeasureSpace, reference_weights: Vec<f64>) -> Result<Self> {
        space.check_len("reference weights", reference_weights.len())?;
        if reference_weights.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return input_err("reference weights must be finite and nonnegative");
        }
        Ok(Self { reference_weights })
    }

    /// `ν = μ` itself.
    pub fn of_measure(space: &DiscreteMeasureSpace) -> Self {
        Self { reference_weights: space.masses() }
    }

    /// `dν = density · dμ`.
    pub fn with_density(space: &DiscreteMeasureSpace, density: &[f64]) -> Result<Self> {
        space.check_len("density", density.len())?;
        Self::new(
            space,
            density.iter().zip(space.atoms()).map(|(d, a)| d * a.mass).collect(),
        )
    }

    pub fn is_atom(&self, x: usize) -> bool {
        self.reference_weights[x] > 0.0
    }

    pub fn atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.reference_weights.len()).filter(|&x| self.is_atom(x))
    }

    /// First atom of positive `ν`-mass where `f` and `g` differ beyond `tol`.
    pub fn first_difference(&self, f: &[Complex64], g: &[Complex64], tol: f64) -> Option<usize> {
        self.atoms().find(|&x| !approx_eq_complex(f[x], g[x], tol))
    }

    pub fn ae_equal(&self, f: &[Complex64], g: &[Complex64], tol: f64) -> bool {
        self.first_difference(f, g, tol).is_none()
    }

    pub fn ae_equal_real(&self, f: &[f64], g: &[f64], tol: f64) -> bool {
        self.atoms().all(|x| approx_eq(f[x], g[x], tol))
    }
}
