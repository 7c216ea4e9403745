//! Weighted composition systems `f ↦ w·(f∘φ)` on a finite discrete space,
//! together with the weighted measure `μ_w`, the Radon–Nikodym derivative
//! `h` of `μ_w∘φ⁻¹` and the conditional expectation onto `φ⁻¹(2^X)`.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{input_err, Result};
use crate::measure_space::{AeContext, DiscreteMeasureSpace, Density, ScalarField};

/// A transformation `φ` and weight `w` over a measure space.
#[derive(Debug, Clone, PartialEq)]
pub struct WcoSystem {
    space: DiscreteMeasureSpace,
    phi: Vec<usize>,
    w: ScalarField,
}

impl WcoSystem {
    pub fn new(space: DiscreteMeasureSpace, phi: Vec<usize>, w: ScalarField) -> Result<Self> {
        space.check_len("phi", phi.len())?;
        space.check_len("weight", w.len())?;
        if let Some(x) = phi.iter().position(|&z| z >= space.len()) {
            return input_err(format!(
                "phi sends `{}` to index {} outside the space",
                space.id(x),
                phi[x]
            ));
        }
        if let Some(x) = w.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return input_err(format!("weight at `{}` is not finite", space.id(x)));
        }
        let sys = Self { space, phi, w };
        if !sys.radon_nikodym_values().iter().all(|v| v.is_finite()) {
            return input_err("the Radon-Nikodym derivative overflows; rescale the weights");
        }
        Ok(sys)
    }

    /// Builds a system from atom ids: `phi` lists `(x, φ(x))` pairs, and
    /// weights missing from `w` default to zero.
    pub fn from_ids(
        space: DiscreteMeasureSpace,
        phi: &[(&str, &str)],
        w: &[(&str, Complex64)],
    ) -> Result<Self> {
        let mut map = vec![None; space.len()];
        for (x, z) in phi {
            map[space.index_of(x)?] = Some(space.index_of(z)?);
        }
        let phi = map
            .iter()
            .enumerate()
            .map(|(x, z)| z.ok_or_else(|| crate::WcoError::Input(format!("phi is missing atom `{}`", space.id(x)))))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = vec![Complex64::new(0.0, 0.0); space.len()];
        for (x, v) in w {
            weights[space.index_of(x)?] = *v;
        }
        Self::new(space, phi, ScalarField(weights))
    }

    pub fn space(&self) -> &DiscreteMeasureSpace {
        &self.space
    }

    pub fn phi(&self) -> &[usize] {
        &self.phi
    }

    pub fn w(&self) -> &ScalarField {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn with_weight(&self, w: ScalarField) -> Result<Self> {
        Self::new(self.space.clone(), self.phi.clone(), w)
    }

    pub fn with_space(&self, space: DiscreteMeasureSpace) -> Result<Self> {
        Self::new(space, self.phi.clone(), self.w.clone())
    }

    /// `w ↦ c·w`.
    pub fn scale_weight(&self, c: Complex64) -> Result<Self> {
        self.with_weight(self.w.iter().map(|v| v * c).collect())
    }

    /// Atom masses of `μ_w`: `|w(x)|² μ({x})`.
    pub fn weighted_masses(&self) -> Vec<f64> {
        self.w
            .iter()
            .zip(self.space.atoms())
            .map(|(v, a)| v.norm_sqr() * a.mass)
            .collect()
    }

    /// "a.e. [μ_w]" comparisons.
    pub fn weighted_ae(&self) -> AeContext {
        AeContext::with_density(&self.space, &self.w.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>())
            .expect("weights are finite")
    }

    pub fn fibers(&self) -> FiberPartition {
        let mut fibers = vec![Vec::new(); self.len()];
        for (y, &z) in self.phi.iter().enumerate() {
            fibers[z].push(y);
        }
        FiberPartition { fibers }
    }

    pub(crate) fn radon_nikodym_values(&self) -> Vec<f64> {
        let mut pushed = vec![0.0; self.len()];
        for (y, m) in self.weighted_masses().into_iter().enumerate() {
            pushed[self.phi[y]] += m;
        }
        pushed
            .iter()
            .zip(self.space.atoms())
            .map(|(p, a)| p / a.mass)
            .collect()
    }

    /// The atoms of `μ_w` (where `w ≠ 0`).
    pub fn weighted_support(&self) -> impl Iterator<Item = usize> + '_ {
        self.w.iter().enumerate().filter(|(_, v)| v.norm_sqr() > 0.0).map(|(x, _)| x)
    }
}

/// The fibers `φ⁻¹({z})`, indexed by `z`; each list is in atom order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberPartition {
    fibers: Vec<Vec<usize>>,
}

impl FiberPartition {
    pub fn fiber(&self, z: usize) -> &[usize] {
        &self.fibers[z]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize])> {
        self.fibers.iter().enumerate().map(|(z, f)| (z, f.as_slice()))
    }

    /// Nonempty fibers only; these are the atoms of `φ⁻¹(2^X)`.
    pub fn blocks(&self) -> impl Iterator<Item = &[usize]> {
        self.fibers.iter().filter(|f| !f.is_empty()).map(|f| f.as_slice())
    }
}

/// `h = d(μ_w∘φ⁻¹)/dμ` and its support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadonNikodymData {
    pub h: Density,
    pub support: BTreeSet<usize>,
}

pub fn radon_nikodym(sys: &WcoSystem) -> RadonNikodymData {
    let h = sys.radon_nikodym_values();
    let support = h.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(x, _)| x).collect();
    RadonNikodymData { h: Density(h), support }
}

/// `μ_w`-weighted average of `f` over each fiber, pulled back along `φ`;
/// zero on fibers of `μ_w`-mass zero.
pub fn conditional_expectation(sys: &WcoSystem, f: &[Complex64]) -> Result<ScalarField> {
    sys.space().check_len("function", f.len())?;
    let averages = fiber_averages(sys, f);
    Ok(sys.phi().iter().map(|&z| averages[z]).collect())
}

/// The function `g` with `g∘φ = E(f)` a.e. `[μ_w]`, set to zero on `{h = 0}`.
pub fn cond_exp_pullback(sys: &WcoSystem, f: &[Complex64]) -> Result<ScalarField> {
    sys.space().check_len("function", f.len())?;
    Ok(ScalarField(fiber_averages(sys, f)))
}

/// Real-valued conditional expectation, for densities such as `h`.
pub fn conditional_expectation_real(sys: &WcoSystem, f: &[f64]) -> Result<Vec<f64>> {
    let g = conditional_expectation(sys, &ScalarField::from_real(f))?;
    Ok(g.iter().map(|v| v.re).collect())
}

pub fn cond_exp_pullback_real(sys: &WcoSystem, f: &[f64]) -> Result<Vec<f64>> {
    let g = cond_exp_pullback(sys, &ScalarField::from_real(f))?;
    Ok(g.iter().map(|v| v.re).collect())
}

fn fiber_averages(sys: &WcoSystem, f: &[Complex64]) -> Vec<Complex64> {
    let n = sys.len();
    let mut mass = vec![0.0; n];
    let mut total = vec![Complex64::new(0.0, 0.0); n];
    for (y, m) in sys.weighted_masses().into_iter().enumerate() {
        let z = sys.phi()[y];
        mass[z] += m;
        total[z] += f[y] * m;
    }
    total
        .into_iter()
        .zip(mass)
        .map(|(t, m)| if m > 0.0 { t / m } else { Complex64::new(0.0, 0.0) })
        .collect()
}

/// `‖C_{φ,w}‖ = √(max h)`.
pub fn operator_norm(sys: &WcoSystem) -> f64 {
    radon_nikodym(sys).h.ess_sup().sqrt()
}

/// `(φ∘φ, w·(w∘φ))`, the system of `C²`.
pub fn compose_square(sys: &WcoSystem) -> WcoSystem {
    let phi: Vec<usize> = sys.phi().iter().map(|&z| sys.phi()[z]).collect();
    let w: ScalarField = (0..sys.len()).map(|x| sys.w()[x] * sys.w()[sys.phi()[x]]).collect();
    WcoSystem::new(sys.space().clone(), phi, w).expect("products of finite weights of a valid system")
}

/// `f_w = χ_{w≠0}·f/w`.
pub fn weight_quotient(sys: &WcoSystem, f: &[Complex64]) -> Result<ScalarField> {
    sys.space().check_len("function", f.len())?;
    Ok(f.iter()
        .zip(sys.w().iter())
        .map(|(v, w)| if w.norm_sqr() > 0.0 { v / w } else { Complex64::new(0.0, 0.0) })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct SystemIn {
    space: DiscreteMeasureSpace,
    phi: HashMap<String, String>,
    #[serde(default)]
    w: HashMap<String, Complex64>,
}

impl<'de> Deserialize<'de> for WcoSystem {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let raw = SystemIn::deserialize(de)?;
        let space = raw.space;
        let mut phi = vec![None; space.len()];
        for (x, z) in &raw.phi {
            let x = space.index_of(x).map_err(D::Error::custom)?;
            phi[x] = Some(space.index_of(z).map_err(D::Error::custom)?);
        }
        let phi = phi
            .iter()
            .enumerate()
            .map(|(x, z)| z.ok_or_else(|| D::Error::custom(format!("phi is missing atom `{}`", space.id(x)))))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut w = vec![Complex64::new(0.0, 0.0); space.len()];
        for (x, v) in &raw.w {
            w[space.index_of(x).map_err(D::Error::custom)?] = *v;
        }
        WcoSystem::new(space, phi, ScalarField(w)).map_err(D::Error::custom)
    }
}

/// Serializes a per-atom list as a JSON object keyed by atom id, in atom order.
pub(crate) struct ByAtom<'a, T>(pub &'a DiscreteMeasureSpace, pub &'a [T]);

impl<T: Serialize> Serialize for ByAtom<'_, T> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.1.len()))?;
        for (x, v) in self.1.iter().enumerate() {
            map.serialize_entry(self.0.id(x), v)?;
        }
        map.end()
    }
}

impl Serialize for WcoSystem {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let targets: Vec<&str> = self.phi.iter().map(|&z| self.space.id(z)).collect();
        let mut map = ser.serialize_map(Some(3))?;
        map.serialize_entry("space", &self.space)?;
        map.serialize_entry("phi", &ByAtom(&self.space, &targets))?;
        map.serialize_entry("w", &ByAtom(&self.space, &self.w))?;
        map.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{approx_eq, approx_eq_complex, push_forward_measure};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn identity(masses: &[f64], w: &[f64]) -> WcoSystem {
        let space = DiscreteMeasureSpace::from_masses(masses).unwrap();
        WcoSystem::new(space, (0..masses.len()).collect(), ScalarField::from_real(w)).unwrap()
    }

    fn sample_system() -> WcoSystem {
        let space = DiscreteMeasureSpace::from_masses(&[1.0, 0.5, 2.0, 3.0, 0.25]).unwrap();
        let w = ScalarField(vec![
            Complex64::new(1.0, 0.5),
            Complex64::new(0.0, 2.0),
            c(0.0),
            Complex64::new(-0.7, 0.1),
            c(1.3),
        ]);
        WcoSystem::new(space, vec![1, 1, 0, 0, 3], w).unwrap()
    }

    #[test]
    fn identity_has_unit_density() {
        let sys = identity(&[0.3, 2.0, 7.0], &[1.0, 1.0, 1.0]);
        assert_eq!(radon_nikodym(&sys).h.0, vec![1.0, 1.0, 1.0]);
        assert_eq!(operator_norm(&sys), 1.0);
    }

    #[test]
    fn density_matches_push_forward_on_every_subset() {
        let sys = sample_system();
        let rn = radon_nikodym(&sys);
        let dens: Vec<f64> = sys.w().iter().map(|v| v.norm_sqr()).collect();
        let n = sys.len();
        for mask in 0u32..(1 << n) {
            let ids: Vec<&str> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| sys.space().id(i)).collect();
            let direct = push_forward_measure(sys.space(), sys.phi(), &dens, ids.iter().copied()).unwrap();
            let via_h: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| rn.h[i] * sys.space().mass(i))
                .sum();
            assert!(approx_eq(direct, via_h, 1e-12), "mask {mask}: {direct} vs {via_h}");
        }
    }

    #[test]
    fn expectation_on_two_point_fiber() {
        // μ_w-masses 1 and 3 on the fiber {a, b}.
        let space = DiscreteMeasureSpace::from_masses(&[1.0, 3.0]).unwrap();
        let sys = WcoSystem::new(space, vec![0, 0], ScalarField::from_real(&[1.0, 1.0])).unwrap();
        let e = conditional_expectation(&sys, &[c(4.0), c(0.0)]).unwrap();
        assert_eq!(e.0, vec![c(1.0), c(1.0)]);
    }

    #[test]
    fn expectation_is_identity_for_injective_maps() {
        let space = DiscreteMeasureSpace::from_masses(&[1.0, 2.0, 3.0]).unwrap();
        let sys = WcoSystem::new(space, vec![2, 0, 1], ScalarField::from_real(&[1.0, -2.0, 0.5])).unwrap();
        let f = [c(3.0), Complex64::new(1.0, -1.0), c(-7.0)];
        assert_eq!(conditional_expectation(&sys, &f).unwrap().0, f.to_vec());
        let g = cond_exp_pullback(&sys, &f).unwrap();
        for y in 0..3 {
            assert!(approx_eq_complex(g[sys.phi()[y]], f[y], 1e-14));
        }
    }

    #[test]
    fn expectation_fixes_constants_where_defined() {
        let sys = sample_system();
        let k = Complex64::new(2.0, -1.0);
        let e = conditional_expectation(&sys, &[k; 5]).unwrap();
        let rn = radon_nikodym(&sys);
        for x in 0..5 {
            if rn.h[sys.phi()[x]] > 0.0 {
                assert!(approx_eq_complex(e[x], k, 1e-14));
            } else {
                assert_eq!(e[x], c(0.0));
            }
        }
        let g = cond_exp_pullback(&sys, &[c(1.0); 5]).unwrap();
        for x in 0..5 {
            let expected = if rn.support.contains(&x) { 1.0 } else { 0.0 };
            assert!(approx_eq(g[x].re, expected, 1e-14));
        }
    }

    #[test]
    fn pullback_composes_back_to_expectation() {
        let sys = sample_system();
        let f: Vec<Complex64> = (0..5).map(|i| Complex64::new(i as f64, 1.0 - i as f64)).collect();
        let e = conditional_expectation(&sys, &f).unwrap();
        let g = cond_exp_pullback(&sys, &f).unwrap();
        let g_phi: Vec<Complex64> = sys.phi().iter().map(|&z| g[z]).collect();
        assert!(sys.weighted_ae().ae_equal(&g_phi, &e, 1e-13));
    }

    #[test]
    fn norm_of_zero_weight_is_zero() {
        let sys = identity(&[1.0, 2.0], &[0.0, 0.0]);
        assert_eq!(operator_norm(&sys), 0.0);
    }

    #[test]
    fn square_of_identity_squares_weight() {
        let space = DiscreteMeasureSpace::counting(2).unwrap();
        let w = ScalarField(vec![Complex64::new(1.0, 1.0), c(-3.0)]);
        let sys = WcoSystem::new(space, vec![0, 1], w).unwrap();
        let sq = compose_square(&sys);
        assert_eq!(sq.phi(), &[0, 1]);
        assert_eq!(sq.w().0, vec![Complex64::new(0.0, 2.0), c(9.0)]);
    }

    #[test]
    fn square_density_chain_rule() {
        // h_{φ²}∘φ = E(h)·(h∘φ) a.e. [μ_w]
        let sys = sample_system();
        let h = radon_nikodym(&sys).h;
        let h2 = radon_nikodym(&compose_square(&sys)).h;
        let eh = conditional_expectation_real(&sys, &h).unwrap();
        let lhs: Vec<f64> = sys.phi().iter().map(|&z| h2[z]).collect();
        let rhs: Vec<f64> = (0..sys.len()).map(|x| eh[x] * h[sys.phi()[x]]).collect();
        assert!(sys.weighted_ae().ae_equal_real(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn weight_quotient_vanishes_off_support() {
        let sys = sample_system();
        let q = weight_quotient(&sys, sys.w()).unwrap();
        for x in 0..5 {
            let expected = if sys.w()[x].norm_sqr() > 0.0 { 1.0 } else { 0.0 };
            assert!(approx_eq_complex(q[x], c(expected), 1e-14));
        }
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let text = r#"{"space":{"atoms":[{"id":"a","mass":1.0},{"id":"b","mass":2.0}]},
                       "phi":{"a":"a","b":"a"},"w":{"b":[0.5,-1.0]}}"#;
        let sys: WcoSystem = serde_json::from_str(text).unwrap();
        assert_eq!(sys.phi(), &[0, 0]);
        assert_eq!(sys.w().0, vec![c(0.0), Complex64::new(0.5, -1.0)]);
        let back: WcoSystem = serde_json::from_str(&serde_json::to_string(&sys).unwrap()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn json_rejects_bad_references() {
        let missing = r#"{"space":{"atoms":[{"id":"a","mass":1.0},{"id":"b","mass":1.0}]},"phi":{"a":"a"}}"#;
        assert!(serde_json::from_str::<WcoSystem>(missing).is_err());
        let unknown = r#"{"space":{"atoms":[{"id":"a","mass":1.0}]},"phi":{"a":"q"}}"#;
        assert!(serde_json::from_str::<WcoSystem>(unknown).is_err());
    }

    #[test]
    fn image_of_weighted_atom_has_positive_density() {
        let sys = sample_system();
        let h = radon_nikodym(&sys).h;
        for y in sys.weighted_support() {
            assert!(h[sys.phi()[y]] > 0.0);
        }
    }
}
