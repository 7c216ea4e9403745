//! Closed-form weights for the polar decomposition, the α-Aluthge
//! transform and its phase, and the projection `P f = w·E(f_w)`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{input_err, Result};
use crate::measure_space::{Density, ScalarField};
use crate::wco_model::{conditional_expectation, conditional_expectation_real, radon_nikodym, weight_quotient, WcoSystem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Phase weight `w̃ = w/√(h∘φ)` and modulus `|C| = M_{√h}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarData {
    pub phase_weight: ScalarField,
    pub modulus_density: Density,
}

pub fn polar(sys: &WcoSystem) -> PolarData {
    let h = radon_nikodym(sys).h;
    let phase_weight = (0..sys.len())
        .map(|x| {
            let w = sys.w()[x];
            let hz = h[sys.phi()[x]];
            if w.norm_sqr() > 0.0 && hz > 0.0 {
                w / hz.sqrt()
            } else {
                ZERO
            }
        })
        .collect();
    PolarData {
        phase_weight,
        modulus_density: h.iter().map(|v| v.sqrt()).collect(),
    }
}

/// The system whose operator is the phase of `C_{φ,w}`.
pub fn phase_system(sys: &WcoSystem) -> WcoSystem {
    sys.with_weight(polar(sys).phase_weight).expect("phase weights are bounded by construction")
}

/// `w_α` and the phase weight of `C_{φ,w_α}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AluthgeWeights {
    pub alpha: f64,
    pub w_alpha: ScalarField,
    pub phase_weight: ScalarField,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return input_err(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    Ok(())
}

pub fn aluthge_weight(sys: &WcoSystem, alpha: f64) -> Result<AluthgeWeights> {
    check_alpha(alpha)?;
    let h = radon_nikodym(sys).h;
    let h_alpha: Vec<f64> = h.iter().map(|v| v.powf(alpha)).collect();
    let e_alpha = conditional_expectation_real(sys, &h_alpha)?;
    let mut w_alpha = Vec::with_capacity(sys.len());
    let mut phase_weight = Vec::with_capacity(sys.len());
    for x in 0..sys.len() {
        let w = sys.w()[x];
        let hz = h[sys.phi()[x]];
        if w.norm_sqr() == 0.0 || hz == 0.0 {
            w_alpha.push(ZERO);
            phase_weight.push(ZERO);
            continue;
        }
        w_alpha.push(w * (h[x] / hz).powf(alpha / 2.0));
        phase_weight.push(if e_alpha[x] > 0.0 {
            w / hz.sqrt() * h_alpha[x].sqrt() / e_alpha[x].sqrt()
        } else {
            ZERO
        });
    }
    Ok(AluthgeWeights {
        alpha,
        w_alpha: ScalarField(w_alpha),
        phase_weight: ScalarField(phase_weight),
    })
}

/// The system of `Δ_α(C_{φ,w})`.
pub fn aluthge_system(sys: &WcoSystem, alpha: f64) -> Result<WcoSystem> {
    sys.with_weight(aluthge_weight(sys, alpha)?.w_alpha)
}

/// `P f = w·E(f_w)`.
pub fn projection_p(sys: &WcoSystem, f: &[Complex64]) -> Result<ScalarField> {
    let fw = weight_quotient(sys, f)?;
    let e = conditional_expectation(sys, &fw)?;
    Ok(e.iter().zip(sys.w().iter()).map(|(e, w)| w * e).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure_space::{approx_eq, approx_eq_complex, DiscreteMeasureSpace};

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

    #[test]
    fn polar_of_zero_weight() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(3).unwrap(), vec![1, 2, 0], ScalarField::from_real(&[0.0; 3])).unwrap();
        let p = polar(&sys);
        assert!(p.phase_weight.iter().all(|v| *v == c(0.0)));
        assert!(p.modulus_density.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn polar_of_scalar_identity() {
        let sys = WcoSystem::new(DiscreteMeasureSpace::from_masses(&[1.0, 3.0]).unwrap(), vec![0, 1], ScalarField::from_real(&[2.0, 2.0])).unwrap();
        assert_eq!(radon_nikodym(&sys).h.0, vec![4.0, 4.0]);
        let p = polar(&sys);
        assert_eq!(p.phase_weight.0, vec![c(1.0), c(1.0)]);
        assert_eq!(p.modulus_density.0, vec![2.0, 2.0]);
    }

    #[test]
    fn phase_is_partial_isometry_density() {
        let sys = sample();
        let h = radon_nikodym(&sys).h;
        let ht = radon_nikodym(&phase_system(&sys)).h;
        for x in 0..sys.len() {
            let expected = if h[x] > 0.0 { 1.0 } else { 0.0 };
            assert!(approx_eq(ht[x], expected, 1e-13), "atom {x}: {}", ht[x]);
        }
    }

    #[test]
    fn aluthge_rejects_bad_alpha() {
        let sys = sample();
        assert!(aluthge_weight(&sys, 0.0).is_err());
        assert!(aluthge_weight(&sys, 1.5).is_err());
        assert!(aluthge_weight(&sys, -0.5).is_err());
        assert!(aluthge_weight(&sys, 1.0).is_ok());
    }

    #[test]
    fn aluthge_vanishes_with_weight() {
        let sys = sample();
        let a = aluthge_weight(&sys, 0.5).unwrap();
        for x in 0..sys.len() {
            if sys.w()[x] == c(0.0) {
                assert_eq!(a.w_alpha[x], c(0.0));
                assert_eq!(a.phase_weight[x], c(0.0));
            }
        }
    }

    #[test]
    fn aluthge_fixes_quasinormal_weights() {
        // two-cycle with equal masses: h ≡ 1 = h∘φ
        let sys = WcoSystem::new(DiscreteMeasureSpace::counting(2).unwrap(), vec![1, 0], ScalarField(vec![Complex64::new(0.6, 0.8), c(-1.0)])).unwrap();
        for alpha in [0.25, 0.5, 1.0] {
            let a = aluthge_weight(&sys, alpha).unwrap();
            assert!(sys.weighted_ae().ae_equal(&a.w_alpha, sys.w(), 1e-14));
        }
    }

    #[test]
    fn aluthge_phase_matches_phase_of_transformed_system() {
        let sys = sample();
        for alpha in [0.25, 0.5, 1.0] {
            let a = aluthge_weight(&sys, alpha).unwrap();
            let direct = polar(&sys.with_weight(a.w_alpha.clone()).unwrap()).phase_weight;
            for x in 0..sys.len() {
                assert!(approx_eq_complex(a.phase_weight[x], direct[x], 1e-12), "alpha {alpha} atom {x}");
            }
        }
    }

    #[test]
    fn projection_fixes_weight_and_is_idempotent() {
        let sys = sample();
        let pw = projection_p(&sys, sys.w()).unwrap();
        for x in 0..sys.len() {
            assert!(approx_eq_complex(pw[x], sys.w()[x], 1e-13));
        }
        let f: Vec<Complex64> = (0..sys.len()).map(|i| Complex64::new(1.0 + i as f64, (i * i) as f64 - 2.0)).collect();
        let once = projection_p(&sys, &f).unwrap();
        let twice = projection_p(&sys, &once).unwrap();
        for x in 0..sys.len() {
            assert!(approx_eq_complex(once[x], twice[x], 1e-13));
        }
    }
}
