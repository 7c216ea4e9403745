//! Seeded random systems and tree shifts for the fuzz batteries.
//!
//! Every system is drawn from its own ChaCha8 stream `(seed, index)`, so a
//! battery is reproducible element by element and independent of the order
//! in which workers pick indices up.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{input_err, Result};
use crate::measure_space::{DiscreteMeasureSpace, ScalarField};
use crate::tree_shifts::{DirectedTree, TreeShift};
use crate::wco_model::{radon_nikodym, WcoSystem};

/// Upper bound on atoms per generated system (dense oracle cost).
pub const MAX_ATOMS_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// Random map, log-uniform masses, 25% zero weights.
    Generic,
    /// Random permutation with nowhere-zero weights.
    Permutation,
    /// Generic draw rescaled fiber by fiber until `h` is fiber-constant.
    WeaklyCentered,
    /// Disjoint cycles with a constant `h` per cycle, plus optional null atoms.
    Normal,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratedSystem {
    pub index: usize,
    pub kind: SystemKind,
    pub system: WcoSystem,
}

pub fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn masses(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..=1.0))).collect()
}

fn unit_phase(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..TAU))
}

fn nonzero_weight(rng: &mut impl Rng) -> Complex64 {
    unit_phase(rng) * rng.random_range(0.5..=1.5)
}

fn generic_weights(rng: &mut impl Rng, n: usize) -> ScalarField {
    (0..n).map(|_| if rng.random_bool(0.25) { Complex64::new(0.0, 0.0) } else { nonzero_weight(rng) }).collect()
}

fn generic(rng: &mut impl Rng, n: usize) -> Result<WcoSystem> {
    let space = DiscreteMeasureSpace::from_masses(&masses(rng, n))?;
    let phi = (0..n).map(|_| rng.random_range(0..n)).collect();
    WcoSystem::new(space, phi, generic_weights(rng, n))
}

fn permutation(rng: &mut impl Rng, n: usize) -> Result<WcoSystem> {
    let space = DiscreteMeasureSpace::from_masses(&masses(rng, n))?;
    let mut phi: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        phi.swap(i, rng.random_range(0..=i));
    }
    let w = (0..n).map(|_| nonzero_weight(rng)).collect();
    WcoSystem::new(space, phi, w)
}

/// Where a fiber mixes weighted atoms with `h = 0` and `h > 0`, zero the
/// weights of the former (repeating, since that can lower `h` upstream).
/// Then scale the weights over each `φ⁻¹({x})` so that `h(x)` equals a level
/// drawn per fiber of `φ(x)`. Scaling never changes which weights vanish.
fn weakly_centered(rng: &mut impl Rng, n: usize) -> Result<WcoSystem> {
    let base = generic(rng, n)?;
    let phi = base.phi().to_vec();
    let mu = base.space().masses();
    let mut w = base.w().clone();
    loop {
        let h = radon_nikodym(&base.with_weight(w.clone())?).h;
        let mut changed = false;
        for z in 0..n {
            let weighted: Vec<usize> = (0..n).filter(|&x| phi[x] == z && w[x].norm() > 0.0).collect();
            if weighted.iter().any(|&x| h[x] > 0.0) {
                for &x in weighted.iter().filter(|&&x| h[x] == 0.0) {
                    w[x] = Complex64::new(0.0, 0.0);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let levels: Vec<f64> = (0..n).map(|_| [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)]).collect();
    let mut scale = vec![1.0; n];
    for x in 0..n {
        let mass: f64 = (0..n).filter(|&y| phi[y] == x).map(|y| w[y].norm_sqr() * mu[y]).sum::<f64>() / mu[x];
        if w[x].norm() == 0.0 || mass == 0.0 {
            continue;
        }
        scale[x] = (levels[phi[x]] / mass).sqrt();
    }
    let scaled: ScalarField = (0..n).map(|y| w[y] * scale[phi[y]]).collect();
    base.with_weight(scaled)
}

/// Disjoint cycles; on each, `|w(y)|² = c·μ(φ(y))/μ(y)` so `h ≡ c` there.
/// With probability 1/2 one or two null atoms (`w = 0`, no preimages) are
/// appended, which gives the operator a kernel.
fn normal(rng: &mut impl Rng, n: usize) -> Result<WcoSystem> {
    let nulls = if n > 2 && rng.random_bool(0.5) { rng.random_range(1..=2.min(n - 2)) } else { 0 };
    let live = n - nulls;
    let mu = masses(rng, n);
    let mut order: Vec<usize> = (0..live).collect();
    for i in (1..live).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut phi = vec![0; n];
    let mut w = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0;
    while start < live {
        let len = rng.random_range(1..=live - start);
        let cycle = &order[start..start + len];
        let level = [0.25, 1.0, 4.0][rng.random_range(0..3)];
        for (k, &y) in cycle.iter().enumerate() {
            let next = cycle[(k + 1) % len];
            phi[y] = next;
            w[y] = unit_phase(rng) * (level * mu[next] / mu[y]).sqrt();
        }
        start += len;
    }
    for image in &mut phi[live..] {
        *image = rng.random_range(0..n);
    }
    WcoSystem::new(DiscreteMeasureSpace::from_masses(&mu)?, phi, ScalarField(w))
}

/// Mode mix 40/10/25/25, size uniform in `1..=max_atoms`.
pub fn random_system(seed: u64, index: usize, max_atoms: usize) -> Result<GeneratedSystem> {
    if max_atoms == 0 || max_atoms > MAX_ATOMS_LIMIT {
        return input_err(format!("max_atoms must be in 1..={MAX_ATOMS_LIMIT}, got {max_atoms}"));
    }
    let mut rng = rng_for(seed, index);
    let n = rng.random_range(1..=max_atoms);
    let roll: f64 = rng.random();
    let (kind, system) = if roll < 0.4 {
        (SystemKind::Generic, generic(&mut rng, n)?)
    } else if roll < 0.5 {
        (SystemKind::Permutation, permutation(&mut rng, n)?)
    } else if roll < 0.75 {
        (SystemKind::WeaklyCentered, weakly_centered(&mut rng, n)?)
    } else {
        (SystemKind::Normal, normal(&mut rng, n)?)
    };
    Ok(GeneratedSystem { index, kind, system })
}

pub fn battery_systems(count: usize, seed: u64, max_atoms: usize) -> Result<Vec<GeneratedSystem>> {
    (0..count).map(|i| random_system(seed, i, max_atoms)).collect()
}

/// Random rooted tree on `2..=max_vertices` vertices (each vertex picks an
/// earlier parent). Weights are nonzero except with probability 1/5; with
/// probability 1/3 the nonzero moduli are drawn from `{1, 2}` so that
/// sibling sums tie often enough to exercise both verdicts.
pub fn random_tree_shift(seed: u64, index: usize, max_vertices: usize) -> Result<TreeShift> {
    if max_vertices < 2 {
        return input_err("a random tree needs room for at least 2 vertices");
    }
    let mut rng = rng_for(seed, index);
    let n = rng.random_range(2..=max_vertices);
    let vertices: Vec<String> = (0..n).map(|v| format!("v{v}")).collect();
    let edges: Vec<(String, String)> =
        (1..n).map(|v| (vertices[v].clone(), vertices[rng.random_range(0..v)].clone())).collect();
    let tree = DirectedTree::new(vertices, &edges, Some("v0"), &[])?;
    let discrete = rng.random_bool(1.0 / 3.0);
    let lambda = (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                Complex64::new(0.0, 0.0)
            } else if discrete {
                unit_phase(&mut rng) * [1.0, 2.0][rng.random_range(0..2)]
            } else {
                nonzero_weight(&mut rng)
            }
        })
        .collect();
    TreeShift::new(tree, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::{is_hyponormal, is_quasinormal, is_weakly_centered};

    #[test]
    fn deterministic_per_index() {
        let a = random_system(7, 13, 8).unwrap();
        let b = random_system(7, 13, 8).unwrap();
        assert_eq!(a.system, b.system);
        assert_ne!(random_system(7, 14, 8).unwrap().system, a.system);
        assert!(random_system(7, 0, 65).is_err());
    }

    #[test]
    fn every_kind_appears() {
        let all = battery_systems(200, 42, 8).unwrap();
        for kind in [SystemKind::Generic, SystemKind::Permutation, SystemKind::WeaklyCentered, SystemKind::Normal] {
            assert!(all.iter().any(|g| g.kind == kind), "{kind:?} never drawn");
        }
        assert!(all.iter().all(|g| (1..=8).contains(&g.system.len())));
    }

    #[test]
    fn constructed_kinds_have_their_property() {
        for g in battery_systems(300, 5, 8).unwrap() {
            match g.kind {
                SystemKind::WeaklyCentered => assert!(is_weakly_centered(&g.system, 1e-9).verdict, "index {}", g.index),
                SystemKind::Normal => {
                    assert!(is_quasinormal(&g.system, 1e-9).verdict, "index {}", g.index);
                    assert!(is_hyponormal(&g.system, 1e-9).verdict);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn random_trees_are_valid() {
        for i in 0..50 {
            let shift = random_tree_shift(3, i, 12).unwrap();
            assert!((2..=12).contains(&shift.tree().len()));
            assert_eq!(shift.lambda()[shift.tree().top()], Complex64::new(0.0, 0.0));
        }
    }
}
