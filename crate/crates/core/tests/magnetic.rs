//! A planar charge in a constant magnetic field. Its two translations are
//! variational symmetries whose Hamiltonians have the constant bracket
//! `{H_1, H_2} = −B`, so the multi-time 1-form is not closed.

use pluriform::diffengine::Scalar;
use pluriform::hamiltonian::{bracket_constancy, poisson_bracket};
use pluriform::mechsys::{Interval, JetFunction, JetMap, LagrangianSystem, PhasePoint, SampleBox, SymmetrySpec};
use pluriform::multitime::{action_along_path, loop_closedness_defect, offshell_identity_2, LoopSpec, MultiTimePath};
use pluriform::noether::{flux_lemma_residual, symmetry_residual};
use pluriform::sampling::JetSampler;
use pluriform::symalg::{commuting_residual, flux_commutation_residual};

const B: f64 = 0.7;

/// `L = ½|ẋ|² + (B/2)(x₁ẋ₂ − x₂ẋ₁)`.
struct Magnetic;

impl JetFunction for Magnetic {
    fn eval<S: Scalar>(&self, x: &[S], v: &[S]) -> S {
        let kinetic = (v[0].clone() * v[0].clone() + v[1].clone() * v[1].clone()) * 0.5;
        kinetic + (x[0].clone() * v[1].clone() - x[1].clone() * v[0].clone()) * (B / 2.0)
    }
}

struct Translation(usize);

impl JetMap for Translation {
    fn eval<S: Scalar>(&self, _x: &[S], _v: &[S]) -> Vec<S> {
        (0..2)
            .map(|i| S::constant(if i == self.0 { 1.0 } else { 0.0 }))
            .collect()
    }
}

/// `F₁ = B x₂ / 2`, `F₂ = −B x₁ / 2`.
struct TranslationFlux(usize);

impl JetFunction for TranslationFlux {
    fn eval<S: Scalar>(&self, x: &[S], _v: &[S]) -> S {
        match self.0 {
            0 => x[1].clone() * (B / 2.0),
            _ => x[0].clone() * (-B / 2.0),
        }
    }
}

fn magnetic() -> LagrangianSystem {
    let unit = Interval::new(-1.0, 1.0);
    LagrangianSystem::new("magnetic", 2, Magnetic, SampleBox::uniform(2, unit, unit, unit))
        .with_symmetry(SymmetrySpec::new("x1", Translation(0), TranslationFlux(0)))
        .with_symmetry(SymmetrySpec::new("x2", Translation(1), TranslationFlux(1)))
}

#[test]
fn translations_are_variational_symmetries() {
    let sys = magnetic();
    let mut s = JetSampler::new(1);
    for _ in 0..50 {
        let jet = s.jet2(&sys);
        for k in 1..=2 {
            assert!(symmetry_residual(&sys, k, &jet).unwrap().abs() < 1e-12);
            assert!(flux_lemma_residual(&sys, k, &jet.tangent()).unwrap().amax() < 1e-12);
        }
        assert!(commuting_residual(&sys, 1, 2, &jet).unwrap().amax() < 1e-12);
    }
}

#[test]
fn bracket_is_minus_b() {
    let sys = magnetic();
    let rep = bracket_constancy(&sys, 1, 2, 50, 2).unwrap();
    assert!((rep.mean_value + B).abs() < 1e-12, "{rep:?}");
    assert!(rep.max_deviation < 1e-12);
    let phase = PhasePoint::new(vec![0.3, -0.4], vec![0.2, 0.9]);
    assert!((poisson_bracket(&sys, 2, 1, &phase).unwrap() - B).abs() < 1e-12);
    for k in 1..=2 {
        assert!(poisson_bracket(&sys, 0, k, &phase).unwrap().abs() < 1e-12);
    }
}

#[test]
fn flux_commutation_needs_the_constant() {
    let sys = magnetic();
    let mut s = JetSampler::new(3);
    for _ in 0..20 {
        let jet = s.jet2(&sys);
        assert!(flux_commutation_residual(&sys, 1, 2, &jet, -B).unwrap().abs() < 1e-12);
        assert!(flux_commutation_residual(&sys, 2, 1, &jet, B).unwrap().abs() < 1e-12);
        assert!((flux_commutation_residual(&sys, 1, 2, &jet, 0.0).unwrap() + B).abs() < 1e-12);
    }
}

#[test]
fn offshell_identity_two_with_nonzero_constant() {
    let sys = magnetic();
    let mut s = JetSampler::new(4);
    for _ in 0..50 {
        let jet = s.extended(&sys);
        assert!(offshell_identity_2(&sys, 1, 2, &jet, -B).unwrap().abs() < 1e-10);
        assert!(offshell_identity_2(&sys, 2, 1, &jet, B).unwrap().abs() < 1e-10);
        assert!((offshell_identity_2(&sys, 1, 2, &jet, 0.0).unwrap() + B).abs() < 1e-10);
    }
}

#[test]
fn loop_defect_equals_constant_times_area() {
    let sys = magnetic();
    let base = PhasePoint::new(vec![0.1, 0.2], vec![0.5, -0.3]);
    for (a, b) in [(0.2, 0.2), (0.3, 0.1), (0.5, 0.4)] {
        let lp = LoopSpec {
            plane: (1, 2),
            sides: (a, b),
            base: base.clone(),
            step: 1e-2,
        };
        let d = loop_closedness_defect(&sys, &lp).unwrap();
        assert!((d + B * a * b).abs() < 1e-10, "({a}, {b}): {d}");
    }
}

#[test]
fn staircase_actions_differ_by_enclosed_flux() {
    let sys = magnetic();
    let base = PhasePoint::new(vec![-0.2, 0.4], vec![0.1, 0.6]);
    let (a, b) = (0.3, 0.25);
    let first: MultiTimePath = "t1:0.3,t2:0.25".parse().unwrap();
    let second: MultiTimePath = "t2:0.25,t1:0.3".parse().unwrap();
    let s1 = action_along_path(&sys, &first, &base, 1e-2).unwrap();
    let s2 = action_along_path(&sys, &second, &base, 1e-2).unwrap();
    assert!((s1 - s2 + B * a * b).abs() < 1e-10, "{s1} {s2}");
}
