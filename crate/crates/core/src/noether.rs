//! Variational-symmetry identities, Noether integrals and fluxes, evaluated
//! pointwise on jets.

use nalgebra::DVector;

use crate::diffengine::{self, DynFunction, DynVectorFunction};
use crate::error::{Error, Result};
use crate::mechsys::{dvec, el_residual_from, Jet2Point, LagrangianSystem, TangentPoint};

fn check_fn_dim(sys: &LagrangianSystem, jet: &Jet2Point) -> Result<Vec<f64>> {
    sys.check_jet(jet)?;
    Ok(jet.tangent().stacked())
}

/// `D_t f = ∇_x f · ẋ + ∇_ẋ f · ẍ` for `f` defined on the stacked vector `[x; ẋ]`.
pub fn total_t_derivative(sys: &LagrangianSystem, f: &dyn DynFunction, jet: &Jet2Point) -> Result<f64> {
    let z = check_fn_dim(sys, jet)?;
    let g = diffengine::grad(f, &z)?;
    let n = sys.dim();
    Ok(dot(&g[..n], &jet.xdot) + dot(&g[n..], &jet.xddot))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `V^{(k)}` and `D_t V^{(k)}` at a jet.
pub fn characteristic_and_rate(
    sys: &LagrangianSystem,
    k: usize,
    jet: &Jet2Point,
) -> Result<(DVector<f64>, DVector<f64>)> {
    sys.check_jet(jet)?;
    let d = sys.symmetry_derivatives(k, &jet.tangent())?;
    let rate = d.total_t_derivative(&dvec(&jet.xdot), &dvec(&jet.xddot));
    Ok((d.v, rate))
}

/// `D_{v_k} f = V^{(k)} · ∇_x f + (D_t V^{(k)}) · ∇_ẋ f`.
pub fn prolonged_symmetry_derivative(
    sys: &LagrangianSystem,
    k: usize,
    f: &dyn DynFunction,
    jet: &Jet2Point,
) -> Result<f64> {
    let (v, rate) = characteristic_and_rate(sys, k, jet)?;
    let z = jet.tangent().stacked();
    let g = diffengine::grad(f, &z)?;
    let n = sys.dim();
    Ok(dot(&g[..n], v.as_slice()) + dot(&g[n..], rate.as_slice()))
}

/// Vector form of [`prolonged_symmetry_derivative`], applied componentwise.
pub fn prolonged_symmetry_derivative_vec(
    sys: &LagrangianSystem,
    k: usize,
    f: &dyn DynVectorFunction,
    jet: &Jet2Point,
) -> Result<DVector<f64>> {
    let (v, rate) = characteristic_and_rate(sys, k, jet)?;
    let z = jet.tangent().stacked();
    let jac = diffengine::jacobian(f, &z)?;
    let n = sys.dim();
    Ok(jac.columns(0, n) * v + jac.columns(n, n) * rate)
}

/// `D_{v_k} L − D_t F_k`; vanishes identically for a variational symmetry.
pub fn symmetry_residual(sys: &LagrangianSystem, k: usize, jet: &Jet2Point) -> Result<f64> {
    sys.check_jet(jet)?;
    let pt = jet.tangent();
    let (xdot, xddot) = (dvec(&jet.xdot), dvec(&jet.xddot));
    let (_, lx, p) = sys.lagrangian_gradient(&pt)?;
    let d = sys.symmetry_derivatives(k, &pt)?;
    let rate = d.total_t_derivative(&xdot, &xddot);
    let dv_l = d.v.dot(&lx) + rate.dot(&p);
    Ok(dv_l - d.flux_total_t_derivative(&xdot, &xddot))
}

/// `J_k = Σ (∂L/∂ẋ_i) V^{(k)}_i − F_k`.
pub fn noether_integral(sys: &LagrangianSystem, k: usize, pt: &TangentPoint) -> Result<f64> {
    let p = dvec(&sys.momentum(pt)?);
    let v = dvec(&sys.characteristic(k, pt)?);
    Ok(p.dot(&v) - sys.flux(k, pt)?)
}

/// `E = Σ (∂L/∂ẋ_i) ẋ_i − L`.
pub fn energy_integral(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<f64> {
    let (l, _, p) = sys.lagrangian_gradient(pt)?;
    Ok(p.dot(&dvec(&pt.xdot)) - l)
}

/// Recovers the flux `F_k = Σ (∂L/∂ẋ_i) V^{(k)}_i − J_k` from a value of the integral.
pub fn flux_from_integral(sys: &LagrangianSystem, k: usize, pt: &TangentPoint, integral: f64) -> Result<f64> {
    if !integral.is_finite() {
        return Err(Error::Domain("integral value is not finite".into()));
    }
    let p = dvec(&sys.momentum(pt)?);
    let v = dvec(&sys.characteristic(k, pt)?);
    Ok(p.dot(&v) - integral)
}

/// Gradients `(∇_x J_k, ∇_ẋ J_k)`:
/// `∇_x J = Mᵀ V + A_xᵀ p − ∇_x F`, `∇_ẋ J = W V + A_ẋᵀ p − ∇_ẋ F`.
pub fn integral_gradient(sys: &LagrangianSystem, k: usize, pt: &TangentPoint) -> Result<(DVector<f64>, DVector<f64>)> {
    let l = sys.lagrangian_derivatives(pt)?;
    let s = sys.symmetry_derivatives(k, pt)?;
    let gx = l.m.transpose() * &s.v + s.v_x.transpose() * &l.p - &s.flux_x;
    let gv = &l.w * &s.v + s.v_xdot.transpose() * &l.p - &s.flux_xdot;
    Ok((gx, gv))
}

/// `D_t J_k + Σ V^{(k)}_i 𝓔_i`; vanishes identically in the jet.
pub fn integral_characteristic_residual(sys: &LagrangianSystem, k: usize, jet: &Jet2Point) -> Result<f64> {
    sys.check_jet(jet)?;
    let pt = jet.tangent();
    let (xdot, xddot) = (dvec(&jet.xdot), dvec(&jet.xddot));
    let (gx, gv) = integral_gradient(sys, k, &pt)?;
    let l = sys.lagrangian_derivatives(&pt)?;
    let e = el_residual_from(&l, &xdot, &xddot);
    let v = dvec(&sys.characteristic(k, &pt)?);
    Ok(gx.dot(&xdot) + gv.dot(&xddot) + v.dot(&e))
}

/// `∂F_k/∂ẋ − (∂V^{(k)}/∂ẋ)ᵀ p`; vanishes for every variational symmetry.
pub fn flux_lemma_residual(sys: &LagrangianSystem, k: usize, pt: &TangentPoint) -> Result<DVector<f64>> {
    let (_, _, p) = sys.lagrangian_gradient(pt)?;
    let s = sys.symmetry_derivatives(k, pt)?;
    Ok(&s.flux_xdot - s.v_xdot.transpose() * p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::{Function, Scalar};
    use crate::mechsys::{make_harmonic, make_kepler, make_kepler_runge_lenz, make_toda, TodaBoundary};
    use crate::sampling::JetSampler;
    use approx::assert_abs_diff_eq;

    /// Picks one coordinate out of `[x; ẋ]`.
    struct Coord(usize);
    impl Function for Coord {
        fn eval<S: Scalar>(&self, v: &[S]) -> S {
            v[self.0].clone()
        }
    }

    struct Const;
    impl Function for Const {
        fn eval<S: Scalar>(&self, _v: &[S]) -> S {
            S::constant(4.0)
        }
    }

    fn systems() -> Vec<crate::mechsys::LagrangianSystem> {
        vec![
            make_harmonic(0.9),
            make_kepler(1.0).unwrap(),
            make_kepler_runge_lenz(1.5).unwrap(),
            make_toda(4, TodaBoundary::Periodic).unwrap(),
            make_toda(4, TodaBoundary::OpenEnd).unwrap(),
            make_toda(3, TodaBoundary::Periodic).unwrap(),
        ]
    }

    #[test]
    fn total_derivative_examples() {
        let sys = make_toda(3, TodaBoundary::Periodic).unwrap();
        let jet = Jet2Point::new(vec![0.1, 0.2, 0.3], vec![5.0, 1.0, 1.0], vec![7.0, 0.0, 0.0]);
        assert_eq!(total_t_derivative(&sys, &Coord(0), &jet).unwrap(), 5.0);
        assert_eq!(total_t_derivative(&sys, &Coord(3), &jet).unwrap(), 7.0);
        let h = make_harmonic(1.0);
        let jet = Jet2Point::new(vec![1.0], vec![1.0], vec![0.0]);
        assert_eq!(total_t_derivative(&h, h.lagrangian_fn(), &jet).unwrap(), -1.0);
    }

    #[test]
    fn prolonged_derivative_examples() {
        let mut s = JetSampler::new(1);
        for sys in systems() {
            let jet = s.jet2(&sys);
            assert_eq!(prolonged_symmetry_derivative(&sys, 1, &Const, &jet).unwrap(), 0.0);
            let v = sys.characteristic(1, &jet.tangent()).unwrap();
            assert_eq!(prolonged_symmetry_derivative(&sys, 1, &Coord(0), &jet).unwrap(), v[0]);
        }
        let h = make_harmonic(1.2);
        let jet = s.jet2(&h);
        assert_abs_diff_eq!(
            prolonged_symmetry_derivative(&h, 1, h.lagrangian_fn(), &jet).unwrap(),
            total_t_derivative(&h, h.lagrangian_fn(), &jet).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn symmetry_identity_holds_off_shell() {
        let mut s = JetSampler::new(77);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                for _ in 0..100 {
                    let jet = s.jet2(&sys);
                    let r = symmetry_residual(&sys, k, &jet).unwrap();
                    assert!(r.abs() < 1e-10, "{} v{k}: {r}", sys.name());
                }
            }
        }
    }

    #[test]
    fn harmonic_symmetry_residual_is_exact() {
        let h = make_harmonic(1.7);
        let mut s = JetSampler::new(4);
        for _ in 0..20 {
            assert_eq!(symmetry_residual(&h, 1, &s.jet2(&h)).unwrap(), 0.0);
        }
    }

    #[test]
    fn integral_examples() {
        let k = make_kepler(1.0).unwrap();
        let pt = TangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        assert_eq!(noether_integral(&k, 1, &pt).unwrap(), 0.0);
        assert_eq!(energy_integral(&k, &pt).unwrap(), -0.5);
        let t = make_toda(3, TodaBoundary::Periodic).unwrap();
        let pt = TangentPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(noether_integral(&t, 1, &pt).unwrap(), 7.0 / 3.0, epsilon = 1e-15);
        assert_eq!(
            energy_integral(&t, &TangentPoint::new(vec![0.0; 3], vec![0.0; 3])).unwrap(),
            3.0
        );
        let h = make_harmonic(1.0);
        assert_eq!(
            noether_integral(&h, 1, &TangentPoint::new(vec![1.0], vec![1.0])).unwrap(),
            1.0
        );
        assert_eq!(
            energy_integral(&h, &TangentPoint::new(vec![0.0], vec![2.0])).unwrap(),
            2.0
        );
    }

    #[test]
    fn integrals_match_closed_forms() {
        let mut s = JetSampler::new(9);
        for sys in systems() {
            let reference = sys.reference_integral().unwrap().clone();
            for k in 1..=sys.symmetry_count() {
                for _ in 0..100 {
                    let pt = s.tangent(&sys);
                    let j = noether_integral(&sys, k, &pt).unwrap();
                    let r = reference(k, &pt).unwrap();
                    assert!(
                        (j - r).abs() < 1e-12 * (1.0 + r.abs()),
                        "{} J{k}: {j} vs {r}",
                        sys.name()
                    );
                }
            }
        }
    }

    #[test]
    fn flux_round_trip() {
        let mut s = JetSampler::new(10);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                for _ in 0..50 {
                    let pt = s.tangent(&sys);
                    let j = noether_integral(&sys, k, &pt).unwrap();
                    let f = flux_from_integral(&sys, k, &pt, j).unwrap();
                    assert!((f - sys.flux(k, &pt).unwrap()).abs() < 1e-12);
                }
            }
        }
        let h = make_harmonic(2.0);
        let pt = TangentPoint::new(vec![0.4], vec![-0.3]);
        let j = noether_integral(&h, 1, &pt).unwrap();
        assert_abs_diff_eq!(
            flux_from_integral(&h, 1, &pt, j).unwrap(),
            h.lagrangian(&pt).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn integral_characteristic_relation_holds_off_shell() {
        let mut s = JetSampler::new(12);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                for _ in 0..100 {
                    let jet = s.jet2(&sys);
                    let r = integral_characteristic_residual(&sys, k, &jet).unwrap();
                    assert!(r.abs() < 1e-9, "{} v{k}: {r}", sys.name());
                }
            }
        }
    }

    #[test]
    fn integrals_are_stationary_on_shell() {
        let mut s = JetSampler::new(13);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                let pt = s.tangent(&sys);
                let a = sys.accel(&pt).unwrap();
                let (gx, gv) = integral_gradient(&sys, k, &pt).unwrap();
                let dj = gx.dot(&dvec(&pt.xdot)) + gv.dot(&dvec(&a));
                assert!(dj.abs() < 1e-9, "{} v{k}: {dj}", sys.name());
            }
        }
    }

    #[test]
    fn integral_gradient_matches_finite_differences() {
        let mut s = JetSampler::new(14);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                let pt = s.tangent(&sys);
                let (gx, gv) = integral_gradient(&sys, k, &pt).unwrap();
                let h = 1e-6;
                for i in 0..sys.dim() {
                    let mut a = pt.clone();
                    let mut b = pt.clone();
                    a.x[i] += h;
                    b.x[i] -= h;
                    let fd =
                        (noether_integral(&sys, k, &a).unwrap() - noether_integral(&sys, k, &b).unwrap()) / (2.0 * h);
                    assert!((fd - gx[i]).abs() < 1e-6);
                    let mut a = pt.clone();
                    let mut b = pt.clone();
                    a.xdot[i] += h;
                    b.xdot[i] -= h;
                    let fd =
                        (noether_integral(&sys, k, &a).unwrap() - noether_integral(&sys, k, &b).unwrap()) / (2.0 * h);
                    assert!((fd - gv[i]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn flux_lemma_holds() {
        let mut s = JetSampler::new(15);
        for sys in systems() {
            for k in 1..=sys.symmetry_count() {
                for _ in 0..100 {
                    let r = flux_lemma_residual(&sys, k, &s.tangent(&sys)).unwrap();
                    assert!(r.amax() < 1e-10, "{} v{k}", sys.name());
                }
            }
        }
    }

    #[test]
    fn bad_index_is_reported() {
        let h = make_harmonic(1.0);
        let jet = Jet2Point::new(vec![0.0], vec![0.0], vec![0.0]);
        assert!(matches!(symmetry_residual(&h, 2, &jet), Err(Error::Index(_))));
        assert!(matches!(noether_integral(&h, 0, &jet.tangent()), Err(Error::Index(_))));
    }
}
