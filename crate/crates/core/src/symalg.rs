//! Algebra of prolonged symmetries on jets: commutators, the matrix `r_ij`
//! and the commuting-symmetry and flux-commutation residuals.
//!
//! Every antisymmetric quantity is computed for the ordered pair `k < l` and
//! negated for `k > l`, so swapping indices negates outputs exactly.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::hamiltonian::axis_data;
use crate::mechsys::{dvec, el_residual_from, solve_matrix, Jet2Point, LagrangianSystem, TangentPoint};

fn ordered<T>(
    k: usize,
    l: usize,
    zero: T,
    f: impl FnOnce(usize, usize) -> Result<T>,
    neg: impl FnOnce(T) -> T,
) -> Result<T> {
    use std::cmp::Ordering::*;
    match k.cmp(&l) {
        Equal => Ok(zero),
        Less => f(k, l),
        Greater => f(l, k).map(neg),
    }
}

fn check_pair(sys: &LagrangianSystem, k: usize, l: usize) -> Result<()> {
    sys.symmetry(k)?;
    sys.symmetry(l)?;
    Ok(())
}

/// `D_{v_k} V^{(l)} − D_{v_l} V^{(k)}` at an arbitrary jet.
pub fn commutator_characteristic(sys: &LagrangianSystem, k: usize, l: usize, jet: &Jet2Point) -> Result<DVector<f64>> {
    check_pair(sys, k, l)?;
    sys.check_jet(jet)?;
    ordered(
        k,
        l,
        DVector::zeros(sys.dim()),
        |a, b| commutator_ordered(sys, a, b, jet),
        |v| -v,
    )
}

fn commutator_ordered(sys: &LagrangianSystem, a: usize, b: usize, jet: &Jet2Point) -> Result<DVector<f64>> {
    let pt = jet.tangent();
    let (xdot, xddot) = (dvec(&jet.xdot), dvec(&jet.xddot));
    let sa = sys.symmetry_derivatives(a, &pt)?;
    let sb = sys.symmetry_derivatives(b, &pt)?;
    let ra = sa.total_t_derivative(&xdot, &xddot);
    let rb = sb.total_t_derivative(&xdot, &xddot);
    Ok((&sb.v_x * &sa.v + &sb.v_xdot * ra) - (&sa.v_x * &sb.v + &sa.v_xdot * rb))
}

/// `r = A_k W⁻¹ A_lᵀ − A_l W⁻¹ A_kᵀ` with `A_k = ∂V^{(k)}/∂ẋ`; exactly skew.
pub fn rij(sys: &LagrangianSystem, k: usize, l: usize, pt: &TangentPoint) -> Result<DMatrix<f64>> {
    check_pair(sys, k, l)?;
    sys.check_tangent(pt)?;
    let n = sys.dim();
    ordered(
        k,
        l,
        DMatrix::zeros(n, n),
        |a, b| {
            let w = sys.lagrangian_derivatives(pt)?.w;
            let aa = sys.symmetry_derivatives(a, pt)?.v_xdot;
            let ab = sys.symmetry_derivatives(b, pt)?.v_xdot;
            let p = aa * solve_matrix(&w, &ab.transpose())?;
            Ok(&p - p.transpose())
        },
        |m| -m,
    )
}

/// `r = H^k_pp W H^l_pp − H^l_pp W H^k_pp` from given momentum Hessians of `H_k`, `H_l`.
pub fn rij_from_momentum_hessians(w: &DMatrix<f64>, hk: &DMatrix<f64>, hl: &DMatrix<f64>) -> DMatrix<f64> {
    hk * w * hl - hl * w * hk
}

/// `r_ij` assembled from the closed-form momentum Hessians `∂²H_k/∂p∂p = A_k W⁻¹`.
pub fn rij_via_hessians(sys: &LagrangianSystem, k: usize, l: usize, pt: &TangentPoint) -> Result<DMatrix<f64>> {
    check_pair(sys, k, l)?;
    let w = sys.lagrangian_derivatives(pt)?.w;
    let hess = |a: usize| -> Result<DMatrix<f64>> {
        let av = axis_data(sys, a, pt)?.v_xdot;
        Ok(solve_matrix(&w, &av.transpose())?.transpose())
    };
    Ok(rij_from_momentum_hessians(&w, &hess(k)?, &hess(l)?))
}

/// `r_ij` from momentum Hessians estimated by central differences of `∂H_k/∂p`.
pub fn rij_finite_difference(
    sys: &LagrangianSystem,
    k: usize,
    l: usize,
    pt: &TangentPoint,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_pair(sys, k, l)?;
    let phase = sys.legendre(pt)?;
    let w = sys.lagrangian_derivatives(pt)?.w;
    let n = sys.dim();
    let hess = |a: usize| -> Result<DMatrix<f64>> {
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let (mut plus, mut minus) = (phase.clone(), phase.clone());
            plus.p[j] += step;
            minus.p[j] -= step;
            let gp = crate::hamiltonian::hk_gradients(sys, a, &plus)?.1;
            let gm = crate::hamiltonian::hk_gradients(sys, a, &minus)?.1;
            h.set_column(j, &((gp - gm) / (2.0 * step)));
        }
        Ok(h)
    };
    Ok(rij_from_momentum_hessians(&w, &hess(k)?, &hess(l)?))
}

/// `(D_{v_k}V^{(l)} − D_{v_l}V^{(k)}) − r 𝓔`; vanishes identically for commuting symmetries.
pub fn commuting_residual(sys: &LagrangianSystem, k: usize, l: usize, jet: &Jet2Point) -> Result<DVector<f64>> {
    check_pair(sys, k, l)?;
    sys.check_jet(jet)?;
    ordered(
        k,
        l,
        DVector::zeros(sys.dim()),
        |a, b| {
            let pt = jet.tangent();
            let c = commutator_ordered(sys, a, b, jet)?;
            let r = rij(sys, a, b, &pt)?;
            let d = sys.lagrangian_derivatives(&pt)?;
            let e = el_residual_from(&d, &dvec(&jet.xdot), &dvec(&jet.xddot));
            Ok(c - r * e)
        },
        |v| -v,
    )
}

/// `D_{v_k}F_l − D_{v_l}F_k − c_kl − Σ p_i (D_{v_k}V^{(l)}_i − D_{v_l}V^{(k)}_i)`.
/// `c_kl` is antisymmetric, so `(l, k, −c)` returns the negated residual.
pub fn flux_commutation_residual(
    sys: &LagrangianSystem,
    k: usize,
    l: usize,
    jet: &Jet2Point,
    c_kl: f64,
) -> Result<f64> {
    check_pair(sys, k, l)?;
    sys.check_jet(jet)?;
    if k > l {
        return flux_commutation_residual(sys, l, k, jet, -c_kl).map(|r| -r);
    }
    if k == l {
        return Ok(-c_kl);
    }
    let pt = jet.tangent();
    let (xdot, xddot) = (dvec(&jet.xdot), dvec(&jet.xddot));
    let sk = sys.symmetry_derivatives(k, &pt)?;
    let sl = sys.symmetry_derivatives(l, &pt)?;
    let rk = sk.total_t_derivative(&xdot, &xddot);
    let rl = sl.total_t_derivative(&xdot, &xddot);
    let dk_fl = sl.flux_x.dot(&sk.v) + sl.flux_xdot.dot(&rk);
    let dl_fk = sk.flux_x.dot(&sl.v) + sk.flux_xdot.dot(&rl);
    let p = dvec(&sys.momentum(&pt)?);
    let c = commutator_ordered(sys, k, l, jet)?;
    Ok(dk_fl - dl_fk - c_kl - p.dot(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::FD_STEP_FIRST;
    use crate::error::Error;
    use crate::hamiltonian::bracket_constancy;
    use crate::mechsys::{
        kepler_commutator_printed, kepler_commutator_rederived, make_harmonic, make_kepler_runge_lenz, make_toda,
        TodaBoundary,
    };
    use crate::sampling::JetSampler;

    fn todas() -> Vec<LagrangianSystem> {
        vec![
            make_toda(3, TodaBoundary::Periodic).unwrap(),
            make_toda(4, TodaBoundary::Periodic).unwrap(),
            make_toda(4, TodaBoundary::OpenEnd).unwrap(),
            make_toda(6, TodaBoundary::OpenEnd).unwrap(),
        ]
    }

    #[test]
    fn diagonal_pairs_vanish() {
        let sys = make_toda(4, TodaBoundary::Periodic).unwrap();
        let mut s = JetSampler::new(1);
        let jet = s.jet2(&sys);
        assert_eq!(commutator_characteristic(&sys, 2, 2, &jet).unwrap().amax(), 0.0);
        assert_eq!(rij(&sys, 1, 1, &jet.tangent()).unwrap().amax(), 0.0);
        assert_eq!(commuting_residual(&sys, 1, 1, &jet).unwrap().amax(), 0.0);
        let h = make_harmonic(1.0);
        let jet = s.jet2(&h);
        assert_eq!(flux_commutation_residual(&h, 1, 1, &jet, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rij_matches_printed_toda_matrix() {
        let mut s = JetSampler::new(2);
        for sys in todas() {
            let reference = sys.reference_rij().unwrap().clone();
            for _ in 0..100 {
                let pt = s.tangent(&sys);
                let r = rij(&sys, 1, 2, &pt).unwrap();
                let printed = reference(1, 2, &pt).unwrap();
                assert!((&r - printed).amax() < 1e-9, "{}", sys.name());
                assert_eq!((&r + r.transpose()).amax(), 0.0);
                assert_eq!(rij(&sys, 2, 1, &pt).unwrap(), -r);
            }
        }
    }

    #[test]
    fn rij_routes_agree() {
        let mut s = JetSampler::new(3);
        let mut systems = todas();
        systems.push(make_kepler_runge_lenz(1.0).unwrap());
        for sys in systems {
            for _ in 0..10 {
                let pt = s.tangent(&sys);
                let r = rij(&sys, 1, 2, &pt).unwrap();
                let via = rij_via_hessians(&sys, 1, 2, &pt).unwrap();
                assert!((&r - via).amax() < 1e-12, "{}", sys.name());
                let fd = rij_finite_difference(&sys, 1, 2, &pt, FD_STEP_FIRST).unwrap();
                assert!((&r - fd).amax() < 1e-5, "{}", sys.name());
            }
        }
    }

    #[test]
    fn toda_symmetries_commute_off_shell() {
        let mut s = JetSampler::new(4);
        for sys in todas() {
            for _ in 0..100 {
                let jet = s.jet2(&sys);
                let r = commuting_residual(&sys, 1, 2, &jet).unwrap();
                assert!(r.amax() < 1e-9, "{}: {}", sys.name(), r.amax());
            }
        }
    }

    #[test]
    fn toda_commutator_vanishes_on_shell() {
        let mut s = JetSampler::new(5);
        for sys in todas() {
            for _ in 0..20 {
                let pt = s.tangent(&sys);
                let a = sys.accel(&pt).unwrap();
                let jet = Jet2Point::new(pt.x, pt.xdot, a);
                assert!(commutator_characteristic(&sys, 1, 2, &jet).unwrap().amax() < 1e-9);
            }
        }
    }

    #[test]
    fn toda_flux_commutation() {
        for sys in todas() {
            let c = bracket_constancy(&sys, 1, 2, 50, 6).unwrap().mean_value;
            let mut s = JetSampler::new(7);
            for _ in 0..100 {
                let jet = s.jet2(&sys);
                let r = flux_commutation_residual(&sys, 1, 2, &jet, c).unwrap();
                assert!(r.abs() < 1e-9, "{}: {r}", sys.name());
                assert_eq!(flux_commutation_residual(&sys, 2, 1, &jet, -c).unwrap(), -r);
            }
        }
    }

    #[test]
    fn kepler_commutator_matches_rederived_expression() {
        let sys = make_kepler_runge_lenz(1.0).unwrap();
        let mut s = JetSampler::new(8);
        for _ in 0..100 {
            let jet = s.jet2(&sys);
            let c = commutator_characteristic(&sys, 1, 2, &jet).unwrap();
            assert!((c[0] - kepler_commutator_rederived(&jet)).abs() < 1e-9);
        }
    }

    #[test]
    fn printed_kepler_commutator_differs_only_in_one_coefficient() {
        // The printed and re-derived forms differ by 2ẍ₂(2x₂² + x₃²).
        let sys = make_kepler_runge_lenz(1.0).unwrap();
        let mut s = JetSampler::new(9);
        for _ in 0..100 {
            let jet = s.jet2(&sys);
            let c = commutator_characteristic(&sys, 1, 2, &jet).unwrap();
            let (x, a) = (&jet.x, &jet.xddot);
            let gap = 2.0 * a[1] * (2.0 * x[1] * x[1] + x[2] * x[2]);
            assert!((kepler_commutator_printed(&jet) - c[0] - gap).abs() < 1e-9);
        }
    }

    #[test]
    fn kepler_symmetries_do_not_commute() {
        let sys = make_kepler_runge_lenz(1.0).unwrap();
        let mut s = JetSampler::new(10);
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let pt = s.tangent(&sys);
            let a = sys.accel(&pt).unwrap();
            let jet = Jet2Point::new(pt.x, pt.xdot, a);
            worst = worst.max(commuting_residual(&sys, 1, 2, &jet).unwrap().amax());
        }
        assert!(worst > 1e-3);
    }

    #[test]
    fn antisymmetry_is_exact() {
        let sys = make_kepler_runge_lenz(1.3).unwrap();
        let mut s = JetSampler::new(11);
        for _ in 0..20 {
            let jet = s.jet2(&sys);
            for (k, l) in [(1, 2), (1, 3), (2, 3)] {
                assert_eq!(
                    commutator_characteristic(&sys, l, k, &jet).unwrap(),
                    -commutator_characteristic(&sys, k, l, &jet).unwrap()
                );
                assert_eq!(
                    commuting_residual(&sys, l, k, &jet).unwrap(),
                    -commuting_residual(&sys, k, l, &jet).unwrap()
                );
                assert_eq!(
                    flux_commutation_residual(&sys, l, k, &jet, -0.5).unwrap(),
                    -flux_commutation_residual(&sys, k, l, &jet, 0.5).unwrap()
                );
            }
        }
    }

    #[test]
    fn bad_indices() {
        let h = make_harmonic(1.0);
        let jet = Jet2Point::new(vec![0.0], vec![0.0], vec![0.0]);
        assert!(matches!(
            commutator_characteristic(&h, 1, 2, &jet),
            Err(Error::Index(_))
        ));
    }
}
