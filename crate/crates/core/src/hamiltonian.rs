//! The Hamiltonian side: Legendre inversion, `H` and the `H_k`, canonical
//! Poisson brackets and the differential identities of the Legendre map.
//!
//! Axis `0` always denotes `H` itself (characteristic `ẋ`, flux `L`); axes
//! `k ≥ 1` denote the Hamilton functions `H_k` of the stored symmetries.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechsys::{dvec, solve_matrix, solve_symmetric, LagrangianSystem, PhasePoint, TangentPoint};
use crate::sampling::JetSampler;

/// Default Newton tolerance on `‖p(x, ẋ) − p‖∞`.
pub const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap.
pub const NEWTON_MAX_ITER: usize = 50;
/// Resampling budget per requested sample in [`bracket_constancy`].
const MAX_REJECTIONS_PER_SAMPLE: usize = 100;

/// Solves `∂L/∂ẋ(x, ẋ) = p` for `ẋ` by Newton iteration started at `ẋ = p`.
pub fn legendre_inverse(sys: &LagrangianSystem, phase: &PhasePoint, tol: f64) -> Result<TangentPoint> {
    sys.check_phase(phase)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Parameter(format!(
            "Newton tolerance must be positive, got {tol}"
        )));
    }
    let target = dvec(&phase.p);
    let mut pt = TangentPoint::new(phase.x.clone(), phase.p.clone());
    for _ in 0..=NEWTON_MAX_ITER {
        let d = sys.lagrangian_derivatives(&pt)?;
        let r = &d.p - &target;
        if r.amax() < tol {
            return Ok(pt);
        }
        let step = solve_symmetric(&d.w, &r)?;
        for (v, s) in pt.xdot.iter_mut().zip(step.iter()) {
            *v -= s;
        }
    }
    Err(Error::Inversion(format!(
        "no convergence in {NEWTON_MAX_ITER} Newton steps"
    )))
}

/// Characteristic, its Jacobians, the flux and its gradients for axis `k`
/// (`k = 0` is the energy axis: `V = ẋ`, `F = L`).
#[derive(Debug, Clone)]
pub struct AxisData {
    pub v: DVector<f64>,
    pub v_x: DMatrix<f64>,
    pub v_xdot: DMatrix<f64>,
    pub flux: f64,
    pub flux_x: DVector<f64>,
    pub flux_xdot: DVector<f64>,
}

pub fn axis_data(sys: &LagrangianSystem, k: usize, pt: &TangentPoint) -> Result<AxisData> {
    let n = sys.dim();
    if k == 0 {
        let (l, lx, p) = sys.lagrangian_gradient(pt)?;
        return Ok(AxisData {
            v: dvec(&pt.xdot),
            v_x: DMatrix::zeros(n, n),
            v_xdot: DMatrix::identity(n, n),
            flux: l,
            flux_x: lx,
            flux_xdot: p,
        });
    }
    let s = sys.symmetry_derivatives(k, pt)?;
    Ok(AxisData {
        v: s.v,
        v_x: s.v_x,
        v_xdot: s.v_xdot,
        flux: s.flux,
        flux_x: s.flux_x,
        flux_xdot: s.flux_xdot,
    })
}

fn check_axis(sys: &LagrangianSystem, k: usize) -> Result<()> {
    if k > sys.symmetry_count() {
        return Err(Error::Index(format!(
            "axis {k} requested, system {} has {} symmetries",
            sys.name(),
            sys.symmetry_count()
        )));
    }
    Ok(())
}

/// `H(x, p) = Σ p_i ẋ_i − L` at `ẋ(x, p)`.
pub fn hamiltonian_value(sys: &LagrangianSystem, phase: &PhasePoint) -> Result<f64> {
    hk_value(sys, 0, phase)
}

/// `H_k(x, p) = Σ p_i V^{(k)}_i − F_k` at `ẋ(x, p)`.
pub fn hk_value(sys: &LagrangianSystem, k: usize, phase: &PhasePoint) -> Result<f64> {
    check_axis(sys, k)?;
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    hk_value_at(sys, k, &pt, &dvec(&phase.p))
}

fn hk_value_at(sys: &LagrangianSystem, k: usize, pt: &TangentPoint, p: &DVector<f64>) -> Result<f64> {
    if k == 0 {
        return Ok(p.dot(&dvec(&pt.xdot)) - sys.lagrangian(pt)?);
    }
    Ok(p.dot(&dvec(&sys.characteristic(k, pt)?)) - sys.flux(k, pt)?)
}

/// `(∂H_k/∂x, ∂H_k/∂p)` in closed form: `∂H_k/∂p = V^{(k)}` and
/// `∂H_k/∂x = (∂V^{(k)}/∂x)ᵀ p − ∂F_k/∂x`, both at `ẋ(x, p)`.
pub fn hk_gradients(sys: &LagrangianSystem, k: usize, phase: &PhasePoint) -> Result<(DVector<f64>, DVector<f64>)> {
    check_axis(sys, k)?;
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    hk_gradients_at(sys, k, &pt, &dvec(&phase.p))
}

pub(crate) fn hk_gradients_at(
    sys: &LagrangianSystem,
    k: usize,
    pt: &TangentPoint,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let a = axis_data(sys, k, pt)?;
    Ok((a.v_x.transpose() * p - a.flux_x, a.v))
}

/// `∂²H_k/∂p∂p = (∂V^{(k)}/∂ẋ) W⁻¹`.
pub fn hk_momentum_hessian(sys: &LagrangianSystem, k: usize, phase: &PhasePoint) -> Result<DMatrix<f64>> {
    check_axis(sys, k)?;
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let a = axis_data(sys, k, &pt)?;
    let w = sys.lagrangian_derivatives(&pt)?.w;
    // A W⁻¹ = (W⁻ᵀ Aᵀ)ᵀ and W is symmetric.
    Ok(solve_matrix(&w, &a.v_xdot.transpose())?.transpose())
}

fn bracket_from(a: &(DVector<f64>, DVector<f64>), b: &(DVector<f64>, DVector<f64>)) -> f64 {
    a.0.iter()
        .zip(b.1.iter())
        .zip(a.1.iter().zip(b.0.iter()))
        .map(|((ax, bp), (ap, bx))| ax * bp - ap * bx)
        .sum()
}

/// Canonical bracket `{H_k, H_l} = Σ (∂H_k/∂x_i ∂H_l/∂p_i − ∂H_k/∂p_i ∂H_l/∂x_i)`.
pub fn poisson_bracket(sys: &LagrangianSystem, k: usize, l: usize, phase: &PhasePoint) -> Result<f64> {
    check_axis(sys, k)?;
    check_axis(sys, l)?;
    if k == l {
        return Ok(0.0);
    }
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let p = dvec(&phase.p);
    let gk = hk_gradients_at(sys, k, &pt, &p)?;
    let gl = hk_gradients_at(sys, l, &pt, &p)?;
    Ok(bracket_from(&gk, &gl))
}

/// Summary of `{H_k, H_l}` over seeded random phase points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketReport {
    pub pair: (usize, usize),
    pub samples: usize,
    pub mean_value: f64,
    pub max_deviation: f64,
    pub rejected: usize,
}

/// Estimates the constant `c_kl = {H_k, H_l}` and how far the samples stray from it.
/// Points where the Legendre map cannot be inverted are resampled.
pub fn bracket_constancy(
    sys: &LagrangianSystem,
    k: usize,
    l: usize,
    sample_count: usize,
    seed: u64,
) -> Result<BracketReport> {
    if sample_count < 2 {
        return Err(Error::Parameter(format!(
            "bracket_constancy needs at least 2 samples, got {sample_count}"
        )));
    }
    check_axis(sys, k)?;
    check_axis(sys, l)?;
    let mut sampler = JetSampler::new(seed);
    let mut values = Vec::with_capacity(sample_count);
    let mut rejected = 0;
    while values.len() < sample_count {
        let phase = sampler.phase(sys);
        match poisson_bracket(sys, k, l, &phase) {
            Ok(v) => values.push(v),
            Err(Error::Inversion(_)) | Err(Error::Degeneracy(_)) | Err(Error::Domain(_)) => {
                rejected += 1;
                if rejected > MAX_REJECTIONS_PER_SAMPLE * sample_count {
                    return Err(Error::Inversion(format!("{rejected} phase samples rejected")));
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_deviation = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    Ok(BracketReport {
        pair: (k, l),
        samples: sample_count,
        mean_value: mean,
        max_deviation,
        rejected,
    })
}

/// Residual matrices of the two Legendre identities
/// `W ∂²H/∂p∂p − I` and `W ∂²H/∂p∂x + ∂²L/∂ẋ∂x`, with the closed forms
/// `∂²H/∂p∂p = W⁻¹` and `∂²H/∂p∂x = −W⁻¹ ∂²L/∂ẋ∂x`.
pub fn legendre_identities_residual(
    sys: &LagrangianSystem,
    phase: &PhasePoint,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let d = sys.lagrangian_derivatives(&pt)?;
    let n = sys.dim();
    let h_pp = solve_matrix(&d.w, &DMatrix::identity(n, n))?;
    let h_px = -solve_matrix(&d.w, &d.m)?;
    let i1 = &d.w * h_pp - DMatrix::identity(n, n);
    let i2 = &d.w * h_px + &d.m;
    Ok((i1, i2))
}
