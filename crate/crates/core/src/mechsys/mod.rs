//! Lagrangian systems on the tangent bundle, their jets, and the built-in
//! example systems (Kepler, Toda, harmonic oscillator).

mod harmonic;
mod kepler;
mod toda;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffengine::{self, DynFunction, DynVectorFunction, Function, Scalar, VectorFunction};
use crate::error::{Error, Result};

pub use harmonic::make_harmonic;
pub use kepler::{kepler_commutator_printed, kepler_commutator_rederived, make_kepler, make_kepler_runge_lenz};
pub use toda::{make_toda, TodaBoundary};

/// Largest condition number of the velocity Hessian accepted by linear solves.
pub const MAX_CONDITION: f64 = 1e12;

/// A point `(x, ẋ)` of the tangent bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
}

impl TangentPoint {
    pub fn new(x: Vec<f64>, xdot: Vec<f64>) -> Self {
        TangentPoint { x, xdot }
    }

    /// The concatenated vector `[x; ẋ]` that jet functions are evaluated on.
    pub fn stacked(&self) -> Vec<f64> {
        self.x.iter().chain(&self.xdot).copied().collect()
    }
}

/// Second-order jet `(x, ẋ, ẍ)`; `ẍ` is an independent coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jet2Point {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub xddot: Vec<f64>,
}

impl Jet2Point {
    pub fn new(x: Vec<f64>, xdot: Vec<f64>, xddot: Vec<f64>) -> Self {
        Jet2Point { x, xdot, xddot }
    }

    pub fn tangent(&self) -> TangentPoint {
        TangentPoint::new(self.x.clone(), self.xdot.clone())
    }
}

/// Multi-time jet: `(x, ẋ, ẍ)` plus the first partials `x_{t_k}` and
/// `ẋ_{t_k}` along each of the `m` symmetry times. Row `k - 1` of `xt`
/// holds `x_{t_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedJet {
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub xddot: Vec<f64>,
    pub xt: Vec<Vec<f64>>,
    pub xdott: Vec<Vec<f64>>,
}

impl ExtendedJet {
    pub fn tangent(&self) -> TangentPoint {
        TangentPoint::new(self.x.clone(), self.xdot.clone())
    }

    pub fn jet2(&self) -> Jet2Point {
        Jet2Point::new(self.x.clone(), self.xdot.clone(), self.xddot.clone())
    }

    pub fn times(&self) -> usize {
        self.xt.len()
    }
}

/// Canonical coordinates `(x, p)` on the cotangent bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        PhasePoint { x, p }
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        self.x
            .iter()
            .chain(&self.p)
            .zip(other.x.iter().chain(&other.p))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Scalar function of `(x, ẋ)`.
pub trait JetFunction {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S;
}

/// Vector-valued function of `(x, ẋ)`.
pub trait JetMap {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> Vec<S>;
}

/// Adapts a jet function to a function of the stacked vector `[x; ẋ]`.
pub struct OnJet<F>(pub F);

impl<F: JetFunction> Function for OnJet<F> {
    fn eval<S: Scalar>(&self, v: &[S]) -> S {
        let (x, xdot) = v.split_at(v.len() / 2);
        self.0.eval(x, xdot)
    }
}

impl<F: JetMap> VectorFunction for OnJet<F> {
    fn eval<S: Scalar>(&self, v: &[S]) -> Vec<S> {
        let (x, xdot) = v.split_at(v.len() / 2);
        self.0.eval(x, xdot)
    }
}

/// The characteristic `V = ẋ` of the energy symmetry.
#[derive(Debug, Clone, Copy)]
pub struct VelocityCharacteristic;

impl JetMap for VelocityCharacteristic {
    fn eval<S: Scalar>(&self, _x: &[S], xdot: &[S]) -> Vec<S> {
        xdot.to_vec()
    }
}

/// A variational symmetry: characteristic `V^{(k)}(x, ẋ)` and flux `F_k(x, ẋ)`.
#[derive(Clone)]
pub struct SymmetrySpec {
    pub label: String,
    characteristic: Arc<dyn DynVectorFunction>,
    flux: Arc<dyn DynFunction>,
}

impl fmt::Debug for SymmetrySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetrySpec").field("label", &self.label).finish()
    }
}

impl SymmetrySpec {
    pub fn new<V, F>(label: impl Into<String>, characteristic: V, flux: F) -> Self
    where
        V: JetMap + Send + Sync + 'static,
        F: JetFunction + Send + Sync + 'static,
    {
        SymmetrySpec {
            label: label.into(),
            characteristic: Arc::new(OnJet(characteristic)),
            flux: Arc::new(OnJet(flux)),
        }
    }

    /// Builds a symmetry from already type-erased stacked-vector functions.
    pub fn from_dyn(
        label: impl Into<String>,
        characteristic: Arc<dyn DynVectorFunction>,
        flux: Arc<dyn DynFunction>,
    ) -> Self {
        SymmetrySpec {
            label: label.into(),
            characteristic,
            flux,
        }
    }

    pub fn characteristic_fn(&self) -> &dyn DynVectorFunction {
        self.characteristic.as_ref()
    }

    pub fn flux_fn(&self) -> &dyn DynFunction {
        self.flux.as_ref()
    }
}

/// Closed interval used for random sampling of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }
}

/// Per-coordinate sampling box for jets. Configurations with
/// `‖x‖ < min_radius` are rejected by samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub x: Vec<Interval>,
    pub xdot: Vec<Interval>,
    pub xddot: Vec<Interval>,
    #[serde(default)]
    pub min_radius: f64,
}

impl SampleBox {
    pub fn uniform(n: usize, x: Interval, xdot: Interval, xddot: Interval) -> Self {
        SampleBox {
            x: vec![x; n],
            xdot: vec![xdot; n],
            xddot: vec![xddot; n],
            min_radius: 0.0,
        }
    }

    pub fn with_min_radius(mut self, r: f64) -> Self {
        self.min_radius = r;
        self
    }
}

/// One component of a reference formula known in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceComponent {
    pub component: usize,
    pub value: f64,
}

pub type ReferenceRij = Arc<dyn Fn(usize, usize, &TangentPoint) -> Option<DMatrix<f64>> + Send + Sync>;
pub type ReferenceCommutator = Arc<dyn Fn(usize, usize, &Jet2Point) -> Vec<ReferenceComponent> + Send + Sync>;
pub type ReferenceIntegral = Arc<dyn Fn(usize, &TangentPoint) -> Option<f64> + Send + Sync>;
pub type ReferenceMultiTimeEl = Arc<dyn Fn(usize, &ExtendedJet) -> Option<Vec<f64>> + Send + Sync>;

/// First and second derivatives of `L` at a tangent point.
#[derive(Debug, Clone)]
pub struct LagrangianDerivatives {
    pub value: f64,
    /// `∂L/∂x`
    pub dx: DVector<f64>,
    /// `∂L/∂ẋ`, the momenta.
    pub p: DVector<f64>,
    /// `W[(i, j)] = ∂²L/∂ẋ_i∂ẋ_j`
    pub w: DMatrix<f64>,
    /// `M[(i, j)] = ∂²L/∂ẋ_i∂x_j`
    pub m: DMatrix<f64>,
}

/// First derivatives of a symmetry's characteristic and flux.
#[derive(Debug, Clone)]
pub struct SymmetryDerivatives {
    pub v: DVector<f64>,
    /// `∂V_i/∂x_j`
    pub v_x: DMatrix<f64>,
    /// `∂V_i/∂ẋ_j`
    pub v_xdot: DMatrix<f64>,
    pub flux: f64,
    pub flux_x: DVector<f64>,
    pub flux_xdot: DVector<f64>,
}

impl SymmetryDerivatives {
    /// `D_t V = (∂V/∂x) ẋ + (∂V/∂ẋ) ẍ` on a second-order jet.
    pub fn total_t_derivative(&self, xdot: &DVector<f64>, xddot: &DVector<f64>) -> DVector<f64> {
        &self.v_x * xdot + &self.v_xdot * xddot
    }

    /// `D_t F`.
    pub fn flux_total_t_derivative(&self, xdot: &DVector<f64>, xddot: &DVector<f64>) -> f64 {
        self.flux_x.dot(xdot) + self.flux_xdot.dot(xddot)
    }
}

/// A Lagrangian system `L(x, ẋ)` together with its known variational symmetries.
#[derive(Clone)]
pub struct LagrangianSystem {
    name: String,
    n: usize,
    lagrangian: Arc<dyn DynFunction>,
    symmetries: Vec<SymmetrySpec>,
    sample_box: SampleBox,
    reference_rij: Option<ReferenceRij>,
    reference_commutator: Option<ReferenceCommutator>,
    reference_integral: Option<ReferenceIntegral>,
    reference_multitime_el: Option<ReferenceMultiTimeEl>,
}

impl fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("symmetries", &self.symmetries)
            .finish()
    }
}

pub(crate) fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl LagrangianSystem {
    pub fn new<L>(name: impl Into<String>, n: usize, lagrangian: L, sample_box: SampleBox) -> Self
    where
        L: JetFunction + Send + Sync + 'static,
    {
        Self::from_dyn(name, n, Arc::new(OnJet(lagrangian)), sample_box)
    }

    pub fn from_dyn(
        name: impl Into<String>,
        n: usize,
        lagrangian: Arc<dyn DynFunction>,
        sample_box: SampleBox,
    ) -> Self {
        LagrangianSystem {
            name: name.into(),
            n,
            lagrangian,
            symmetries: Vec::new(),
            sample_box,
            reference_rij: None,
            reference_commutator: None,
            reference_integral: None,
            reference_multitime_el: None,
        }
    }

    pub fn with_symmetry(mut self, s: SymmetrySpec) -> Self {
        self.symmetries.push(s);
        self
    }

    pub fn with_reference_rij(mut self, r: ReferenceRij) -> Self {
        self.reference_rij = Some(r);
        self
    }

    pub fn with_reference_commutator(mut self, r: ReferenceCommutator) -> Self {
        self.reference_commutator = Some(r);
        self
    }

    pub fn with_reference_integral(mut self, r: ReferenceIntegral) -> Self {
        self.reference_integral = Some(r);
        self
    }

    pub fn with_reference_multitime_el(mut self, r: ReferenceMultiTimeEl) -> Self {
        self.reference_multitime_el = Some(r);
        self
    }

    pub fn with_sample_box(mut self, b: SampleBox) -> Self {
        self.sample_box = b;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Configuration-space dimension `N`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored symmetries `m`.
    pub fn symmetry_count(&self) -> usize {
        self.symmetries.len()
    }

    pub fn symmetries(&self) -> &[SymmetrySpec] {
        &self.symmetries
    }

    pub fn sample_box(&self) -> &SampleBox {
        &self.sample_box
    }

    pub fn lagrangian_fn(&self) -> &dyn DynFunction {
        self.lagrangian.as_ref()
    }

    pub fn reference_rij(&self) -> Option<&ReferenceRij> {
        self.reference_rij.as_ref()
    }

    pub fn reference_commutator(&self) -> Option<&ReferenceCommutator> {
        self.reference_commutator.as_ref()
    }

    pub fn reference_integral(&self) -> Option<&ReferenceIntegral> {
        self.reference_integral.as_ref()
    }

    pub fn reference_multitime_el(&self) -> Option<&ReferenceMultiTimeEl> {
        self.reference_multitime_el.as_ref()
    }

    /// Symmetry `k`, counted from 1.
    pub fn symmetry(&self, k: usize) -> Result<&SymmetrySpec> {
        if k == 0 || k > self.symmetries.len() {
            return Err(Error::Index(format!(
                "symmetry {k} requested, system {} has {}",
                self.name,
                self.symmetries.len()
            )));
        }
        Ok(&self.symmetries[k - 1])
    }

    pub(crate) fn check_len(&self, what: &str, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Dimension(format!(
                "{what} has length {}, expected {}",
                v.len(),
                self.n
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain(format!("{what} has non-finite entries")));
        }
        Ok(())
    }

    pub(crate) fn check_tangent(&self, pt: &TangentPoint) -> Result<()> {
        self.check_len("x", &pt.x)?;
        self.check_len("xdot", &pt.xdot)
    }

    pub(crate) fn check_jet(&self, jet: &Jet2Point) -> Result<()> {
        self.check_len("x", &jet.x)?;
        self.check_len("xdot", &jet.xdot)?;
        self.check_len("xddot", &jet.xddot)
    }

    pub(crate) fn check_extended(&self, jet: &ExtendedJet) -> Result<()> {
        self.check_jet(&jet.jet2())?;
        let m = self.symmetry_count();
        if jet.xt.len() != m || jet.xdott.len() != m {
            return Err(Error::Dimension(format!(
                "extended jet carries {} / {} time slots, system has {m} symmetries",
                jet.xt.len(),
                jet.xdott.len()
            )));
        }
        for (a, b) in jet.xt.iter().zip(&jet.xdott) {
            self.check_len("x_t", a)?;
            self.check_len("xdot_t", b)?;
        }
        Ok(())
    }

    pub(crate) fn check_phase(&self, ph: &PhasePoint) -> Result<()> {
        self.check_len("x", &ph.x)?;
        self.check_len("p", &ph.p)
    }

    pub fn lagrangian(&self, pt: &TangentPoint) -> Result<f64> {
        self.check_tangent(pt)?;
        diffengine::value(self.lagrangian.as_ref(), &pt.stacked())
    }

    /// Gradient of `L` with respect to `(x, ẋ)` only.
    pub fn lagrangian_gradient(&self, pt: &TangentPoint) -> Result<(f64, DVector<f64>, DVector<f64>)> {
        self.check_tangent(pt)?;
        let (y, g) = diffengine::value_grad(self.lagrangian.as_ref(), &pt.stacked())?;
        let n = self.n;
        Ok((y, dvec(&g[..n]), dvec(&g[n..])))
    }

    pub fn lagrangian_derivatives(&self, pt: &TangentPoint) -> Result<LagrangianDerivatives> {
        self.check_tangent(pt)?;
        let n = self.n;
        let (value, g, h) = diffengine::value_grad_hessian(self.lagrangian.as_ref(), &pt.stacked())?;
        Ok(LagrangianDerivatives {
            value,
            dx: dvec(&g[..n]),
            p: dvec(&g[n..]),
            w: h.view((n, n), (n, n)).into_owned(),
            m: h.view((n, 0), (n, n)).into_owned(),
        })
    }

    /// `V^{(k)}(x, ẋ)`.
    pub fn characteristic(&self, k: usize, pt: &TangentPoint) -> Result<Vec<f64>> {
        let s = self.symmetry(k)?;
        self.check_tangent(pt)?;
        let v = s.characteristic.eval_f64(&pt.stacked());
        if v.len() != self.n || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Domain(format!("characteristic {k} not finite or wrong length")));
        }
        Ok(v)
    }

    /// `F_k(x, ẋ)`.
    pub fn flux(&self, k: usize, pt: &TangentPoint) -> Result<f64> {
        let s = self.symmetry(k)?;
        self.check_tangent(pt)?;
        diffengine::value(s.flux.as_ref(), &pt.stacked())
    }

    pub fn symmetry_derivatives(&self, k: usize, pt: &TangentPoint) -> Result<SymmetryDerivatives> {
        let s = self.symmetry(k)?;
        self.check_tangent(pt)?;
        let n = self.n;
        let z = pt.stacked();
        let (v, jac) = diffengine::value_jacobian(s.characteristic.as_ref(), &z)?;
        if v.len() != n {
            return Err(Error::Dimension(format!("characteristic {k} has length {}", v.len())));
        }
        let (flux, gf) = diffengine::value_grad(s.flux.as_ref(), &z)?;
        Ok(SymmetryDerivatives {
            v: dvec(&v),
            v_x: jac.columns(0, n).into_owned(),
            v_xdot: jac.columns(n, n).into_owned(),
            flux,
            flux_x: dvec(&gf[..n]),
            flux_xdot: dvec(&gf[n..]),
        })
    }

    /// Conjugate momenta `p = ∂L/∂ẋ`.
    pub fn momentum(&self, pt: &TangentPoint) -> Result<Vec<f64>> {
        let (_, _, p) = self.lagrangian_gradient(pt)?;
        Ok(p.as_slice().to_vec())
    }

    /// Legendre image `(x, ∂L/∂ẋ)` of a tangent point.
    pub fn legendre(&self, pt: &TangentPoint) -> Result<PhasePoint> {
        Ok(PhasePoint::new(pt.x.clone(), self.momentum(pt)?))
    }

    /// Euler–Lagrange residual `∂L/∂x − D_t ∂L/∂ẋ` on an arbitrary jet.
    pub fn el_residual(&self, jet: &Jet2Point) -> Result<Vec<f64>> {
        self.check_jet(jet)?;
        let d = self.lagrangian_derivatives(&jet.tangent())?;
        Ok(el_residual_from(&d, &dvec(&jet.xdot), &dvec(&jet.xddot))
            .as_slice()
            .to_vec())
    }

    /// Solves `𝓔(x, ẋ, ẍ) = 0` for `ẍ`.
    pub fn accel(&self, pt: &TangentPoint) -> Result<Vec<f64>> {
        let d = self.lagrangian_derivatives(pt)?;
        let rhs = &d.dx - &d.m * dvec(&pt.xdot);
        Ok(solve_symmetric(&d.w, &rhs)?.as_slice().to_vec())
    }

    /// Condition number of the velocity Hessian at a point.
    pub fn hessian_condition(&self, pt: &TangentPoint) -> Result<f64> {
        let d = self.lagrangian_derivatives(pt)?;
        Ok(condition_number(&d.w))
    }
}

pub(crate) fn el_residual_from(d: &LagrangianDerivatives, xdot: &DVector<f64>, xddot: &DVector<f64>) -> DVector<f64> {
    &d.dx - &d.m * xdot - &d.w * xddot
}

pub(crate) fn condition_number(w: &DMatrix<f64>) -> f64 {
    let sv = w.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `W X = B` for the velocity Hessian, rejecting degenerate `W`.
pub(crate) fn solve_matrix(w: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let cond = condition_number(w);
    if cond.is_nan() || cond >= MAX_CONDITION {
        return Err(Error::Degeneracy(format!("velocity Hessian condition number {cond:e}")));
    }
    w.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Degeneracy("velocity Hessian is singular".into()))
}

pub(crate) fn solve_symmetric(w: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = solve_matrix(w, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffengine::{fd, FD_STEP_FIRST, FD_STEP_SECOND};
    use crate::sampling::JetSampler;
    use approx::assert_abs_diff_eq;

    fn all_systems() -> Vec<LagrangianSystem> {
        vec![
            make_kepler(1.0).unwrap(),
            make_kepler_runge_lenz(0.7).unwrap(),
            make_toda(4, TodaBoundary::Periodic).unwrap(),
            make_toda(5, TodaBoundary::OpenEnd).unwrap(),
            make_harmonic(1.3),
        ]
    }

    #[test]
    fn kepler_lagrangian_value() {
        let sys = make_kepler(1.0).unwrap();
        let pt = TangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0; 3]);
        assert_eq!(sys.lagrangian(&pt).unwrap(), 1.0);
    }

    #[test]
    fn kepler_characteristic_and_flux() {
        let sys = make_kepler(1.0).unwrap();
        let pt = TangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        assert_eq!(sys.characteristic(1, &pt).unwrap(), vec![0.0, -2.0, 0.0]);
        assert_eq!(sys.flux(1, &pt).unwrap(), -2.0);
    }

    #[test]
    fn kepler_rejects_nonpositive_alpha() {
        assert!(matches!(make_kepler(0.0), Err(Error::Parameter(_))));
        assert!(matches!(make_kepler(-1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn kepler_singularity_is_domain_error() {
        let sys = make_kepler(1.0).unwrap();
        let jet = Jet2Point::new(vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0; 3]);
        assert!(matches!(sys.el_residual(&jet), Err(Error::Domain(_))));
    }

    #[test]
    fn kepler_el_residual_and_accel() {
        let sys = make_kepler(1.0).unwrap();
        let jet = Jet2Point::new(vec![1.0, 0.0, 0.0], vec![0.0; 3], vec![-1.0, 0.0, 0.0]);
        assert_eq!(sys.el_residual(&jet).unwrap(), vec![0.0; 3]);
        let a = sys.accel(&jet.tangent()).unwrap();
        assert_abs_diff_eq!(a[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn toda_values() {
        let sys = make_toda(3, TodaBoundary::Periodic).unwrap();
        let zero = TangentPoint::new(vec![0.0; 3], vec![0.0; 3]);
        assert_eq!(sys.lagrangian(&zero).unwrap(), -3.0);
        let pt = TangentPoint::new(vec![0.0; 3], vec![1.0, 0.0, 0.0]);
        assert_eq!(sys.characteristic(1, &pt).unwrap(), vec![3.0, 2.0, 2.0]);
        assert_abs_diff_eq!(sys.flux(1, &pt).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        let jet = Jet2Point::new(vec![0.0; 3], vec![0.0; 3], vec![0.0; 3]);
        assert_eq!(sys.el_residual(&jet).unwrap(), vec![0.0; 3]);
        assert_eq!(sys.accel(&zero).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn toda_rejects_small_lattice() {
        assert!(matches!(make_toda(2, TodaBoundary::Periodic), Err(Error::Parameter(_))));
    }

    #[test]
    fn harmonic_values() {
        let sys = make_harmonic(1.0);
        assert_eq!(sys.lagrangian(&TangentPoint::new(vec![1.0], vec![0.0])).unwrap(), -0.5);
        assert_eq!(
            sys.characteristic(1, &TangentPoint::new(vec![0.3], vec![2.0])).unwrap(),
            vec![2.0]
        );
        assert_eq!(sys.flux(1, &TangentPoint::new(vec![0.0], vec![2.0])).unwrap(), 2.0);
        let jet = Jet2Point::new(vec![1.0], vec![0.0], vec![0.0]);
        assert_eq!(sys.el_residual(&jet).unwrap(), vec![-1.0]);
        let sys2 = make_harmonic(2.0);
        assert_eq!(
            sys2.accel(&TangentPoint::new(vec![1.0], vec![0.0])).unwrap(),
            vec![-4.0]
        );
        assert_eq!(
            sys2.momentum(&TangentPoint::new(vec![0.0], vec![3.0])).unwrap(),
            vec![3.0]
        );
    }

    #[test]
    fn unit_mass_momentum_is_velocity() {
        let mut s = JetSampler::new(5);
        for sys in all_systems() {
            for _ in 0..10 {
                let pt = s.tangent(&sys);
                assert_eq!(sys.momentum(&pt).unwrap(), pt.xdot);
            }
        }
    }

    #[test]
    fn velocity_hessian_is_identity_and_well_conditioned() {
        let mut s = JetSampler::new(11);
        for sys in all_systems() {
            for _ in 0..100 {
                let pt = s.tangent(&sys);
                let d = sys.lagrangian_derivatives(&pt).unwrap();
                assert_eq!(d.w, DMatrix::identity(sys.dim(), sys.dim()));
                assert!(sys.hessian_condition(&pt).unwrap() < 1e6);
            }
        }
    }

    #[test]
    fn accel_round_trip() {
        let mut s = JetSampler::new(3);
        for sys in all_systems() {
            for _ in 0..100 {
                let pt = s.tangent(&sys);
                let a = sys.accel(&pt).unwrap();
                let r = sys
                    .el_residual(&Jet2Point::new(pt.x.clone(), pt.xdot.clone(), a))
                    .unwrap();
                assert!(r.iter().all(|v| v.abs() < 1e-10), "{} residual {r:?}", sys.name());
            }
        }
    }

    #[test]
    fn derivatives_agree_with_finite_differences() {
        let mut s = JetSampler::new(2024);
        for sys in all_systems() {
            for _ in 0..100 {
                let pt = s.tangent(&sys);
                let z = pt.stacked();
                let g = diffengine::grad(sys.lagrangian_fn(), &z).unwrap();
                let g_fd = fd::grad(sys.lagrangian_fn(), &z, FD_STEP_FIRST).unwrap();
                let err = g.iter().zip(&g_fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-6, "{} gradient error {err}", sys.name());
                let h = diffengine::hessian(sys.lagrangian_fn(), &z).unwrap();
                let h_fd = fd::hessian(sys.lagrangian_fn(), &z, FD_STEP_SECOND).unwrap();
                assert!((&h - &h_fd).amax() < 1e-4, "{} hessian", sys.name());
                for sym in sys.symmetries() {
                    let j = diffengine::jacobian(sym.characteristic_fn(), &z).unwrap();
                    let j_fd = fd::jacobian(sym.characteristic_fn(), &z, FD_STEP_FIRST).unwrap();
                    assert!((&j - &j_fd).amax() < 1e-6, "{} {} jacobian", sys.name(), sym.label);
                    let gf = diffengine::grad(sym.flux_fn(), &z).unwrap();
                    let gf_fd = fd::grad(sym.flux_fn(), &z, FD_STEP_FIRST).unwrap();
                    let err = gf.iter().zip(&gf_fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(err < 1e-6, "{} {} flux gradient {err}", sys.name(), sym.label);
                }
            }
        }
    }

    #[test]
    fn raw_hessian_asymmetry_is_tiny() {
        let mut s = JetSampler::new(8);
        for sys in all_systems() {
            for _ in 0..20 {
                let z = s.tangent(&sys).stacked();
                let (_, _, raw) = diffengine::value_grad_hessian_raw(sys.lagrangian_fn(), &z).unwrap();
                assert!((&raw - raw.transpose()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn kepler_velocity_jacobian_example() {
        let sys = make_kepler(1.0).unwrap();
        let pt = TangentPoint::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
        let d = sys.symmetry_derivatives(1, &pt).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, -2.0]);
        assert_eq!(d.v_xdot, expected);
        let j_fd = fd::jacobian(
            sys.symmetry(1).unwrap().characteristic_fn(),
            &pt.stacked(),
            FD_STEP_FIRST,
        )
        .unwrap();
        assert!((j_fd.columns(3, 3) - expected).amax() < 1e-8);
    }

    #[test]
    fn hessian_examples() {
        let k = make_kepler(1.0).unwrap();
        let pt = TangentPoint::new(vec![0.3, -1.0, 0.8], vec![0.1, 0.2, -0.4]);
        assert_eq!(k.lagrangian_derivatives(&pt).unwrap().w, DMatrix::identity(3, 3));
        let t = make_toda(6, TodaBoundary::OpenEnd).unwrap();
        let pt = TangentPoint::new(vec![0.1; 6], vec![0.5; 6]);
        assert_eq!(t.lagrangian_derivatives(&pt).unwrap().w, DMatrix::identity(6, 6));
    }

    #[test]
    fn toda_open_end_matches_periodic_with_boundary_zeroed() {
        // Open end equals the periodic lattice once the wrap-around bond is
        // pushed to e^{-∞}: take x_N − x_1 very negative in the periodic chain.
        let n = 5;
        let per = make_toda(n, TodaBoundary::Periodic).unwrap();
        let open = make_toda(n, TodaBoundary::OpenEnd).unwrap();
        let x = vec![40.0, 40.3, 39.8, 40.1, 0.0];
        let xdot = vec![0.2, -0.1, 0.3, 0.05, 0.0];
        let x_open = x.clone();
        let pt_per = TangentPoint::new(x, xdot.clone());
        let pt_open = TangentPoint::new(x_open, xdot);
        // Bond 4→5 is e^{-40.1} ≈ 4e-18 in both; the wrap bond 5→1 is e^{40} in the
        // periodic chain, so compare only interior sites 2..=3 of the characteristics.
        let v_per = per.characteristic(1, &pt_per).unwrap();
        let v_open = open.characteristic(1, &pt_open).unwrap();
        for i in 1..3 {
            assert_abs_diff_eq!(v_per[i], v_open[i], epsilon = 1e-12);
        }
        let a_per = per.accel(&pt_per).unwrap();
        let a_open = open.accel(&pt_open).unwrap();
        for i in 1..3 {
            assert_abs_diff_eq!(a_per[i], a_open[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let sys = make_toda(4, TodaBoundary::Periodic).unwrap();
        let pt = TangentPoint::new(vec![0.0; 3], vec![0.0; 4]);
        assert!(matches!(sys.lagrangian(&pt), Err(Error::Dimension(_))));
        assert!(matches!(sys.symmetry(3), Err(Error::Index(_))));
        assert!(matches!(sys.symmetry(0), Err(Error::Index(_))));
    }
}
