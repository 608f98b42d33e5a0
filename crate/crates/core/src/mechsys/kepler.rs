use std::sync::Arc;

use super::{
    ExtendedJet, Interval, Jet2Point, JetFunction, JetMap, LagrangianSystem, ReferenceComponent, SampleBox,
    SymmetrySpec, TangentPoint,
};
use crate::diffengine::Scalar;
use crate::error::{Error, Result};

fn norm<S: Scalar>(x: &[S]) -> S {
    x.iter().fold(S::zero(), |acc, xi| acc + xi.clone() * xi.clone()).sqrt()
}

/// `L = ½‖ẋ‖² + α/‖x‖`.
#[derive(Debug, Clone, Copy)]
struct KeplerLagrangian {
    alpha: f64,
}

impl JetFunction for KeplerLagrangian {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S {
        let kinetic = xdot.iter().fold(S::zero(), |acc, v| acc + v.clone() * v.clone()) * 0.5;
        kinetic + norm(x).recip() * self.alpha
    }
}

/// Runge–Lenz characteristic along axis `axis` (0-based):
/// `V_a = Σ_{j≠a} x_j ẋ_j`, `V_j = x_j ẋ_a − 2 x_a ẋ_j` for `j ≠ a`.
#[derive(Debug, Clone, Copy)]
struct RungeLenzCharacteristic {
    axis: usize,
}

impl JetMap for RungeLenzCharacteristic {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> Vec<S> {
        let a = self.axis;
        (0..x.len())
            .map(|j| {
                if j == a {
                    (0..x.len())
                        .filter(|&i| i != a)
                        .fold(S::zero(), |acc, i| acc + x[i].clone() * xdot[i].clone())
                } else {
                    x[j].clone() * xdot[a].clone() - x[a].clone() * xdot[j].clone() * 2.0
                }
            })
            .collect()
    }
}

/// `F_a = ẋ_a Σ_{j≠a} x_j ẋ_j − x_a Σ_{j≠a} ẋ_j² − α x_a/‖x‖`.
#[derive(Debug, Clone, Copy)]
struct RungeLenzFlux {
    axis: usize,
    alpha: f64,
}

impl JetFunction for RungeLenzFlux {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S {
        let a = self.axis;
        let mut cross = S::zero();
        let mut speed = S::zero();
        for j in (0..x.len()).filter(|&j| j != a) {
            cross = cross + x[j].clone() * xdot[j].clone();
            speed = speed + xdot[j].clone() * xdot[j].clone();
        }
        xdot[a].clone() * cross - x[a].clone() * speed - x[a].clone() / norm(x) * self.alpha
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!("Kepler alpha must be positive, got {alpha}")));
    }
    Ok(())
}

fn kepler_box() -> SampleBox {
    let i = Interval::new(-2.0, 2.0);
    SampleBox::uniform(3, i, i, i).with_min_radius(0.5)
}

fn runge_lenz_symmetry(axis: usize, alpha: f64) -> SymmetrySpec {
    SymmetrySpec::new(
        format!("runge-lenz-{}", axis + 1),
        RungeLenzCharacteristic { axis },
        RungeLenzFlux { axis, alpha },
    )
}

fn r(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Runge–Lenz component `J_a = ẋ_a Σ_{j≠a} x_j ẋ_j − x_a Σ_{j≠a} ẋ_j² + α x_a/‖x‖`.
fn runge_lenz_integral(axis: usize, alpha: f64, pt: &TangentPoint) -> f64 {
    let (x, v) = (&pt.x, &pt.xdot);
    let (mut cross, mut speed) = (0.0, 0.0);
    for j in (0..3).filter(|&j| j != axis) {
        cross += x[j] * v[j];
        speed += v[j] * v[j];
    }
    v[axis] * cross - x[axis] * speed + alpha * x[axis] / r(x)
}

/// Multi-time EL residual along the axis-`a` flow in closed form:
/// `𝓔_a = Σ_{j≠a}(ẋ_j² − α x_j²/‖x‖³) − (ẋ_a)_t`,
/// `𝓔_j = −ẋ_a ẋ_j + α x_a x_j/‖x‖³ − (ẋ_j)_t`.
fn runge_lenz_multitime_el(axis: usize, alpha: f64, jet: &ExtendedJet) -> Vec<f64> {
    let (x, v) = (&jet.x, &jet.xdot);
    let xdott = &jet.xdott[axis];
    let r3 = r(x).powi(3);
    (0..3)
        .map(|j| {
            if j == axis {
                (0..3)
                    .filter(|&i| i != axis)
                    .map(|i| v[i] * v[i] - alpha * x[i] * x[i] / r3)
                    .sum::<f64>()
                    - xdott[j]
            } else {
                -v[axis] * v[j] + alpha * x[axis] * x[j] / r3 - xdott[j]
            }
        })
        .collect()
}

/// First component of `D_{v_1}V^{(2)} − D_{v_2}V^{(1)}` in its printed form: `−ẍ₂(2x₁² − 2x₂² − x₃²) − x₂x₃ẍ₃ − x₂(3ẋ₁² + ẋ₂² + ẋ₃²) + 2x₁ẋ₁ẋ₂`.
pub fn kepler_commutator_printed(jet: &Jet2Point) -> f64 {
    let (x, v, a) = (&jet.x, &jet.xdot, &jet.xddot);
    -a[1] * (2.0 * x[0] * x[0] - 2.0 * x[1] * x[1] - x[2] * x[2])
        - x[1] * x[2] * a[2]
        - x[1] * (3.0 * v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        + 2.0 * x[0] * v[0] * v[1]
}

/// The same component re-derived from the Runge–Lenz characteristics:
/// `−ẍ₂(2x₁² + 2x₂² + x₃²) − x₂x₃ẍ₃ − x₂(3ẋ₁² + ẋ₂² + ẋ₃²) + 2x₁ẋ₁ẋ₂`.
pub fn kepler_commutator_rederived(jet: &Jet2Point) -> f64 {
    let (x, v, a) = (&jet.x, &jet.xdot, &jet.xddot);
    -a[1] * (2.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + x[2] * x[2])
        - x[1] * x[2] * a[2]
        - x[1] * (3.0 * v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        + 2.0 * x[0] * v[0] * v[1]
}

fn printed_commutator(k: usize, l: usize, jet: &Jet2Point) -> Vec<ReferenceComponent> {
    match (k, l) {
        (1, 2) => vec![ReferenceComponent {
            component: 0,
            value: kepler_commutator_printed(jet),
        }],
        (2, 1) => vec![ReferenceComponent {
            component: 0,
            value: -kepler_commutator_printed(jet),
        }],
        _ => Vec::new(),
    }
}

fn base(alpha: f64, name: &str, axes: usize) -> LagrangianSystem {
    let mut sys = LagrangianSystem::new(name, 3, KeplerLagrangian { alpha }, kepler_box());
    for a in 0..axes {
        sys = sys.with_symmetry(runge_lenz_symmetry(a, alpha));
    }
    sys.with_reference_integral(Arc::new(move |k, pt| {
        (1..=axes).contains(&k).then(|| runge_lenz_integral(k - 1, alpha, pt))
    }))
    .with_reference_multitime_el(Arc::new(move |k, jet| {
        ((1..=axes).contains(&k) && jet.xdott.len() >= k).then(|| runge_lenz_multitime_el(k - 1, alpha, jet))
    }))
    .with_reference_commutator(Arc::new(printed_commutator))
}

/// Kepler problem with unit mass and the first Runge–Lenz symmetry.
pub fn make_kepler(alpha: f64) -> Result<LagrangianSystem> {
    check_alpha(alpha)?;
    Ok(base(alpha, "kepler", 1))
}

/// Kepler problem carrying all three Runge–Lenz symmetries, obtained from the
/// first by permuting coordinates. These do not commute.
pub fn make_kepler_runge_lenz(alpha: f64) -> Result<LagrangianSystem> {
    check_alpha(alpha)?;
    Ok(base(alpha, "kepler-runge-lenz", 3))
}
