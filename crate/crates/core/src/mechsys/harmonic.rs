use std::sync::Arc;

use super::{Interval, JetFunction, LagrangianSystem, SampleBox, SymmetrySpec, VelocityCharacteristic};
use crate::diffengine::Scalar;

/// `L = ½ẋ² − ½ω²x²`.
#[derive(Debug, Clone, Copy)]
struct HarmonicLagrangian {
    omega: f64,
}

impl JetFunction for HarmonicLagrangian {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S {
        (xdot[0].clone() * xdot[0].clone() - x[0].clone() * x[0].clone() * (self.omega * self.omega)) * 0.5
    }
}

/// One-dimensional harmonic oscillator whose only symmetry is time translation
/// (`V = ẋ`, `F = L`).
pub fn make_harmonic(omega: f64) -> LagrangianSystem {
    let unit = Interval::new(-1.0, 1.0);
    let lagrangian = HarmonicLagrangian { omega };
    LagrangianSystem::new("harmonic", 1, lagrangian, SampleBox::uniform(1, unit, unit, unit))
        .with_symmetry(SymmetrySpec::new("energy", VelocityCharacteristic, lagrangian))
        .with_reference_integral(Arc::new(move |k, pt| {
            (k == 1).then(|| 0.5 * pt.xdot[0] * pt.xdot[0] + 0.5 * omega * omega * pt.x[0] * pt.x[0])
        }))
}
