//! Seeded random sampling of jets and phase points inside a system's sample box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mechsys::{ExtendedJet, Interval, Jet2Point, LagrangianSystem, PhasePoint, TangentPoint};

/// Seed used when none is configured.
pub const DEFAULT_SEED: u64 = 20_160_101;

/// Deterministic sampler; identical seeds give identical streams on every platform.
#[derive(Debug, Clone)]
pub struct JetSampler {
    rng: ChaCha8Rng,
}

impl JetSampler {
    pub fn new(seed: u64) -> Self {
        JetSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn draw(&mut self, box_: &[Interval]) -> Vec<f64> {
        box_.iter().map(|iv| self.rng.random_range(iv.lo..=iv.hi)).collect()
    }

    /// Configuration in the box with `‖x‖ ≥ min_radius`.
    pub fn configuration(&mut self, sys: &LagrangianSystem) -> Vec<f64> {
        let b = sys.sample_box();
        loop {
            let x = self.draw(&b.x);
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() >= b.min_radius {
                return x;
            }
        }
    }

    pub fn tangent(&mut self, sys: &LagrangianSystem) -> TangentPoint {
        let x = self.configuration(sys);
        let xdot = self.draw(&sys.sample_box().xdot);
        TangentPoint::new(x, xdot)
    }

    /// Off-shell second-order jet with independent `ẍ`.
    pub fn jet2(&mut self, sys: &LagrangianSystem) -> Jet2Point {
        let t = self.tangent(sys);
        let xddot = self.draw(&sys.sample_box().xddot);
        Jet2Point::new(t.x, t.xdot, xddot)
    }

    /// Fully generic extended jet: every slot drawn independently.
    /// `x_{t_k}` uses the velocity box and `ẋ_{t_k}` the acceleration box.
    pub fn extended(&mut self, sys: &LagrangianSystem) -> ExtendedJet {
        let j = self.jet2(sys);
        let m = sys.symmetry_count();
        let b = sys.sample_box().clone();
        let xt = (0..m).map(|_| self.draw(&b.xdot)).collect();
        let xdott = (0..m).map(|_| self.draw(&b.xddot)).collect();
        ExtendedJet {
            x: j.x,
            xdot: j.xdot,
            xddot: j.xddot,
            xt,
            xdott,
        }
    }

    /// Phase point `(x, ∂L/∂ẋ)` above a sampled tangent point.
    pub fn phase(&mut self, sys: &LagrangianSystem) -> PhasePoint {
        let t = self.tangent(sys);
        sys.legendre(&t).expect("sample box lies inside the domain")
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }
}
