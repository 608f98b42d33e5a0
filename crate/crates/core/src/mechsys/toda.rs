use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ExtendedJet, Interval, JetFunction, JetMap, LagrangianSystem, SampleBox, SymmetrySpec, TangentPoint};
use crate::diffengine::Scalar;
use crate::error::{Error, Result};

/// Boundary condition of the Toda chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TodaBoundary {
    /// `x_0 ≡ x_N`, `x_{N+1} ≡ x_1`.
    Periodic,
    /// `x_0 = +∞`, `x_{N+1} = −∞`: the two outer bonds vanish.
    OpenEnd,
}

/// Index bookkeeping for a chain of `n` sites with 0-based indices.
/// Bond `i` is `e^{x_{i+1} − x_i}`.
#[derive(Debug, Clone, Copy)]
struct Chain {
    n: usize,
    boundary: TodaBoundary,
}

impl Chain {
    fn wrap(&self, i: isize) -> Option<usize> {
        let n = self.n as isize;
        match self.boundary {
            TodaBoundary::Periodic => Some(i.rem_euclid(n) as usize),
            TodaBoundary::OpenEnd => (0..n).contains(&i).then_some(i as usize),
        }
    }

    fn bond<S: Scalar>(&self, x: &[S], i: isize) -> S {
        match self.boundary {
            TodaBoundary::Periodic => {
                let a = self.wrap(i).unwrap();
                let b = self.wrap(i + 1).unwrap();
                (x[b].clone() - x[a].clone()).exp()
            }
            TodaBoundary::OpenEnd => {
                if i >= 0 && i + 1 < self.n as isize {
                    (x[i as usize + 1].clone() - x[i as usize].clone()).exp()
                } else {
                    S::zero()
                }
            }
        }
    }

    /// Velocity at site `i`; zero outside an open chain.
    fn vel<S: Scalar>(&self, v: &[S], i: isize) -> S {
        self.wrap(i).map_or_else(S::zero, |j| v[j].clone())
    }

    fn sites(&self) -> impl Iterator<Item = isize> {
        0..self.n as isize
    }

    fn sum<S: Scalar>(&self, f: impl Fn(isize) -> S) -> S {
        self.sites().fold(S::zero(), |acc, i| acc + f(i))
    }

    /// `ẋ_i² + ẋ_i ẋ_{i+1} + ẋ_{i+1}²`
    fn quad<S: Scalar>(&self, v: &[S], i: isize) -> S {
        let a = self.vel(v, i);
        let b = self.vel(v, i + 1);
        a.clone() * a.clone() + a * b.clone() + b.clone() * b
    }
}

struct TodaLagrangian(Chain);

impl JetFunction for TodaLagrangian {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S {
        let c = self.0;
        c.sum(|i| c.vel(xdot, i).powi(2) * 0.5 - c.bond(x, i))
    }
}

struct TodaV1(Chain);

impl JetMap for TodaV1 {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> Vec<S> {
        let c = self.0;
        c.sites()
            .map(|i| c.vel(xdot, i).powi(2) + c.bond(x, i) + c.bond(x, i - 1))
            .collect()
    }
}

struct TodaV2(Chain);

impl JetMap for TodaV2 {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> Vec<S> {
        let c = self.0;
        c.sites()
            .map(|i| {
                let vi = c.vel(xdot, i);
                vi.powi(3)
                    + (c.vel(xdot, i + 1) + vi.clone() * 2.0) * c.bond(x, i)
                    + (vi * 2.0 + c.vel(xdot, i - 1)) * c.bond(x, i - 1)
            })
            .collect()
    }
}

struct TodaF1(Chain);

impl JetFunction for TodaF1 {
    fn eval<S: Scalar>(&self, _x: &[S], xdot: &[S]) -> S {
        let c = self.0;
        c.sum(|i| c.vel(xdot, i).powi(3)) * (2.0 / 3.0)
    }
}

/// `F_2 = Σ(¾ẋ_i⁴ + (ẋ_i² + ẋ_iẋ_{i+1} + ẋ_{i+1}²)e^{x_{i+1}−x_i})
///       − Σ(½e^{2(x_{i+1}−x_i)} + e^{x_{i+2}−x_i})`.
struct TodaF2(Chain);

impl JetFunction for TodaF2 {
    fn eval<S: Scalar>(&self, x: &[S], xdot: &[S]) -> S {
        let c = self.0;
        c.sum(|i| {
            let b = c.bond(x, i);
            c.vel(xdot, i).powi(4) * 0.75 + c.quad(xdot, i) * b.clone()
                - b.clone() * b.clone() * 0.5
                - b * c.bond(x, i + 1)
        })
    }
}

fn j1(c: Chain, x: &[f64], v: &[f64]) -> f64 {
    c.sum(|i| c.vel(v, i).powi(3) / 3.0 + (c.vel(v, i) + c.vel(v, i + 1)) * c.bond(x, i))
}

fn j2(c: Chain, x: &[f64], v: &[f64]) -> f64 {
    c.sum(|i| {
        let b: f64 = c.bond(x, i);
        c.vel(v, i).powi(4) / 4.0 + c.quad(v, i) * b + 0.5 * b * b + b * c.bond(x, i + 1)
    })
}

/// Closed-form multi-time EL residuals of the first two Toda flows.
fn multitime_el(c: Chain, k: usize, jet: &ExtendedJet) -> Vec<f64> {
    let (x, v) = (&jet.x[..], &jet.xdot[..]);
    let xdott = &jet.xdott[k - 1];
    c.sites()
        .map(|i| {
            let b = |j: isize| -> f64 { c.bond(x, j) };
            let u = |j: isize| -> f64 { c.vel(v, j) };
            let rhs = if k == 1 {
                (u(i) + u(i + 1)) * b(i) - (u(i) + u(i - 1)) * b(i - 1)
            } else {
                c.quad(v, i) * b(i) - c.quad(v, i - 1) * b(i - 1) + b(i) * b(i) - b(i - 1) * b(i - 1) + b(i) * b(i + 1)
                    - b(i - 2) * b(i - 1)
            };
            rhs - xdott[i as usize]
        })
        .collect()
}

/// `r_{i,i+1} = −2(ẋ_{i+1} − ẋ_i)e^{x_{i+1}−x_i}`, `r_{i,i−1} = 2(ẋ_i − ẋ_{i−1})e^{x_i−x_{i−1}}`.
fn reference_rij(c: Chain, pt: &TangentPoint) -> DMatrix<f64> {
    let (x, v) = (&pt.x[..], &pt.xdot[..]);
    let mut r = DMatrix::zeros(c.n, c.n);
    for i in c.sites() {
        let row = i as usize;
        if let Some(j) = c.wrap(i + 1) {
            r[(row, j)] += -2.0 * (c.vel(v, i + 1) - c.vel(v, i)) * c.bond::<f64>(x, i);
        }
        if let Some(j) = c.wrap(i - 1) {
            r[(row, j)] += 2.0 * (c.vel(v, i) - c.vel(v, i - 1)) * c.bond::<f64>(x, i - 1);
        }
    }
    r
}

/// Toda lattice of `n ≥ 3` unit masses with the first two commuting symmetries.
pub fn make_toda(n: usize, boundary: TodaBoundary) -> Result<LagrangianSystem> {
    if n < 3 {
        return Err(Error::Parameter(format!(
            "Toda lattice needs at least 3 sites, got {n}"
        )));
    }
    let c = Chain { n, boundary };
    let unit = Interval::new(-1.0, 1.0);
    let name = match boundary {
        TodaBoundary::Periodic => "toda-periodic",
        TodaBoundary::OpenEnd => "toda-open",
    };
    Ok(
        LagrangianSystem::new(name, n, TodaLagrangian(c), SampleBox::uniform(n, unit, unit, unit))
            .with_symmetry(SymmetrySpec::new("toda-1", TodaV1(c), TodaF1(c)))
            .with_symmetry(SymmetrySpec::new("toda-2", TodaV2(c), TodaF2(c)))
            .with_reference_integral(Arc::new(move |k, pt| match k {
                1 => Some(j1(c, &pt.x, &pt.xdot)),
                2 => Some(j2(c, &pt.x, &pt.xdot)),
                _ => None,
            }))
            .with_reference_multitime_el(Arc::new(move |k, jet| {
                ((k == 1 || k == 2) && jet.xdott.len() >= k).then(|| multitime_el(c, k, jet))
            }))
            .with_reference_rij(Arc::new(move |k, l, pt| match (k, l) {
                (1, 2) => Some(reference_rij(c, pt)),
                (2, 1) => Some(-reference_rij(c, pt)),
                _ => None,
            })),
    )
}
