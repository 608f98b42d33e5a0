//! Commuting flows in multi-time: phase-space integration along staircase
//! paths, the pluri-Lagrangian coefficients, actions and loop defects, and the
//! multi-time Euler–Lagrange and off-shell identities on extended jets.
//!
//! Axis `0` is the time `t` of the flow of `H`; axis `k ≥ 1` is the time `t_k`
//! of the flow of `H_k`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{hk_gradients_at, legendre_inverse, NEWTON_TOL};
use crate::mechsys::{dvec, el_residual_from, ExtendedJet, LagrangianSystem, PhasePoint, TangentPoint};
use crate::noether::{integral_gradient, noether_integral};

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Upper bound on RK4 steps in one segment.
const MAX_SEGMENT_STEPS: f64 = 1e9;
/// Slack that keeps `duration / h` from rounding up to an extra step.
const STEP_COUNT_SLACK: f64 = 1e-9;

fn check_axis(sys: &LagrangianSystem, axis: usize) -> Result<()> {
    if axis > sys.symmetry_count() {
        return Err(Error::Index(format!(
            "time axis {axis} requested, system {} has {} flows",
            sys.name(),
            sys.symmetry_count() + 1
        )));
    }
    Ok(())
}

/// Canonical vector field `(∂H_a/∂p, −∂H_a/∂x)` of axis `a`.
pub fn flow_field(sys: &LagrangianSystem, axis: usize, phase: &PhasePoint) -> Result<(DVector<f64>, DVector<f64>)> {
    check_axis(sys, axis)?;
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let (gx, gp) = hk_gradients_at(sys, axis, &pt, &dvec(&phase.p))?;
    Ok((gp, -gx))
}

fn shifted(phase: &PhasePoint, k: &(DVector<f64>, DVector<f64>), c: f64) -> PhasePoint {
    PhasePoint {
        x: phase.x.iter().zip(k.0.iter()).map(|(a, b)| a + c * b).collect(),
        p: phase.p.iter().zip(k.1.iter()).map(|(a, b)| a + c * b).collect(),
    }
}

/// One classical fourth-order Runge–Kutta step of size `h` (may be negative).
pub fn rk4_step(sys: &LagrangianSystem, axis: usize, phase: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let k1 = flow_field(sys, axis, phase)?;
    let k2 = flow_field(sys, axis, &shifted(phase, &k1, h / 2.0))?;
    let k3 = flow_field(sys, axis, &shifted(phase, &k2, h / 2.0))?;
    let k4 = flow_field(sys, axis, &shifted(phase, &k3, h))?;
    let dx = (&k1.0 + 2.0 * &k2.0 + 2.0 * &k3.0 + &k4.0) * (h / 6.0);
    let dp = (&k1.1 + 2.0 * &k2.1 + 2.0 * &k3.1 + &k4.1) * (h / 6.0);
    Ok(PhasePoint {
        x: phase.x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect(),
        p: phase.p.iter().zip(dp.iter()).map(|(a, d)| a + d).collect(),
    })
}

/// Number of uniform substeps used for a segment of the given duration.
pub fn substep_count(duration: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("step must be positive, got {h}")));
    }
    if !duration.is_finite() {
        return Err(Error::Parameter(format!("segment duration {duration} is not finite")));
    }
    let n = (duration.abs() / h - STEP_COUNT_SLACK).ceil().max(0.0);
    if n > MAX_SEGMENT_STEPS {
        return Err(Error::Parameter(format!(
            "segment of duration {duration} needs {n:e} steps of {h}"
        )));
    }
    Ok(n as usize)
}

/// Integrates axis `a` for `duration` with `⌈|duration|/h⌉` equal substeps.
/// Returns every node including the initial one.
pub fn integrate_segment(
    sys: &LagrangianSystem,
    axis: usize,
    phase: &PhasePoint,
    duration: f64,
    h: f64,
) -> Result<Vec<PhasePoint>> {
    check_axis(sys, axis)?;
    sys.check_phase(phase)?;
    let n = substep_count(duration, h)?;
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(phase.clone());
    if n == 0 {
        return Ok(nodes);
    }
    let step = duration / n as f64;
    for _ in 0..n {
        let next = rk4_step(sys, axis, nodes.last().unwrap(), step)?;
        nodes.push(next);
    }
    Ok(nodes)
}

/// One axis-parallel piece of a staircase path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub axis: usize,
    pub duration: f64,
}

/// Staircase curve in multi-time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MultiTimePath {
    pub segments: Vec<Segment>,
}

impl MultiTimePath {
    pub fn new(segments: Vec<Segment>) -> Self {
        MultiTimePath { segments }
    }

    pub fn push(mut self, axis: usize, duration: f64) -> Self {
        self.segments.push(Segment { axis, duration });
        self
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        MultiTimePath {
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment {
                    axis: s.axis,
                    duration: -s.duration,
                })
                .collect(),
        }
    }

    /// Drops zero-length segments and merges consecutive segments on one axis.
    pub fn normalized(&self) -> Self {
        let mut out: Vec<Segment> = Vec::new();
        for s in &self.segments {
            match out.last_mut() {
                Some(last) if last.axis == s.axis => last.duration += s.duration,
                _ => out.push(*s),
            }
            if out.last().is_some_and(|l| l.duration == 0.0) {
                out.pop();
            }
        }
        MultiTimePath { segments: out }
    }

    /// Net displacement along each of `axes` multi-time coordinates.
    pub fn displacement(&self, axes: usize) -> Vec<f64> {
        let mut d = vec![0.0; axes];
        for s in &self.segments {
            if s.axis < axes {
                d[s.axis] += s.duration;
            }
        }
        d
    }

    pub fn max_axis(&self) -> Option<usize> {
        self.segments.iter().map(|s| s.axis).max()
    }
}

fn axis_name(axis: usize) -> String {
    if axis == 0 {
        "t".to_string()
    } else {
        format!("t{axis}")
    }
}

impl fmt::Display for MultiTimePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .segments
            .iter()
            .map(|s| format!("{}:{}", axis_name(s.axis), s.duration))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Parses an axis name: `t` or `t0` is axis 0, `tK` is axis `K`.
pub fn parse_axis(name: &str) -> Result<usize> {
    let name = name.trim();
    let rest = name
        .strip_prefix('t')
        .ok_or_else(|| Error::Usage(format!("time axis must look like t or tK, got {name:?}")))?;
    if rest.is_empty() {
        return Ok(0);
    }
    rest.parse()
        .map_err(|_| Error::Usage(format!("bad time axis {name:?}")))
}

impl FromStr for MultiTimePath {
    type Err = Error;

    /// Parses `"t:1.0,t1:-0.5"`; an empty string is the empty path.
    fn from_str(s: &str) -> Result<Self> {
        let mut segments = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (axis, dur) = part
                .split_once(':')
                .ok_or_else(|| Error::Usage(format!("path segment {part:?} must be axis:duration")))?;
            let duration: f64 = dur
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("bad duration in path segment {part:?}")))?;
            if !duration.is_finite() {
                return Err(Error::Usage(format!("duration in {part:?} is not finite")));
            }
            segments.push(Segment {
                axis: parse_axis(axis)?,
                duration,
            });
        }
        Ok(MultiTimePath { segments })
    }
}

/// One sample of a trajectory: multi-time coordinates, phase point, and the
/// values `(H, H_1, …, H_m)` there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryNode {
    pub times: Vec<f64>,
    pub phase: PhasePoint,
    pub hamiltonians: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub nodes: Vec<TrajectoryNode>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryNode {
        self.nodes.last().expect("a trajectory always holds its initial node")
    }

    /// `max_n |H_a(node n) − H_a(node 0)|` for every axis `a`.
    pub fn max_drift(&self) -> Vec<f64> {
        let first = &self.nodes[0].hamiltonians;
        let mut drift = vec![0.0; first.len()];
        for node in &self.nodes {
            for (d, (v, v0)) in drift.iter_mut().zip(node.hamiltonians.iter().zip(first)) {
                *d = f64::max(*d, (v - v0).abs());
            }
        }
        drift
    }
}

/// `(H, H_1, …, H_m)` at a phase point.
pub fn hamiltonian_values(sys: &LagrangianSystem, phase: &PhasePoint) -> Result<Vec<f64>> {
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let p = dvec(&phase.p);
    let mut out = vec![p.dot(&dvec(&pt.xdot)) - sys.lagrangian(&pt)?];
    for k in 1..=sys.symmetry_count() {
        out.push(noether_integral(sys, k, &pt)?);
    }
    Ok(out)
}

fn check_path(sys: &LagrangianSystem, path: &MultiTimePath) -> Result<()> {
    if let Some(a) = path.max_axis() {
        check_axis(sys, a)?;
    }
    Ok(())
}

/// Integrates the flows segment by segment along a staircase path.
pub fn integrate_path(sys: &LagrangianSystem, path: &MultiTimePath, phase0: &PhasePoint, h: f64) -> Result<Trajectory> {
    check_path(sys, path)?;
    substep_count(0.0, h)?;
    sys.check_phase(phase0)?;
    let axes = sys.symmetry_count() + 1;
    let mut times = vec![0.0; axes];
    let mut nodes = vec![TrajectoryNode {
        times: times.clone(),
        phase: phase0.clone(),
        hamiltonians: hamiltonian_values(sys, phase0)?,
    }];
    for seg in &path.segments {
        let start = nodes.last().unwrap().phase.clone();
        let pts = integrate_segment(sys, seg.axis, &start, seg.duration, h)?;
        let n = pts.len() - 1;
        let t0 = times[seg.axis];
        for (i, phase) in pts.into_iter().enumerate().skip(1) {
            times[seg.axis] = if i == n {
                t0 + seg.duration
            } else {
                t0 + seg.duration * i as f64 / n as f64
            };
            nodes.push(TrajectoryNode {
                times: times.clone(),
                hamiltonians: hamiltonian_values(sys, &phase)?,
                phase,
            });
        }
        times[seg.axis] = t0 + seg.duration;
    }
    Ok(Trajectory { step: h, nodes })
}

/// Endpoint distance between flowing `k` then `l` and `l` then `k`, each for `delta`.
pub fn commutativity_defect(
    sys: &LagrangianSystem,
    k: usize,
    l: usize,
    phase0: &PhasePoint,
    delta: f64,
    h: f64,
) -> Result<f64> {
    let end = |a: usize, b: usize| -> Result<PhasePoint> {
        let mid = integrate_segment(sys, a, phase0, delta, h)?.pop().unwrap();
        Ok(integrate_segment(sys, b, &mid, delta, h)?.pop().unwrap())
    };
    check_axis(sys, k)?;
    check_axis(sys, l)?;
    Ok(end(k, l)?.distance(&end(l, k)?))
}

/// `L_k = Σ (∂L/∂ẋ_i)(x_i)_{t_k} − J_k`.
pub fn coeff_lk(sys: &LagrangianSystem, k: usize, pt: &TangentPoint, xtk: &[f64]) -> Result<f64> {
    sys.check_len("x_t", xtk)?;
    let p = dvec(&sys.momentum(pt)?);
    Ok(p.dot(&dvec(xtk)) - noether_integral(sys, k, pt)?)
}

/// `Λ_k = Σ p_i (x_i)_{t_k} − H_k(x, p)`; axis 0 gives `Σ p_i ẋ_i − H`.
pub fn coeff_lambda_k(sys: &LagrangianSystem, k: usize, phase: &PhasePoint, xtk: &[f64]) -> Result<f64> {
    check_axis(sys, k)?;
    sys.check_len("x_t", xtk)?;
    let h = hamiltonian_values(sys, phase)?[k];
    Ok(dvec(&phase.p).dot(&dvec(xtk)) - h)
}

/// `Λ_a` with `x_{t_a}` supplied by the flow field, i.e. `p · ∂H_a/∂p − H_a`.
fn on_shell_lambda(sys: &LagrangianSystem, axis: usize, phase: &PhasePoint) -> Result<f64> {
    let pt = legendre_inverse(sys, phase, NEWTON_TOL)?;
    let p = dvec(&phase.p);
    let (_, gp) = hk_gradients_at(sys, axis, &pt, &p)?;
    let h = if axis == 0 {
        p.dot(&dvec(&pt.xdot)) - sys.lagrangian(&pt)?
    } else {
        noether_integral(sys, axis, &pt)?
    };
    Ok(p.dot(&gp) - h)
}

/// Composite Simpson rule on `n + 1` equally spaced samples over a signed
/// interval of length `span`. An odd `n ≥ 3` closes with the 3/8 rule on the
/// last three intervals; `n = 1` falls back to the trapezoid rule.
pub fn simpson(values: &[f64], span: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let h = span / n as f64;
    if n == 1 {
        return h * (values[0] + values[1]) / 2.0;
    }
    let simpson_even = |v: &[f64]| -> f64 {
        let m = v.len() - 1;
        let mut s = v[0] + v[m];
        for (i, y) in v.iter().enumerate().take(m).skip(1) {
            s += if i % 2 == 1 { 4.0 * y } else { 2.0 * y };
        }
        s * h / 3.0
    };
    if n.is_multiple_of(2) {
        return simpson_even(values);
    }
    let head = if n > 3 { simpson_even(&values[..=n - 3]) } else { 0.0 };
    let t = &values[n - 3..];
    head + 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3])
}

/// `∫_Γ 𝓛` along a staircase path, each segment integrated on its RK4 nodes.
/// The path is normalized first, so a zero-area back-and-forth contributes nothing.
pub fn action_along_path(sys: &LagrangianSystem, path: &MultiTimePath, phase0: &PhasePoint, h: f64) -> Result<f64> {
    check_path(sys, path)?;
    substep_count(0.0, h)?;
    sys.check_phase(phase0)?;
    let mut phase = phase0.clone();
    let mut action = 0.0;
    for seg in &path.normalized().segments {
        let nodes = integrate_segment(sys, seg.axis, &phase, seg.duration, h)?;
        let values = nodes
            .iter()
            .map(|p| on_shell_lambda(sys, seg.axis, p))
            .collect::<Result<Vec<_>>>()?;
        action += simpson(&values, seg.duration);
        phase = nodes.into_iter().last().unwrap();
    }
    Ok(action)
}

/// Rectangular loop `(+k a, +l b, −k a, −l b)` based at a phase point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub plane: (usize, usize),
    pub sides: (f64, f64),
    pub base: PhasePoint,
    pub step: f64,
}

impl LoopSpec {
    pub fn path(&self) -> MultiTimePath {
        let (k, l) = self.plane;
        let (a, b) = self.sides;
        MultiTimePath::default().push(k, a).push(l, b).push(k, -a).push(l, -b)
    }

    pub fn area(&self) -> f64 {
        self.sides.0 * self.sides.1
    }

    fn validate(&self) -> Result<()> {
        let (a, b) = self.sides;
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Parameter(format!(
                "loop sides must be non-negative, got ({a}, {b})"
            )));
        }
        if self.plane.0 == self.plane.1 {
            return Err(Error::Parameter("loop plane needs two distinct axes".into()));
        }
        Ok(())
    }
}

/// Action around the loop; by Stokes it equals `c_kl · a · b`.
pub fn loop_closedness_defect(sys: &LagrangianSystem, lp: &LoopSpec) -> Result<f64> {
    lp.validate()?;
    action_along_path(sys, &lp.path(), &lp.base, lp.step)
}

/// Extended jet of a joint solution through `pt`: `ẍ` from the EL equations,
/// `x_{t_k} = V^{(k)}` and `ẋ_{t_k} = D_t V^{(k)}`.
pub fn on_shell_extended_jet(sys: &LagrangianSystem, pt: &TangentPoint) -> Result<ExtendedJet> {
    let a = sys.accel(pt)?;
    let (xdot, xddot) = (dvec(&pt.xdot), dvec(&a));
    let mut xt = Vec::new();
    let mut xdott = Vec::new();
    for k in 1..=sys.symmetry_count() {
        let s = sys.symmetry_derivatives(k, pt)?;
        xdott.push(s.total_t_derivative(&xdot, &xddot).as_slice().to_vec());
        xt.push(s.v.as_slice().to_vec());
    }
    Ok(ExtendedJet {
        x: pt.x.clone(),
        xdot: pt.xdot.clone(),
        xddot: a,
        xt,
        xdott,
    })
}

/// Pieces shared by the multi-time identities for symmetry `k`.
struct Slot {
    xt: DVector<f64>,
    xdott: DVector<f64>,
    /// `x_{t_k} − V^{(k)}`
    dev: DVector<f64>,
    jx: DVector<f64>,
    jv: DVector<f64>,
    /// `𝓔^{(k)}`
    el: DVector<f64>,
}

fn slot(sys: &LagrangianSystem, k: usize, jet: &ExtendedJet) -> Result<Slot> {
    let pt = jet.tangent();
    let d = sys.lagrangian_derivatives(&pt)?;
    let s = sys.symmetry_derivatives(k, &pt)?;
    let xt = dvec(&jet.xt[k - 1]);
    let xdott = dvec(&jet.xdott[k - 1]);
    let dev = &xt - &s.v;
    let (jx, jv) = integral_gradient(sys, k, &pt)?;
    let el = d.m.transpose() * &dev - s.v_x.transpose() * &d.p + &s.flux_x - (&d.m * &xt + &d.w * &xdott);
    Ok(Slot {
        xt,
        xdott,
        dev,
        jx,
        jv,
        el,
    })
}

/// `𝓔^{(k)} = ∂L_k/∂x − D_{t_k} p` on an arbitrary extended jet.
pub fn multitime_el_residual(sys: &LagrangianSystem, k: usize, jet: &ExtendedJet) -> Result<DVector<f64>> {
    sys.symmetry(k)?;
    sys.check_extended(jet)?;
    Ok(slot(sys, k, jet)?.el)
}

/// `D_{t_k}L − D_t L_k − Σ (x_{t_k} − V^{(k)})_i 𝓔_i`; vanishes at every extended jet.
pub fn offshell_identity_1(sys: &LagrangianSystem, k: usize, jet: &ExtendedJet) -> Result<f64> {
    sys.symmetry(k)?;
    sys.check_extended(jet)?;
    let pt = jet.tangent();
    let d = sys.lagrangian_derivatives(&pt)?;
    let (xdot, xddot) = (dvec(&jet.xdot), dvec(&jet.xddot));
    let s = slot(sys, k, jet)?;
    let dk_l = d.dx.dot(&s.xt) + d.p.dot(&s.xdott);
    let dt_j = s.jx.dot(&xdot) + s.jv.dot(&xddot);
    let dt_lk = (&d.m * &xdot + &d.w * &xddot).dot(&s.xt) + d.p.dot(&s.xdott) - dt_j;
    let e = el_residual_from(&d, &xdot, &xddot);
    Ok(dk_l - dt_lk - s.dev.dot(&e))
}

/// `D_{t_k}L_l − D_{t_l}L_k` minus its expansion
/// `c_kl + Σ (δ_k·𝓔^{(l)} − δ_l·𝓔^{(k)}) + Σ_ij (L_{x_iẋ_j} − L_{x_jẋ_i}) δ_{l,i} δ_{k,j}`,
/// where `δ_k = x_{t_k} − V^{(k)}`. Vanishes at every extended jet.
pub fn offshell_identity_2(sys: &LagrangianSystem, k: usize, l: usize, jet: &ExtendedJet, c_kl: f64) -> Result<f64> {
    sys.symmetry(k)?;
    sys.symmetry(l)?;
    sys.check_extended(jet)?;
    if k > l {
        return offshell_identity_2(sys, l, k, jet, -c_kl).map(|r| -r);
    }
    if k == l {
        return Ok(-c_kl);
    }
    let d = sys.lagrangian_derivatives(&jet.tangent())?;
    let sk = slot(sys, k, jet)?;
    let sl = slot(sys, l, jet)?;
    // D_{t_a} L_b with the x_{t_a t_b} terms dropped; they cancel in the difference.
    let cross = |a: &Slot, b: &Slot| -> f64 {
        (&d.m * &a.xt + &d.w * &a.xdott).dot(&b.xt) - b.jx.dot(&a.xt) - b.jv.dot(&a.xdott)
    };
    let lhs = cross(&sk, &sl) - cross(&sl, &sk);
    let mixed = sl.dev.dot(&((d.m.transpose() - &d.m) * &sk.dev));
    let rhs = c_kl + sk.dev.dot(&sl.el) - sl.dev.dot(&sk.el) + mixed;
    Ok(lhs - rhs)
}

/// `∂L_k/∂ẋ − W (x_{t_k} − V^{(k)})`; vanishes identically, so `∂L_k/∂ẋ = 0`
/// is equivalent to `x_{t_k} = V^{(k)}`.
pub fn lk_velocity_gradient_residual(sys: &LagrangianSystem, k: usize, jet: &ExtendedJet) -> Result<DVector<f64>> {
    sys.symmetry(k)?;
    sys.check_extended(jet)?;
    let d = sys.lagrangian_derivatives(&jet.tangent())?;
    let s = slot(sys, k, jet)?;
    let grad = &d.w * &s.xt - &s.jv;
    Ok(grad - &d.w * &s.dev)
}
