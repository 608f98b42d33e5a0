//! Forward-mode differentiation with first- and second-order dual numbers.
//!
//! Functions are written once, generically over [`Scalar`], and evaluated with
//! `f64` for values, [`DualScalar`] for gradients and Jacobians, and
//! [`Dual2Scalar`] for Hessians. The supported elementary set is
//! `+ - * /`, `exp`, `sqrt` and integer powers.
//!
//! An empty derivative buffer stands for "all zeros", so constants carry no
//! allocation and can be mixed freely with seeded variables.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default central-difference step for first derivatives.
pub const FD_STEP_FIRST: f64 = 1e-5;
/// Default central-difference step for second derivatives.
pub const FD_STEP_SECOND: f64 = 1e-4;

/// Number type that user functions are written against.
pub trait Scalar:
    Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn exp(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn recip(&self) -> Self;

    fn zero() -> Self {
        Self::constant(0.0)
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
}

/// First-order dual number: a value and its partials along every seed direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DualScalar {
    pub value: f64,
    pub first: Vec<f64>,
}

impl DualScalar {
    pub fn constant(value: f64) -> Self {
        DualScalar {
            value,
            first: Vec::new(),
        }
    }

    /// Independent variable number `index` out of `dim`.
    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut first = vec![0.0; dim];
        first[index] = 1.0;
        DualScalar { value, first }
    }

    /// Partial along seed `i` (zero for constants).
    pub fn partial(&self, i: usize) -> f64 {
        self.first.get(i).copied().unwrap_or(0.0)
    }

    fn chain(&self, f0: f64, f1: f64) -> Self {
        DualScalar {
            value: f0,
            first: self.first.iter().map(|d| f1 * d).collect(),
        }
    }
}

fn lin2(a: &[f64], ca: f64, b: &[f64], cb: f64) -> Vec<f64> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Vec::new(),
        (false, true) => a.iter().map(|x| ca * x).collect(),
        (true, false) => b.iter().map(|x| cb * x).collect(),
        (false, false) => a.iter().zip(b).map(|(x, y)| ca * x + cb * y).collect(),
    }
}

impl Add for DualScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value + rhs.value,
            first: lin2(&self.first, 1.0, &rhs.first, 1.0),
        }
    }
}

impl Sub for DualScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value - rhs.value,
            first: lin2(&self.first, 1.0, &rhs.first, -1.0),
        }
    }
}

impl Mul for DualScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        DualScalar {
            value: self.value * rhs.value,
            first: lin2(&self.first, rhs.value, &rhs.first, self.value),
        }
    }
}

impl Div for DualScalar {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * Scalar::recip(&rhs)
    }
}

impl Neg for DualScalar {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.value, -1.0)
    }
}

impl Scalar for DualScalar {
    fn constant(c: f64) -> Self {
        DualScalar::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn powi(&self, n: i32) -> Self {
        match n {
            0 => DualScalar::constant(1.0),
            _ => self.chain(self.value.powi(n), n as f64 * self.value.powi(n - 1)),
        }
    }
    fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r)
    }
}

/// Second-order dual number: value, gradient and (symmetric) Hessian.
///
/// `second` is stored row-major with side `first.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual2Scalar {
    pub value: f64,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl Dual2Scalar {
    pub fn constant(value: f64) -> Self {
        Dual2Scalar {
            value,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn variable(value: f64, index: usize, dim: usize) -> Self {
        let mut first = vec![0.0; dim];
        first[index] = 1.0;
        Dual2Scalar {
            value,
            first,
            second: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn partial(&self, i: usize) -> f64 {
        self.first.get(i).copied().unwrap_or(0.0)
    }

    pub fn second_partial(&self, i: usize, j: usize) -> f64 {
        if self.second.is_empty() {
            0.0
        } else {
            self.second[i * self.dim() + j]
        }
    }

    /// Unary chain rule for `f(u)` given `f(u)`, `f'(u)`, `f''(u)`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let d = self.dim();
        let first: Vec<f64> = self.first.iter().map(|g| f1 * g).collect();
        let second = if d == 0 {
            Vec::new()
        } else {
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let base = if self.second.is_empty() {
                        0.0
                    } else {
                        self.second[i * d + j]
                    };
                    h[i * d + j] = f1 * base + f2 * self.first[i] * self.first[j];
                }
            }
            h
        };
        Dual2Scalar {
            value: f0,
            first,
            second,
        }
    }
}

impl Add for Dual2Scalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual2Scalar {
            value: self.value + rhs.value,
            first: lin2(&self.first, 1.0, &rhs.first, 1.0),
            second: lin2(&self.second, 1.0, &rhs.second, 1.0),
        }
    }
}

impl Sub for Dual2Scalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual2Scalar {
            value: self.value - rhs.value,
            first: lin2(&self.first, 1.0, &rhs.first, -1.0),
            second: lin2(&self.second, 1.0, &rhs.second, -1.0),
        }
    }
}

impl Mul for Dual2Scalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let first = lin2(&self.first, rhs.value, &rhs.first, self.value);
        let mut second = lin2(&self.second, rhs.value, &rhs.second, self.value);
        if !self.first.is_empty() && !rhs.first.is_empty() {
            let d = self.dim();
            if second.is_empty() {
                second = vec![0.0; d * d];
            }
            for i in 0..d {
                for j in 0..d {
                    second[i * d + j] += self.first[i] * rhs.first[j] + rhs.first[i] * self.first[j];
                }
            }
        }
        Dual2Scalar {
            value: self.value * rhs.value,
            first,
            second,
        }
    }
}

impl Div for Dual2Scalar {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * Scalar::recip(&rhs)
    }
}

impl Neg for Dual2Scalar {
    type Output = Self;
    fn neg(self) -> Self {
        self.chain(-self.value, -1.0, 0.0)
    }
}

impl Scalar for Dual2Scalar {
    fn constant(c: f64) -> Self {
        Dual2Scalar::constant(c)
    }
    fn value(&self) -> f64 {
        self.value
    }
    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }
    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.value))
    }
    fn powi(&self, n: i32) -> Self {
        let u = self.value;
        match n {
            0 => Dual2Scalar::constant(1.0),
            1 => self.clone(),
            _ => {
                let nf = n as f64;
                self.chain(u.powi(n), nf * u.powi(n - 1), nf * (nf - 1.0) * u.powi(n - 2))
            }
        }
    }
    fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

macro_rules! scalar_rhs_ops {
    ($t:ty) => {
        impl Add<f64> for $t {
            type Output = $t;
            fn add(mut self, rhs: f64) -> $t {
                self.value += rhs;
                self
            }
        }
        impl Sub<f64> for $t {
            type Output = $t;
            fn sub(mut self, rhs: f64) -> $t {
                self.value -= rhs;
                self
            }
        }
        impl Mul<f64> for $t {
            type Output = $t;
            fn mul(self, rhs: f64) -> $t {
                self * <$t>::constant(rhs)
            }
        }
        impl Div<f64> for $t {
            type Output = $t;
            fn div(self, rhs: f64) -> $t {
                self * <$t>::constant(1.0 / rhs)
            }
        }
    };
}

scalar_rhs_ops!(DualScalar);
scalar_rhs_ops!(Dual2Scalar);

/// Scalar function of a real vector, written generically over [`Scalar`].
pub trait Function {
    fn eval<S: Scalar>(&self, v: &[S]) -> S;
}

/// Vector-valued function of a real vector.
pub trait VectorFunction {
    fn eval<S: Scalar>(&self, v: &[S]) -> Vec<S>;
}

/// Object-safe view of a [`Function`], one entry point per number type.
pub trait DynFunction: Send + Sync {
    fn eval_f64(&self, v: &[f64]) -> f64;
    fn eval_dual(&self, v: &[DualScalar]) -> DualScalar;
    fn eval_dual2(&self, v: &[Dual2Scalar]) -> Dual2Scalar;
}

impl<T: Function + Send + Sync> DynFunction for T {
    fn eval_f64(&self, v: &[f64]) -> f64 {
        self.eval(v)
    }
    fn eval_dual(&self, v: &[DualScalar]) -> DualScalar {
        self.eval(v)
    }
    fn eval_dual2(&self, v: &[Dual2Scalar]) -> Dual2Scalar {
        self.eval(v)
    }
}

/// Object-safe view of a [`VectorFunction`].
pub trait DynVectorFunction: Send + Sync {
    fn eval_f64(&self, v: &[f64]) -> Vec<f64>;
    fn eval_dual(&self, v: &[DualScalar]) -> Vec<DualScalar>;
}

impl<T: VectorFunction + Send + Sync> DynVectorFunction for T {
    fn eval_f64(&self, v: &[f64]) -> Vec<f64> {
        self.eval(v)
    }
    fn eval_dual(&self, v: &[DualScalar]) -> Vec<DualScalar> {
        self.eval(v)
    }
}

fn check_finite(what: &str, values: impl IntoIterator<Item = f64>) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::Domain(format!("non-finite {what}")))
    }
}

fn seeds_dual(v: &[f64]) -> Vec<DualScalar> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| DualScalar::variable(x, i, v.len()))
        .collect()
}

fn seeds_dual2(v: &[f64]) -> Vec<Dual2Scalar> {
    v.iter()
        .enumerate()
        .map(|(i, &x)| Dual2Scalar::variable(x, i, v.len()))
        .collect()
}

/// Value of `f` at `v`, failing on a non-finite result.
pub fn value<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<f64> {
    let y = f.eval_f64(v);
    check_finite("value", [y])?;
    Ok(y)
}

/// Value and gradient in one forward pass.
pub fn value_grad<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    let y = f.eval_dual(&seeds_dual(v));
    let g: Vec<f64> = (0..v.len()).map(|i| y.partial(i)).collect();
    check_finite("gradient", std::iter::once(y.value).chain(g.iter().copied()))?;
    Ok((y.value, g))
}

pub fn grad<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<Vec<f64>> {
    value_grad(f, v).map(|(_, g)| g)
}

/// Values and Jacobian (`rows = outputs`, `cols = inputs`).
pub fn value_jacobian<F: DynVectorFunction + ?Sized>(f: &F, v: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let ys = f.eval_dual(&seeds_dual(v));
    let jac = DMatrix::from_fn(ys.len(), v.len(), |i, j| ys[i].partial(j));
    let vals: Vec<f64> = ys.iter().map(|y| y.value).collect();
    check_finite("jacobian", vals.iter().copied().chain(jac.iter().copied()))?;
    Ok((vals, jac))
}

pub fn jacobian<F: DynVectorFunction + ?Sized>(f: &F, v: &[f64]) -> Result<DMatrix<f64>> {
    value_jacobian(f, v).map(|(_, j)| j)
}

/// Value, gradient and Hessian from one second-order pass. The Hessian is
/// returned exactly as propagated, before symmetrization.
pub fn value_grad_hessian_raw<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let d = v.len();
    let y = f.eval_dual2(&seeds_dual2(v));
    let g: Vec<f64> = (0..d).map(|i| y.partial(i)).collect();
    let h = DMatrix::from_fn(d, d, |i, j| y.second_partial(i, j));
    check_finite(
        "hessian",
        std::iter::once(y.value)
            .chain(g.iter().copied())
            .chain(h.iter().copied()),
    )?;
    Ok((y.value, g, h))
}

/// Value, gradient and symmetrized Hessian.
pub fn value_grad_hessian<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
    let (y, g, h) = value_grad_hessian_raw(f, v)?;
    let sym = (&h + h.transpose()) * 0.5;
    Ok((y, g, sym))
}

pub fn hessian<F: DynFunction + ?Sized>(f: &F, v: &[f64]) -> Result<DMatrix<f64>> {
    value_grad_hessian(f, v).map(|(_, _, h)| h)
}

/// Central finite-difference oracles. Used to cross-check the dual-number
/// derivatives; they evaluate only the plain `f64` path.
pub mod fd {
    use super::*;

    fn checked_step(step: f64) -> Result<f64> {
        if step > 0.0 && step.is_finite() {
            Ok(step)
        } else {
            Err(Error::Parameter(format!(
                "finite-difference step must be positive, got {step}"
            )))
        }
    }

    fn shifted(v: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
        let mut w = v.to_vec();
        for &(i, d) in moves {
            w[i] += d;
        }
        w
    }

    pub fn grad<F: DynFunction + ?Sized>(f: &F, v: &[f64], step: f64) -> Result<Vec<f64>> {
        let h = checked_step(step)?;
        (0..v.len())
            .map(|i| {
                let up = value(f, &shifted(v, &[(i, h)]))?;
                let dn = value(f, &shifted(v, &[(i, -h)]))?;
                Ok((up - dn) / (2.0 * h))
            })
            .collect()
    }

    pub fn jacobian<F: DynVectorFunction + ?Sized>(f: &F, v: &[f64], step: f64) -> Result<DMatrix<f64>> {
        let h = checked_step(step)?;
        let rows = f.eval_f64(v).len();
        let mut jac = DMatrix::zeros(rows, v.len());
        for j in 0..v.len() {
            let up = f.eval_f64(&shifted(v, &[(j, h)]));
            let dn = f.eval_f64(&shifted(v, &[(j, -h)]));
            for i in 0..rows {
                jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
            }
        }
        check_finite("finite-difference jacobian", jac.iter().copied())?;
        Ok(jac)
    }

    pub fn hessian<F: DynFunction + ?Sized>(f: &F, v: &[f64], step: f64) -> Result<DMatrix<f64>> {
        let h = checked_step(step)?;
        let d = v.len();
        let f0 = value(f, v)?;
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            let up = value(f, &shifted(v, &[(i, h)]))?;
            let dn = value(f, &shifted(v, &[(i, -h)]))?;
            out[(i, i)] = (up - 2.0 * f0 + dn) / (h * h);
            for j in 0..i {
                let pp = value(f, &shifted(v, &[(i, h), (j, h)]))?;
                let pm = value(f, &shifted(v, &[(i, h), (j, -h)]))?;
                let mp = value(f, &shifted(v, &[(i, -h), (j, h)]))?;
                let mm = value(f, &shifted(v, &[(i, -h), (j, -h)]))?;
                let x = (pp - pm - mp + mm) / (4.0 * h * h);
                out[(i, j)] = x;
                out[(j, i)] = x;
            }
        }
        Ok(out)
    }
}
