//! Forward-mode differentiation on dual numbers.
//!
//! Kinematics and energies are written once against [`Scalar`]; evaluating
//! them on [`Dual`] yields exact first derivatives, and on nested duals exact
//! second derivatives. This is what backs every analytic Jacobian in the
//! library (loop constraints, contact normals, friction bases, the discrete
//! Euler-Lagrange residual and the transcription constraint Jacobians).

use crate::real::{lit, Real};
use num_traits::Zero;
use nalgebra::{DMatrix, DVector};
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// A differentiable scalar: the base reals and duals over them.
///
/// The `Zero`/`One` supertraits make `nalgebra` matrix arithmetic available
/// on vectors and matrices of duals.
pub trait Scalar:
    Copy
    + Clone
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + num_traits::Zero
    + num_traits::One
    + 'static
{
    /// Underlying floating-point type once all dual layers are stripped.
    type Base: Real;

    fn from_base(x: Self::Base) -> Self;
    /// Primal value, recursively unwrapped.
    fn val(self) -> Self::Base;
    fn sine(self) -> Self;
    fn cosine(self) -> Self;
    fn square_root(self) -> Self;
    fn magnitude(self) -> Self;

    /// Lift an `f64` literal.
    #[inline]
    fn constant(x: f64) -> Self {
        Self::from_base(lit(x))
    }
}

macro_rules! impl_scalar_for_real {
    ($($t:ty)*) => {$(
        impl Scalar for $t {
            type Base = $t;

            #[inline] fn from_base(x: $t) -> Self { x }
            #[inline] fn val(self) -> $t { self }
            #[inline] fn sine(self) -> Self { <$t>::sin(self) }
            #[inline] fn cosine(self) -> Self { <$t>::cos(self) }
            #[inline] fn square_root(self) -> Self { <$t>::sqrt(self) }
            #[inline] fn magnitude(self) -> Self { <$t>::abs(self) }
        }
    )*};
}

impl_scalar_for_real!(f32 f64);

/// Dual number `re + eps·d` with one infinitesimal direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<S: Scalar> {
    pub re: S,
    pub eps: S,
}

impl<S: Scalar> Dual<S> {
    #[inline]
    pub fn new(re: S, eps: S) -> Self {
        Dual { re, eps }
    }

    /// Constant (zero derivative).
    #[inline]
    pub fn constant(re: S) -> Self {
        Dual { re, eps: S::zero() }
    }

    /// Seeded variable (unit derivative).
    #[inline]
    pub fn variable(re: S) -> Self {
        Dual { re, eps: S::one() }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.eps * o.re + self.re * o.eps)
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    #[inline]
    fn div(self, o: Self) -> Self {
        Dual::new(
            self.re / o.re,
            (self.eps * o.re - self.re * o.eps) / (o.re * o.re),
        )
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<S: Scalar> AddAssign for Dual<S> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> SubAssign for Dual<S> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<S: Scalar> MulAssign for Dual<S> {
    #[inline]
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<S: Scalar> num_traits::Zero for Dual<S> {
    #[inline]
    fn zero() -> Self {
        Dual::constant(S::zero())
    }

    #[inline]
    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.eps.is_zero()
    }
}

impl<S: Scalar> num_traits::One for Dual<S> {
    #[inline]
    fn one() -> Self {
        Dual::constant(S::one())
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    type Base = S::Base;

    #[inline]
    fn from_base(x: S::Base) -> Self {
        Dual::constant(S::from_base(x))
    }

    #[inline]
    fn val(self) -> S::Base {
        self.re.val()
    }

    #[inline]
    fn sine(self) -> Self {
        Dual::new(self.re.sine(), self.eps * self.re.cosine())
    }

    #[inline]
    fn cosine(self) -> Self {
        Dual::new(self.re.cosine(), -(self.eps * self.re.sine()))
    }

    #[inline]
    fn square_root(self) -> Self {
        let r = self.re.square_root();
        let two = S::one() + S::one();
        Dual::new(r, self.eps / (two * r))
    }

    #[inline]
    fn magnitude(self) -> Self {
        if self.re.val() < S::Base::zero() {
            -self
        } else {
            self
        }
    }
}

/// Lift a slice of base values to constants of another scalar type.
pub fn lift<S: Scalar>(xs: &[S::Base]) -> Vec<S> {
    xs.iter().map(|&x| S::from_base(x)).collect()
}

/// Lift `x` with the `i`-th entry seeded as the differentiation variable.
pub fn seed<S: Scalar>(xs: &[S], i: usize) -> Vec<Dual<S>> {
    xs.iter()
        .enumerate()
        .map(|(j, &x)| {
            if j == i {
                Dual::variable(x)
            } else {
                Dual::constant(x)
            }
        })
        .collect()
}

/// Lift `x` seeded along the direction `v` (directional derivative input).
pub fn seed_dir<S: Scalar>(xs: &[S], v: &[S]) -> Vec<Dual<S>> {
    xs.iter()
        .zip(v.iter())
        .map(|(&x, &d)| Dual::new(x, d))
        .collect()
}

/// Gradient of a scalar function by `n` forward passes.
pub fn gradient<T, F>(x: &[T], f: F) -> DVector<T>
where
    T: Real + Scalar<Base = T>,
    F: Fn(&[Dual<T>]) -> Dual<T>,
{
    let mut g = DVector::zeros(x.len());
    for i in 0..x.len() {
        g[i] = f(&seed(x, i)).eps;
    }
    g
}

/// Gradient at any differentiation level: works inside already-dual code,
/// nesting one more dual layer.
pub fn gradient_nested<S, F>(x: &[S], f: F) -> Vec<S>
where
    S: Scalar,
    F: Fn(&[Dual<S>]) -> Dual<S>,
{
    (0..x.len()).map(|i| f(&seed(x, i)).eps).collect()
}

/// Dense Jacobian of a vector function by one forward pass per input column.
pub fn jacobian<T, F>(n_out: usize, x: &[T], f: F) -> DMatrix<T>
where
    T: Real + Scalar<Base = T>,
    F: Fn(&[Dual<T>]) -> Vec<Dual<T>>,
{
    let mut jac = DMatrix::zeros(n_out, x.len());
    for col in 0..x.len() {
        let out = f(&seed(x, col));
        debug_assert_eq!(out.len(), n_out);
        for (row, y) in out.iter().enumerate() {
            jac[(row, col)] = y.eps;
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn poly<S: Scalar>(x: S) -> S {
        // x³ - 2x + sin(x)·sqrt(x + 4)
        x * x * x - S::constant(2.0) * x + x.sine() * (x + S::constant(4.0)).square_root()
    }

    #[test]
    fn first_derivative_matches_closed_form() {
        let x = 0.7f64;
        let d = poly(Dual::variable(x)).eps;
        let expected = 3.0 * x * x - 2.0
            + x.cos() * (x + 4.0).sqrt()
            + x.sin() / (2.0 * (x + 4.0).sqrt());
        assert_relative_eq!(d, expected, max_relative = 1e-14);
    }

    #[test]
    fn nested_duals_give_second_derivative() {
        // f(x) = sin(x)·x², f'' = 2 sin x + 4x cos x − x² sin x
        let x = 1.3f64;
        let inner = Dual::variable(x);
        let outer = Dual::variable(inner);
        let y = outer.sine() * outer * outer;
        let f2 = y.eps.eps;
        let expected = 2.0 * x.sin() + 4.0 * x * x.cos() - x * x * x.sin();
        assert_relative_eq!(f2, expected, max_relative = 1e-13);
    }

    #[test]
    fn jacobian_of_polar_map() {
        // (r, th) -> (r cos th, r sin th)
        let x = [2.0f64, 0.6];
        let jac = jacobian(2, &x, |v| vec![v[0] * v[1].cosine(), v[0] * v[1].sine()]);
        assert_relative_eq!(jac[(0, 0)], 0.6f64.cos(), max_relative = 1e-15);
        assert_relative_eq!(jac[(0, 1)], -2.0 * 0.6f64.sin(), max_relative = 1e-15);
        assert_relative_eq!(jac[(1, 0)], 0.6f64.sin(), max_relative = 1e-15);
        assert_relative_eq!(jac[(1, 1)], 2.0 * 0.6f64.cos(), max_relative = 1e-15);
    }

    #[test]
    fn magnitude_derivative_tracks_sign() {
        assert_eq!(Dual::variable(-2.0f64).magnitude().eps, -1.0);
        assert_eq!(Dual::variable(2.0f64).magnitude().eps, 1.0);
    }

    #[test]
    fn works_at_f32() {
        let d = poly(Dual::variable(0.5f32)).eps;
        let expected = 3.0 * 0.25f32 - 2.0
            + 0.5f32.cos() * 4.5f32.sqrt()
            + 0.5f32.sin() / (2.0 * 4.5f32.sqrt());
        assert!((d - expected).abs() < 1e-5);
    }
}
