//! The active scalar type and its overloaded operations.
//!
//! Every operation records one statement carrying its analytic partials.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::context::{record_copy, record_op, release_on_drop};
use crate::ids::Identifier;

/// Value plus adjoint identifier; identifier 0 is passive.
#[derive(Debug)]
pub struct ActiveScalar {
    value: f64,
    id: Identifier,
}

impl ActiveScalar {
    /// Passive constant.
    pub const fn new(value: f64) -> Self {
        Self { value, id: 0 }
    }

    pub(crate) fn from_parts(value: f64, id: Identifier) -> Self {
        Self { value, id }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn identifier(&self) -> Identifier {
        self.id
    }

    #[inline]
    pub fn is_active(&self) -> bool {
        self.id != 0
    }

    /// Overwrites with a passive value, releasing the old identifier.
    pub fn set_passive(&mut self, value: f64) {
        *self = ActiveScalar::new(value);
    }

    /// Self-assignment of the passive value: detaches the variable from its
    /// adjoint slot without changing the value.
    pub fn clear_identifier(&mut self) {
        let v = self.value;
        self.set_passive(v);
    }

    /// Replaces the identifier without releasing the old one; the caller owns it.
    pub(crate) fn set_identifier_raw(&mut self, id: Identifier) {
        self.id = id;
    }

    pub fn sin(&self) -> Self {
        record_op(self.value.sin(), &[(self.value.cos(), self.id)])
    }

    pub fn cos(&self) -> Self {
        record_op(self.value.cos(), &[(-self.value.sin(), self.id)])
    }

    pub fn tan(&self) -> Self {
        let t = self.value.tan();
        record_op(t, &[(1.0 + t * t, self.id)])
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        record_op(e, &[(e, self.id)])
    }

    pub fn ln(&self) -> Self {
        record_op(self.value.ln(), &[(1.0 / self.value, self.id)])
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        record_op(s, &[(0.5 / s, self.id)])
    }

    pub fn tanh(&self) -> Self {
        let t = self.value.tanh();
        record_op(t, &[(1.0 - t * t, self.id)])
    }

    pub fn atan(&self) -> Self {
        record_op(self.value.atan(), &[(1.0 / (1.0 + self.value * self.value), self.id)])
    }

    pub fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        record_op(r, &[(-r * r, self.id)])
    }

    pub fn powi(&self, n: i32) -> Self {
        let d = if n == 0 {
            0.0
        } else {
            n as f64 * self.value.powi(n - 1)
        };
        record_op(self.value.powi(n), &[(d, self.id)])
    }

    pub fn powf(&self, p: f64) -> Self {
        record_op(self.value.powf(p), &[(p * self.value.powf(p - 1.0), self.id)])
    }

    /// Absolute value; the derivative at 0 is taken as 0.
    pub fn abs(&self) -> Self {
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        record_op(self.value.abs(), &[(s, self.id)])
    }

    pub fn max(&self, other: &Self) -> Self {
        if self.value >= other.value {
            record_op(self.value, &[(1.0, self.id)])
        } else {
            record_op(other.value, &[(1.0, other.id)])
        }
    }

    pub fn min(&self, other: &Self) -> Self {
        if self.value <= other.value {
            record_op(self.value, &[(1.0, self.id)])
        } else {
            record_op(other.value, &[(1.0, other.id)])
        }
    }

    /// `max(self, c)` for a passive bound.
    pub fn max_f(&self, c: f64) -> Self {
        if self.value >= c {
            record_op(self.value, &[(1.0, self.id)])
        } else {
            ActiveScalar::new(c)
        }
    }

    /// `min(self, c)` for a passive bound.
    pub fn min_f(&self, c: f64) -> Self {
        if self.value <= c {
            record_op(self.value, &[(1.0, self.id)])
        } else {
            ActiveScalar::new(c)
        }
    }
}

impl Default for ActiveScalar {
    fn default() -> Self {
        Self::new(0.0)
    }
}

impl From<f64> for ActiveScalar {
    fn from(v: f64) -> Self {
        Self::new(v)
    }
}

impl Clone for ActiveScalar {
    fn clone(&self) -> Self {
        record_copy(self)
    }
}

impl Drop for ActiveScalar {
    #[inline]
    fn drop(&mut self) {
        if self.id != 0 {
            release_on_drop(self.id);
        }
    }
}

impl PartialEq for ActiveScalar {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for ActiveScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl PartialEq<f64> for ActiveScalar {
    fn eq(&self, other: &f64) -> bool {
        self.value == *other
    }
}

impl PartialOrd<f64> for ActiveScalar {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.value.partial_cmp(other)
    }
}

#[inline]
fn add_aa(a: &ActiveScalar, b: &ActiveScalar) -> ActiveScalar {
    record_op(a.value + b.value, &[(1.0, a.id), (1.0, b.id)])
}
#[inline]
fn add_af(a: &ActiveScalar, c: f64) -> ActiveScalar {
    record_op(a.value + c, &[(1.0, a.id)])
}
#[inline]
fn add_fa(c: f64, a: &ActiveScalar) -> ActiveScalar {
    add_af(a, c)
}
#[inline]
fn sub_aa(a: &ActiveScalar, b: &ActiveScalar) -> ActiveScalar {
    record_op(a.value - b.value, &[(1.0, a.id), (-1.0, b.id)])
}
#[inline]
fn sub_af(a: &ActiveScalar, c: f64) -> ActiveScalar {
    record_op(a.value - c, &[(1.0, a.id)])
}
#[inline]
fn sub_fa(c: f64, a: &ActiveScalar) -> ActiveScalar {
    record_op(c - a.value, &[(-1.0, a.id)])
}
#[inline]
fn mul_aa(a: &ActiveScalar, b: &ActiveScalar) -> ActiveScalar {
    record_op(a.value * b.value, &[(b.value, a.id), (a.value, b.id)])
}
#[inline]
fn mul_af(a: &ActiveScalar, c: f64) -> ActiveScalar {
    record_op(a.value * c, &[(c, a.id)])
}
#[inline]
fn mul_fa(c: f64, a: &ActiveScalar) -> ActiveScalar {
    mul_af(a, c)
}
#[inline]
fn div_aa(a: &ActiveScalar, b: &ActiveScalar) -> ActiveScalar {
    let inv = 1.0 / b.value;
    let q = a.value * inv;
    record_op(q, &[(inv, a.id), (-q * inv, b.id)])
}
#[inline]
fn div_af(a: &ActiveScalar, c: f64) -> ActiveScalar {
    record_op(a.value / c, &[(1.0 / c, a.id)])
}
#[inline]
fn div_fa(c: f64, a: &ActiveScalar) -> ActiveScalar {
    let q = c / a.value;
    record_op(q, &[(-q / a.value, a.id)])
}

macro_rules! binop {
    ($tr:ident, $m:ident, $aa:ident, $af:ident, $fa:ident) => {
        impl $tr<&ActiveScalar> for &ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: &ActiveScalar) -> ActiveScalar {
                $aa(self, r)
            }
        }
        impl $tr<ActiveScalar> for &ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: ActiveScalar) -> ActiveScalar {
                $aa(self, &r)
            }
        }
        impl $tr<&ActiveScalar> for ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: &ActiveScalar) -> ActiveScalar {
                $aa(&self, r)
            }
        }
        impl $tr<ActiveScalar> for ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: ActiveScalar) -> ActiveScalar {
                $aa(&self, &r)
            }
        }
        impl $tr<f64> for &ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: f64) -> ActiveScalar {
                $af(self, r)
            }
        }
        impl $tr<f64> for ActiveScalar {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: f64) -> ActiveScalar {
                $af(&self, r)
            }
        }
        impl $tr<&ActiveScalar> for f64 {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: &ActiveScalar) -> ActiveScalar {
                $fa(self, r)
            }
        }
        impl $tr<ActiveScalar> for f64 {
            type Output = ActiveScalar;
            #[inline]
            fn $m(self, r: ActiveScalar) -> ActiveScalar {
                $fa(self, &r)
            }
        }
    };
}

binop!(Add, add, add_aa, add_af, add_fa);
binop!(Sub, sub, sub_aa, sub_af, sub_fa);
binop!(Mul, mul, mul_aa, mul_af, mul_fa);
binop!(Div, div, div_aa, div_af, div_fa);

macro_rules! assignop {
    ($tr:ident, $m:ident, $aa:ident, $af:ident) => {
        impl $tr<&ActiveScalar> for ActiveScalar {
            #[inline]
            fn $m(&mut self, r: &ActiveScalar) {
                *self = $aa(self, r);
            }
        }
        impl $tr<ActiveScalar> for ActiveScalar {
            #[inline]
            fn $m(&mut self, r: ActiveScalar) {
                *self = $aa(self, &r);
            }
        }
        impl $tr<f64> for ActiveScalar {
            #[inline]
            fn $m(&mut self, r: f64) {
                *self = $af(self, r);
            }
        }
    };
}

assignop!(AddAssign, add_assign, add_aa, add_af);
assignop!(SubAssign, sub_assign, sub_aa, sub_af);
assignop!(MulAssign, mul_assign, mul_aa, mul_af);
assignop!(DivAssign, div_assign, div_aa, div_af);

impl Neg for &ActiveScalar {
    type Output = ActiveScalar;
    fn neg(self) -> ActiveScalar {
        record_op(-self.value, &[(-1.0, self.id)])
    }
}

impl Neg for ActiveScalar {
    type Output = ActiveScalar;
    fn neg(self) -> ActiveScalar {
        -&self
    }
}

impl<'a> std::iter::Sum<&'a ActiveScalar> for ActiveScalar {
    fn sum<I: Iterator<Item = &'a ActiveScalar>>(iter: I) -> Self {
        iter.fold(ActiveScalar::new(0.0), |acc, x| acc + x)
    }
}

impl std::iter::Sum for ActiveScalar {
    fn sum<I: Iterator<Item = ActiveScalar>>(iter: I) -> Self {
        iter.fold(ActiveScalar::new(0.0), |acc, x| acc + x)
    }
}
