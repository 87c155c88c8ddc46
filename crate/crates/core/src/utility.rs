use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UtilityError {
    #[error("utility argument {0} is not strictly positive")]
    DomainError(f64),
    #[error("power exponent {0} must satisfy p < 1 and p != 0")]
    BadExponent(f64),
    #[error("affine scale {0} must be strictly positive")]
    BadScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Log,
    Power,
}

/// Utility on `(0, ∞)`: `ln x` or `x^p / p`, optionally transformed to `a U + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilitySpec<T> {
    pub kind: UtilityKind,
    pub p: T,
    pub scale: T,
    pub shift: T,
}

impl<T: Real> UtilitySpec<T> {
    pub fn log() -> Self {
        Self { kind: UtilityKind::Log, p: T::zero(), scale: T::one(), shift: T::zero() }
    }

    pub fn power(p: T) -> Result<Self, UtilityError> {
        if !(p < T::one()) || p == T::zero() || !p.is_finite() {
            return Err(UtilityError::BadExponent(p.as_f64()));
        }
        Ok(Self { kind: UtilityKind::Power, p, scale: T::one(), shift: T::zero() })
    }

    /// `a U + b`; maximizers are unchanged, marginal utilities scale by `a`.
    pub fn affine(self, a: T, b: T) -> Result<Self, UtilityError> {
        if !(a > T::zero()) {
            return Err(UtilityError::BadScale(a.as_f64()));
        }
        Ok(Self { scale: self.scale * a, shift: self.shift * a + b, ..self })
    }

    fn check(x: T) -> Result<T, UtilityError> {
        if x > T::zero() {
            Ok(x)
        } else {
            Err(UtilityError::DomainError(x.as_f64()))
        }
    }

    pub fn eval(&self, x: T) -> Result<T, UtilityError> {
        Self::check(x).map(|x| self.value(x))
    }

    pub fn marginal(&self, x: T) -> Result<T, UtilityError> {
        Self::check(x).map(|x| self.d1(x))
    }

    /// `U*(y) = sup_x [U(x) - x y]`.
    pub fn conjugate(&self, y: T) -> Result<T, UtilityError> {
        let y = Self::check(y)?;
        let x = self.inverse_marginal(y);
        Ok(self.value(x) - x * y)
    }

    /// `I = (U')^{-1}`.
    pub fn marginal_inverse(&self, y: T) -> Result<T, UtilityError> {
        Self::check(y).map(|y| self.inverse_marginal(y))
    }

    // Unchecked forms used inside the solver, where positivity is maintained
    // by the iteration itself.

    #[inline]
    pub(crate) fn value(&self, x: T) -> T {
        let base = match self.kind {
            UtilityKind::Log => x.ln(),
            UtilityKind::Power => x.powf(self.p) / self.p,
        };
        self.scale * base + self.shift
    }

    #[inline]
    pub(crate) fn d1(&self, x: T) -> T {
        let base = match self.kind {
            UtilityKind::Log => x.recip(),
            UtilityKind::Power => x.powf(self.p - T::one()),
        };
        self.scale * base
    }

    /// `-U''(x) > 0`.
    #[inline]
    pub(crate) fn neg_d2(&self, x: T) -> T {
        let base = match self.kind {
            UtilityKind::Log => (x * x).recip(),
            UtilityKind::Power => (T::one() - self.p) * x.powf(self.p - T::lit(2.0)),
        };
        self.scale * base
    }

    #[inline]
    pub(crate) fn inverse_marginal(&self, y: T) -> T {
        let y = y / self.scale;
        match self.kind {
            UtilityKind::Log => y.recip(),
            UtilityKind::Power => y.powf((self.p - T::one()).recip()),
        }
    }

    /// Homogeneity degree used by the scaling identities: `None` for log.
    pub fn power_exponent(&self) -> Option<T> {
        match self.kind {
            UtilityKind::Log => None,
            UtilityKind::Power => Some(self.p),
        }
    }
}
