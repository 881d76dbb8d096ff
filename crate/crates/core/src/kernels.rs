//! Radial kernel profiles and activation functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("Bessel potential is undefined for alpha = 1")]
    BesselAlphaOne,
    #[error("power kernel exponent {0} must be > -1 for the kernel to be integrable")]
    PowerNotIntegrable(f64),
    #[error("Bessel order {0} must be positive for the kernel to be integrable")]
    BesselNotIntegrable(f64),
    #[error("kernel table is empty")]
    EmptyTable,
    #[error("kernel parameter is not finite")]
    NonFinite,
}

/// Radial profile `F(|x|_p)` on `Z_p`, described by its values on the norms `p^-k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Bessel potential `J_alpha`, normalized so that its integral is 1.
    Bessel { alpha: f64 },
    Constant { value: f64 },
    /// `coeff * |x|_p^exponent`.
    Power { coeff: f64, exponent: f64 },
    Zero,
    /// `values[k] = F(p^-k)`; levels past the end repeat the last value.
    Table { values: Vec<f64> },
    Scaled { factor: f64, kernel: Box<KernelSpec> },
}

/// Behaviour of a profile beyond its explicit samples: `F(p^-k) = scale * ratio^k + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricTail {
    pub scale: f64,
    pub ratio: f64,
    pub offset: f64,
}

impl KernelSpec {
    pub fn bessel(alpha: f64) -> Self {
        KernelSpec::Bessel { alpha }
    }

    pub fn constant(value: f64) -> Self {
        KernelSpec::Constant { value }
    }

    pub fn power(coeff: f64, exponent: f64) -> Self {
        KernelSpec::Power { coeff, exponent }
    }

    pub fn table(values: Vec<f64>) -> Self {
        KernelSpec::Table { values }
    }

    pub fn scaled(self, factor: f64) -> Self {
        KernelSpec::Scaled {
            factor,
            kernel: Box::new(self),
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match self {
            KernelSpec::Bessel { alpha } => {
                if !alpha.is_finite() {
                    Err(KernelError::NonFinite)
                } else if *alpha == 1.0 {
                    Err(KernelError::BesselAlphaOne)
                } else if *alpha <= 0.0 {
                    Err(KernelError::BesselNotIntegrable(*alpha))
                } else {
                    Ok(())
                }
            }
            KernelSpec::Constant { value } => finite(*value),
            KernelSpec::Power { coeff, exponent } => {
                finite(*coeff)?;
                finite(*exponent)?;
                if *exponent <= -1.0 {
                    return Err(KernelError::PowerNotIntegrable(*exponent));
                }
                Ok(())
            }
            KernelSpec::Zero => Ok(()),
            KernelSpec::Table { values } => {
                if values.is_empty() {
                    return Err(KernelError::EmptyTable);
                }
                values.iter().try_for_each(|v| finite(*v))
            }
            KernelSpec::Scaled { factor, kernel } => {
                finite(*factor)?;
                kernel.validate()
            }
        }
    }

    /// `F(p^-k)`.
    pub fn value_at_level(&self, p: u64, k: u32) -> f64 {
        match self {
            KernelSpec::Bessel { alpha } => bessel_unchecked(*alpha, p, k),
            KernelSpec::Constant { value } => *value,
            KernelSpec::Power { coeff, exponent } => {
                coeff * (-(k as f64) * exponent * (p as f64).ln()).exp()
            }
            KernelSpec::Zero => 0.0,
            KernelSpec::Table { values } => {
                let idx = (k as usize).min(values.len().saturating_sub(1));
                values.get(idx).copied().unwrap_or(0.0)
            }
            KernelSpec::Scaled { factor, kernel } => factor * kernel.value_at_level(p, k),
        }
    }

    /// `F` at a norm value in `(0, 1]` or at 0 (the limit along `p^-k`).
    pub fn value_at_norm(&self, p: u64, norm: f64) -> f64 {
        if norm == 0.0 {
            return self.value_at_zero(p);
        }
        match self {
            KernelSpec::Power { coeff, exponent } => coeff * norm.powf(*exponent),
            KernelSpec::Scaled { factor, kernel } => factor * kernel.value_at_norm(p, norm),
            _ => {
                let k = (-norm.ln() / (p as f64).ln()).round().max(0.0) as u32;
                self.value_at_level(p, k)
            }
        }
    }

    /// Limit of `F(p^-k)` as `k -> infinity`; infinite for Bessel potentials with `alpha < 1`.
    pub fn value_at_zero(&self, p: u64) -> f64 {
        match self.tail(p, 0) {
            Some(t) if t.ratio < 1.0 || t.scale == 0.0 => t.offset,
            Some(t) if t.ratio == 1.0 => t.scale + t.offset,
            Some(t) => f64::INFINITY * t.scale.signum(),
            None => match self {
                KernelSpec::Table { values } => values.last().copied().unwrap_or(0.0),
                KernelSpec::Scaled { factor, kernel } => factor * kernel.value_at_zero(p),
                _ => unreachable!("every non-table profile has a geometric tail"),
            },
        }
    }

    /// Closed form of `F(p^-k)` for `k > from`, when the profile has one.
    pub fn tail(&self, p: u64, from: u32) -> Option<GeometricTail> {
        let _ = from;
        match self {
            KernelSpec::Bessel { alpha } => {
                let pf = p as f64;
                let c = bessel_constant(*alpha, p);
                Some(GeometricTail {
                    scale: c,
                    ratio: pf.powf(1.0 - alpha),
                    offset: -c * pf.powf(alpha - 1.0),
                })
            }
            KernelSpec::Constant { value } => Some(GeometricTail {
                scale: 0.0,
                ratio: 0.0,
                offset: *value,
            }),
            KernelSpec::Power { coeff, exponent } => Some(GeometricTail {
                scale: *coeff,
                ratio: (p as f64).powf(-exponent),
                offset: 0.0,
            }),
            KernelSpec::Zero => Some(GeometricTail {
                scale: 0.0,
                ratio: 0.0,
                offset: 0.0,
            }),
            KernelSpec::Table { values } if (from as usize) + 1 >= values.len() => {
                Some(GeometricTail {
                    scale: 0.0,
                    ratio: 0.0,
                    offset: *values.last()?,
                })
            }
            KernelSpec::Table { .. } => None,
            KernelSpec::Scaled { factor, kernel } => kernel.tail(p, from).map(|t| GeometricTail {
                scale: t.scale * factor,
                ratio: t.ratio,
                offset: t.offset * factor,
            }),
        }
    }

    /// `sup_k |F(p^-k)|` over all levels (infinite for unbounded profiles).
    pub fn sup_norm(&self, p: u64) -> f64 {
        match self {
            KernelSpec::Table { values } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
            KernelSpec::Scaled { factor, kernel } => factor.abs() * kernel.sup_norm(p),
            _ => {
                let t = self.tail(p, 0).expect("closed-form profile");
                if t.ratio > 1.0 && t.scale != 0.0 {
                    f64::INFINITY
                } else {
                    // Monotone in k: the sup is at k = 0 or in the limit.
                    self.value_at_level(p, 0).abs().max(self.value_at_zero(p).abs())
                }
            }
        }
    }
}

fn finite(v: f64) -> Result<(), KernelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::NonFinite)
    }
}

fn bessel_constant(alpha: f64, p: u64) -> f64 {
    let pf = p as f64;
    (1.0 - pf.powf(-alpha)) / (1.0 - pf.powf(alpha - 1.0))
}

fn bessel_unchecked(alpha: f64, p: u64, j: u32) -> f64 {
    let ln_p = (p as f64).ln();
    let c = bessel_constant(alpha, p);
    // Powers in log domain so large j neither overflows nor underflows prematurely.
    let near = (-(j as f64) * (alpha - 1.0) * ln_p).exp();
    let far = ((alpha - 1.0) * ln_p).exp();
    c * (near - far)
}

/// Bessel potential `J_alpha(p^-j) = (1-p^-a)/(1-p^(a-1)) * (p^(-j(a-1)) - p^(a-1))`.
pub fn bessel_value(alpha: f64, p: u64, j: u32) -> Result<f64, KernelError> {
    KernelSpec::bessel(alpha).validate()?;
    Ok(bessel_unchecked(alpha, p, j))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    /// `(|s+1| - |s-1|) / 2`: identity on `[-1, 1]`, clamped outside.
    #[default]
    Satlin,
    /// `(|s+1| + |s-1|) / 2 = max(1, |s|)`.
    SatlinPlus,
    Tanh,
}

impl Activation {
    pub fn lipschitz(&self) -> f64 {
        1.0
    }

    #[inline]
    pub fn apply_real(&self, s: f64) -> f64 {
        match self {
            Activation::Satlin => s.clamp(-1.0, 1.0),
            Activation::SatlinPlus => s.abs().max(1.0),
            Activation::Tanh => s.tanh(),
        }
    }

    /// Componentwise extension `phi(a + ib) = phi(a) + i phi(b)`.
    #[inline]
    pub fn apply(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.apply_real(z.re), self.apply_real(z.im))
    }

    pub fn is_zero_at_origin(&self) -> bool {
        self.apply_real(0.0) == 0.0
    }
}

/// `activation_apply` over a slice.
pub fn activation_apply(phi: Activation, z: Complex64) -> Complex64 {
    phi.apply(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bessel_unit_norm_value() {
        let v = bessel_value(1.5, 2, 0).unwrap();
        assert!((v - (1.0 - 2f64.powf(-1.5))).abs() < 1e-15);
        assert!((v - 0.646447).abs() < 1e-6);
        let w = bessel_value(0.5, 2, 0).unwrap();
        assert!((w - (1.0 - 2f64.powf(-0.5))).abs() < 1e-15);
        assert!((w - 0.292893).abs() < 1e-6);
    }

    #[test]
    fn bessel_rejects_alpha_one() {
        assert_eq!(bessel_value(1.0, 2, 3), Err(KernelError::BesselAlphaOne));
    }

    #[test]
    fn bessel_normalized_and_positive() {
        for &alpha in &[0.5, 1.5, 2.5] {
            for &p in &[2u64, 3, 5] {
                let mut total = 0.0;
                for k in 0..400u32 {
                    let v = bessel_value(alpha, p, k).unwrap();
                    assert!(v >= 0.0, "alpha={alpha} p={p} k={k}");
                    total += (1.0 - 1.0 / p as f64) * (p as f64).powi(-(k as i32)) * v;
                }
                assert!((total - 1.0).abs() < 1e-10, "alpha={alpha} p={p}: {total}");
            }
        }
    }

    #[test]
    fn bessel_deep_levels_are_finite() {
        let v = bessel_value(1.5, 2, 5000).unwrap();
        let limit = KernelSpec::bessel(1.5).value_at_zero(2);
        assert!((v - limit).abs() < 1e-12);
        assert!(KernelSpec::bessel(0.5).value_at_zero(2).is_infinite());
    }

    #[test]
    fn satlin_examples() {
        let phi = Activation::Satlin;
        assert_eq!(phi.apply_real(0.0), 0.0);
        assert_eq!(phi.apply_real(2.0), 1.0);
        assert_eq!(phi.apply_real(-3.0), -1.0);
        assert_eq!(activation_apply(phi, Complex64::new(0.5, 2.0)), Complex64::new(0.5, 1.0));
        assert_eq!(Activation::SatlinPlus.apply_real(0.3), 1.0);
        assert_eq!(Activation::SatlinPlus.apply_real(-2.5), 2.5);
    }

    #[test]
    fn table_holds_last_value() {
        let t = KernelSpec::table(vec![3.0, 2.0, 1.0]);
        assert_eq!(t.value_at_level(2, 7), 1.0);
        assert_eq!(t.value_at_zero(2), 1.0);
        assert_eq!(t.sup_norm(2), 3.0);
        assert!(KernelSpec::table(vec![]).validate().is_err());
    }

    #[test]
    fn power_profile() {
        let z = KernelSpec::power(5.0, 1.5);
        assert!((z.value_at_level(2, 1) - 5.0 * 2f64.powf(-1.5)).abs() < 1e-15);
        assert_eq!(z.value_at_zero(2), 0.0);
        assert_eq!(z.value_at_norm(2, 0.25), 5.0 * 0.125);
    }

    proptest! {
        #[test]
        fn activations_are_one_lipschitz(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            for phi in [Activation::Satlin, Activation::SatlinPlus, Activation::Tanh] {
                let lhs = (phi.apply_real(a) - phi.apply_real(b)).abs();
                prop_assert!(lhs <= phi.lipschitz() * (a - b).abs() + 1e-15);
            }
        }

        #[test]
        fn satlin_is_identity_inside_unit_interval(s in -1.0f64..=1.0) {
            prop_assert_eq!(Activation::Satlin.apply_real(s), s);
        }
    }
}
