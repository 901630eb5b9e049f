//! Float math shims and log-domain helpers.
//!
//! Weight updates multiply factors as small as `e^{-eta * loss}` with
//! `eta * loss` in the hundreds, so all weight bookkeeping in this crate is
//! done on logarithms. This module provides the log-sum-exp primitive and the
//! handful of transcendental functions we need, routed through `std` or
//! `libm` depending on the build.

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("either the `std` or the `libm` feature must be enabled");

#[cfg(feature = "std")]
mod shim {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
}

#[cfg(not(feature = "std"))]
mod shim {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}

pub(crate) use shim::{abs, exp, ln, sqrt};

/// `ln(sum_i e^{values[i]})` with max-subtraction for stability.
///
/// Returns negative infinity for an empty slice or when every entry is
/// negative infinity, matching the convention `ln(0) = -inf`.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for &v in values {
        sum += exp(v - max);
    }
    max + ln(sum)
}

/// Sign of `x` with the convention `sign(0) = 0`, used for subgradients of
/// piecewise-linear losses at their kink.
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}
