//! Modified Bessel functions of the first kind, orders 0 to 2, and the
//! ratio `A(x) = I1(x) / I0(x)` with its derivatives.
//!
//! Below [`SERIES_CUTOFF`] everything is evaluated from the ascending power
//! series (all terms positive, no cancellation). Above it the exponentially
//! scaled Hankel expansion
//!
//! ```text
//! e^{-x} I_v(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(v) / x^k,
//! a_k(v) = prod_{j=1..k} (4 v^2 - (2j - 1)^2) / (k! 8^k)
//! ```
//!
//! is summed up to its smallest term. Quantities that are differences of
//! nearly equal Bessel values (`1 - A`, `A'`) are formed by combining the
//! expansion coefficients first, so the leading terms cancel exactly.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};

/// Switch point between the power series and the asymptotic expansion.
pub const SERIES_CUTOFF: f64 = 15.0;

const N_ASYMPTOTIC: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BesselOrder {
    Zero,
    One,
    Two,
}

impl BesselOrder {
    pub fn as_u32(self) -> u32 {
        match self {
            BesselOrder::Zero => 0,
            BesselOrder::One => 1,
            BesselOrder::Two => 2,
        }
    }
}

impl TryFrom<u32> for BesselOrder {
    type Error = Error;

    fn try_from(order: u32) -> Result<Self> {
        match order {
            0 => Ok(BesselOrder::Zero),
            1 => Ok(BesselOrder::One),
            2 => Ok(BesselOrder::Two),
            n => Err(Error::Domain(format!("Bessel order {n} is not supported (0, 1, 2)"))),
        }
    }
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!("Bessel argument must be finite and nonnegative, got {x}"));
    }
    Ok(())
}

/// `sum_{k >= start} (x/2)^{2k+v} / (k! (k+v)!)`
fn power_series(nu: u32, x: f64, start: u32) -> f64 {
    let y = 0.25 * x * x;
    let mut term = (0.5 * x).powi(nu as i32);
    for j in 1..=nu {
        term /= j as f64;
    }
    for k in 0..start {
        term *= y / ((k + 1) as f64 * (k + 1 + nu) as f64);
    }
    let mut sum = 0.0;
    let mut k = start;
    loop {
        sum += term;
        if term <= sum * 1e-17 || k > 500 {
            break;
        }
        term *= y / ((k + 1) as f64 * (k + 1 + nu) as f64);
        k += 1;
    }
    sum
}

/// Signed expansion coefficients `(-1)^k a_k(v)`.
fn hankel_coeffs(nu: u32) -> [f64; N_ASYMPTOTIC] {
    let mu = 4.0 * (nu * nu) as f64;
    let mut c = [0.0; N_ASYMPTOTIC];
    c[0] = 1.0;
    for k in 1..N_ASYMPTOTIC {
        let odd = (2 * k - 1) as f64;
        c[k] = -c[k - 1] * (mu - odd * odd) / (8.0 * k as f64);
    }
    c
}

/// Sums `sum_k coeffs[k] x^{-k}`, stopping at the smallest term.
fn sum_asymptotic(coeffs: &[f64], x: f64) -> f64 {
    let inv = 1.0 / x;
    let mut pow = 1.0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for &c in coeffs {
        let term = c * pow;
        let mag = term.abs();
        if c != 0.0 && mag > prev {
            break;
        }
        sum += term;
        if c != 0.0 {
            if mag <= sum.abs() * 1e-17 {
                break;
            }
            prev = mag;
        }
        pow *= inv;
    }
    sum
}

fn scaled_asymptotic(nu: u32, x: f64) -> f64 {
    sum_asymptotic(&hankel_coeffs(nu), x) / ((2.0 * PI).sqrt() * x.sqrt())
}

fn scaled_unchecked(nu: u32, x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        power_series(nu, x, 0) * (-x).exp()
    } else {
        scaled_asymptotic(nu, x)
    }
}

/// `I_order(x)`. Overflows to `+inf` beyond x ~ 713; use
/// [`bessel_i_scaled`] there.
pub fn bessel_i(order: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    let nu = order.as_u32();
    if x < SERIES_CUTOFF {
        Ok(power_series(nu, x, 0))
    } else {
        Ok(scaled_asymptotic(nu, x) * x.exp())
    }
}

/// Exponentially scaled `e^{-x} I_order(x)`, finite for every finite x.
pub fn bessel_i_scaled(order: BesselOrder, x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(scaled_unchecked(order.as_u32(), x))
}

/// `log I0(x)`, finite for any finite x.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ln_i0(x))
}

pub(crate) fn ln_i0(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        power_series(0, x, 1).ln_1p()
    } else {
        x + scaled_asymptotic(0, x).ln()
    }
}

/// `log(e^{-x} I0(x))`, without the rounding of `ln_i0(x) - x` at large x.
pub(crate) fn ln_i0_scaled(x: f64) -> f64 {
    scaled_unchecked(0, x).ln()
}

/// `A(x) = I1(x) / I0(x)`, the mean resultant length of a von Mises
/// distribution with concentration x.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ratio(x))
}

pub(crate) fn ratio(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if x < SERIES_CUTOFF {
        power_series(1, x, 0) / power_series(0, x, 0)
    } else {
        scaled_asymptotic(1, x) / scaled_asymptotic(0, x)
    }
}

/// `1 - A(x)`, accurate also when A is close to one.
pub fn bessel_ratio_complement(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ratio_complement(x))
}

pub(crate) fn ratio_complement(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        return 1.0 - ratio(x);
    }
    let c0 = hankel_coeffs(0);
    let c1 = hankel_coeffs(1);
    let mut diff = [0.0; N_ASYMPTOTIC];
    for k in 0..N_ASYMPTOTIC {
        diff[k] = c0[k] - c1[k];
    }
    sum_asymptotic(&diff, x) / sum_asymptotic(&c0, x)
}

/// `A(x) / x`, with the limit 1/2 at the origin.
pub(crate) fn ratio_over_x(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        // I1(x)/x = 0.5 * sum (x/2)^{2k} / (k! (k+1)!)
        let y = 0.25 * x * x;
        let mut term = 0.5;
        let mut sum = 0.0;
        let mut k = 0u32;
        loop {
            sum += term;
            if term <= sum * 1e-17 || k > 500 {
                break;
            }
            term *= y / ((k + 1) as f64 * (k + 2) as f64);
            k += 1;
        }
        sum / power_series(0, x, 0)
    } else {
        ratio(x) / x
    }
}

/// `A'(x) = (I0 + I2) / (2 I0) - A^2 = 1 - A/x - A^2`.
pub fn bessel_ratio_derivative(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ratio_derivative(x))
}

pub(crate) fn ratio_derivative(x: f64) -> f64 {
    if x < SERIES_CUTOFF {
        let a = ratio(x);
        return 1.0 - ratio_over_x(x) - a * a;
    }
    // A' = [S0 (S0 + S2) / 2 - S1^2] / S0^2 with S the scaled expansions;
    // build the numerator's coefficients by convolution.
    let c0 = hankel_coeffs(0);
    let c1 = hankel_coeffs(1);
    let c2 = hankel_coeffs(2);
    let mut num = [0.0; N_ASYMPTOTIC];
    for (k, slot) in num.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..=k {
            let j = k - i;
            acc += c0[i] * 0.5 * (c0[j] + c2[j]) - c1[i] * c1[j];
        }
        *slot = acc;
    }
    let s0 = sum_asymptotic(&c0, x);
    sum_asymptotic(&num, x) / (s0 * s0)
}

/// `A''(x)`.
pub fn bessel_ratio_second_derivative(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(ratio_second_derivative(x))
}

pub(crate) fn ratio_second_derivative(x: f64) -> f64 {
    if x < 0.05 {
        let x2 = x * x;
        return x * (-3.0 / 8.0 + x2 * (5.0 / 24.0 + x2 * (-77.0 / 1024.0 + x2 * 57.0 / 2560.0)));
    }
    let a = ratio(x);
    let da = ratio_derivative(x);
    a / (x * x) - da / x - 2.0 * a * da
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn ln_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}
