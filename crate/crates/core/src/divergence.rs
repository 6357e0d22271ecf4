//! Kullback–Leibler divergences and the distance `d = sqrt(KLD)` from each
//! family member to its base model.

use std::cell::Cell;
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{Angle, DistributionSpec, Family};
use crate::error::{domain, Error, Result};
use crate::quad::trapezoid_periodic;
use crate::special::{self, SERIES_CUTOFF};

const LN_TAU: f64 = 1.837_877_066_409_345_5;

/// Default node count of the trapezoid KLD oracle.
pub const DEFAULT_NODES: usize = 20001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseModel {
    Uniform,
    PointMass,
    CardioidCurve,
}

impl BaseModel {
    pub fn name(self) -> &'static str {
        match self {
            BaseModel::Uniform => "uniform",
            BaseModel::PointMass => "point-mass",
            BaseModel::CardioidCurve => "cardioid-curve",
        }
    }
}

impl fmt::Display for BaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "u" => Ok(BaseModel::Uniform),
            "point-mass" | "pointmass" | "pm" => Ok(BaseModel::PointMass),
            "cardioid-curve" | "curve" | "cc" => Ok(BaseModel::CardioidCurve),
            other => Err(Error::Domain(format!("unknown base model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    IncreasingInParam,
    DecreasingInParam,
}

/// The distance map of one supported (family, base) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    family: Family,
    base: BaseModel,
    d_min: f64,
    d_max: f64,
    direction: Direction,
}

impl DistanceProfile {
    pub fn new(family: Family, base: BaseModel) -> Result<Self> {
        use BaseModel::*;
        use Direction::*;
        let (d_max, direction) = match (family, base) {
            (Family::VonMises, Uniform) => (f64::INFINITY, IncreasingInParam),
            (Family::VonMises, PointMass) => (1.0, DecreasingInParam),
            (Family::Cardioid, Uniform) => ((1.0 - LN_2).sqrt(), IncreasingInParam),
            (Family::Cardioid, CardioidCurve) => (LN_2.sqrt(), DecreasingInParam),
            (Family::WrappedCauchy, Uniform) => (f64::INFINITY, IncreasingInParam),
            _ => return domain(format!("no distance for family {family} with base {base}")),
        };
        Ok(Self { family, base, d_min: 0.0, d_max, direction })
    }

    /// The five supported profiles.
    pub fn all() -> [DistanceProfile; 5] {
        use BaseModel::*;
        [
            (Family::VonMises, Uniform),
            (Family::VonMises, PointMass),
            (Family::Cardioid, Uniform),
            (Family::Cardioid, CardioidCurve),
            (Family::WrappedCauchy, Uniform),
        ]
        .map(|(f, b)| DistanceProfile::new(f, b).expect("supported pair"))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn base(&self) -> BaseModel {
        self.base
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn is_increasing(&self) -> bool {
        self.direction == Direction::IncreasingInParam
    }

    /// Parameter support `[low, high)`.
    pub fn support(&self) -> (f64, f64) {
        self.family.concentration_support()
    }

    pub fn contains(&self, param: f64) -> bool {
        self.family.contains_concentration(param)
    }

    fn check(&self, param: f64) -> Result<()> {
        if self.contains(param) {
            Ok(())
        } else {
            let (lo, hi) = self.support();
            domain(format!("{} parameter must lie in [{lo}, {hi}), got {param}", self.family))
        }
    }

    pub fn distance(&self, param: f64) -> Result<f64> {
        self.check(param)?;
        Ok(self.eval(param).0)
    }

    /// `dd/dparam`; negative for decreasing profiles.
    pub fn distance_derivative(&self, param: f64) -> Result<f64> {
        self.check(param)?;
        Ok(self.eval(param).1)
    }

    pub fn distance_second_derivative(&self, param: f64) -> Result<f64> {
        self.check(param)?;
        Ok(self.second_derivative(param))
    }

    /// `(d, dd/dparam)` without a support check.
    pub(crate) fn eval(&self, x: f64) -> (f64, f64) {
        match (self.family, self.base) {
            (Family::VonMises, BaseModel::Uniform) => {
                let d = vm_uniform_distance(x);
                let slope = if d == 0.0 { 0.5 } else { x * special::ratio_derivative(x) / (2.0 * d) };
                (d, slope)
            }
            (Family::VonMises, _) => {
                let d = special::ratio_complement(x).max(0.0).sqrt();
                (d, -special::ratio_derivative(x) / (2.0 * d))
            }
            (Family::Cardioid, base) => cardioid_eval(base, x, 1.0 - 2.0 * x),
            _ => {
                let d = if x < 1e-4 {
                    let x2 = x * x;
                    x * (1.0 + x2 * (0.5 + x2 / 3.0)).sqrt()
                } else {
                    (-(-x * x).ln_1p()).sqrt()
                };
                let slope = if d == 0.0 { 1.0 } else { x / ((1.0 - x) * (1.0 + x) * d) };
                (d, slope)
            }
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        let (d, d1) = self.eval(x);
        // with u = d^2: d'' = (u'' - 2 d'^2) / (2 d)
        let u2 = match (self.family, self.base) {
            (Family::VonMises, BaseModel::Uniform) => {
                if x < 1e-4 {
                    return -9.0 * x / 32.0;
                }
                let a = special::ratio(x);
                special::ratio_over_x(x) - 2.0 * x * a * special::ratio_derivative(x)
            }
            (Family::VonMises, _) => -special::ratio_second_derivative(x),
            (Family::Cardioid, base) => {
                if base == BaseModel::Uniform && x < 1e-4 {
                    return 1.5 * x;
                }
                let s = ((1.0 - 2.0 * x) * (1.0 + 2.0 * x)).sqrt();
                4.0 / (1.0 + s) + 16.0 * x * x / (s * (1.0 + s) * (1.0 + s))
            }
            _ => {
                if x < 1e-4 {
                    return 1.5 * x;
                }
                let q = (1.0 - x) * (1.0 + x);
                2.0 * (1.0 + x * x) / (q * q)
            }
        };
        (u2 - 2.0 * d1 * d1) / (2.0 * d)
    }

    /// `(d, ln |dd/d eta|)` at the unconstrained coordinate `eta` of the
    /// family (see [`Family::from_unconstrained`]). Stays finite where the
    /// parameter itself is not representable.
    pub(crate) fn eval_unconstrained(&self, eta: f64) -> (f64, f64) {
        match self.family {
            Family::VonMises => {
                if eta > 40.0 {
                    // kappa^2 A'(kappa) -> 1/2, kappa (1 - A) -> 1/2
                    return if self.base == BaseModel::Uniform {
                        let d = (0.5 * (LN_TAU + eta - 1.0)).sqrt();
                        (d, -(4.0 * d).ln())
                    } else {
                        let d = (-0.5 * eta).exp() / std::f64::consts::SQRT_2;
                        (d, d.ln() - LN_2)
                    };
                }
                let (d, d1) = self.eval(eta.exp());
                (d, eta + d1.abs().ln())
            }
            Family::Cardioid => {
                let ell = 0.5 * special::sigmoid(eta);
                let m = special::sigmoid(-eta);
                if m == 0.0 {
                    let d = if self.is_increasing() { self.d_max } else { 0.0 };
                    return (d, f64::NEG_INFINITY);
                }
                let (d, d1) = cardioid_eval(self.base, ell, m);
                (d, d1.abs().ln() + ell.ln() + m.ln())
            }
            _ => {
                let rho = special::sigmoid(eta);
                let d = if eta < 0.0 {
                    self.eval(rho).0
                } else {
                    (special::softplus(eta) - rho.ln_1p()).max(0.0).sqrt()
                };
                let ln_rho = special::ln_sigmoid(eta);
                (d, 2.0 * ln_rho - rho.ln_1p() - d.ln())
            }
        }
    }

    /// The parameter whose distance equals `d`, by bisection on the monotone
    /// map. At the open end of the support the boundary itself is returned
    /// (0.5, 1 or infinity). A von Mises concentration beyond `f64::MAX`
    /// saturates there.
    pub fn inverse_distance(&self, d: f64) -> Result<f64> {
        if !(d >= self.d_min && d <= self.d_max) || !d.is_finite() {
            return domain(format!("distance must lie in [{}, {}], got {d}", self.d_min, self.d_max));
        }
        let (lo, hi) = self.support();
        let increasing = self.is_increasing();
        let (at_lo, at_hi) = if increasing { (self.d_min, self.d_max) } else { (self.d_max, self.d_min) };
        if d == at_lo {
            return Ok(lo);
        }
        if d == at_hi {
            return Ok(hi);
        }
        // true while x lies left of the root
        let left = |x: f64| {
            let dx = self.eval(x).0;
            if increasing {
                dx < d
            } else {
                dx > d
            }
        };
        let mut a = lo;
        let mut b = hi;
        if b.is_infinite() {
            b = 1.0;
            while left(b) {
                if b >= f64::MAX / 2.0 {
                    return Ok(f64::MAX);
                }
                a = b;
                b *= 2.0;
            }
        }
        loop {
            let mid = a + 0.5 * (b - a);
            if mid <= a || mid >= b {
                break;
            }
            if left(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
        if b >= hi {
            return Ok(a);
        }
        let err = |x: f64| (self.eval(x).0 - d).abs();
        Ok(if err(b) < err(a) { b } else { a })
    }
}

impl DistanceProfile {
    /// The unconstrained coordinate whose distance equals `d`, for `d`
    /// strictly inside the distance range.
    pub(crate) fn inverse_distance_unconstrained(&self, d: f64) -> f64 {
        let increasing = self.is_increasing();
        let left = |eta: f64| {
            let de = self.eval_unconstrained(eta).0;
            if increasing {
                de < d
            } else {
                de > d
            }
        };
        let (mut a, mut b) = (-64.0, 64.0);
        while left(b) && b < 1e12 {
            a = b;
            b *= 4.0;
        }
        while !left(a) && a > -1e3 {
            b = a;
            a *= 2.0;
        }
        loop {
            let mid = a + 0.5 * (b - a);
            if mid <= a || mid >= b {
                return mid;
            }
            if left(mid) {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
}

fn vm_uniform_distance(kappa: f64) -> f64 {
    if kappa < 0.05 {
        let k2 = kappa * kappa;
        let r = 1.0 + k2 * (-3.0 / 16.0 + k2 * (5.0 / 144.0 + k2 * (-77.0 / 12288.0 + k2 * 57.0 / 51200.0)));
        return 0.5 * kappa * r.sqrt();
    }
    let u = if kappa < SERIES_CUTOFF {
        kappa * special::ratio(kappa) - special::ln_i0(kappa)
    } else {
        -kappa * special::ratio_complement(kappa) - special::ln_i0_scaled(kappa)
    };
    u.max(0.0).sqrt()
}

/// `(d, dd/d ell)` for the cardioid with `m = 1 - 2 ell` passed separately so
/// it keeps full precision near `ell = 1/2`.
fn cardioid_eval(base: BaseModel, ell: f64, m: f64) -> (f64, f64) {
    let s = (m * (1.0 + 2.0 * ell)).sqrt();
    if base == BaseModel::Uniform {
        let d = if ell < 1e-4 {
            let e2 = ell * ell;
            ell * (1.0 + e2 * (0.5 + e2 * 2.0 / 3.0)).sqrt()
        } else {
            let t = 4.0 * ell * ell / (1.0 + s);
            (t + (-0.5 * t).ln_1p()).max(0.0).sqrt()
        };
        let slope = if ell == 0.0 { 1.0 } else { 2.0 * ell / ((1.0 + s) * d) };
        (d, slope)
    } else {
        // ln(1+s) - s + s^2/2
        let g = if s < 0.1 {
            let mut sum = 0.0;
            let mut p = s * s;
            for k in 3..24 {
                p *= s;
                let term = p / k as f64;
                sum += if k % 2 == 1 { term } else { -term };
            }
            sum
        } else {
            s.ln_1p() - s + 0.5 * s * s
        };
        let d = (0.5 * m * m + g).max(0.0).sqrt();
        (d, -(s + m) / ((1.0 + s) * d))
    }
}

fn check_finite_nonneg(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        domain(format!("{name} must be finite and nonnegative, got {x}"))
    }
}

/// KLD of `vM(kappa)` from `vM(kappa0)` with common location.
pub fn kld_vm(kappa: f64, kappa0: f64) -> Result<f64> {
    check_finite_nonneg("kappa", kappa)?;
    check_finite_nonneg("kappa0", kappa0)?;
    let v = special::ln_i0(kappa0) - special::ln_i0(kappa) + (kappa - kappa0) * special::ratio(kappa);
    Ok(v.max(0.0))
}

/// KLD of cardioid `C(ell)` from `C(ell0)` with common location.
pub fn kld_cardioid(ell: f64, ell0: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&ell) {
        return domain(format!("ell must lie in [0, 0.5), got {ell}"));
    }
    if !(ell0 > 0.0 && ell0 < 0.5) {
        return domain(format!("ell0 must lie in (0, 0.5), got {ell0}"));
    }
    let s = ((1.0 - 2.0 * ell) * (1.0 + 2.0 * ell)).sqrt();
    let s0 = ((1.0 - 2.0 * ell0) * (1.0 + 2.0 * ell0)).sqrt();
    // log ell + 0.5 log((1+s)/(1-s)) collapses to log(1+s) - log 2
    let v = 4.0 * ell * ell / (1.0 + s) - 4.0 * ell * ell0 / (1.0 + s0) + ((1.0 + s) / (1.0 + s0)).ln();
    Ok(v.max(0.0))
}

/// KLD of `WC(rho)` from the circular uniform.
pub fn kld_wc(rho: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rho) {
        return domain(format!("rho must lie in [0, 1), got {rho}"));
    }
    Ok((-(-rho * rho).ln_1p()).max(0.0))
}

/// Trapezoid quadrature of `int p log(p / q)` with [`DEFAULT_NODES`] nodes.
pub fn kld_numeric(p: &DistributionSpec, q: &DistributionSpec) -> Result<f64> {
    kld_numeric_with_nodes(p, q, DEFAULT_NODES)
}

pub fn kld_numeric_with_nodes(p: &DistributionSpec, q: &DistributionSpec, nodes: usize) -> Result<f64> {
    if nodes < 3 {
        return domain("quadrature needs at least 3 nodes");
    }
    let zero_of_q = Cell::new(None);
    let v = trapezoid_periodic(
        |x| {
            let a = Angle::wrap(x);
            let lp = p.log_pdf(a);
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            let lq = q.log_pdf(a);
            if lq == f64::NEG_INFINITY {
                zero_of_q.set(Some(x));
                return 0.0;
            }
            lp.exp() * (lp - lq)
        },
        nodes,
    );
    if let Some(x) = zero_of_q.get() {
        return Err(Error::NonIntegrable(format!("reference density vanishes at x = {x}")));
    }
    Ok(v)
}
