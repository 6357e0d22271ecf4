//! Comparison priors and the distance-scale view used to audit whether a
//! prior favours the base model.

use std::f64::consts::{LN_2, PI, TAU};

use serde::{Deserialize, Serialize, Serializer};
use statrs::function::beta::ln_beta;

use crate::distributions::{Angle, Family};
use crate::divergence::DistanceProfile;
use crate::error::{domain, Result};
use crate::pc_prior::PcPrior;
use crate::special;

/// A density on a concentration parameter.
pub trait ParamDensity {
    /// `[low, high)`.
    fn support(&self) -> (f64, f64);

    fn ln_pdf(&self, x: f64) -> Result<f64>;

    fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    /// `d/dx ln pdf(x)`.
    fn ln_pdf_derivative(&self, x: f64) -> Result<f64>;

    /// Log density in the unconstrained coordinate implied by the support
    /// (`ln x`, `logit(2x)` or `logit x`).
    fn ln_density_unconstrained(&self, eta: f64) -> f64 {
        let family = match support_family(self.support()) {
            Some(f) => f,
            None => return f64::NEG_INFINITY,
        };
        let x = family.from_unconstrained(eta);
        self.ln_pdf(x).unwrap_or(f64::NEG_INFINITY) + family.ln_jacobian(eta)
    }
}

/// The family whose concentration has this support.
pub fn support_family((lo, hi): (f64, f64)) -> Option<Family> {
    if lo != 0.0 {
        return None;
    }
    if hi == f64::INFINITY {
        Some(Family::VonMises)
    } else if hi == 0.5 {
        Some(Family::Cardioid)
    } else if hi == 1.0 {
        Some(Family::WrappedCauchy)
    } else {
        None
    }
}

impl ParamDensity for PcPrior {
    fn support(&self) -> (f64, f64) {
        PcPrior::support(self)
    }

    fn ln_pdf(&self, x: f64) -> Result<f64> {
        PcPrior::ln_pdf(self, x)
    }

    fn ln_pdf_derivative(&self, x: f64) -> Result<f64> {
        PcPrior::ln_pdf_derivative(self, x)
    }

    fn ln_density_unconstrained(&self, eta: f64) -> f64 {
        PcPrior::ln_density_unconstrained(self, eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferencePrior {
    /// Exponential with rate `b`.
    GammaOneB {
        b: f64,
    },
    H2,
    H3,
    /// `Beta(a, b)` on `[0, 1)`.
    Beta {
        a: f64,
        b: f64,
    },
    /// Half of a `Beta(a, b)` variable, on `[0, 0.5)`.
    ScaledBetaHalf {
        a: f64,
        b: f64,
    },
    UniformHalf,
    /// Uniform location prior on the circle.
    CircularUniformLocation,
    /// Concentration marginal of the joint conjugate von Mises prior,
    /// unnormalised.
    VonMisesConjugate {
        c: f64,
        r0: f64,
        mu0: Angle,
    },
}

impl ReferencePrior {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                domain(format!("{name} must be positive, got {v}"))
            }
        };
        match *self {
            ReferencePrior::GammaOneB { b } => positive("b", b),
            ReferencePrior::Beta { a, b } | ReferencePrior::ScaledBetaHalf { a, b } => {
                positive("a", a)?;
                positive("b", b)
            }
            ReferencePrior::VonMisesConjugate { c, r0, .. } => {
                if c.is_finite() && r0.is_finite() {
                    Ok(())
                } else {
                    domain("conjugate hyperparameters must be finite")
                }
            }
            _ => Ok(()),
        }
    }

    /// Whether the density integrates to one.
    pub fn is_normalized(&self) -> bool {
        !matches!(self, ReferencePrior::VonMisesConjugate { .. })
    }

    pub fn name(&self) -> String {
        match *self {
            ReferencePrior::GammaOneB { b } => format!("gamma(1,{b})"),
            ReferencePrior::H2 => "h2".into(),
            ReferencePrior::H3 => "h3".into(),
            ReferencePrior::Beta { a, b } => format!("beta({a},{b})"),
            ReferencePrior::ScaledBetaHalf { a, b } => format!("beta({a},{b})/2"),
            ReferencePrior::UniformHalf => "uniform(0,0.5)".into(),
            ReferencePrior::CircularUniformLocation => "circular-uniform".into(),
            ReferencePrior::VonMisesConjugate { c, r0, mu0 } => {
                format!("conjugate({c},{r0},{})", mu0.radians())
            }
        }
    }

    /// Joint log density of the conjugate prior in `(mu, kappa)`, up to a
    /// constant.
    pub fn conjugate_joint_ln_pdf(&self, mu: Angle, kappa: f64) -> Result<f64> {
        match *self {
            ReferencePrior::VonMisesConjugate { c, r0, mu0 } => {
                if !(kappa >= 0.0 && kappa.is_finite()) {
                    return domain(format!("kappa must be nonnegative, got {kappa}"));
                }
                Ok(-c * special::ln_i0(kappa) + kappa * r0 * (mu.radians() - mu0.radians()).cos())
            }
            _ => domain("only the conjugate prior has a joint density"),
        }
    }
}

fn beta_ln_pdf(a: f64, b: f64, x: f64) -> f64 {
    let term = |p: f64, v: f64| if p == 1.0 { 0.0 } else { (p - 1.0) * v.ln() };
    term(a, x) + term(b, 1.0 - x) - ln_beta(a, b)
}

impl ParamDensity for ReferencePrior {
    fn support(&self) -> (f64, f64) {
        match self {
            ReferencePrior::Beta { .. } => (0.0, 1.0),
            ReferencePrior::ScaledBetaHalf { .. } | ReferencePrior::UniformHalf => (0.0, 0.5),
            ReferencePrior::CircularUniformLocation => (0.0, TAU),
            _ => (0.0, f64::INFINITY),
        }
    }

    fn ln_pdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        let (lo, hi) = ParamDensity::support(self);
        if !(x >= lo && x < hi) {
            return domain(format!("{} is outside the support [{lo}, {hi}) of {}", x, self.name()));
        }
        Ok(match *self {
            ReferencePrior::GammaOneB { b } => b.ln() - b * x,
            ReferencePrior::H2 => (2.0 / PI).ln() - (x * x).ln_1p(),
            ReferencePrior::H3 => x.ln() - 1.5 * (x * x).ln_1p(),
            ReferencePrior::Beta { a, b } => beta_ln_pdf(a, b, x),
            ReferencePrior::ScaledBetaHalf { a, b } => LN_2 + beta_ln_pdf(a, b, 2.0 * x),
            ReferencePrior::UniformHalf => LN_2,
            ReferencePrior::CircularUniformLocation => -TAU.ln(),
            ReferencePrior::VonMisesConjugate { c, r0, .. } => {
                TAU.ln() + special::ln_i0((x * r0).abs()) - c * special::ln_i0(x)
            }
        })
    }

    fn ln_pdf_derivative(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x)?;
        Ok(match *self {
            ReferencePrior::GammaOneB { b } => -b,
            ReferencePrior::H2 => -2.0 * x / (1.0 + x * x),
            ReferencePrior::H3 => 1.0 / x - 3.0 * x / (1.0 + x * x),
            ReferencePrior::Beta { a, b } => (a - 1.0) / x - (b - 1.0) / (1.0 - x),
            ReferencePrior::ScaledBetaHalf { a, b } => (a - 1.0) / x - 2.0 * (b - 1.0) / (1.0 - 2.0 * x),
            ReferencePrior::UniformHalf | ReferencePrior::CircularUniformLocation => 0.0,
            ReferencePrior::VonMisesConjugate { c, r0, .. } => {
                r0.abs() * special::ratio(x * r0.abs()) - c * special::ratio(x)
            }
        })
    }

    fn ln_density_unconstrained(&self, eta: f64) -> f64 {
        if self.validate().is_err() {
            return f64::NEG_INFINITY;
        }
        let lp = special::ln_sigmoid(eta);
        let lq = special::ln_sigmoid(-eta);
        match *self {
            ReferencePrior::GammaOneB { b } => b.ln() - b * eta.exp() + eta,
            ReferencePrior::H2 => (2.0 / PI).ln() - special::softplus(2.0 * eta) + eta,
            ReferencePrior::H3 => 2.0 * eta - 1.5 * special::softplus(2.0 * eta),
            ReferencePrior::Beta { a, b } | ReferencePrior::ScaledBetaHalf { a, b } => {
                a * lp + b * lq - ln_beta(a, b)
            }
            ReferencePrior::UniformHalf => lp + lq,
            ReferencePrior::CircularUniformLocation => f64::NEG_INFINITY,
            ReferencePrior::VonMisesConjugate { .. } => {
                let x = eta.exp();
                self.ln_pdf(x).unwrap_or(f64::NEG_INFINITY) + eta
            }
        }
    }
}

/// Jacobian used by [`distance_scale_pdf_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Jacobian {
    /// Finite differences of the inverse distance map.
    #[default]
    Numeric,
    /// `1 / |dd/dparam|` from the distance derivative.
    Analytic,
}

/// Density of `d = distance(x)` when `x` has density `prior`.
pub fn distance_scale_pdf<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    d: f64,
) -> Result<f64> {
    distance_scale_pdf_with(prior, profile, d, Jacobian::Numeric)
}

pub fn distance_scale_pdf_with<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    d: f64,
    jacobian: Jacobian,
) -> Result<f64> {
    if prior.support() != profile.support() {
        return domain(format!(
            "prior support {:?} does not match the {} parameter support",
            prior.support(),
            profile.family()
        ));
    }
    let (dmin, dmax) = (profile.d_min(), profile.d_max());
    if !(d >= dmin && d <= dmax && d.is_finite()) {
        return domain(format!("distance must lie in [{dmin}, {dmax}], got {d}"));
    }
    let increasing = profile.is_increasing();
    // the end of the distance range that maps to the closed end x = 0
    let closed_end = if increasing { dmin } else { dmax };
    if d == closed_end {
        return closed_end_density(prior, profile, jacobian);
    }
    if d == dmin || d == dmax {
        return Ok(open_end_limit(prior, profile, d, jacobian));
    }
    Ok(interior_density(prior, profile, d, jacobian))
}

/// Density at an interior distance.
fn interior_density<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    d: f64,
    jacobian: Jacobian,
) -> f64 {
    let family = profile.family();
    let lower_half = match family {
        Family::VonMises => 1.0,
        Family::Cardioid => 0.25,
        _ => 0.5,
    };
    let x = profile.inverse_distance(d).unwrap_or(f64::NAN);
    if x <= lower_half {
        // directly in the parameter, which is well resolved near zero
        let jac = match jacobian {
            Jacobian::Analytic => 1.0 / profile.eval(x).1.abs(),
            Jacobian::Numeric => {
                numeric_slope(profile, d, |t| profile.inverse_distance(t).unwrap_or(f64::NAN))
            }
        };
        let p = prior.pdf(x).unwrap_or(0.0);
        if p == 0.0 {
            0.0
        } else {
            p * jac
        }
    } else {
        // through the unconstrained coordinate, which stays resolved where
        // the parameter crowds against its upper end
        let eta = profile.inverse_distance_unconstrained(d);
        let ln_p = prior.ln_density_unconstrained(eta);
        let ln_jac = match jacobian {
            Jacobian::Analytic => -profile.eval_unconstrained(eta).1,
            Jacobian::Numeric => {
                numeric_slope(profile, d, |t| profile.inverse_distance_unconstrained(t)).ln()
            }
        };
        (ln_p + ln_jac).exp()
    }
}

/// `|dy/dd|` of an inverse map by central differences with step
/// `1e-6 max(1, d)`. Within a few steps of an end of the distance range the
/// difference is taken in `ln |d - end|` instead, so the stencil never
/// crosses the end.
fn numeric_slope<F: Fn(f64) -> f64>(profile: &DistanceProfile, d: f64, inverse: F) -> f64 {
    let h = 1e-6 * d.max(1.0);
    let below = d - profile.d_min();
    let above = profile.d_max() - d;
    if below > 4.0 * h && above > 4.0 * h {
        return ((inverse(d + h) - inverse(d - h)) / (2.0 * h)).abs();
    }
    let (end, sign, room) =
        if below <= above { (profile.d_min(), 1.0, below) } else { (profile.d_max(), -1.0, above) };
    let r = room.ln();
    let hr = 1e-5;
    let at = |rr: f64| inverse(end + sign * rr.exp());
    ((at(r + hr) - at(r - hr)) / (2.0 * hr) / room).abs()
}

fn closed_end_density<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    jacobian: Jacobian,
) -> Result<f64> {
    let p = prior.pdf(0.0)?;
    if p == 0.0 || p.is_infinite() {
        return Ok(p);
    }
    let jac = match jacobian {
        Jacobian::Analytic => 1.0 / profile.eval(0.0).1.abs(),
        Jacobian::Numeric => {
            let d0 = profile.eval(0.0).0;
            let h = 1e-6 * d0.max(1.0);
            let step = if profile.is_increasing() { h } else { -h };
            let x1 = profile.inverse_distance(d0 + step)?;
            let x2 = profile.inverse_distance(d0 + 2.0 * step)?;
            // second-order one-sided difference
            ((4.0 * x1 - x2) / (2.0 * h)).abs()
        }
    };
    Ok(p * jac)
}

/// One-sided limit at an end of the distance range that corresponds to
/// the open end of the parameter support. Richardson-style extrapolation
/// of interior values, snapped to zero below the noise floor.
fn open_end_limit<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    d: f64,
    jacobian: Jacobian,
) -> f64 {
    let inward = if d == profile.d_min() { 1.0 } else { -1.0 };
    let span = if profile.d_max().is_finite() { profile.d_max() - profile.d_min() } else { 1.0 };
    let values: Vec<f64> = (0..=24)
        .map(|k| {
            let t = 1e-3 * span * 0.5f64.powi(k);
            interior_density(prior, profile, d + inward * t, jacobian)
        })
        .collect();
    let n = values.len();
    let (g0, g1, g2) = (values[n - 3], values[n - 2], values[n - 1]);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() || g2 > 1e6 * values[0].max(1e-300) && g2 > g1 && g1 > g0 {
        return f64::INFINITY;
    }
    let denom = g2 - 2.0 * g1 + g0;
    let limit = if denom.abs() > 1e-300 && (g2 - g1) * (g1 - g0) > 0.0 {
        g2 - (g2 - g1) * (g2 - g1) / denom
    } else {
        g2
    };
    if limit.abs() <= 1e-6 * scale || limit < 0.0 {
        0.0
    } else {
        limit
    }
}

/// Density of `d` for a `Beta(a, b)` prior on the wrapped Cauchy `rho`,
/// in closed form.
pub fn beta_wc_distance_pdf(a: f64, b: f64, d: f64) -> f64 {
    let q = -(-d * d).exp_m1();
    let rho = q.sqrt();
    let ln = (a - 1.0) * rho.ln() + (b - 1.0) * (1.0 - rho).ln() - ln_beta(a, b) + d.ln() - d * d - rho.ln();
    ln.exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    BaseModelFavoring,
    ComplexityFavoring,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    #[serde(serialize_with = "finite_or_string")]
    pub density_at_zero: f64,
    pub monotone_decreasing: bool,
    pub argmax_d: f64,
    pub classification: Classification,
}

fn finite_or_string<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

pub const AUDIT_GRID: usize = 1000;

/// Audits a prior on a grid of distances from `d_min` to
/// `min(d_max, d_cap)`.
pub fn overfit_audit<P: ParamDensity + ?Sized>(prior: &P, profile: &DistanceProfile) -> Result<AuditReport> {
    overfit_audit_with(prior, profile, 5.0)
}

pub fn overfit_audit_with<P: ParamDensity + ?Sized>(
    prior: &P,
    profile: &DistanceProfile,
    d_cap: f64,
) -> Result<AuditReport> {
    let lo = profile.d_min();
    let hi = profile.d_max().min(d_cap);
    let grid: Vec<f64> =
        (0..AUDIT_GRID).map(|i| lo + (hi - lo) * i as f64 / (AUDIT_GRID - 1) as f64).collect();
    let values = grid.iter().map(|&d| distance_scale_pdf(prior, profile, d)).collect::<Result<Vec<_>>>()?;
    let monotone_decreasing = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let (imax, _) =
        values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let density_at_zero = values[0];
    let classification = if density_at_zero > 0.0 && imax == 0 {
        Classification::BaseModelFavoring
    } else {
        Classification::ComplexityFavoring
    };
    Ok(AuditReport { density_at_zero, monotone_decreasing, argmax_d: grid[imax], classification })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::BaseModel;
    use crate::quad;

    fn vm_uniform() -> DistanceProfile {
        DistanceProfile::new(Family::VonMises, BaseModel::Uniform).unwrap()
    }

    fn vm_point_mass() -> DistanceProfile {
        DistanceProfile::new(Family::VonMises, BaseModel::PointMass).unwrap()
    }

    fn wc() -> DistanceProfile {
        DistanceProfile::new(Family::WrappedCauchy, BaseModel::Uniform).unwrap()
    }

    #[test]
    fn parameter_scale_values() {
        assert!((ReferencePrior::H2.pdf(0.0).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(ReferencePrior::H3.pdf(0.0).unwrap(), 0.0);
        let g = ReferencePrior::GammaOneB { b: 0.34 };
        assert!((g.pdf(1.0).unwrap() - 0.34 * (-0.34f64).exp()).abs() < 1e-15);
        let b = ReferencePrior::Beta { a: 2.0, b: 3.0 };
        assert!((b.pdf(0.25).unwrap() - 12.0 * 0.25 * 0.75 * 0.75).abs() < 1e-12);
        let sb = ReferencePrior::ScaledBetaHalf { a: 5.0, b: 2.0 };
        assert!((sb.pdf(0.2).unwrap() - 2.0 * 30.0 * 0.4f64.powi(4) * 0.6).abs() < 1e-12);
        assert_eq!(ReferencePrior::UniformHalf.pdf(0.3).unwrap(), 2.0);
        assert_eq!(ReferencePrior::Beta { a: 0.5, b: 1.0 }.pdf(0.0).unwrap(), f64::INFINITY);
        assert!((ReferencePrior::Beta { a: 1.0, b: 1.0 }.pdf(0.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(ReferencePrior::H2.pdf(-1.0).is_err());
        assert!(ReferencePrior::Beta { a: 1.0, b: 1.0 }.pdf(1.0).is_err());
        assert!(ReferencePrior::GammaOneB { b: -1.0 }.pdf(1.0).is_err());
    }

    #[test]
    fn proper_priors_integrate_to_one() {
        let h2 = quad::integrate_to_infinity(|k| ReferencePrior::H2.pdf(k).unwrap(), 0.0, 1e-12, 1e-12);
        assert!((h2 - 1.0).abs() < 1e-8);
        let h3 = quad::integrate_to_infinity(|k| ReferencePrior::H3.pdf(k).unwrap(), 0.0, 1e-12, 1e-12);
        assert!((h3 - 1.0).abs() < 1e-8);
        for prior in [
            ReferencePrior::Beta { a: 0.5, b: 0.5 },
            ReferencePrior::ScaledBetaHalf { a: 5.0, b: 2.0 },
            ReferencePrior::UniformHalf,
            ReferencePrior::GammaOneB { b: 0.05 },
        ] {
            let total =
                quad::integrate(|e| prior.ln_density_unconstrained(e).exp(), -80.0, 80.0, 1e-12, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "{prior:?}: {total}");
        }
    }

    #[test]
    fn conjugate_marginal_matches_joint() {
        let mu0 = Angle::new(1.0).unwrap();
        let prior = ReferencePrior::VonMisesConjugate { c: 3.0, r0: 2.0, mu0 };
        assert!(!prior.is_normalized());
        for kappa in [0.0, 0.5, 2.0] {
            let joint = quad::trapezoid_periodic(
                |m| prior.conjugate_joint_ln_pdf(Angle::wrap(m), kappa).unwrap().exp(),
                4001,
            );
            assert!((joint - prior.pdf(kappa).unwrap()).abs() < 1e-10 * joint);
        }
        assert!(ReferencePrior::H2.conjugate_joint_ln_pdf(mu0, 1.0).is_err());
    }

    #[test]
    fn distance_scale_claims() {
        let u = vm_uniform();
        assert_eq!(distance_scale_pdf(&ReferencePrior::H3, &u, 0.0).unwrap(), 0.0);
        let h2_at_zero = distance_scale_pdf(&ReferencePrior::H2, &u, 0.0).unwrap();
        assert!((h2_at_zero - 4.0 / PI).abs() < 1e-5);
        let audit = overfit_audit(&ReferencePrior::H2, &u).unwrap();
        assert!(audit.monotone_decreasing);
        assert_eq!(audit.classification, Classification::BaseModelFavoring);

        let gamma = overfit_audit(&ReferencePrior::GammaOneB { b: 0.34 }, &u).unwrap();
        assert!(gamma.argmax_d > 0.5 && gamma.argmax_d < 1.5, "{gamma:?}");
        assert_eq!(gamma.classification, Classification::ComplexityFavoring);

        let pc = PcPrior::new(Family::VonMises, BaseModel::Uniform, 0.92).unwrap();
        let report = overfit_audit(&pc, &u).unwrap();
        assert!(report.monotone_decreasing && report.argmax_d == 0.0);
        assert!((report.density_at_zero - 0.92).abs() < 1e-5);
    }

    #[test]
    fn point_mass_profile_limits() {
        let p = vm_point_mass();
        for prior in [ReferencePrior::GammaOneB { b: 0.34 }, ReferencePrior::H2, ReferencePrior::H3] {
            assert_eq!(distance_scale_pdf(&prior, &p, 0.0).unwrap(), 0.0, "{prior:?}");
        }
        let pc = PcPrior::new(Family::VonMises, BaseModel::PointMass, 1.26).unwrap();
        let at_zero = distance_scale_pdf(&pc, &p, 0.0).unwrap();
        let expected = 1.26 / pc.normalizer();
        assert!((at_zero - expected).abs() < 1e-4 * expected, "{at_zero} {expected}");
        // the closed end d = 1 is kappa = 0 where dkappa/dd = 4
        let g = distance_scale_pdf(&ReferencePrior::GammaOneB { b: 0.34 }, &p, 1.0).unwrap();
        assert!((g - 4.0 * 0.34).abs() < 1e-5);
    }

    #[test]
    fn beta_matches_closed_form() {
        let profile = wc();
        for (a, b) in [(0.5, 0.5), (1.0, 1.0), (2.0, 5.0), (5.0, 2.0), (0.5, 2.0)] {
            let prior = ReferencePrior::Beta { a, b };
            for i in 1..=100 {
                let d = 0.05 * i as f64;
                let numeric = distance_scale_pdf(&prior, &profile, d).unwrap();
                let closed = beta_wc_distance_pdf(a, b, d);
                assert!(
                    (numeric - closed).abs() <= 1e-8 * closed.max(1.0),
                    "{a} {b} {d}: {numeric} {closed}"
                );
            }
        }
        let audit = overfit_audit(&ReferencePrior::Beta { a: 0.5, b: 1.0 }, &profile).unwrap();
        assert_eq!(audit.density_at_zero, f64::INFINITY);
        let json = serde_json::to_string(&audit).unwrap();
        assert!(json.contains("\"density_at_zero\":\"inf\""));
        let flat = overfit_audit(&ReferencePrior::Beta { a: 1.0, b: 1.0 }, &profile).unwrap();
        assert!((flat.density_at_zero - 1.0).abs() < 1e-5);
        let peaked = overfit_audit(&ReferencePrior::Beta { a: 2.0, b: 2.0 }, &profile).unwrap();
        assert_eq!(peaked.density_at_zero, 0.0);
    }

    #[test]
    fn numeric_and_analytic_jacobians_agree() {
        for profile in DistanceProfile::all() {
            let prior: Box<dyn ParamDensity> = match profile.family() {
                Family::VonMises => Box::new(ReferencePrior::H2),
                Family::Cardioid => Box::new(ReferencePrior::ScaledBetaHalf { a: 5.0, b: 2.0 }),
                _ => Box::new(ReferencePrior::Beta { a: 2.0, b: 0.5 }),
            };
            let top = profile.d_max().min(5.0);
            for i in 1..50 {
                let d = top * i as f64 / 50.0;
                let n = distance_scale_pdf_with(prior.as_ref(), &profile, d, Jacobian::Numeric).unwrap();
                let a = distance_scale_pdf_with(prior.as_ref(), &profile, d, Jacobian::Analytic).unwrap();
                assert!((n - a).abs() <= 1e-7 * a.max(1.0), "{profile:?} {d}: {n} {a}");
            }
        }
    }

    #[test]
    fn probability_is_conserved() {
        let cases: Vec<(Box<dyn ParamDensity>, DistanceProfile)> = vec![
            (Box::new(ReferencePrior::H2), vm_uniform()),
            (Box::new(ReferencePrior::GammaOneB { b: 0.34 }), vm_uniform()),
            (Box::new(ReferencePrior::H3), vm_point_mass()),
            (
                Box::new(ReferencePrior::ScaledBetaHalf { a: 5.0, b: 2.0 }),
                DistanceProfile::new(Family::Cardioid, BaseModel::CardioidCurve).unwrap(),
            ),
            (
                Box::new(ReferencePrior::UniformHalf),
                DistanceProfile::new(Family::Cardioid, BaseModel::Uniform).unwrap(),
            ),
            (Box::new(ReferencePrior::Beta { a: 2.0, b: 0.5 }), wc()),
        ];
        for (prior, profile) in cases {
            let top = profile.d_max().min(8.0);
            let mass = quad::integrate(
                |d| distance_scale_pdf(prior.as_ref(), &profile, d).unwrap(),
                0.0,
                top,
                1e-10,
                1e-10,
            );
            assert!((mass - 1.0).abs() < 1e-5, "{profile:?}: {mass}");
        }
    }

    #[test]
    fn support_mismatch_is_rejected() {
        assert!(distance_scale_pdf(&ReferencePrior::H2, &wc(), 0.5).is_err());
        assert!(distance_scale_pdf(&ReferencePrior::H2, &vm_uniform(), -0.5).is_err());
        let cu = DistanceProfile::new(Family::Cardioid, BaseModel::Uniform).unwrap();
        assert!(distance_scale_pdf(&ReferencePrior::UniformHalf, &cu, 0.6).is_err());
    }

    #[test]
    fn audit_is_deterministic() {
        let p = vm_uniform();
        let a = overfit_audit(&ReferencePrior::GammaOneB { b: 1.0 }, &p).unwrap();
        let b = overfit_audit(&ReferencePrior::GammaOneB { b: 1.0 }, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serde_tags() {
        let p: ReferencePrior = serde_json::from_str(r#"{"kind":"gamma-one-b","b":0.34}"#).unwrap();
        assert_eq!(p, ReferencePrior::GammaOneB { b: 0.34 });
        let p: ReferencePrior = serde_json::from_str(r#"{"kind":"h2"}"#).unwrap();
        assert_eq!(p, ReferencePrior::H2);
    }
}
