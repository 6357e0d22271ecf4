//! Penalised complexity priors on the concentration parameter: exponential
//! in the distance to a base model.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Family;
use crate::divergence::{BaseModel, DistanceProfile};
use crate::error::{domain, Error, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Normalised over the finite distance range of the support.
    #[default]
    Truncated,
    /// The printed densities and CDFs, which for the point-mass and
    /// cardioid-curve bases do not integrate to one.
    PaperExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PcPriorRecord", into = "PcPriorRecord")]
pub struct PcPrior {
    profile: DistanceProfile,
    lambda: f64,
    normalization: Normalization,
}

#[derive(Serialize, Deserialize)]
struct PcPriorRecord {
    family: Family,
    base: BaseModel,
    lambda: f64,
    #[serde(default)]
    normalization: Normalization,
}

impl TryFrom<PcPriorRecord> for PcPrior {
    type Error = Error;

    fn try_from(r: PcPriorRecord) -> Result<Self> {
        Ok(PcPrior::new(r.family, r.base, r.lambda)?.with_normalization(r.normalization))
    }
}

impl From<PcPrior> for PcPriorRecord {
    fn from(p: PcPrior) -> Self {
        PcPriorRecord { family: p.family(), base: p.base(), lambda: p.lambda, normalization: p.normalization }
    }
}

impl PcPrior {
    pub fn new(family: Family, base: BaseModel, lambda: f64) -> Result<Self> {
        let profile = DistanceProfile::new(family, base)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be positive and finite, got {lambda}"));
        }
        Ok(Self { profile, lambda, normalization: Normalization::Truncated })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn family(&self) -> Family {
        self.profile.family()
    }

    pub fn base(&self) -> BaseModel {
        self.profile.base()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn profile(&self) -> &DistanceProfile {
        &self.profile
    }

    pub fn support(&self) -> (f64, f64) {
        self.profile.support()
    }

    /// Printed forms that skip the truncation constant.
    fn unnormalized(&self) -> bool {
        self.normalization == Normalization::PaperExact && !self.profile.is_increasing()
    }

    /// Mass of the untruncated exponential over the distance range.
    pub fn normalizer(&self) -> f64 {
        if self.unnormalized() {
            1.0
        } else {
            -(-self.lambda * self.profile.d_max()).exp_m1()
        }
    }

    fn check(&self, x: f64) -> Result<()> {
        if self.profile.contains(x) {
            Ok(())
        } else {
            let (lo, hi) = self.support();
            domain(format!("{} parameter must lie in [{lo}, {hi}), got {x}", self.family()))
        }
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let (d, d1) = self.profile.eval(x);
        Ok((self.lambda / self.normalizer()).ln() - self.lambda * d + d1.abs().ln())
    }

    /// `d/dx ln pdf(x) = -lambda d' + d''/d'`.
    pub fn ln_pdf_derivative(&self, x: f64) -> Result<f64> {
        let d1 = self.profile.distance_derivative(x)?;
        let d2 = self.profile.distance_second_derivative(x)?;
        Ok(-self.lambda * d1 + d2 / d1)
    }

    /// Log density of `eta = family.to_unconstrained(x)`. Finite also where
    /// `x` itself under- or overflows, so it integrates reliably over the
    /// whole real line.
    pub fn ln_density_unconstrained(&self, eta: f64) -> f64 {
        let (d, ln_slope) = self.profile.eval_unconstrained(eta);
        (self.lambda / self.normalizer()).ln() - self.lambda * d + ln_slope
    }

    /// Interval of `eta` outside of which the prior mass is below ~e^-40.
    pub fn unconstrained_range(&self) -> (f64, f64) {
        let far = 40.0 / self.lambda;
        match (self.family(), self.base()) {
            (Family::VonMises, BaseModel::Uniform) => (-60.0, 2.0 * far * far + 1.0),
            (Family::VonMises, _) => (-60.0, 120.0),
            (Family::WrappedCauchy, _) => (-60.0, far * far + 2.0),
            _ => (-60.0, 80.0),
        }
    }

    /// Prior mass by adaptive quadrature in the unconstrained coordinate.
    pub fn total_mass(&self) -> f64 {
        let (lo, hi) = self.unconstrained_range();
        let f = |eta: f64| self.ln_density_unconstrained(eta).exp();
        // split at the origin and at eta = 40 where the mass concentrates
        let mut cuts = vec![lo, 0.0, 40.0_f64.min(hi)];
        if hi > 40.0 {
            cuts.push(hi);
        }
        cuts.windows(2).map(|w| quad::integrate(f, w[0], w[1], 1e-13, 1e-12)).sum()
    }

    /// `(e^{-lambda d} - e^{-lambda D}) / Z`, the mass beyond distance d.
    fn upper(&self, d: f64) -> f64 {
        let l = self.lambda;
        let dmax = self.profile.d_max();
        if self.unnormalized() || dmax.is_infinite() {
            (-l * d).exp()
        } else {
            (-l * d).exp() * -(-l * (dmax - d)).exp_m1() / self.normalizer()
        }
    }

    /// `(1 - e^{-lambda d}) / Z`, the mass below distance d.
    fn lower(&self, d: f64) -> f64 {
        -(-self.lambda * d).exp_m1() / self.normalizer()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let d = self.profile.eval(x).0;
        Ok(if self.profile.is_increasing() { self.lower(d) } else { self.upper(d) }.clamp(0.0, 1.0))
    }

    /// `1 - cdf(x)` without cancellation.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let d = self.profile.eval(x).0;
        Ok(if self.profile.is_increasing() { self.upper(d) } else { self.lower(d) }.clamp(0.0, 1.0))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if self.unnormalized() {
            return Err(Error::Unsupported(format!(
                "quantiles of the printed {}-{} prior: its CDF does not reach 0",
                self.family(),
                self.base()
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return domain(format!("probability must lie in [0, 1], got {p}"));
        }
        let q = if self.profile.is_increasing() { p } else { 1.0 - p };
        let d = -(-q * self.normalizer()).ln_1p() / self.lambda;
        self.profile.inverse_distance(d.clamp(0.0, self.profile.d_max()))
    }

    /// Inverse-CDF draws.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// A tail event `P(Q(x) > U) = alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    #[serde(rename = "U")]
    pub u: f64,
    pub alpha: f64,
}

impl TailSpec {
    pub fn new(family: Family, u: f64, alpha: f64) -> Result<Self> {
        let t = Self { u, alpha };
        t.validate(family)?;
        Ok(t)
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        let ok = match family {
            Family::Cardioid => self.u > 0.0 && self.u < 1.0,
            Family::VonMises | Family::WrappedCauchy => self.u > 0.0 && self.u <= TAU,
            Family::CircularUniform => false,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("threshold U = {} is outside the range for {family}", self.u))
        }
    }
}

/// The interpretable transform: `2 pi/(1+kappa)`, `2 ell`, `2 pi (1-rho)`.
pub fn q_transform(family: Family, x: f64) -> Result<f64> {
    if !family.contains_concentration(x) || family == Family::CircularUniform {
        return domain(format!("{x} is not a {family} concentration"));
    }
    Ok(match family {
        Family::VonMises => TAU / (1.0 + x),
        Family::Cardioid => 2.0 * x,
        _ => TAU * (1.0 - x),
    })
}

/// The parameter at which `Q` crosses `u`.
pub fn q_threshold(family: Family, u: f64) -> f64 {
    match family {
        Family::VonMises => TAU / u - 1.0,
        Family::Cardioid => 0.5 * u,
        _ => 1.0 - u / TAU,
    }
}

/// `P(Q(x) > u)` under the prior.
pub fn tail_probability(prior: &PcPrior, u: f64) -> Result<f64> {
    let family = prior.family();
    let c = q_threshold(family, u);
    if family == Family::Cardioid {
        prior.sf(c)
    } else {
        prior.cdf(c)
    }
}

/// Calibrates `lambda` numerically against the truncated CDF, by bisection
/// in `ln lambda`.
pub fn calibrate_lambda(family: Family, base: BaseModel, tail: &TailSpec) -> Result<f64> {
    tail.validate(family)?;
    let tp =
        |ln_l: f64| -> Result<f64> { tail_probability(&PcPrior::new(family, base, ln_l.exp())?, tail.u) };
    let mut bracket = None;
    for (lo, hi) in [(1e-8f64, 1e6f64), (1e-12, 1e10)] {
        let (a, b) = (lo.ln(), hi.ln());
        let (ta, tb) = (tp(a)?, tp(b)?);
        if (ta - tail.alpha) * (tb - tail.alpha) < 0.0 {
            bracket = Some((a, b, ta < tail.alpha));
            break;
        }
        if lo == 1e-12 {
            return Err(Error::InfeasibleTail { alpha: tail.alpha, low: ta.min(tb), high: ta.max(tb) });
        }
    }
    let (mut a, mut b, rising) = bracket.expect("bracket found");
    while b - a > 1e-14 * a.abs().max(1.0) {
        let mid = 0.5 * (a + b);
        if (tp(mid)? < tail.alpha) == rising {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// The closed-form calibrations as printed. They agree with
/// [`calibrate_lambda`] for the uniform bases and differ for the point-mass
/// and cardioid-curve bases, whose printed CDFs are not truncated.
pub fn calibrate_lambda_paper(family: Family, base: BaseModel, tail: &TailSpec) -> Result<f64> {
    tail.validate(family)?;
    let profile = DistanceProfile::new(family, base)?;
    let alpha = tail.alpha;
    let c = q_threshold(family, tail.u);
    if !profile.contains(c) {
        return Err(Error::InfeasibleTail { alpha, low: 0.0, high: 0.0 });
    }
    let d = profile.distance(c)?;
    if d == 0.0 {
        return Err(Error::InfeasibleTail { alpha, low: 0.0, high: 0.0 });
    }
    let lambda = match (family, base) {
        (Family::Cardioid, BaseModel::Uniform) => cardioid_uniform_fixed_point(alpha, d, profile.d_max())?,
        _ => -(-alpha).ln_1p() / d,
    };
    Ok(lambda)
}

/// Solves `lambda = -ln(alpha + (1 - alpha) e^{-lambda D}) / d` with damping
/// 0.5, falling back to bisection if the iteration stalls.
fn cardioid_uniform_fixed_point(alpha: f64, d: f64, dmax: f64) -> Result<f64> {
    let bound = 1.0 - d / dmax;
    if alpha >= bound {
        return Err(Error::InfeasibleTail { alpha, low: 0.0, high: bound });
    }
    let phi = |l: f64| -(alpha + (1.0 - alpha) * (-l * dmax).exp()).ln() / d;
    let mut l = -alpha.ln() / d;
    for _ in 0..200 {
        let next = 0.5 * l + 0.5 * phi(l);
        if (next - l).abs() <= 1e-12 * l.max(1.0) {
            return Ok(next);
        }
        l = next;
    }
    let residual = |l: f64| phi(l) - l;
    Ok(quad::bisect(residual, 1e-12, -alpha.ln() / d + 1.0, 0.0))
}

/// `(low, high)` tail probabilities attainable for a (family, base, U).
pub fn attainable_alpha(family: Family, base: BaseModel, u: f64) -> Result<(f64, f64)> {
    let profile = DistanceProfile::new(family, base)?;
    let c = q_threshold(family, u);
    if !profile.contains(c) {
        return Ok((0.0, 0.0));
    }
    let d = profile.distance(c)?;
    let dmax = profile.d_max();
    Ok(match (family, base) {
        (Family::VonMises, BaseModel::PointMass) => (0.0, 1.0 - d),
        (Family::Cardioid, BaseModel::Uniform) => (0.0, 1.0 - d / dmax),
        (Family::Cardioid, _) => (d / dmax, 1.0),
        _ => (0.0, 1.0),
    })
}

/// Median of an exponential rate `b`, used to pair PC priors with
/// `Gamma(1, b)` when the two share a median.
pub fn exponential_median(b: f64) -> f64 {
    std::f64::consts::LN_2 / b
}
