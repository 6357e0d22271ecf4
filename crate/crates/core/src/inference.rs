//! Joint posterior over location and concentration, an adaptive
//! random-walk Metropolis sampler for it, and posterior summaries.

use std::f64::consts::TAU;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{Angle, Dataset, Family};
use crate::error::{domain, Error, Result};
use crate::pc_prior::PcPrior;
use crate::reference::{ParamDensity, ReferencePrior};
use crate::special;

/// Prior on the concentration parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "prior", rename_all = "kebab-case")]
pub enum ConcentrationPrior {
    Pc(PcPrior),
    Reference(ReferencePrior),
}

impl ConcentrationPrior {
    fn density(&self) -> &dyn ParamDensity {
        match self {
            ConcentrationPrior::Pc(p) => p,
            ConcentrationPrior::Reference(r) => r,
        }
    }

    pub fn name(&self) -> String {
        match self {
            ConcentrationPrior::Pc(p) => format!("pc-{}(lambda={})", p.base(), p.lambda()),
            ConcentrationPrior::Reference(r) => r.name(),
        }
    }
}

impl From<PcPrior> for ConcentrationPrior {
    fn from(p: PcPrior) -> Self {
        ConcentrationPrior::Pc(p)
    }
}

impl From<ReferencePrior> for ConcentrationPrior {
    fn from(r: ReferencePrior) -> Self {
        ConcentrationPrior::Reference(r)
    }
}

/// Likelihood family together with a concentration prior. The location
/// prior is always circular uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRecord", into = "ModelRecord")]
pub struct ModelSpec {
    family: Family,
    prior: ConcentrationPrior,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    family: Family,
    prior: ConcentrationPrior,
}

impl TryFrom<ModelRecord> for ModelSpec {
    type Error = Error;

    fn try_from(r: ModelRecord) -> Result<Self> {
        ModelSpec::new(r.family, r.prior)
    }
}

impl From<ModelSpec> for ModelRecord {
    fn from(m: ModelSpec) -> Self {
        ModelRecord { family: m.family, prior: m.prior }
    }
}

impl ModelSpec {
    pub fn new(family: Family, prior: impl Into<ConcentrationPrior>) -> Result<Self> {
        let prior = prior.into();
        if family == Family::CircularUniform {
            return Err(Error::Unsupported("the circular uniform has no concentration to infer".into()));
        }
        if let ConcentrationPrior::Reference(r) = &prior {
            r.validate()?;
            if matches!(r, ReferencePrior::VonMisesConjugate { .. } | ReferencePrior::CircularUniformLocation)
            {
                return Err(Error::Unsupported(format!(
                    "{} is not a concentration prior for this model",
                    r.name()
                )));
            }
        }
        if prior.density().support() != family.concentration_support() {
            return domain(format!(
                "prior {} has support {:?} but {} concentrations live on {:?}",
                prior.name(),
                prior.density().support(),
                family,
                family.concentration_support()
            ));
        }
        Ok(Self { family, prior })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn prior(&self) -> &ConcentrationPrior {
        &self.prior
    }
}

/// Data reduced to what the likelihood needs.
struct Likelihood {
    family: Family,
    n: f64,
    sum_cos: f64,
    sum_sin: f64,
    points: Vec<(f64, f64)>,
}

impl Likelihood {
    fn new(family: Family, data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return domain("the dataset is empty");
        }
        let points: Vec<(f64, f64)> = data.radians().map(|x| (x.cos(), x.sin())).collect();
        let (sum_cos, sum_sin) = points.iter().fold((0.0, 0.0), |(c, s), p| (c + p.0, s + p.1));
        let points = if family == Family::VonMises { Vec::new() } else { points };
        Ok(Self { family, n: data.len() as f64, sum_cos, sum_sin, points })
    }

    /// Log likelihood at `(mu, c)` where `c_comp = hi - c` is passed
    /// separately so that it stays accurate next to the upper end.
    fn ln_lik(&self, mu: f64, c: f64, c_comp: f64) -> f64 {
        let (s, k) = mu.sin_cos();
        let base = -self.n * TAU.ln();
        match self.family {
            Family::VonMises => {
                let proj = self.sum_cos * k + self.sum_sin * s;
                if c == 0.0 {
                    base
                } else {
                    base + c * (proj - self.n) - self.n * special::ln_i0_scaled(c)
                }
            }
            Family::Cardioid => {
                let mut acc = 0.0;
                for &(cx, sx) in &self.points {
                    let cos_d = cx * k + sx * s;
                    acc += (2.0 * c * cos_d).ln_1p();
                }
                base + acc
            }
            Family::WrappedCauchy => {
                let mut acc = 0.0;
                for &(cx, sx) in &self.points {
                    let one_minus_cos = (1.0 - (cx * k + sx * s)).max(0.0);
                    acc -= (c_comp * c_comp + 2.0 * c * one_minus_cos).ln();
                }
                base + self.n * (c_comp * (1.0 + c)).ln() + acc
            }
            Family::CircularUniform => base,
        }
    }

    fn ln_lik_derivative(&self, mu: f64, c: f64) -> f64 {
        let (s, k) = mu.sin_cos();
        match self.family {
            Family::VonMises => self.sum_cos * k + self.sum_sin * s - self.n * special::ratio(c),
            Family::Cardioid => self
                .points
                .iter()
                .map(|&(cx, sx)| {
                    let cos_d = cx * k + sx * s;
                    2.0 * cos_d / (1.0 + 2.0 * c * cos_d)
                })
                .sum(),
            Family::WrappedCauchy => {
                let own = -2.0 * c / (1.0 - c * c);
                self.points
                    .iter()
                    .map(|&(cx, sx)| {
                        let cos_d = cx * k + sx * s;
                        own - 2.0 * (c - cos_d) / (1.0 + c * c - 2.0 * c * cos_d)
                    })
                    .sum()
            }
            Family::CircularUniform => 0.0,
        }
    }
}

fn check_state(model: &ModelSpec, conc: f64) -> Result<()> {
    if model.family.contains_concentration(conc) {
        Ok(())
    } else {
        domain(format!("{conc} is outside the {} concentration support", model.family))
    }
}

/// `ln pi(mu, c | data)` up to the data's marginal likelihood: the sum of
/// log densities, the log prior of `c` and `-ln 2 pi` for the location.
pub fn log_posterior(model: &ModelSpec, data: &Dataset, mu: Angle, conc: f64) -> Result<f64> {
    check_state(model, conc)?;
    let lik = Likelihood::new(model.family, data)?;
    let (_, hi) = model.family.concentration_support();
    let comp = if hi.is_finite() { hi - conc } else { f64::INFINITY };
    let prior = model.prior.density().ln_pdf(conc).unwrap_or(f64::NEG_INFINITY);
    if prior == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(lik.ln_lik(mu.radians(), conc, comp) + prior - TAU.ln())
}

/// `d/dc` of [`log_posterior`].
pub fn log_posterior_gradient(model: &ModelSpec, data: &Dataset, mu: Angle, conc: f64) -> Result<f64> {
    check_state(model, conc)?;
    let lik = Likelihood::new(model.family, data)?;
    Ok(lik.ln_lik_derivative(mu.radians(), conc) + model.prior.density().ln_pdf_derivative(conc)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Defaults to the sample circular mean.
    pub initial_mu: Option<Angle>,
    /// Defaults to a moment estimate from the sample resultant length.
    pub initial_concentration: Option<f64>,
    pub target_acceptance: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 20_000,
            burn_in: 5_000,
            seed: 0,
            initial_mu: None,
            initial_concentration: None,
            target_acceptance: 0.44,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return domain(format!(
                "need 0 <= burn_in < iterations, got burn_in {} and iterations {}",
                self.burn_in, self.iterations
            ));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return domain(format!("target acceptance must lie in (0, 1), got {}", self.target_acceptance));
        }
        Ok(())
    }
}

/// Kept draws of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub draws: Vec<(Angle, f64)>,
    /// Post burn-in acceptance rates of the location and concentration
    /// updates, in that order.
    pub acceptance_rates: [f64; 2],
    /// Proposal scales in use after burn-in (location, unconstrained
    /// concentration).
    pub step_sizes: [f64; 2],
    /// Iteration number of the first kept draw.
    pub first_iter: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn concentrations(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.1).collect()
    }

    /// CSV with header `iter,mu,concentration`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iter", "mu", "concentration"])?;
        for (i, (mu, c)) in self.draws.iter().enumerate() {
            w.write_record([(self.first_iter + i).to_string(), mu.radians().to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Starting concentration from the sample mean resultant length.
fn moment_start(family: Family, r: f64) -> f64 {
    match family {
        Family::VonMises => {
            // approximate inverse of I1/I0
            let r = r.clamp(0.01, 0.99);
            if r < 0.53 {
                2.0 * r + r.powi(3) + 5.0 * r.powi(5) / 6.0
            } else if r < 0.85 {
                -0.4 + 1.39 * r + 0.43 / (1.0 - r)
            } else {
                1.0 / (r.powi(3) - 4.0 * r * r + 3.0 * r)
            }
        }
        Family::Cardioid => r.clamp(0.01, 0.49),
        _ => r.clamp(0.01, 0.99),
    }
}

/// Largest float strictly below `hi`, so unconstrained draws rounding to the
/// upper end stay in the support.
fn below(c: f64, hi: f64) -> f64 {
    if c >= hi {
        f64::from_bits(hi.to_bits() - 1)
    } else {
        c
    }
}

/// Component-wise adaptive random-walk Metropolis on `(mu, eta)` where `eta`
/// is the family's unconstrained concentration coordinate.
///
/// The location step is a wrapped Gaussian. Both proposal scales follow a
/// Robbins–Monro recursion towards `target_acceptance` during burn-in and
/// are frozen afterwards.
pub fn run_mcmc(model: &ModelSpec, data: &Dataset, config: &McmcConfig) -> Result<Chain> {
    config.validate()?;
    let family = model.family;
    let lik = Likelihood::new(family, data)?;
    let (_, hi) = family.concentration_support();
    let prior = model.prior.density();

    let target = |mu: f64, eta: f64| -> f64 {
        let lp = prior.ln_density_unconstrained(eta);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return f64::NEG_INFINITY;
        }
        let c = family.from_unconstrained(eta);
        let comp = match family {
            Family::VonMises => f64::INFINITY,
            _ => hi * special::sigmoid(-eta),
        };
        let v = lik.ln_lik(mu, c, comp) + lp;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut mu = config.initial_mu.unwrap_or_else(|| data.circular_mean()).radians();
    let c0 = match config.initial_concentration {
        Some(c) => {
            check_state(model, c).map_err(|e| Error::Initialization(e.to_string()))?;
            c
        }
        None => moment_start(family, data.mean_resultant_length()),
    };
    let mut eta = family.to_unconstrained(c0);
    let mut current = target(mu, eta);
    if !current.is_finite() {
        return Err(Error::Initialization(format!(
            "log posterior at mu = {mu}, concentration = {c0} is {current}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ln_step = [0.0_f64, -0.5_f64];
    let ln_step_max = [TAU.ln(), 3.0];
    let kept = config.iterations - config.burn_in;
    let mut draws = Vec::with_capacity(kept);
    let mut accepted = [0usize; 2];

    for t in 0..config.iterations {
        let adapting = t < config.burn_in;
        let gain = ((t + 1) as f64).powf(-0.6);

        for block in 0..2 {
            let z: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rand::Rng::random(&mut rng);
            let step = ln_step[block].exp();
            let (mu_new, eta_new) =
                if block == 0 { (Angle::wrap(mu + step * z).radians(), eta) } else { (mu, eta + step * z) };
            let proposed = target(mu_new, eta_new);
            let ln_ratio = proposed - current;
            let accept_prob = if ln_ratio >= 0.0 { 1.0 } else { ln_ratio.exp() };
            if u < accept_prob {
                mu = mu_new;
                eta = eta_new;
                current = proposed;
                if !adapting {
                    accepted[block] += 1;
                }
            }
            if adapting {
                ln_step[block] = (ln_step[block] + gain * (accept_prob - config.target_acceptance))
                    .clamp(-12.0, ln_step_max[block]);
            }
        }

        if !adapting {
            let c = below(family.from_unconstrained(eta), hi);
            draws.push((Angle::wrap(mu), c));
        }
    }

    Ok(Chain {
        draws,
        acceptance_rates: [accepted[0] as f64 / kept as f64, accepted[1] as f64 / kept as f64],
        step_sizes: [ln_step[0].exp(), ln_step[1].exp()],
        first_iter: config.burn_in + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub concentration_mean: f64,
    pub concentration_median: f64,
    pub concentration_sd: f64,
    pub concentration_ci_low: f64,
    pub concentration_ci_high: f64,
    pub mu_circular_mean: Angle,
    /// Effective sample size of the concentration draws.
    pub effective_sample_size: f64,
    pub draws: usize,
}

/// Linear-interpolation quantile of sorted values.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// Effective sample size by Geyer's initial positive sequence, capped at
/// the chain length.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let gamma0 = autocov(0);
    if gamma0 <= 0.0 || gamma0.is_nan() {
        return n as f64;
    }
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    if tau <= 0.0 {
        return n as f64;
    }
    (n as f64 / tau).min(n as f64)
}

pub fn summarize(chain: &Chain) -> Result<PosteriorSummary> {
    if chain.is_empty() {
        return domain("cannot summarize an empty chain");
    }
    let conc = chain.concentrations();
    let n = conc.len() as f64;
    let mean = conc.iter().sum::<f64>() / n;
    let var = conc.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = conc.clone();
    sorted.sort_by(f64::total_cmp);
    let (s, c) = chain
        .draws
        .iter()
        .fold((0.0, 0.0), |(s, c), (mu, _)| (s + mu.radians().sin(), c + mu.radians().cos()));
    Ok(PosteriorSummary {
        concentration_mean: mean,
        concentration_median: quantile_sorted(&sorted, 0.5),
        concentration_sd: var.sqrt(),
        concentration_ci_low: quantile_sorted(&sorted, 0.025),
        concentration_ci_high: quantile_sorted(&sorted, 0.975),
        mu_circular_mean: Angle::wrap(s.atan2(c)),
        effective_sample_size: effective_sample_size(&conc),
        draws: conc.len(),
    })
}

/// Posterior mean of the concentration by trapezoid quadrature of the joint
/// posterior over `mu_nodes` periodic nodes and `conc_nodes` equally spaced
/// concentrations on `[0, conc_max]` (`conc_max` is clipped below the upper
/// end of bounded supports).
pub fn grid_posterior_mean(
    model: &ModelSpec,
    data: &Dataset,
    conc_max: f64,
    mu_nodes: usize,
    conc_nodes: usize,
) -> Result<f64> {
    let (_, hi) = model.family.concentration_support();
    let top = if hi.is_finite() { conc_max.min(hi * (1.0 - 1e-9)) } else { conc_max };
    let mut ln_marg = Vec::with_capacity(conc_nodes);
    let mut cs = Vec::with_capacity(conc_nodes);
    for j in 0..conc_nodes {
        let c = top * j as f64 / (conc_nodes - 1) as f64;
        let vals: Vec<f64> = (0..mu_nodes)
            .map(|i| log_posterior(model, data, Angle::wrap(TAU * i as f64 / mu_nodes as f64), c))
            .collect::<Result<_>>()?;
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ln =
            if m == f64::NEG_INFINITY { m } else { m + vals.iter().map(|v| (v - m).exp()).sum::<f64>().ln() };
        ln_marg.push(ln);
        cs.push(c);
    }
    let m = ln_marg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = ln_marg
        .iter()
        .enumerate()
        .map(|(j, l)| {
            let end = if j == 0 || j + 1 == conc_nodes { 0.5 } else { 1.0 };
            end * (l - m).exp()
        })
        .collect();
    let mass: f64 = w.iter().sum();
    Ok(w.iter().zip(&cs).map(|(w, c)| w * c).sum::<f64>() / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistributionSpec;
    use crate::divergence::BaseModel;
    use crate::pc_prior::{calibrate_lambda, TailSpec};
    use rand::Rng;

    fn pcu_vm(u: f64, alpha: f64) -> ModelSpec {
        let tail = TailSpec::new(Family::VonMises, u, alpha).unwrap();
        let lambda = calibrate_lambda(Family::VonMises, BaseModel::Uniform, &tail).unwrap();
        let prior = PcPrior::new(Family::VonMises, BaseModel::Uniform, lambda).unwrap();
        ModelSpec::new(Family::VonMises, prior).unwrap()
    }

    fn short(seed: u64) -> McmcConfig {
        McmcConfig { iterations: 6000, burn_in: 2000, ..McmcConfig::with_seed(seed) }
    }

    #[test]
    fn log_posterior_hand_values() {
        let model = pcu_vm(std::f64::consts::FRAC_PI_2, 0.5);
        let prior = match model.prior() {
            ConcentrationPrior::Pc(p) => *p,
            _ => unreachable!(),
        };
        let data = Dataset::from_radians(&[0.3, 2.0, 5.0], "x").unwrap();
        let lp = log_posterior(&model, &data, Angle::new(1.0).unwrap(), 0.0).unwrap();
        let expected = 3.0 * (1.0 / TAU).ln() + prior.ln_pdf(0.0).unwrap() - TAU.ln();
        assert!((lp - expected).abs() < 1e-12);

        let mu = std::f64::consts::PI;
        let data = Dataset::from_radians(&[mu, mu], "x").unwrap();
        let lp = log_posterior(&model, &data, Angle::new(mu).unwrap(), 1.0).unwrap();
        let ln_i0_1 = 0.235_914_358_507_178_7_f64; // ln I0(1)
        let expected = 2.0 * (1.0 - TAU.ln() - ln_i0_1) + prior.ln_pdf(1.0).unwrap() - TAU.ln();
        assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");
    }

    #[test]
    fn log_posterior_matches_density_sum() {
        let data = DistributionSpec::von_mises(1.0, 2.0).unwrap().sample(40, 3).unwrap();
        let cases: Vec<(ModelSpec, f64)> = vec![
            (pcu_vm(1.0, 0.3), 1.7),
            (ModelSpec::new(Family::Cardioid, ReferencePrior::UniformHalf).unwrap(), 0.31),
            (ModelSpec::new(Family::WrappedCauchy, ReferencePrior::Beta { a: 2.0, b: 1.5 }).unwrap(), 0.62),
        ];
        for (model, c) in cases {
            let mu = Angle::new(0.8).unwrap();
            let spec = DistributionSpec::new(model.family(), mu.radians(), c).unwrap();
            let sum: f64 = data.angles.iter().map(|&x| spec.log_pdf(x)).sum();
            let prior = model.prior().density().ln_pdf(c).unwrap();
            let lp = log_posterior(&model, &data, mu, c).unwrap();
            assert!((lp - (sum + prior - TAU.ln())).abs() < 1e-9, "{:?}", model.family());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data = DistributionSpec::wrapped_cauchy(2.0, 0.4).unwrap().sample(25, 5).unwrap();
        let models = [
            pcu_vm(1.0, 0.3),
            ModelSpec::new(Family::VonMises, ReferencePrior::H3).unwrap(),
            ModelSpec::new(
                Family::Cardioid,
                PcPrior::new(Family::Cardioid, BaseModel::Uniform, 2.0).unwrap(),
            )
            .unwrap(),
            ModelSpec::new(
                Family::WrappedCauchy,
                PcPrior::new(Family::WrappedCauchy, BaseModel::Uniform, 1.0).unwrap(),
            )
            .unwrap(),
            ModelSpec::new(Family::WrappedCauchy, ReferencePrior::Beta { a: 0.5, b: 2.0 }).unwrap(),
        ];
        for model in &models {
            for _ in 0..10 {
                let mu = Angle::wrap(rng.random::<f64>() * TAU);
                let (_, hi) = model.family().concentration_support();
                let c = if hi.is_finite() {
                    hi * (0.1 + 0.8 * rng.random::<f64>())
                } else {
                    0.2 + 5.0 * rng.random::<f64>()
                };
                let h = 1e-6 * c.max(1e-3);
                let f = |x: f64| log_posterior(model, &data, mu, x).unwrap();
                let fd = (f(c + h) - f(c - h)) / (2.0 * h);
                let g = log_posterior_gradient(model, &data, mu, c).unwrap();
                assert!((g - fd).abs() <= 1e-5 * g.abs().max(1.0), "{:?} c={c}: {g} vs {fd}", model.family());
            }
        }
    }

    #[test]
    fn model_rejects_mismatched_priors() {
        assert!(ModelSpec::new(Family::VonMises, ReferencePrior::UniformHalf).is_err());
        assert!(ModelSpec::new(Family::Cardioid, ReferencePrior::H2).is_err());
        let conj = ReferencePrior::VonMisesConjugate { c: 1.0, r0: 0.5, mu0: Angle::new(0.0).unwrap() };
        assert!(ModelSpec::new(Family::VonMises, conj).is_err());
        let pc = PcPrior::new(Family::VonMises, BaseModel::Uniform, 1.0).unwrap();
        assert!(ModelSpec::new(Family::WrappedCauchy, pc).is_err());
        let empty = Dataset { angles: vec![], label: String::new() };
        assert!(log_posterior(&pcu_vm(1.0, 0.5), &empty, Angle::new(0.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn model_serde_round_trip() {
        let models = [
            pcu_vm(1.0, 0.5),
            ModelSpec::new(Family::WrappedCauchy, ReferencePrior::Beta { a: 2.0, b: 1.0 }).unwrap(),
        ];
        for m in models {
            let json = serde_json::to_string(&m).unwrap();
            let back: ModelSpec = serde_json::from_str(&json).unwrap();
            assert_eq!(back, m, "{json}");
        }
        let bad = r#"{"family":"vm","prior":{"prior":"reference","kind":"uniform-half"}}"#;
        assert!(serde_json::from_str::<ModelSpec>(bad).is_err());
    }

    #[test]
    fn chain_is_deterministic_and_frozen() {
        let model = pcu_vm(std::f64::consts::FRAC_PI_2, 0.5);
        let data = DistributionSpec::von_mises(1.0, 3.0).unwrap().sample(50, 1).unwrap();
        let a = run_mcmc(&model, &data, &short(9)).unwrap();
        let b = run_mcmc(&model, &data, &short(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4000);
        assert_eq!(a.first_iter, 2001);
        assert!(a.draws.iter().all(|d| d.1 >= 0.0 && d.1.is_finite()));
        for r in a.acceptance_rates {
            assert!(r > 0.25 && r < 0.65, "acceptance {r}");
        }
        let c = run_mcmc(&model, &data, &short(10)).unwrap();
        assert_ne!(a.draws, c.draws);
    }

    #[test]
    fn steps_stay_fixed_after_burn_in() {
        let model = pcu_vm(1.0, 0.5);
        let data = DistributionSpec::von_mises(0.0, 2.0).unwrap().sample(30, 2).unwrap();
        let longer = McmcConfig { iterations: 9000, ..short(4) };
        let a = run_mcmc(&model, &data, &short(4)).unwrap();
        let b = run_mcmc(&model, &data, &longer).unwrap();
        assert_eq!(a.step_sizes, b.step_sizes);
        assert_eq!(a.draws[..], b.draws[..a.len()]);
    }

    #[test]
    fn initialization_failure_is_reported() {
        let model = ModelSpec::new(Family::VonMises, ReferencePrior::H3).unwrap();
        let data = DistributionSpec::von_mises(0.0, 2.0).unwrap().sample(10, 2).unwrap();
        let cfg = McmcConfig { initial_concentration: Some(0.0), ..short(1) };
        assert!(matches!(run_mcmc(&model, &data, &cfg), Err(Error::Initialization(_))));
        let cfg = McmcConfig { initial_concentration: Some(-1.0), ..short(1) };
        assert!(matches!(run_mcmc(&model, &data, &cfg), Err(Error::Initialization(_))));
    }

    #[test]
    fn small_sample_matches_grid() {
        let model = pcu_vm(std::f64::consts::FRAC_PI_2, 0.5);
        let data = DistributionSpec::von_mises(std::f64::consts::PI, 2.0).unwrap().sample(30, 11).unwrap();
        let chain = run_mcmc(&model, &data, &McmcConfig::with_seed(5)).unwrap();
        let s = summarize(&chain).unwrap();
        let grid = grid_posterior_mean(&model, &data, 15.0, 400, 400).unwrap();
        let mcse = s.concentration_sd / s.effective_sample_size.sqrt();
        assert!(
            (s.concentration_mean - grid).abs() < 3.0 * mcse,
            "{} vs {grid} (mcse {mcse})",
            s.concentration_mean
        );
    }

    #[test]
    fn uniform_data_keeps_wc_concentration_small() {
        let prior = PcPrior::new(Family::WrappedCauchy, BaseModel::Uniform, 1.0).unwrap();
        let model = ModelSpec::new(Family::WrappedCauchy, prior).unwrap();
        let data = DistributionSpec::uniform().sample(1000, 8).unwrap();
        let chain = run_mcmc(&model, &data, &short(3)).unwrap();
        assert!(summarize(&chain).unwrap().concentration_mean < 0.15);
    }

    #[test]
    fn rotation_shifts_location_only() {
        let model = pcu_vm(1.0, 0.5);
        let data = DistributionSpec::von_mises(1.0, 4.0).unwrap().sample(40, 6).unwrap();
        let delta = 2.5;
        let a = summarize(&run_mcmc(&model, &data, &McmcConfig::with_seed(2)).unwrap()).unwrap();
        let b =
            summarize(&run_mcmc(&model, &data.rotated(delta), &McmcConfig::with_seed(2)).unwrap()).unwrap();
        let shift =
            Angle::wrap(b.mu_circular_mean.radians() - a.mu_circular_mean.radians() - delta).radians();
        assert!(shift.min(TAU - shift) < 0.05, "{shift}");
        assert!((a.concentration_mean - b.concentration_mean).abs() < 0.15);
    }

    #[test]
    fn summary_of_constant_chain() {
        let chain = Chain {
            draws: vec![(Angle::new(1.0).unwrap(), 2.0); 500],
            acceptance_rates: [0.0; 2],
            step_sizes: [1.0; 2],
            first_iter: 1,
        };
        let s = summarize(&chain).unwrap();
        assert_eq!(s.concentration_ci_low, s.concentration_ci_high);
        assert_eq!(s.effective_sample_size, 500.0);
    }

    #[test]
    fn summary_of_exponential_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws =
            (0..100_000).map(|_| (Angle::new(0.0).unwrap(), -(1.0 - rng.random::<f64>()).ln())).collect();
        let chain = Chain { draws, acceptance_rates: [1.0; 2], step_sizes: [1.0; 2], first_iter: 1 };
        let s = summarize(&chain).unwrap();
        assert!((s.concentration_mean - 1.0).abs() < 0.02);
        assert!((s.concentration_ci_low - (1.0f64 / 0.975).ln()).abs() < 0.05);
        assert!((s.concentration_ci_high - 40f64.ln()).abs() < 0.05);
        assert!(s.effective_sample_size > 80_000.0);
    }

    #[test]
    fn circular_mean_wraps() {
        let draws =
            [0.05, 0.1, TAU - 0.05, TAU - 0.1, 0.02].iter().map(|&m| (Angle::new(m).unwrap(), 1.0)).collect();
        let chain = Chain { draws, acceptance_rates: [1.0; 2], step_sizes: [1.0; 2], first_iter: 1 };
        let m = summarize(&chain).unwrap().mu_circular_mean.radians();
        assert!(m.min(TAU - m) < 0.01, "{m}");
    }

    #[test]
    fn chain_csv_layout() {
        let chain = Chain {
            draws: vec![(Angle::new(1.5).unwrap(), 0.25), (Angle::new(0.5).unwrap(), 0.75)],
            acceptance_rates: [1.0; 2],
            step_sizes: [1.0; 2],
            first_iter: 11,
        };
        let mut out = Vec::new();
        chain.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "iter,mu,concentration\n11,1.5,0.25\n12,0.5,0.75\n");
    }
}
