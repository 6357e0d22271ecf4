//! Simulation study driver and the tail-from-data rule used to calibrate a
//! PC prior on an observed sample.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Angle, Dataset, DistributionSpec, Family};
use crate::divergence::BaseModel;
use crate::error::{domain, Error, Result};
use crate::inference::{run_mcmc, summarize, ConcentrationPrior, McmcConfig, ModelSpec};
use crate::pc_prior::{calibrate_lambda, PcPrior, TailSpec};
use crate::reference::ReferencePrior;

/// Offset between the data seed and the chain seed of a replicate.
pub const CHAIN_SEED_OFFSET: u64 = 1_000_000;

/// A prior together with the hyperparameter values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PriorGrid {
    /// PC prior calibrated by `P(Q > U) = alpha` for each alpha.
    Pc {
        base: BaseModel,
        #[serde(rename = "U")]
        u: f64,
        alphas: Vec<f64>,
    },
    /// `Gamma(1, b)` for each rate.
    Gamma { b: Vec<f64> },
    /// `Beta(a, b)` for WC, or half a Beta variable for the cardioid, over
    /// the product of the two grids.
    Beta { a: Vec<f64>, b: Vec<f64> },
    /// A prior without hyperparameters.
    Fixed { prior: ReferencePrior },
}

/// One member of an expanded [`PriorGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCell {
    pub prior: String,
    pub hyper: String,
    /// `None` when the prior could not be built, e.g. an unattainable tail.
    pub model: Option<ModelSpec>,
}

impl PriorGrid {
    pub fn label(&self) -> String {
        match self {
            PriorGrid::Pc { base, .. } => format!("pc-{base}"),
            PriorGrid::Gamma { .. } => "gamma".into(),
            PriorGrid::Beta { .. } => "beta".into(),
            PriorGrid::Fixed { prior } => serde_json::to_value(prior)
                .ok()
                .and_then(|v| v["kind"].as_str().map(String::from))
                .unwrap_or_else(|| prior.name()),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            PriorGrid::Pc { alphas, .. } => alphas.is_empty(),
            PriorGrid::Gamma { b } => b.is_empty(),
            PriorGrid::Beta { a, b } => a.is_empty() || b.is_empty(),
            PriorGrid::Fixed { .. } => false,
        }
    }

    pub fn expand(&self, family: Family) -> Vec<PriorCell> {
        let label = self.label();
        let cell = |hyper: String, prior: Result<ConcentrationPrior>| PriorCell {
            prior: label.clone(),
            hyper,
            model: prior.and_then(|p| ModelSpec::new(family, p)).ok(),
        };
        match self {
            PriorGrid::Pc { base, u, alphas } => alphas
                .iter()
                .map(|&alpha| {
                    let prior = TailSpec::new(family, *u, alpha)
                        .and_then(|t| calibrate_lambda(family, *base, &t))
                        .and_then(|l| PcPrior::new(family, *base, l))
                        .map(ConcentrationPrior::from);
                    cell(alpha.to_string(), prior)
                })
                .collect(),
            PriorGrid::Gamma { b } => {
                b.iter().map(|&b| cell(b.to_string(), Ok(ReferencePrior::GammaOneB { b }.into()))).collect()
            }
            PriorGrid::Beta { a, b } => a
                .iter()
                .flat_map(|&a| b.iter().map(move |&b| (a, b)))
                .map(|(a, b)| {
                    let prior = if family == Family::Cardioid {
                        ReferencePrior::ScaledBetaHalf { a, b }
                    } else {
                        ReferencePrior::Beta { a, b }
                    };
                    cell(format!("{a}:{b}"), Ok(prior.into()))
                })
                .collect(),
            PriorGrid::Fixed { prior } => vec![cell("-".into(), Ok((*prior).into()))],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyConfig {
    pub family: Family,
    pub truths: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub priors: Vec<PriorGrid>,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub mcmc: McmcConfig,
    /// Worker threads; `None` uses all cores. Does not affect the output.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_seed() -> u64 {
    520
}

const ALPHAS: [f64; 7] = [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99];
const SHAPES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

impl SimStudyConfig {
    /// The full grids: 100 replicates and `N` in {100, 300, 1000}.
    pub fn full(family: Family) -> Result<Self> {
        let (truths, priors) = match family {
            Family::VonMises => (
                vec![0.02, 0.33, 1.0, 1.67, 3.0, 7.0, 15.0, 59.0],
                vec![
                    PriorGrid::Gamma { b: vec![0.01, 0.05, 0.1, 1.0, 5.0] },
                    PriorGrid::Fixed { prior: ReferencePrior::H2 },
                    PriorGrid::Fixed { prior: ReferencePrior::H3 },
                    PriorGrid::Pc { base: BaseModel::Uniform, u: FRAC_PI_2, alphas: ALPHAS.to_vec() },
                    PriorGrid::Pc { base: BaseModel::PointMass, u: FRAC_PI_2, alphas: ALPHAS.to_vec() },
                ],
            ),
            Family::Cardioid => (
                vec![0.0, 0.01, 0.1, 0.2, 0.3, 0.4, 0.49],
                vec![
                    PriorGrid::Fixed { prior: ReferencePrior::UniformHalf },
                    PriorGrid::Beta { a: SHAPES.to_vec(), b: SHAPES.to_vec() },
                    PriorGrid::Pc {
                        base: BaseModel::Uniform,
                        u: 0.5,
                        alphas: vec![0.01, 0.1, 0.2, 0.3, 0.4, 0.5],
                    },
                    PriorGrid::Pc { base: BaseModel::CardioidCurve, u: 0.5, alphas: ALPHAS.to_vec() },
                ],
            ),
            Family::WrappedCauchy => (
                vec![0.0, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99],
                vec![
                    PriorGrid::Beta { a: SHAPES.to_vec(), b: SHAPES.to_vec() },
                    PriorGrid::Pc { base: BaseModel::Uniform, u: 0.6, alphas: ALPHAS.to_vec() },
                ],
            ),
            Family::CircularUniform => {
                return Err(Error::Unsupported("no simulation study for the circular uniform".into()))
            }
        };
        Ok(Self {
            family,
            truths,
            sample_sizes: vec![100, 300, 1000],
            replicates: 100,
            priors,
            base_seed: default_seed(),
            mcmc: McmcConfig::default(),
            workers: None,
        })
    }

    /// Reduced study: 20 replicates, `N` in {100, 300} and three interior
    /// truths, with the prior grids left whole.
    pub fn desk(family: Family) -> Result<Self> {
        let mut cfg = Self::full(family)?;
        cfg.replicates = 20;
        cfg.sample_sizes = vec![100, 300];
        cfg.truths = match family {
            Family::VonMises => vec![0.33, 1.0, 3.0],
            Family::Cardioid => vec![0.1, 0.2, 0.3],
            _ => vec![0.3, 0.5, 0.7],
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.family == Family::CircularUniform {
            return Err(Error::Unsupported("no simulation study for the circular uniform".into()));
        }
        if self.truths.is_empty() || self.sample_sizes.is_empty() || self.priors.is_empty() {
            return domain("truth, sample size and prior grids must be non-empty");
        }
        if self.priors.iter().any(PriorGrid::is_empty) {
            return domain("every prior needs at least one hyperparameter value");
        }
        if self.replicates == 0 || self.sample_sizes.contains(&0) {
            return domain("replicates and sample sizes must be positive");
        }
        if let Some(&t) = self.truths.iter().find(|&&t| !self.family.contains_concentration(t)) {
            return domain(format!("true value {t} is outside the {} support", self.family));
        }
        if self.workers == Some(0) {
            return domain("workers must be positive");
        }
        self.mcmc.validate()
    }
}

/// One `(prior, hyper, truth, N)` cell of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub prior: String,
    pub hyper: String,
    pub truth: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// Mean over replicates of the posterior mean; NaN if all failed.
    pub post_mean_avg: f64,
    /// Sample standard deviation of the posterior means over replicates.
    pub post_mean_sd: f64,
    pub cells_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyResult {
    pub rows: Vec<SimRow>,
}

impl SimStudyResult {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["prior", "hyper", "truth", "N", "post_mean_avg", "post_mean_sd", "cells_failed"])?;
        for r in &self.rows {
            w.write_record([
                r.prior.clone(),
                r.hyper.clone(),
                r.truth.to_string(),
                r.n.to_string(),
                r.post_mean_avg.to_string(),
                r.post_mean_sd.to_string(),
                r.cells_failed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = Vec::new();
        self.write_csv(&mut out)?;
        Ok(String::from_utf8(out).expect("csv output is utf-8"))
    }

    pub fn find(&self, prior: &str, hyper: &str, truth: f64, n: usize) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.prior == prior && r.hyper == hyper && r.truth == truth && r.n == n)
    }
}

/// Posterior mean of one replicate.
fn replicate(config: &SimStudyConfig, model: &ModelSpec, truth: f64, n: usize, r: usize) -> Result<f64> {
    let spec = DistributionSpec::new(config.family, PI, truth)?;
    let data = spec.sample(n, config.base_seed + r as u64)?;
    let mcmc = McmcConfig { seed: config.base_seed + CHAIN_SEED_OFFSET + r as u64, ..config.mcmc };
    let chain = run_mcmc(model, &data, &mcmc)?;
    Ok(summarize(&chain)?.concentration_mean)
}

/// Runs every cell of the study. Replicate `r` draws its data with seed
/// `base_seed + r` and its chain with `base_seed + 1e6 + r`, so the table
/// does not depend on scheduling. Failed replicates are counted per cell.
pub fn run_sim_study(config: &SimStudyConfig) -> Result<SimStudyResult> {
    config.validate()?;
    let cells: Vec<PriorCell> = config.priors.iter().flat_map(|g| g.expand(config.family)).collect();

    let mut jobs = Vec::new();
    for (c, _) in cells.iter().enumerate() {
        for &truth in &config.truths {
            for &n in &config.sample_sizes {
                for r in 0..config.replicates {
                    jobs.push((c, truth, n, r));
                }
            }
        }
    }

    let work = || -> Vec<Option<f64>> {
        jobs.par_iter()
            .map(|&(c, truth, n, r)| {
                let model = cells[c].model.as_ref()?;
                replicate(config, model, truth, n, r).ok().filter(|v| v.is_finite())
            })
            .collect()
    };
    let outcomes = match config.workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let rows = outcomes
        .chunks(config.replicates)
        .enumerate()
        .map(|(k, chunk)| {
            let (c, truth, n, _) = jobs[k * config.replicates];
            let ok: Vec<f64> = chunk.iter().flatten().copied().collect();
            let m = ok.len() as f64;
            let avg = ok.iter().sum::<f64>() / m;
            let sd = if ok.len() > 1 {
                (ok.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            SimRow {
                prior: cells[c].prior.clone(),
                hyper: cells[c].hyper.clone(),
                truth,
                n,
                post_mean_avg: if ok.is_empty() { f64::NAN } else { avg },
                post_mean_sd: sd,
                cells_failed: chunk.len() - ok.len(),
            }
        })
        .collect();
    Ok(SimStudyResult { rows })
}

/// Direction the data window is centred on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailReference {
    #[default]
    CircularMean,
    Zero,
}

/// Whether `U` is the total width of the window or its half-width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailWindow {
    #[default]
    Width,
    Radius,
}

macro_rules! kebab_from_str {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($v),)+
                    _ => domain(format!("unknown value '{s}'")),
                }
            }
        }
    };
}

kebab_from_str!(TailReference, "circular-mean" => TailReference::CircularMean, "zero" => TailReference::Zero);
kebab_from_str!(TailWindow, "width" => TailWindow::Width, "radius" => TailWindow::Radius);

/// Tail statement read off a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFromData {
    #[serde(rename = "U")]
    pub u: f64,
    pub alpha: f64,
    pub reference: Angle,
    /// Points falling outside the window.
    pub outside: usize,
}

impl TailFromData {
    pub fn tail_spec(&self, family: Family) -> Result<TailSpec> {
        TailSpec::new(family, self.u, self.alpha)
    }
}

/// `alpha` = share of points whose circular distance from the reference
/// direction exceeds the window half-width, clamped to
/// `[1/(2n), 1 - 1/(2n)]`.
pub fn tail_from_data(data: &Dataset, u: f64) -> Result<TailFromData> {
    tail_from_data_with(data, u, TailReference::default(), TailWindow::default())
}

pub fn tail_from_data_with(
    data: &Dataset,
    u: f64,
    reference: TailReference,
    window: TailWindow,
) -> Result<TailFromData> {
    if data.is_empty() {
        return domain("the dataset is empty");
    }
    if !(u > 0.0 && u <= 2.0 * PI) {
        return domain(format!("U must lie in (0, 2 pi], got {u}"));
    }
    let centre = match reference {
        TailReference::CircularMean => data.circular_mean(),
        TailReference::Zero => Angle::wrap(0.0),
    };
    let half = match window {
        TailWindow::Width => 0.5 * u,
        TailWindow::Radius => u,
    };
    let outside = data
        .radians()
        .filter(|&x| {
            let gap = Angle::wrap(x - centre.radians()).radians();
            gap.min(2.0 * PI - gap) > half
        })
        .count();
    let n = data.len() as f64;
    let floor = 0.5 / n;
    let alpha = (outside as f64 / n).clamp(floor, 1.0 - floor);
    Ok(TailFromData { u, alpha, reference: centre, outside })
}
