use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use circpc::divergence::DistanceProfile;
use circpc::harness::{run_sim_study, tail_from_data_with, TailReference, TailWindow};
use circpc::inference::{run_mcmc, summarize, ConcentrationPrior, McmcConfig, ModelSpec};
use circpc::pc_prior::{calibrate_lambda, calibrate_lambda_paper, tail_probability};
use circpc::reference::{distance_scale_pdf, overfit_audit, ParamDensity};
use circpc::{
    BaseModel, Dataset, DistributionSpec, Family, Normalization, PcPrior, ReferencePrior, SimStudyConfig,
    TailSpec,
};

#[derive(Parser)]
#[command(name = "circpc", version, about = "Penalized complexity priors for circular distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Density and CDF of a PC prior on a parameter grid (CSV).
    PcDensity {
        #[command(flatten)]
        prior: PcArgs,
        #[arg(long, value_parser = parse_grid)]
        grid: Grid,
        /// JSON file holding a PC prior record (family, base, lambda, normalization).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Density of a comparison prior in the parameter or distance scale (CSV).
    RefDensity {
        #[arg(long)]
        family: Family,
        #[command(flatten)]
        prior: RefArgs,
        /// Base model of the distance scale; without it the parameter scale is used.
        #[arg(long)]
        base: Option<BaseModel>,
        #[arg(long, value_parser = parse_grid)]
        grid: Grid,
    },
    /// Distance to a base model and its derivative on a parameter grid (CSV).
    Distance {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "uniform")]
        base: BaseModel,
        #[arg(long, value_parser = parse_grid)]
        grid: Grid,
    },
    /// Whether a prior favours the base model in the distance scale (JSON).
    Audit {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "uniform")]
        base: BaseModel,
        /// pc, or a comparison prior: gamma, h2, h3, beta, scaled-beta, uniform-half.
        #[arg(long)]
        prior: String,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        a: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
    },
    /// Scaling parameter from a tail statement P(Q > U) = alpha (JSON).
    Calibrate {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value = "uniform")]
        base: BaseModel,
        #[arg(long = "U")]
        u: f64,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "auto")]
        method: Method,
    },
    /// Random sample as an angle_rad CSV.
    Sample {
        #[arg(long)]
        family: Family,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 0.0)]
        concentration: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior of location and concentration for an angle CSV (JSON).
    Fit(FitArgs),
    /// Simulation study (CSV).
    Simulate {
        #[arg(long, required_unless_present = "config")]
        family: Option<Family>,
        /// Base seed; replicate r uses seed + r for data and seed + 1e6 + r for its chain.
        #[arg(long)]
        seed: u64,
        /// Full grids instead of the reduced desk-scale study.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        /// JSON study configuration; flags given alongside override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PcArgs {
    #[arg(long, required_unless_present = "config")]
    family: Option<Family>,
    #[arg(long, default_value = "uniform")]
    base: BaseModel,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "U")]
    u: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "truncated")]
    normalization: NormArg,
}

#[derive(Args)]
struct RefArgs {
    /// gamma, h2, h3, beta, scaled-beta or uniform-half.
    #[arg(long)]
    prior: String,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, required_unless_present = "config")]
    family: Option<Family>,
    #[arg(long)]
    data: PathBuf,
    /// pc-uniform, pc-point-mass, pc-cardioid-curve, or a comparison prior.
    #[arg(long, required_unless_present = "config")]
    prior: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long = "U")]
    u: Option<f64>,
    #[arg(long, conflicts_with = "alpha_from_data")]
    alpha: Option<f64>,
    /// Take alpha from the share of data outside the window U.
    #[arg(long, requires = "u")]
    alpha_from_data: bool,
    /// circular-mean or zero.
    #[arg(long, default_value = "circular-mean")]
    reference: TailReference,
    /// Whether U is the window's full width or its radius.
    #[arg(long, default_value = "width")]
    window: TailWindow,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Where to write the chain; defaults to the data path with a .chain.csv suffix.
    #[arg(long)]
    chain_out: Option<PathBuf>,
    /// JSON file with `model` and optionally `mcmc`; flags given alongside override the chain settings.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    ClosedForm,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Truncated,
    PaperExact,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Truncated => Normalization::Truncated,
            NormArg::PaperExact => Normalization::PaperExact,
        }
    }
}

#[derive(Clone, Debug)]
struct Grid {
    start: f64,
    end: f64,
    count: usize,
}

impl Grid {
    fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let step = if self.count > 1 { (self.end - self.start) / (self.count - 1) as f64 } else { 0.0 };
        (0..self.count).map(move |i| {
            if i + 1 == self.count && self.count > 1 {
                self.end
            } else {
                self.start + step * i as f64
            }
        })
    }
}

/// `start:end:count`, endpoints included.
fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected start:end:count".into());
    }
    let start: f64 = parts[0].parse().map_err(|_| format!("bad start '{}'", parts[0]))?;
    let end: f64 = parts[1].parse().map_err(|_| format!("bad end '{}'", parts[1]))?;
    let count: usize = parts[2].parse().map_err(|_| format!("bad count '{}'", parts[2]))?;
    if count == 0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err("need finite start <= end and a positive count".into());
    }
    Ok(Grid { start, end, count })
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<circpc::Error> for Failure {
    fn from(e: circpc::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(Failure::Usage(msg.into()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(io::BufReader::new(file))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn num(v: f64) -> String {
    v.to_string()
}

fn pc_lambda(
    family: Family,
    base: BaseModel,
    lambda: Option<f64>,
    u: Option<f64>,
    alpha: Option<f64>,
) -> CliResult<f64> {
    match (lambda, u, alpha) {
        (Some(l), None, None) => Ok(l),
        (None, Some(u), Some(alpha)) => {
            Ok(calibrate_lambda(family, base, &TailSpec::new(family, u, alpha)?)?)
        }
        _ => usage("give either --lambda or both --U and --alpha"),
    }
}

fn reference_prior(name: &str, a: Option<f64>, b: Option<f64>) -> CliResult<ReferencePrior> {
    let need =
        |v: Option<f64>, flag: &str| v.ok_or_else(|| Failure::Usage(format!("prior {name} needs --{flag}")));
    let prior = match name {
        "gamma" => ReferencePrior::GammaOneB { b: need(b, "b")? },
        "h2" => ReferencePrior::H2,
        "h3" => ReferencePrior::H3,
        "beta" => ReferencePrior::Beta { a: need(a, "a")?, b: need(b, "b")? },
        "scaled-beta" => ReferencePrior::ScaledBetaHalf { a: need(a, "a")?, b: need(b, "b")? },
        "uniform-half" => ReferencePrior::UniformHalf,
        other => return usage(format!("unknown prior '{other}'")),
    };
    prior.validate()?;
    Ok(prior)
}

fn pc_density(args: PcArgs, grid: Grid, config: Option<PathBuf>) -> CliResult {
    let prior = match config {
        Some(path) => read_json::<PcPrior>(&path)?,
        None => {
            let family = args.family.expect("required by clap");
            let lambda = pc_lambda(family, args.base, args.lambda, args.u, args.alpha)?;
            PcPrior::new(family, args.base, lambda)?.with_normalization(args.normalization.into())
        }
    };
    let mut w = csv::Writer::from_writer(output(None)?);
    w.write_record(["param", "pdf", "cdf"])?;
    for x in grid.points() {
        let pdf = prior.pdf(x).unwrap_or(f64::NAN);
        let cdf = prior.cdf(x).unwrap_or(f64::NAN);
        w.write_record([num(x), num(pdf), num(cdf)])?;
    }
    w.flush()?;
    Ok(())
}

fn ref_density(family: Family, args: RefArgs, base: Option<BaseModel>, grid: Grid) -> CliResult {
    let prior = reference_prior(&args.prior, args.a, args.b)?;
    if prior.support() != family.concentration_support() {
        return usage(format!("prior {} does not live on the {family} concentration", prior.name()));
    }
    let mut w = csv::Writer::from_writer(output(None)?);
    match base {
        None => {
            w.write_record(["param", "pdf"])?;
            for x in grid.points() {
                w.write_record([num(x), num(prior.pdf(x).unwrap_or(f64::NAN))])?;
            }
        }
        Some(base) => {
            let profile = DistanceProfile::new(family, base)?;
            w.write_record(["distance", "pdf"])?;
            for d in grid.points() {
                w.write_record([num(d), num(distance_scale_pdf(&prior, &profile, d).unwrap_or(f64::NAN))])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn distance(family: Family, base: BaseModel, grid: Grid) -> CliResult {
    let profile = DistanceProfile::new(family, base)?;
    let mut w = csv::Writer::from_writer(output(None)?);
    w.write_record(["param", "distance", "derivative"])?;
    for x in grid.points() {
        let d = profile.distance(x).unwrap_or(f64::NAN);
        let d1 = profile.distance_derivative(x).unwrap_or(f64::NAN);
        w.write_record([num(x), num(d), num(d1)])?;
    }
    w.flush()?;
    Ok(())
}

fn audit(
    family: Family,
    base: BaseModel,
    prior: &str,
    lambda: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
) -> CliResult {
    let profile = DistanceProfile::new(family, base)?;
    let (name, report) = if prior == "pc" {
        let lambda = lambda.ok_or_else(|| Failure::Usage("prior pc needs --lambda".into()))?;
        let p = PcPrior::new(family, base, lambda)?;
        (format!("pc-{base}(lambda={lambda})"), overfit_audit(&p, &profile)?)
    } else {
        let r = reference_prior(prior, a, b)?;
        if r.support() != family.concentration_support() {
            return usage(format!("prior {} does not live on the {family} concentration", r.name()));
        }
        (r.name(), overfit_audit(&r, &profile)?)
    };
    print_json(&json!({ "family": family, "base": base, "prior": name, "report": report }))
}

fn calibrate(family: Family, base: BaseModel, u: f64, alpha: f64, method: Method) -> CliResult {
    let tail = TailSpec::new(family, u, alpha)?;
    let closed_exact = matches!(
        (family, base),
        (Family::VonMises, BaseModel::Uniform)
            | (Family::Cardioid, BaseModel::Uniform)
            | (Family::WrappedCauchy, _)
    );
    let closed = match method {
        Method::Auto => closed_exact,
        Method::ClosedForm => true,
        Method::Numeric => false,
    };
    let (lambda, normalization) = if closed {
        let l = calibrate_lambda_paper(family, base, &tail)?;
        let n = if closed_exact { Normalization::Truncated } else { Normalization::PaperExact };
        (l, n)
    } else {
        (calibrate_lambda(family, base, &tail)?, Normalization::Truncated)
    };
    let prior = PcPrior::new(family, base, lambda)?.with_normalization(normalization);
    let roundtrip = tail_probability(&prior, u)?;
    print_json(&json!({
        "family": family,
        "base": base,
        "U": u,
        "alpha": alpha,
        "lambda": lambda,
        "method": if closed { "closed_form" } else { "numeric" },
        "normalization": normalization,
        "roundtrip_alpha": roundtrip,
    }))
}

fn sample(
    family: Family,
    mu: f64,
    concentration: f64,
    n: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> CliResult {
    let spec = DistributionSpec::new(family, mu, concentration)?;
    let data = spec.sample(n, seed)?;
    let mut w = output(out.as_deref())?;
    data.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct FitConfig {
    model: ModelSpec,
    #[serde(default)]
    mcmc: Option<McmcConfig>,
}

fn fit(args: FitArgs) -> CliResult {
    let data = Dataset::read_csv_path(&args.data)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", args.data.display())))?;
    let mut tail = None;
    let (model, mut mcmc) = match &args.config {
        Some(path) => {
            let cfg: FitConfig = read_json(path)?;
            (cfg.model, cfg.mcmc.unwrap_or_default())
        }
        None => {
            let family = args.family.expect("required by clap");
            let name = args.prior.as_deref().expect("required by clap");
            let prior: ConcentrationPrior = match name.strip_prefix("pc-") {
                Some(base) => {
                    let base: BaseModel =
                        base.parse().map_err(|e: circpc::Error| Failure::Usage(e.to_string()))?;
                    let lambda = if args.alpha_from_data {
                        if args.lambda.is_some() {
                            return usage("--alpha-from-data and --lambda are exclusive");
                        }
                        let u = args.u.expect("required by clap");
                        let t = tail_from_data_with(&data, u, args.reference, args.window)?;
                        tail = Some(t);
                        calibrate_lambda(family, base, &t.tail_spec(family)?)?
                    } else {
                        pc_lambda(family, base, args.lambda, args.u, args.alpha)?
                    };
                    PcPrior::new(family, base, lambda)?.into()
                }
                None => reference_prior(name, args.a, args.b)?.into(),
            };
            (ModelSpec::new(family, prior)?, McmcConfig::default())
        }
    };
    mcmc.seed = args.seed;
    if let Some(i) = args.iterations {
        mcmc.iterations = i;
    }
    if let Some(b) = args.burn_in {
        mcmc.burn_in = b;
    }
    let chain = run_mcmc(&model, &data, &mcmc)?;
    let summary = summarize(&chain)?;
    let chain_path = args.chain_out.unwrap_or_else(|| args.data.with_extension("chain.csv"));
    let mut w = BufWriter::new(File::create(&chain_path)?);
    chain.write_csv(&mut w)?;
    w.flush()?;
    let lambda = match model.prior() {
        ConcentrationPrior::Pc(p) => Some(p.lambda()),
        ConcentrationPrior::Reference(_) => None,
    };
    print_json(&json!({
        "family": model.family(),
        "prior": model.prior().name(),
        "lambda": lambda,
        "tail": tail,
        "n": data.len(),
        "summary": summary,
        "acceptance_rates": chain.acceptance_rates,
        "chain_csv": chain_path,
    }))
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    family: Option<Family>,
    seed: u64,
    full: bool,
    workers: Option<usize>,
    replicates: Option<usize>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CliResult {
    let mut cfg = match config {
        Some(path) => read_json::<SimStudyConfig>(&path)?,
        None => {
            let family = family.expect("required by clap");
            if full {
                SimStudyConfig::full(family)?
            } else {
                SimStudyConfig::desk(family)?
            }
        }
    };
    cfg.base_seed = seed;
    if workers.is_some() {
        cfg.workers = workers;
    }
    if let Some(r) = replicates {
        cfg.replicates = r;
    }
    if let Some(i) = iterations {
        cfg.mcmc.iterations = i;
    }
    if let Some(b) = burn_in {
        cfg.mcmc.burn_in = b;
    }
    let result = run_sim_study(&cfg)?;
    let mut w = output(out.as_deref())?;
    result.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::PcDensity { prior, grid, config } => pc_density(prior, grid, config),
        Command::RefDensity { family, prior, base, grid } => ref_density(family, prior, base, grid),
        Command::Distance { family, base, grid } => distance(family, base, grid),
        Command::Audit { family, base, prior, lambda, a, b } => audit(family, base, &prior, lambda, a, b),
        Command::Calibrate { family, base, u, alpha, method } => calibrate(family, base, u, alpha, method),
        Command::Sample { family, mu, concentration, n, seed, out } => {
            sample(family, mu, concentration, n, seed, out)
        }
        Command::Fit(args) => fit(args),
        Command::Simulate { family, seed, full, workers, replicates, iterations, burn_in, config, out } => {
            simulate(family, seed, full, workers, replicates, iterations, burn_in, config, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
