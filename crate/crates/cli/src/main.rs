//! `stable-carma` command-line tool.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stable_carma::carma_model::{FamilyId, ParamFamily};
use stable_carma::error::{Error, Result};
use stable_carma::garcia_estimator::garcia_estimate;
use stable_carma::io::{parse_config_json, parse_model_json, parse_series_csv, write_series_csv, ModelFile};
use stable_carma::kalman_transfer::{solve_riccati, SpectralDensity};
use stable_carma::limit_diagnostics::{acvf_limit_params, beta_grid, simulate_limit_w, Sweep};
use stable_carma::mc_harness::{run_experiment, EstimatorKind, ExperimentConfig};
use stable_carma::optimize::NmOptions;
use stable_carma::pathsim::{simulate, SampledSeries, Scheme, SimConfig};
use stable_carma::spectral::{periodogram, sample_acvf_all};
use stable_carma::stable_levy::{RngStream, StableParams};
use stable_carma::whittle_estimator::{whittle_fit, Objective};

#[derive(Parser, Debug)]
#[command(
    name = "stable-carma",
    version,
    about = "Stable CARMA simulation and estimation"
)]
struct Cli {
    /// Seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Experiment configuration (JSON); flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Model JSON file `{"family", "theta", "delta"}`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// OU, CARMA20_EX47, CARMA21_EX48 or GENERIC.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated parameter vector.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
}

impl ModelArgs {
    fn load(&self) -> Result<ModelFile> {
        let mut m = match &self.model {
            Some(p) => parse_model_json(&read(p)?)?,
            None => ModelFile {
                family: self
                    .family_id()?
                    .ok_or_else(|| config("--model or --family is required"))?,
                theta: self.theta.clone().ok_or_else(|| config("--theta is required"))?,
                delta: 1.0,
                bounds: None,
            },
        };
        if self.model.is_some() {
            if let Some(f) = self.family_id()? {
                m.family = f;
            }
            if let Some(t) = &self.theta {
                m.theta = t.clone();
            }
        }
        if let Some(d) = self.delta {
            m.delta = d;
        }
        Ok(m)
    }

    fn family_id(&self) -> Result<Option<FamilyId>> {
        self.family.as_deref().map(str::parse).transpose()
    }
}

#[derive(Args, Debug, Clone)]
struct LimitArgs {
    #[arg(long)]
    family: String,
    /// True parameter, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    theta0: Vec<f64>,
    #[arg(long, default_value_t = 1.5)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
}

impl LimitArgs {
    fn family(&self) -> Result<ParamFamily> {
        ParamFamily::from_id(self.family.parse()?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a sampled path as `k,y` CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long, default_value_t = 0.0)]
        burn_in: f64,
        /// euler or exact.
        #[arg(long, default_value = "euler")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Sample autocovariances `h,gamma` of a series.
    Acvf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 20)]
        max_lag: usize,
    },
    /// Periodogram `omega,value` of a series.
    Periodogram {
        #[arg(long)]
        input: PathBuf,
    },
    /// Spectral density of the sampled model in both forms.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 256)]
        points: usize,
        /// Driver variance.
        #[arg(long, default_value_t = 1.0)]
        sigma_l2: f64,
    },
    /// Whittle estimate from a series.
    WhittleFit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        family: String,
        /// Scales the adjusted objective by `n^(1-2/alpha)`; adjusted when absent.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Indirect ARMA-based estimate from a series.
    GarciaFit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        family: String,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Skewness diagnostics along one coordinate.
    BetaGrid {
        #[command(flatten)]
        limit: LimitArgs,
        #[arg(long, default_value_t = 0)]
        coordinate: usize,
        /// Sweep range; the family box when absent.
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
    /// Draws of the Whittle limit over a grid along one coordinate.
    LimitSim {
        #[command(flatten)]
        limit: LimitArgs,
        #[arg(long, default_value_t = 0)]
        coordinate: usize,
        /// Grid values for the coordinate, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Stable parameters of the sample autocovariance limit.
    AcvfLimit {
        #[command(flatten)]
        limit: LimitArgs,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        lag: usize,
    },
    /// Monte Carlo study; writes `<out>.json` and `<out>.csv`.
    Experiment {
        #[arg(long)]
        family: Option<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta0: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        replications: Option<usize>,
        /// whittle and/or garcia, comma separated.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
}

fn config(msg: &str) -> Error {
    Error::InvalidConfig(msg.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::Io(e.to_string())),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn csv_table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn load_series(path: &Path, delta: Option<f64>) -> Result<SampledSeries> {
    let mut s = parse_series_csv(&read(path)?)?;
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(config("--delta must be positive"));
        }
        s.delta = d;
    }
    Ok(s)
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "euler" => Ok(Scheme::Euler),
        "exact" => Ok(Scheme::Exact),
        other => Err(Error::InvalidConfig(format!("unknown scheme '{other}'"))),
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorKind> {
    match s.trim() {
        "whittle" => Ok(EstimatorKind::Whittle),
        "garcia" => Ok(EstimatorKind::Garcia),
        other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
    }
}

/// Exit status for a finished command.
enum Outcome {
    Ok,
    Numerical,
}

fn run(cli: Cli) -> Result<Outcome> {
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Simulate {
            model,
            alpha,
            sigma,
            n,
            step,
            burn_in,
            scheme,
            stream,
        } => {
            let m = model.load()?;
            let spec = m.spec()?;
            let noise = StableParams::symmetric(alpha, sigma)?;
            let cfg = SimConfig::new(n)
                .with_step(step)
                .with_delta(m.delta)
                .with_burn_in(burn_in);
            let mut rng = RngStream::new(seed, stream);
            let series = simulate(parse_scheme(&scheme)?, &spec, &noise, &cfg, &mut rng)?
                .with_model(m.family.name(), &m.theta);
            emit(out, &write_series_csv(&series))?;
        }
        Command::Acvf { input, max_lag } => {
            let s = load_series(&input, None)?;
            let g = sample_acvf_all(&s.values, max_lag)?;
            let rows = g.iter().enumerate().map(|(h, v)| format!("{h},{v}"));
            emit(out, &csv_table("h,gamma", rows))?;
        }
        Command::Periodogram { input } => {
            let s = load_series(&input, None)?;
            let p = periodogram(&s.values);
            emit(
                out,
                &csv_table("omega,value", p.iter().map(|(w, v)| format!("{w},{v}"))),
            )?;
        }
        Command::Spectrum {
            model,
            points,
            sigma_l2,
        } => {
            if points == 0 {
                return Err(config("--points must be positive"));
            }
            let spec = model.load()?.spec()?;
            let sd = SpectralDensity::new(&spec, &solve_riccati(&spec)?);
            let mut rows = Vec::with_capacity(points);
            for j in 0..points {
                let w = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / points as f64;
                let d = sd.eval(w, sigma_l2)?;
                rows.push(format!("{w},{},{}", d.integral, d.via_pi));
            }
            emit(out, &csv_table("omega,f_integral,f_pi", rows))?;
        }
        Command::WhittleFit {
            input,
            family,
            alpha,
            delta,
        } => {
            let s = load_series(&input, delta)?;
            let fam = ParamFamily::from_id(family.parse()?)?;
            let objective = alpha.map_or(Objective::Adjusted, |alpha| Objective::Alpha { alpha });
            let r = whittle_fit(&s.values, &fam, s.delta, objective, &NmOptions::default())?;
            emit(out, &json(&r))?;
            if !r.objective_value.is_finite() {
                return Ok(Outcome::Numerical);
            }
        }
        Command::GarciaFit { input, family, delta } => {
            let s = load_series(&input, delta)?;
            let fam = ParamFamily::from_id(family.parse()?)?;
            let r = garcia_estimate(&s.values, &fam, s.delta)?;
            emit(out, &json(&r))?;
            if r.failed {
                return Ok(Outcome::Numerical);
            }
        }
        Command::BetaGrid {
            limit,
            coordinate,
            lo,
            hi,
            points,
        } => {
            let fam = limit.family()?;
            let &(blo, bhi) = fam
                .bounds()
                .get(coordinate)
                .ok_or_else(|| config("--coordinate is out of range"))?;
            let sweep = Sweep::linspace(coordinate, lo.unwrap_or(blo), hi.unwrap_or(bhi), points);
            let rows = beta_grid(&fam, &limit.theta0, limit.alpha, limit.delta, &sweep)?;
            let lines = rows
                .iter()
                .map(|r| format!("{},{},{},{}", r.value, r.beta, r.beta_plus, r.beta_minus));
            emit(out, &csv_table("theta,beta,beta_plus,beta_minus", lines))?;
        }
        Command::LimitSim {
            limit,
            coordinate,
            grid,
            sigma,
            reps,
        } => {
            let fam = limit.family()?;
            if coordinate >= fam.dim() || limit.theta0.len() != fam.dim() {
                return Err(config("--coordinate or --theta0 does not fit the family"));
            }
            if grid.is_empty() {
                return Err(config("--grid needs at least one value"));
            }
            let thetas: Vec<Vec<f64>> = grid
                .iter()
                .map(|&v| {
                    let mut t = limit.theta0.clone();
                    t[coordinate] = v;
                    t
                })
                .collect();
            let mut rng = RngStream::new(seed, 0);
            let draws = simulate_limit_w(
                &fam,
                &thetas,
                &limit.theta0,
                limit.alpha,
                sigma,
                limit.delta,
                reps,
                &mut rng,
            )?;
            let header = std::iter::once("rep".to_string())
                .chain(grid.iter().map(|v| format!("theta={v}")))
                .collect::<Vec<_>>()
                .join(",");
            let rows = draws.iter().enumerate().map(|(r, row)| {
                std::iter::once(r.to_string())
                    .chain(row.iter().map(f64::to_string))
                    .collect::<Vec<_>>()
                    .join(",")
            });
            emit(out, &csv_table(&header, rows))?;
        }
        Command::AcvfLimit { limit, sigma, lag } => {
            let fam = limit.family()?;
            let p = acvf_limit_params(&fam, &limit.theta0, limit.alpha, sigma, limit.delta, lag)?;
            emit(out, &json(&p))?;
        }
        Command::Experiment {
            family,
            theta0,
            alpha,
            sigma,
            n_list,
            replications,
            estimators,
            burn_in,
            step,
        } => {
            let mut cfg = match &cli.config {
                Some(p) => parse_config_json(&read(p)?)?,
                None => ExperimentConfig::new(
                    family
                        .as_deref()
                        .ok_or_else(|| config("--family or --config is required"))?
                        .parse()?,
                    theta0
                        .clone()
                        .ok_or_else(|| config("--theta0 or --config is required"))?,
                    alpha.ok_or_else(|| config("--alpha or --config is required"))?,
                ),
            };
            if let Some(f) = family {
                cfg.family = f.parse()?;
            }
            if let Some(t) = theta0 {
                cfg.theta0 = t;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            if let Some(s) = sigma {
                cfg.sigma = s;
            }
            if let Some(v) = n_list {
                cfg.n_list = v;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            if let Some(e) = estimators {
                cfg.estimators = e.iter().map(|s| parse_estimator(s)).collect::<Result<_>>()?;
            }
            if let Some(b) = burn_in {
                cfg.burn_in = b;
            }
            if let Some(h) = step {
                cfg.step = h;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = cli.threads {
                cfg.threads = Some(t);
            }
            if let Some(o) = &cli.out {
                cfg.output = Some(o.clone());
            }
            let report = run_experiment(&cfg)?;
            match &cfg.output {
                Some(base) => {
                    emit(Some(&base.with_extension("json")), &(report.to_json()? + "\n"))?;
                    emit(Some(&base.with_extension("csv")), &report.summary_csv()?)?;
                }
                None => emit(None, &(report.to_json()? + "\n"))?,
            }
            eprintln!("experiment finished in {:.1}s", report.wall_clock.as_secs_f64());
        }
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        // the experiment builds its own pool; this covers the other commands
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Numerical) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
