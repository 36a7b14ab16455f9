//! Command-line front end: estimate / bias-adjust / risk-bound / simulate /
//! verify over a shared config file.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical or input error,
//! 4 verification failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use lamx_core::bound::{BoundSpec, MinimaxBound};
use lamx_core::config::{parse_config, RunConfig};
use lamx_core::error::Error;
use lamx_core::estim;
use lamx_core::harness::run_experiment;
use lamx_core::output;
use lamx_core::verify;

#[derive(Parser)]
#[command(
    name = "lamx",
    about = "Minimax estimation of kinked transforms of a regular parameter",
    version
)]
struct Cli {
    /// Worker threads for the surface and harness computations
    /// (default: machine parallelism). Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate theta from an observation CSV using the config's model.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        /// Observation CSV (header row, d numeric columns); overrides the
        /// config's [io] data path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output CSV path; overrides the config's [io] out path. Stdout
        /// when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate the risk surface and emit the sampled curve and the
    /// adjustment constant.
    BiasAdjust {
        #[arg(long)]
        config: PathBuf,
        /// Optional observation CSV; when given, moments are fitted from it
        /// instead of the [moments] section.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the population risk bound curve and its minimizer.
    RiskBound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo estimator comparison.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a tidy long-format CSV for plotting tools.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Run the library's certification checks.
    Verify {
        #[arg(long, value_enum, default_value_t = VerifyLevel::Quick)]
        level: VerifyLevel,
        #[arg(long, default_value_t = 20260809)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn dispatch(cmd: Command) -> lamx_core::Result<ExitCode> {
    match cmd {
        Command::Estimate { config, data, out } => {
            let cfg = parse_config(&config)?;
            let model = require_model(&cfg)?;
            let data_path = data
                .or_else(|| cfg.data.clone())
                .ok_or_else(|| config_err("estimate needs a data CSV (--data or [io] data)"))?;
            let sample = output::read_observations(&data_path)?;
            if sample.dim() != model.d {
                return Err(Error::Input(format!(
                    "data has {} columns but the model dimension is {}",
                    sample.dim(),
                    model.d
                )));
            }
            let report =
                estim::estimate_minimax(&sample, &model.g, &model.f, &model.loss, &cfg.bias)?;
            emit(
                out.or_else(|| cfg.out.clone()),
                &output::estimate_csv(&report, &cfg.hash),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::BiasAdjust { config, data, out } => {
            let cfg = parse_config(&config)?;
            let model = require_model(&cfg)?;
            let (beta_hat, sigma_hat, n) = if let Some(path) =
                data.or_else(|| cfg.data.clone())
            {
                let sample = output::read_observations(&path)?;
                if sample.dim() != model.d {
                    return Err(Error::Input(format!(
                        "data has {} columns but the model dimension is {}",
                        sample.dim(),
                        model.d
                    )));
                }
                let (b, s) = estim::fit_moments(&sample)?;
                (b, s, sample.n())
            } else if let Some(m) = &cfg.moments {
                (m.beta_hat.clone(), m.sigma_hat.clone(), m.n)
            } else {
                return Err(config_err(
                    "bias-adjust needs either a data CSV or a [moments] section",
                ));
            };
            let beta: Vec<f64> = beta_hat.iter().copied().collect();
            let eps_n = cfg.bias.eps.resolve(n)?;
            let g_beta = model.g.eval(&beta)?;
            let a = model.f.s_hat(g_beta, eps_n)?;
            let surface = lamx_core::bias::c_hat(
                a,
                &model.g,
                &model.loss,
                &beta,
                &sigma_hat,
                n,
                &cfg.bias,
            )?;
            emit(
                out.or_else(|| cfg.out.clone()),
                &output::surface_csv(&surface, &cfg.bias, &cfg.hash),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::RiskBound { config, out } => {
            let cfg = parse_config(&config)?;
            let model = require_model(&cfg)?;
            let bound = cfg
                .bound
                .as_ref()
                .ok_or_else(|| config_err("risk-bound needs a [bound] section"))?;
            let spec = BoundSpec {
                g: model.g.clone(),
                f: model.f,
                beta0: bound.beta0.clone(),
                sigma: bound.sigma.clone(),
                loss: model.loss,
                cfg: bound.cfg.clone(),
            };
            let mb: MinimaxBound = lamx_core::bound::minimax_bound(&spec)?;
            emit(
                out.or_else(|| cfg.out.clone()),
                &output::bound_csv(&mb, &bound.cfg, &cfg.hash),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate {
            config,
            out,
            plot_data,
        } => {
            let cfg = parse_config(&config)?;
            let exp = cfg
                .experiment
                .as_ref()
                .ok_or_else(|| config_err("simulate needs an [experiment] section"))?;
            let curve = run_experiment(exp)?;
            emit(
                out.or_else(|| cfg.out.clone()),
                &output::risk_csv(&curve, &cfg.hash),
            )?;
            if let Some(path) = plot_data {
                std::fs::write(&path, output::plot_data_csv(&curve, &cfg.hash))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { level, seed } => {
            let level = match level {
                VerifyLevel::Quick => verify::Level::Quick,
                VerifyLevel::Full => verify::Level::Full,
            };
            let checks = verify::run(level, seed);
            for c in &checks {
                println!(
                    "[{}] {} ({} ms) {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.millis,
                    c.detail
                );
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                println!("verify: all {} checks passed", checks.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("verify: {failed}/{} checks FAILED", checks.len());
                Ok(ExitCode::from(4))
            }
        }
    }
}

fn require_model(cfg: &RunConfig) -> lamx_core::Result<&lamx_core::config::ModelSection> {
    cfg.model
        .as_ref()
        .ok_or_else(|| config_err("this subcommand needs a [model] section"))
}

fn config_err(msg: &str) -> Error {
    Error::Config(vec![msg.to_string()])
}

fn emit(path: Option<PathBuf>, content: &str) -> lamx_core::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = Path::new(&p).parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            std::fs::write(&p, content)?;
        }
        None => print!("{content}"),
    }
    Ok(())
}
