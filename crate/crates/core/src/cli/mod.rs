//! Command-line front end: `simulate`, `estimate`, `mc` and `report`.
//!
//! Exit codes: 0 ok, 2 configuration or usage, 3 input or I/O,
//! 4 numerical, 5 solver or regularity, 6 capacity.

pub mod config;
pub mod output;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::estimators::{estimate, theta_from_model, EstimationResult, Method};
use crate::lab::{
    estimate_asymp_cov_g, estimate_asymp_cov_threshold, mc_clt_check, mc_variance_scaling, rate_table_experiment,
    sigma_tilde_gaussian_exact, McReport, NamedMatrix, Verdict,
};
use crate::lfsm::io::{path_from_bytes, path_to_bytes, read_path_csv, write_path_csv};
use crate::lfsm::{k_order_increments, Path, Simulator};
use crate::spectral::TestFunction;
use crate::stable::RngHandle;

pub use config::{Experiment, Format, RunConfig};
use output::{Manifest, RunStatus, Staged};

#[derive(Debug, Parser)]
#[command(name = "mixlfsm", version, about = "Simulate and estimate mixed linear fractional stable motions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (TOML, or a resolved JSON config).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "MIXLFSM_THREADS")]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, env = "MIXLFSM_OUT")]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Vec<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a path.
    Simulate(Common),
    /// Estimate θ from a path file or a fresh simulation.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Path file (`.csv` or binary).
        #[arg(long, conflicts_with = "simulate")]
        input: Option<PathBuf>,
        /// Simulate the configured model instead of reading a path.
        #[arg(long)]
        simulate: bool,
    },
    /// Run a Monte Carlo experiment.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Experiment; defaults to `mc.experiment` of the config.
        #[arg(value_enum)]
        experiment: Option<Experiment>,
    },
    /// Summarise report files as markdown tables.
    Report {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Also write `summary.md` here.
        #[arg(long, env = "MIXLFSM_OUT")]
        out: Option<PathBuf>,
    },
}

/// Outcome of a command that ran to completion, possibly unsuccessfully.
struct Finished {
    staged: Staged,
    failure: Option<Error>,
}

/// Config with command-line overrides applied and every default filled.
pub fn resolved_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.output.threads = t;
    }
    if let Some(o) = &common.out {
        cfg.output.dir = o.to_string_lossy().into_owned();
    }
    if !common.format.is_empty() {
        cfg.output.formats = common.format.clone();
    }
    cfg.resolve()
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start {threads} worker threads: {e}")))
}

fn manifest(cmd: &str, cfg: &RunConfig, failure: Option<&Error>) -> Manifest {
    Manifest {
        command: cmd.into(),
        status: if failure.is_some() { RunStatus::Failed } else { RunStatus::Ok },
        exit_code: failure.map_or(0, Error::exit_code),
        error: failure.map(|e| e.to_string()),
        seed: cfg.seed,
        code_version: env!("CARGO_PKG_VERSION").into(),
        threads: cfg.output.threads,
        files: Vec::new(),
    }
}

/// Run a command and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mixlfsm: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let (name, common, body): (&str, Common, Box<dyn FnOnce(&RunConfig) -> Result<Finished> + Send>) = match cli.command {
        Command::Report { files, out } => return cmd_report(&files, out),
        Command::Simulate(c) => ("simulate", c, Box::new(cmd_simulate)),
        Command::Estimate {
            common,
            input,
            simulate,
        } => {
            if input.is_none() && !simulate {
                return Err(Error::config("estimate needs --input PATH or --simulate"));
            }
            ("estimate", common, Box::new(move |cfg| cmd_estimate(cfg, input.as_deref())))
        }
        Command::Mc { common, experiment } => ("mc", common, Box::new(move |cfg| cmd_mc(cfg, experiment))),
    };
    let cfg = resolved_config(&common)?;
    let threads = pool(cfg.output.threads)?;
    let result = threads.install(|| body(&cfg));
    let fin = match result {
        Ok(f) => f,
        // Configuration and input problems are found before any output exists.
        Err(e) if matches!(e.exit_code(), 2 | 3) => return Err(e),
        Err(e) => {
            Staged::new(&cfg.output.dir).commit(manifest(name, &cfg, Some(&e)))?;
            return Err(e);
        }
    };
    let m = manifest(name, &cfg, fin.failure.as_ref());
    fin.staged.commit(m)?;
    match fin.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn staged_with_config(cfg: &RunConfig) -> Result<Staged> {
    let mut s = Staged::new(&cfg.output.dir);
    s.add_json("resolved_config.json", cfg)?;
    Ok(s)
}

fn simulate_path(cfg: &RunConfig) -> Result<Path> {
    let scheme = cfg.scheme()?;
    Simulator::new(&cfg.model, &scheme)?.simulate(&RngHandle::new(cfg.seed, 0))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Finished> {
    let path = simulate_path(cfg)?;
    let mut s = staged_with_config(cfg)?;
    for f in &cfg.output.formats {
        match f {
            Format::Csv => {
                let mut buf = Vec::new();
                write_path_csv(&path, &mut buf)?;
                s.add("path.csv", buf);
            }
            Format::Bin => s.add("path.bin", path_to_bytes(&path)),
            Format::Json => s.add_json("path.json", &path)?,
        }
    }
    Ok(Finished {
        staged: s,
        failure: None,
    })
}

fn read_path(file: &std::path::Path, delta: f64) -> Result<Path> {
    let bytes = std::fs::read(file).map_err(|e| Error::input(format!("cannot read {}: {e}", file.display())))?;
    if bytes.starts_with(&crate::lfsm::io::MAGIC) {
        return path_from_bytes(&bytes);
    }
    match read_path_csv(bytes.as_slice(), None) {
        Ok(p) => Ok(p),
        Err(_) => read_path_csv(bytes.as_slice(), Some(delta)),
    }
}

fn cmd_estimate(cfg: &RunConfig, input: Option<&std::path::Path>) -> Result<Finished> {
    let design = cfg.design()?;
    let scheme = cfg.scheme()?;
    let (path, truth) = match input {
        Some(f) => (read_path(f, scheme.delta)?, None),
        None => {
            let truth = theta_from_model(&cfg.model, scheme.k, design.method).ok();
            (simulate_path(cfg)?, truth)
        }
    };
    let panel = k_order_increments(&path, scheme.k, &scheme.gammas)?;
    let res: EstimationResult = estimate(&panel, &design, cfg.q(), cfg.init()?, truth.as_ref(), &cfg.solver.options)?;
    let mut s = staged_with_config(cfg)?;
    s.add_json("estimate.json", &res)?;
    s.add_json("identifiability.json", &res.identifiability)?;
    if cfg.output.formats.contains(&Format::Csv) {
        s.add_csv("estimate.csv", &res.csv_header(), &[res.csv_row()])?;
    }
    let failure = (!res.converged).then(|| {
        Error::Solver(format!(
            "no convergence after {} iterations (residual {:.3e}); diagnostics written",
            res.iterations, res.residual_norm
        ))
    });
    Ok(Finished { staged: s, failure })
}

fn asymcov_report(cfg: &RunConfig) -> Result<McReport> {
    let design = cfg.design()?;
    let k = cfg.scheme.k;
    let theta = theta_from_model(&cfg.model, k, design.method)?;
    let opts = crate::lab::AsympCovOptions {
        seed: cfg.seed,
        ..cfg.mc.asymcov.clone()
    };
    let mut r = McReport::new("asymcov", cfg.seed, opts.reps);
    r.method = Some(design.method);
    match design.method {
        Method::Adaptive => {
            let l = estimate_asymp_cov_g(&theta, &design, k, &opts)?;
            r.matrices.push(NamedMatrix::from_dmatrix("sigma_tilde", &l.matrix));
            r.verdicts.push(Verdict::judged(
                "min_eigenvalue_before_projection",
                l.min_eigenvalue,
                -1e-10,
                l.min_eigenvalue >= -1e-10,
                "value ≥ tolerance",
            ));
            r.verdicts.push(Verdict::judged(
                "truncation_bound",
                l.truncation_bound,
                f64::NAN,
                true,
                "reported",
            ));
            r.warnings.extend(l.warnings);
            let c = &cfg.model.components;
            if let ([one], [TestFunction::GaussBump { decay }]) = (c.as_slice(), design.functions.as_slice()) {
                if one.beta == 2.0 {
                    let t: Vec<(f64, usize)> = design.tuples.iter().map(|t| (t.lambda, t.gamma)).collect();
                    let exact = sigma_tilde_gaussian_exact(one.b, one.hurst, k, &t, *decay);
                    r.matrices.push(NamedMatrix::from_dmatrix("sigma_tilde_exact", &exact));
                }
            }
        }
        Method::Threshold => {
            let t = estimate_asymp_cov_threshold(&theta, &design, k, &opts)?;
            r.matrices.push(NamedMatrix::from_dmatrix("sigma1", &t.sigma1));
            r.matrices.push(NamedMatrix::from_dmatrix("sigma2", &t.sigma2));
            r.verdicts
                .push(Verdict::below("richardson_gap", t.richardson_gap, 0.05));
            r.warnings.extend(t.warnings);
        }
    }
    Ok(r)
}

fn cmd_mc(cfg: &RunConfig, experiment: Option<Experiment>) -> Result<Finished> {
    let exp = experiment
        .or(cfg.mc.experiment)
        .ok_or_else(|| Error::config("no experiment given on the command line or in mc.experiment"))?;
    let report = match exp {
        Experiment::Variance => mc_variance_scaling(&cfg.plan()?, &cfg.function(cfg.mc.function))?,
        Experiment::Clt => {
            let f2 = cfg.mc.second_function.map(|c| cfg.function(c));
            mc_clt_check(&cfg.plan()?, &cfg.function(cfg.mc.function), cfg.mc.case, f2.as_ref())?
        }
        Experiment::Rates => rate_table_experiment(&cfg.plan()?, &cfg.rate_options())?,
        Experiment::Asymcov => asymcov_report(cfg)?,
    };
    for c in &report.cells {
        eprintln!("{} n={} {}", report.experiment, c.n, c.label);
    }
    let mut s = staged_with_config(cfg)?;
    s.add_json("report.json", &report)?;
    if cfg.output.formats.contains(&Format::Csv) {
        let (h, rows) = report.csv_table();
        s.add_csv("report.csv", &h, &rows)?;
    }
    if exp == Experiment::Rates {
        s.add("rates.dat", gnuplot_rates(&report).into_bytes());
    }
    Ok(Finished {
        staged: s,
        failure: None,
    })
}

/// Whitespace-separated `n` and RMSE columns for plotting.
fn gnuplot_rates(r: &McReport) -> String {
    let names: Vec<String> = r.fits.iter().map(|f| format!("rmse_{}", f.name)).collect();
    let mut out = format!("# n {}\n", names.join(" "));
    for c in &r.cells {
        let vals: Vec<String> = names
            .iter()
            .map(|k| c.get(k).map_or("nan".into(), |v| format!("{v:e}")))
            .collect();
        out.push_str(&format!("{} {}\n", c.n, vals.join(" ")));
    }
    out
}

fn cmd_report(files: &[PathBuf], out: Option<PathBuf>) -> Result<()> {
    let reports = files
        .iter()
        .map(|f| report::load_report(f))
        .collect::<Result<Vec<_>>>()?;
    let md = report::render(&reports)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir)?;
        output::write_atomic(&dir.join("summary.md"), md.as_bytes())?;
    }
    print!("{md}");
    Ok(())
}
