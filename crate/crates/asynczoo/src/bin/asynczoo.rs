//! Thin command-line front end; all logic lives in `asynczoo::cli`.

use asynczoo::cli::{
    self, cmd_bench_speedup, cmd_blend_demo, cmd_run, cmd_verify_bounds, DelayKind,
    ExperimentConfig, ProblemSpec,
};
use asynczoo::error::Error;
use asynczoo::stepsize::Variant;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "asynczoo", version, about = "Asynchronous stochastic optimization runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment (simulator or async engine).
    Run(CommonOpts),
    /// Fixed-iteration async runs across a list of worker counts.
    BenchSpeedup {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated worker counts; must include 1.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        threads_list: Vec<usize>,
    },
    /// Zeroth-order model blending from the zero vector.
    BlendDemo(CommonOpts),
    /// Numeric spot checks of the step-size theory and estimator bounds.
    VerifyBounds(CommonOpts),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// JSON config file; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<String>,
    /// Problem kind: quadratic | blend | blackbox | blend_csv.
    #[arg(long)]
    problem: Option<String>,
    /// Dimension (quadratic).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    condition: Option<f64>,
    #[arg(long)]
    components: Option<usize>,
    /// Sample rows (blend).
    #[arg(long)]
    rows: Option<usize>,
    /// Model count (blend).
    #[arg(long)]
    models: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    /// Layer widths (blackbox), e.g. 8,4,2.
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Sample count (blackbox).
    #[arg(long)]
    samples: Option<usize>,
    /// Headerless CSV with model predictions and targets (blend_csv).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Worker threads; 0 = deterministic simulator.
    #[arg(long)]
    threads: Option<usize>,
    /// Staleness bound.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform smoothing step for zeroth-order runs.
    #[arg(long)]
    mu: Option<f64>,
    /// Step-size override.
    #[arg(long)]
    gamma: Option<f64>,
    /// Block size (generic variant).
    #[arg(long)]
    y: Option<usize>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
    /// Simulator delay shape: none | fixed | uniform.
    #[arg(long)]
    delay: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run even when the stability check fails.
    #[arg(long)]
    force: bool,
}

fn merge(opts: &CommonOpts) -> Result<ExperimentConfig, Error> {
    merge_with_base(opts, ExperimentConfig::default())
}

fn merge_with_base(opts: &CommonOpts, base: ExperimentConfig) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => base,
    };
    if let Some(v) = &opts.variant {
        cfg.variant = v.parse::<Variant>()?;
    }
    if let Some(kind) = &opts.problem {
        cfg.problem = match kind.as_str() {
            "quadratic" => ProblemSpec::Quadratic {
                n: opts.n.unwrap_or(100),
                condition: opts.condition.unwrap_or(10.0),
                components: opts.components.unwrap_or(10),
            },
            "blend" => ProblemSpec::Blend {
                rows: opts.rows.unwrap_or(4000),
                models: opts.models.unwrap_or(50),
                noise_std: opts.noise_std.unwrap_or(0.5),
            },
            "blackbox" => ProblemSpec::Blackbox {
                layers: opts.layers.clone().unwrap_or_else(|| vec![8, 4, 2]),
                samples: opts.samples.unwrap_or(256),
                noise_std: opts.noise_std.unwrap_or(0.1),
            },
            "blend_csv" => ProblemSpec::BlendCsv {
                path: opts
                    .csv
                    .clone()
                    .ok_or_else(|| Error::validation("blend_csv needs --csv PATH"))?,
            },
            other => return Err(Error::validation(format!("unknown problem kind '{other}'"))),
        };
    } else {
        // Parameter flags refine the problem from the config file.
        match &mut cfg.problem {
            ProblemSpec::Quadratic { n, condition, components } => {
                if let Some(v) = opts.n {
                    *n = v;
                }
                if let Some(v) = opts.condition {
                    *condition = v;
                }
                if let Some(v) = opts.components {
                    *components = v;
                }
            }
            ProblemSpec::Blend { rows, models, noise_std } => {
                if let Some(v) = opts.rows {
                    *rows = v;
                }
                if let Some(v) = opts.models {
                    *models = v;
                }
                if let Some(v) = opts.noise_std {
                    *noise_std = v;
                }
            }
            ProblemSpec::Blackbox { layers, samples, noise_std } => {
                if let Some(v) = &opts.layers {
                    *layers = v.clone();
                }
                if let Some(v) = opts.samples {
                    *samples = v;
                }
                if let Some(v) = opts.noise_std {
                    *noise_std = v;
                }
            }
            ProblemSpec::BlendCsv { path } => {
                if let Some(v) = &opts.csv {
                    *path = v.clone();
                }
            }
        }
    }
    if let Some(v) = opts.k {
        cfg.k = v;
    }
    if let Some(v) = opts.threads {
        cfg.threads = v;
    }
    if let Some(v) = opts.t {
        cfg.t = v;
    }
    if let Some(v) = opts.seed {
        cfg.seed = v;
    }
    if let Some(v) = opts.mu {
        cfg.mu = Some(v);
    }
    if let Some(v) = opts.gamma {
        cfg.gamma = Some(v);
    }
    if let Some(v) = opts.y {
        cfg.y = Some(v);
    }
    if let Some(v) = opts.sigma2 {
        cfg.sigma2 = Some(v);
    }
    if let Some(v) = opts.snapshot_stride {
        cfg.snapshot_stride = v;
    }
    if let Some(d) = &opts.delay {
        cfg.delay = match d.as_str() {
            "none" => DelayKind::None,
            "fixed" => DelayKind::Fixed,
            "uniform" => DelayKind::Uniform,
            other => return Err(Error::validation(format!("unknown delay kind '{other}'"))),
        };
    }
    if let Some(v) = &opts.out {
        cfg.output = Some(v.clone());
    }
    if opts.force {
        cfg.force = true;
    }
    Ok(cfg)
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit codes collide with the documented ones.
            let _ = e.print();
            let code = if e.use_stderr() { cli::EXIT_INVALID } else { cli::EXIT_OK };
            std::process::exit(code);
        }
    };
    let mut out = std::io::stdout();
    let outcome = match &cli.command {
        Command::Run(opts) => merge(opts).and_then(|cfg| cmd_run(&cfg, &mut out)).map(|_| 0),
        Command::BenchSpeedup { common, threads_list } => merge(common)
            .and_then(|cfg| cmd_bench_speedup(&cfg, threads_list, &mut out))
            .map(|_| 0),
        Command::BlendDemo(opts) => {
            let base = ExperimentConfig {
                problem: ProblemSpec::Blend { rows: 4000, models: 50, noise_std: 0.5 },
                k: 200_000,
                snapshot_stride: 100,
                ..ExperimentConfig::default()
            };
            merge_with_base(opts, base).and_then(|mut cfg| {
                if opts.snapshot_stride.is_none() && opts.config.is_none() {
                    cfg.snapshot_stride = 100;
                }
                cmd_blend_demo(&cfg, &mut out).map(|_| 0)
            })
        }
        Command::VerifyBounds(opts) => {
            merge(opts).and_then(|cfg| cmd_verify_bounds(&cfg, &mut out))
        }
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(cli::exit_code_for(&e));
        }
    }
}
