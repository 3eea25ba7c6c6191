//! Command-line front end; all real work lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use nsgp::harness::{
    self, curve_to_tsv, generate_dataset, load_csv, load_csv_with_truth, reconstruction_curve,
    run_experiment, suite_datasets, DatasetName, FittedModel, InferenceMethod,
};
use nsgp::infer_hmc::{sample_posterior, NutsConfig};
use nsgp::infer_map::{fit_map, MapOptions};
use nsgp::model::Config;
use nsgp::{NsgpError, Result};

#[derive(Parser)]
#[command(name = "nsgp", version, about = "Nonstationary heteroscedastic GP regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Generate {
        /// d-sigma | d-ell | d-omega-sigma | d-omega-ell | d-omega-sigma-ell | jump
        #[arg(long)]
        name: String,
        /// Number of points (defaults to the benchmark-table size).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the generating latents as x,y,ell,sigma,omega.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Fit a model to an x,y CSV and save it.
    Fit {
        /// map | hmc
        #[arg(long)]
        method: String,
        /// Key-value configuration file (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Read the prior means literally as log-domain values.
        #[arg(long)]
        mu_in_log_domain: bool,
    },
    /// Predict at target inputs from a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Single-column CSV with header `x`.
        #[arg(long)]
        targets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Conditional draws per posterior sample (1 = conditional means).
        #[arg(long, default_value_t = 1)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an evaluation suite over the model variants.
    Evaluate {
        /// desk | synthetic
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// map | hmc
        #[arg(long, default_value = "map")]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        mu_in_log_domain: bool,
    },
    /// Latent reconstruction curve on a dataset with known truth.
    Reconstruct {
        /// CSV with header x,y,ell,sigma,omega.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated training sizes (defaults to a nested grid).
        #[arg(long)]
        sizes: Option<String>,
        #[arg(long)]
        mu_in_log_domain: bool,
    },
}

fn load_config(path: Option<&PathBuf>, mu_in_log_domain: bool) -> Result<Config> {
    let mut text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| NsgpError::Io {
            path: p.display().to_string(),
            source,
        })?,
        None => String::new(),
    };
    if mu_in_log_domain {
        text.push_str("\nmu_in_log_domain true\n");
    }
    let label = path
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<defaults>".into());
    Config::parse(&text, &label)
}

fn write_out(path: &PathBuf, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| NsgpError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_targets(path: &PathBuf) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| NsgpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let err = |line: usize, msg: String| NsgpError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty targets file".into()))?;
    if header.trim().to_lowercase() != "x" {
        return Err(err(1, format!("expected header 'x', got '{header}'")));
    }
    let mut vals = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        vals.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| err(lineno + 1, format!("'{line}': {e}")))?,
        );
    }
    if vals.is_empty() {
        return Err(err(1, "no target rows".into()));
    }
    Ok(DVector::from_column_slice(&vals))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { name, n, seed, out, truth_out } => {
            let name = DatasetName::parse(&name)?;
            let n = n.unwrap_or_else(|| name.default_size());
            let ds = generate_dataset(name, n, seed)?;
            harness::write_csv(&ds, &out, false)?;
            if let Some(truth_path) = truth_out {
                harness::write_csv(&ds, &truth_path, true)?;
            }
            eprintln!("wrote {} points of {} to {}", ds.n(), name, out.display());
        }
        Command::Fit { method, config, data, out, mu_in_log_domain } => {
            let cfg = load_config(config.as_ref(), mu_in_log_domain)?;
            let method = InferenceMethod::parse(&method)?;
            let ds = load_csv(&data)?;
            let (x, y) = ds.train_xy();
            let model = match method {
                InferenceMethod::Map => {
                    let opts = MapOptions {
                        restarts: cfg.map_restarts,
                        max_iters: cfg.map_max_iters,
                        grad_tol: cfg.map_grad_tol,
                        seed: cfg.seed,
                    };
                    let fit = fit_map(&y, &x, &cfg.theta, &cfg.flags, &opts)?;
                    eprintln!(
                        "map fit: mll {:.4}, converged {}, {} iterations",
                        fit.mll.total, fit.converged, fit.iterations
                    );
                    FittedModel::from_map(&fit, cfg.theta, cfg.flags, ds.norm, x, y)
                }
                InferenceMethod::Hmc => {
                    let nuts = NutsConfig {
                        step_size: cfg.hmc_step_size,
                        max_tree_depth: cfg.hmc_max_depth,
                        n_samples: cfg.hmc_samples,
                        n_warmup: cfg.hmc_warmup,
                        n_chains: cfg.hmc_chains,
                        seed: cfg.seed,
                        start_at: None,
                    };
                    let set = sample_posterior(&y, &x, &cfg.theta, &cfg.flags, &nuts)?;
                    for st in &set.chain_stats {
                        eprintln!(
                            "chain {}: {} transitions, {} divergences, mean depth {:.2}",
                            st.chain, st.transitions, st.divergences, st.mean_tree_depth
                        );
                    }
                    let thinned = set.thin(cfg.hmc_thin);
                    FittedModel::from_samples(thinned, cfg.theta, cfg.flags, ds.norm, x, y)
                }
            };
            model.save(&out)?;
            eprintln!("saved model to {}", out.display());
        }
        Command::Predict { model, targets, out, samples, seed } => {
            let model = FittedModel::load(&model)?;
            let targets = parse_targets(&targets)?;
            let csv = model.predict_csv(&targets, samples.max(1), seed)?;
            write_out(&out, &csv)?;
            eprintln!("wrote {} predictions to {}", targets.len(), out.display());
        }
        Command::Evaluate { suite, config, method, out, mu_in_log_domain } => {
            let cfg = load_config(config.as_ref(), mu_in_log_domain)?;
            let method = InferenceMethod::parse(&method)?;
            let datasets = suite_datasets(&suite, cfg.seed)?;
            let variants = nsgp::model::VariantFlags::benchmark_variants();
            let report = run_experiment(&datasets, &variants, method, &cfg);
            write_out(&out, &report.to_tsv())?;
            let total: f64 = report.cells.iter().map(|c| c.runtime_s).sum();
            let failures = report.cells.iter().filter(|c| c.error.is_some()).count();
            eprintln!(
                "evaluated {} cells in {:.1}s ({} failed); report at {}",
                report.cells.len(),
                total,
                failures,
                out.display()
            );
        }
        Command::Reconstruct { data, config, out, sizes, mu_in_log_domain } => {
            let cfg = load_config(config.as_ref(), mu_in_log_domain)?;
            let ds = load_csv_with_truth(&data)?;
            let sizes: Vec<usize> = match sizes {
                Some(list) => list
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<usize>().map_err(|e| NsgpError::Parse {
                            path: "--sizes".into(),
                            line: 1,
                            msg: format!("'{s}': {e}"),
                        })
                    })
                    .collect::<Result<_>>()?,
                None => {
                    let n = ds.n();
                    [n / 8, n / 4, n / 2, 3 * n / 4, n]
                        .into_iter()
                        .filter(|&s| s >= 4)
                        .collect()
                }
            };
            let opts = MapOptions {
                restarts: cfg.map_restarts,
                max_iters: cfg.map_max_iters,
                grad_tol: cfg.map_grad_tol,
                seed: cfg.seed,
            };
            let curve = reconstruction_curve(&ds, &cfg.theta, &cfg.flags, &sizes, &opts)?;
            write_out(&out, &curve_to_tsv(&curve))?;
            eprintln!("wrote {}-point curve to {}", curve.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
