//! The benchmark runner: fits every (dataset, variant) cell, scores MSE
//! and NLPD on the held-out half, and collects a tab-separated report.
//! Cells run in parallel; per-cell failures are recorded and the run
//! continues. The serialized report excludes wall-clock runtime so that
//! reruns with the same seed are byte-identical.

use std::time::Instant;

use rayon::prelude::*;

use super::{generate_dataset, metrics, split, Dataset, DatasetName};
use crate::error::{NsgpError, Result};
use crate::infer_hmc::{sample_posterior, NutsConfig};
use crate::infer_map::{fit_map, MapOptions};
use crate::model::{Config, VariantFlags};
use crate::predict::{mixture_moments, predict_hmc, predict_map, PredictiveMixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMethod {
    Map,
    Hmc,
}

impl InferenceMethod {
    pub fn parse(s: &str) -> Result<InferenceMethod> {
        match s.to_lowercase().as_str() {
            "map" => Ok(InferenceMethod::Map),
            "hmc" => Ok(InferenceMethod::Hmc),
            other => Err(NsgpError::UnknownName(format!("method '{other}' (expected map or hmc)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            InferenceMethod::Map => "map",
            InferenceMethod::Hmc => "hmc",
        }
    }
}

/// One (dataset, variant) evaluation.
#[derive(Debug, Clone)]
pub struct EvalCell {
    pub dataset: String,
    pub variant: String,
    pub method: String,
    pub mll: f64,
    pub mse: f64,
    pub nlpd: f64,
    pub runtime_s: f64,
    pub seed: u64,
    pub error: Option<String>,
}

/// All cells of one run, in (dataset, variant) order.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    /// Tab-separated serialization. Runtime stays out of the file so the
    /// bytes depend only on data, config, and seed.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tvariant\tmethod\tmll\tmse\tnlpd\tseed\terror\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                c.dataset,
                c.variant,
                c.method,
                c.mll,
                c.mse,
                c.nlpd,
                c.seed,
                c.error.as_deref().unwrap_or("-"),
            ));
        }
        out
    }

    pub fn cell(&self, dataset: &str, variant: &str) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.variant == variant)
    }
}

fn evaluate_cell(
    dataset: &Dataset,
    flags: VariantFlags,
    method: InferenceMethod,
    config: &Config,
) -> EvalCell {
    let started = Instant::now();
    let mut cell = EvalCell {
        dataset: dataset.name.clone(),
        variant: flags.name(),
        method: method.as_str().to_string(),
        mll: f64::NAN,
        mse: f64::NAN,
        nlpd: f64::NAN,
        runtime_s: 0.0,
        seed: config.seed,
        error: None,
    };

    let run = || -> Result<(f64, f64, f64)> {
        let (x_train, y_train) = dataset.train_xy();
        let (x_test, y_test) = dataset.test_xy();
        if x_test.is_empty() {
            return Err(NsgpError::Empty("evaluate: dataset has no test split"));
        }
        let (mll, mixture): (f64, PredictiveMixture) = match method {
            InferenceMethod::Map => {
                let opts = MapOptions {
                    restarts: config.map_restarts,
                    max_iters: config.map_max_iters,
                    grad_tol: config.map_grad_tol,
                    seed: config.seed,
                };
                let fit = fit_map(&y_train, &x_train, &config.theta, &flags, &opts)?;
                let mix = predict_map(
                    &fit,
                    &y_train,
                    &x_train,
                    &x_test,
                    &config.theta,
                    config.predict_samples,
                    config.seed,
                )?;
                (fit.mll.total, mix)
            }
            InferenceMethod::Hmc => {
                let cfg = NutsConfig {
                    step_size: config.hmc_step_size,
                    max_tree_depth: config.hmc_max_depth,
                    n_samples: config.hmc_samples,
                    n_warmup: config.hmc_warmup,
                    n_chains: config.hmc_chains,
                    seed: config.seed,
                    start_at: None,
                };
                let set = sample_posterior(&y_train, &x_train, &config.theta, &flags, &cfg)?;
                let best_mll = set.samples.iter().map(|s| s.mll).fold(f64::NEG_INFINITY, f64::max);
                let thinned = set.thin(config.hmc_thin);
                let mix = predict_hmc(
                    &thinned,
                    &y_train,
                    &x_train,
                    &x_test,
                    &config.theta,
                    config.predict_samples,
                    config.seed,
                )?;
                (best_mll, mix)
            }
        };
        let (mean, _) = mixture_moments(&mixture);
        let mse = metrics::mse(&y_test, &mean)?;
        let nlpd = metrics::nlpd(&y_test, &mixture)?;
        Ok((mll, mse, nlpd))
    };

    match run() {
        Ok((mll, mse, nlpd)) => {
            cell.mll = mll;
            cell.mse = mse;
            cell.nlpd = nlpd;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell.runtime_s = started.elapsed().as_secs_f64();
    cell
}

/// Evaluate the full cross-product of datasets and variants. Cells run
/// concurrently; the report order is (dataset, variant) as given.
pub fn run_experiment(
    datasets: &[Dataset],
    variants: &[VariantFlags],
    method: InferenceMethod,
    config: &Config,
) -> EvalReport {
    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..variants.len()).map(move |v| (d, v)))
        .collect();
    let cells: Vec<EvalCell> = jobs
        .par_iter()
        .map(|&(d, v)| evaluate_cell(&datasets[d], variants[v], method, config))
        .collect();
    EvalReport { cells }
}

/// Datasets for a named evaluation suite, already split in half.
///
/// `desk` is a reduced-size suite for quick directional checks;
/// `synthetic` generates all six datasets at their benchmark-table sizes.
pub fn suite_datasets(suite: &str, seed: u64) -> Result<Vec<Dataset>> {
    let specs: Vec<(DatasetName, usize)> = match suite {
        "desk" => vec![
            (DatasetName::DOmegaSigma, 64),
            (DatasetName::DEll, 64),
            (DatasetName::Jump, 101),
        ],
        "synthetic" => DatasetName::ALL
            .iter()
            .map(|n| (*n, n.default_size()))
            .collect(),
        other => {
            return Err(NsgpError::UnknownName(format!(
                "suite '{other}' (expected desk or synthetic)"
            )))
        }
    };
    specs
        .into_iter()
        .map(|(name, n)| {
            let ds = generate_dataset(name, n, seed)?;
            split(&ds, 0.5, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(seed: u64) -> Config {
        Config {
            seed,
            map_restarts: 2,
            map_max_iters: 120,
            map_grad_tol: 1e-4,
            ..Default::default()
        }
    }

    #[test]
    fn single_cell_report() {
        let ds = split(&generate_dataset(DatasetName::DSigma, 40, 3).unwrap(), 0.5, 3).unwrap();
        let report = run_experiment(
            &[ds],
            &[VariantFlags::stationary()],
            InferenceMethod::Map,
            &quick_config(3),
        );
        assert_eq!(report.cells.len(), 1);
        let cell = &report.cells[0];
        assert!(cell.error.is_none(), "{:?}", cell.error);
        assert!(cell.mse >= 0.0);
        assert!(cell.nlpd.is_finite());
        let tsv = report.to_tsv();
        assert!(tsv.starts_with("dataset\tvariant\tmethod"));
        assert_eq!(tsv.lines().count(), 2);
    }

    #[test]
    fn reruns_are_identical() {
        let ds = split(&generate_dataset(DatasetName::DEll, 36, 5).unwrap(), 0.5, 5).unwrap();
        let variants = [VariantFlags::stationary(), VariantFlags::from_name("ell").unwrap()];
        let a = run_experiment(&[ds.clone()], &variants, InferenceMethod::Map, &quick_config(5));
        let b = run_experiment(&[ds], &variants, InferenceMethod::Map, &quick_config(5));
        assert_eq!(a.to_tsv(), b.to_tsv());
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        // a dataset without a test split fails cleanly inside its cell
        let ds = generate_dataset(DatasetName::DSigma, 24, 1).unwrap();
        let report = run_experiment(
            &[ds],
            &[VariantFlags::stationary()],
            InferenceMethod::Map,
            &quick_config(1),
        );
        assert!(report.cells[0].error.is_some());
    }

    #[test]
    fn unknown_suite_is_an_error() {
        assert!(suite_datasets("bogus", 1).is_err());
        let desk = suite_datasets("desk", 1).unwrap();
        assert_eq!(desk.len(), 3);
        assert!(desk.iter().all(|d| !d.test_idx.is_empty()));
    }
}
