//! Experiment harness: dataset generation and ingestion, normalization,
//! train/test splitting, evaluation metrics, the benchmark runner, and
//! latent-reconstruction curves.

mod experiment;
mod generate;
mod metrics;
mod modelfile;
mod reconstruct;

pub use experiment::{run_experiment, suite_datasets, EvalCell, EvalReport, InferenceMethod};
pub use generate::{generate_dataset, DatasetName};
pub use metrics::{mse, nlpd};
pub use modelfile::FittedModel;
pub use reconstruct::{curve_to_tsv, latent_rmse, map_latent_rmse, reconstruction_curve, LatentRmse, ReconstructionPoint};

use std::path::Path;

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{NsgpError, Result};

/// Affine normalization parameters: `normalized = (raw - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub x_offset: f64,
    pub x_scale: f64,
    pub y_offset: f64,
    pub y_scale: f64,
}

impl NormParams {
    /// Inputs map to [0, 1], outputs to [-1, 1]. A zero range leaves the
    /// scale at 1 so constant columns survive the round trip.
    pub fn fit(x: &DVector<f64>, y: &DVector<f64>) -> NormParams {
        let (x_min, x_max) = (x.min(), x.max());
        let (y_min, y_max) = (y.min(), y.max());
        let x_scale = if x_max > x_min { x_max - x_min } else { 1.0 };
        let y_scale = if y_max > y_min { (y_max - y_min) / 2.0 } else { 1.0 };
        NormParams {
            x_offset: x_min,
            x_scale,
            y_offset: (y_min + y_max) / 2.0,
            y_scale,
        }
    }

    pub fn normalize_x(&self, x: f64) -> f64 {
        (x - self.x_offset) / self.x_scale
    }

    pub fn denormalize_x(&self, x: f64) -> f64 {
        x * self.x_scale + self.x_offset
    }

    pub fn normalize_y(&self, y: f64) -> f64 {
        (y - self.y_offset) / self.y_scale
    }

    pub fn denormalize_y(&self, y: f64) -> f64 {
        y * self.y_scale + self.y_offset
    }
}

/// True generating latent functions tabulated at the inputs, in
/// normalized units (natural scale, not logs).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTruth {
    pub ell: DVector<f64>,
    pub sigma: DVector<f64>,
    pub omega: DVector<f64>,
}

/// A dataset with raw and normalized views, a train/test split, and the
/// generating latents when the data is synthetic.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub x_norm: DVector<f64>,
    pub y_norm: DVector<f64>,
    pub norm: NormParams,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub truth: Option<LatentTruth>,
}

impl Dataset {
    /// Build from raw columns; everything starts in the training set.
    pub fn from_raw(name: &str, x: DVector<f64>, y: DVector<f64>) -> Result<Dataset> {
        if x.len() != y.len() {
            return Err(NsgpError::Dimension {
                context: "Dataset::from_raw",
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(NsgpError::Empty("Dataset::from_raw: no rows"));
        }
        let norm = NormParams::fit(&x, &y);
        let x_norm = x.map(|v| norm.normalize_x(v));
        let y_norm = y.map(|v| norm.normalize_y(v));
        Ok(Dataset {
            name: name.to_string(),
            train_idx: (0..x.len()).collect(),
            test_idx: Vec::new(),
            x,
            y,
            x_norm,
            y_norm,
            norm,
            truth: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn n_train(&self) -> usize {
        self.train_idx.len()
    }

    fn gather(&self, idx: &[usize]) -> (DVector<f64>, DVector<f64>) {
        (
            DVector::from_fn(idx.len(), |i, _| self.x_norm[idx[i]]),
            DVector::from_fn(idx.len(), |i, _| self.y_norm[idx[i]]),
        )
    }

    /// Normalized training columns.
    pub fn train_xy(&self) -> (DVector<f64>, DVector<f64>) {
        self.gather(&self.train_idx)
    }

    /// Normalized test columns.
    pub fn test_xy(&self) -> (DVector<f64>, DVector<f64>) {
        self.gather(&self.test_idx)
    }
}

/// Re-split a dataset: `fraction` of the points drawn uniformly without
/// replacement become training data, the rest test data. Deterministic
/// for a fixed seed.
pub fn split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(NsgpError::Domain(format!(
            "split fraction {fraction} must be in (0, 1)"
        )));
    }
    let n = dataset.n();
    let n_train = ((n as f64) * fraction).round() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    let mut out = dataset.clone();
    out.train_idx = train;
    out.test_idx = test;
    Ok(out)
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| NsgpError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_csv(
    text: &str,
    path: &str,
    expected_headers: &[&[&str]],
) -> Result<Vec<Vec<f64>>> {
    let err = |line: usize, msg: String| NsgpError::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let cols: Vec<String> = header.split(',').map(|c| c.trim().to_lowercase()).collect();
    let accepted = expected_headers
        .iter()
        .any(|h| cols.len() == h.len() && cols.iter().zip(h.iter()).all(|(a, b)| a == b));
    if !accepted {
        let options: Vec<String> = expected_headers.iter().map(|h| h.join(",")).collect();
        return Err(err(1, format!("expected header {} (got '{header}')", options.join(" or "))));
    }
    let width = cols.len();
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(err(
                lineno + 1,
                format!("expected {width} fields, got {}", fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(width);
        for f in fields {
            row.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| err(lineno + 1, format!("'{}': {e}", f.trim())))?,
            );
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(err(1, "no data rows".into()));
    }
    Ok(rows)
}

/// Load a two-column `x,y` CSV (header required) and normalize it.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let text = read_to_string(path)?;
    let rows = parse_csv(&text, &path.display().to_string(), &[&["x", "y"]])?;
    let x = DVector::from_fn(rows.len(), |i, _| rows[i][0]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][1]);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Dataset::from_raw(&name, x, y)
}

/// Load a CSV with optional truth columns: `x,y` or
/// `x,y,ell,sigma,omega`. Truth values are taken to be in raw units and
/// are rescaled along with the data.
pub fn load_csv_with_truth(path: &Path) -> Result<Dataset> {
    let text = read_to_string(path)?;
    let rows = parse_csv(
        &text,
        &path.display().to_string(),
        &[&["x", "y"], &["x", "y", "ell", "sigma", "omega"]],
    )?;
    let x = DVector::from_fn(rows.len(), |i, _| rows[i][0]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][1]);
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let mut ds = Dataset::from_raw(&name, x, y)?;
    if rows[0].len() == 5 {
        let norm = ds.norm;
        ds.truth = Some(LatentTruth {
            ell: DVector::from_fn(rows.len(), |i, _| rows[i][2] / norm.x_scale),
            sigma: DVector::from_fn(rows.len(), |i, _| rows[i][3] / norm.y_scale),
            omega: DVector::from_fn(rows.len(), |i, _| rows[i][4] / norm.y_scale),
        });
    }
    Ok(ds)
}

/// Write a dataset back to CSV in raw units; includes the truth columns
/// when present and requested.
pub fn write_csv(dataset: &Dataset, path: &Path, include_truth: bool) -> Result<()> {
    let mut out = String::new();
    let truth = if include_truth { dataset.truth.as_ref() } else { None };
    if truth.is_some() {
        out.push_str("x,y,ell,sigma,omega\n");
    } else {
        out.push_str("x,y\n");
    }
    for i in 0..dataset.n() {
        match truth {
            Some(t) => {
                // truth is stored normalized; write raw units
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    dataset.x[i],
                    dataset.y[i],
                    t.ell[i] * dataset.norm.x_scale,
                    t.sigma[i] * dataset.norm.y_scale,
                    t.omega[i] * dataset.norm.y_scale
                ));
            }
            None => out.push_str(&format!("{},{}\n", dataset.x[i], dataset.y[i])),
        }
    }
    std::fs::write(path, out).map_err(|source| NsgpError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_row_split() {
        let x = DVector::from_column_slice(&[0.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_column_slice(&[1.0, -1.0, 2.0, 0.5]);
        let ds = Dataset::from_raw("t", x, y).unwrap();
        let s = split(&ds, 0.5, 3).unwrap();
        assert_eq!(s.n_train(), 2);
        assert_eq!(s.test_idx.len(), 2);
        let mut all: Vec<usize> = s.train_idx.iter().chain(&s.test_idx).copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn motorcycle_sized_split_has_67_training_points() {
        let n = 133;
        let x = DVector::from_fn(n, |i, _| i as f64);
        let y = DVector::from_fn(n, |i, _| (i as f64).sin());
        let ds = Dataset::from_raw("m", x, y).unwrap();
        let s = split(&ds, 0.5, 1).unwrap();
        assert_eq!(s.n_train(), 67);
        assert_eq!(s.test_idx.len(), 66);
    }

    #[test]
    fn constant_outputs_are_guarded() {
        let x = DVector::from_column_slice(&[0.0, 1.0, 2.0]);
        let y = DVector::from_element(3, 5.0);
        let ds = Dataset::from_raw("c", x, y).unwrap();
        assert!(ds.y_norm.abs().max() == 0.0);
        assert_eq!(ds.norm.y_scale, 1.0);
        for i in 0..3 {
            assert_eq!(ds.norm.denormalize_y(ds.y_norm[i]), 5.0);
        }
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = std::env::temp_dir().join("nsgp_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let good = dir.join("good.csv");
        std::fs::write(&good, "x,y\n0.0,1.5\n1.0,-0.5\n2.0,0.25\n3.0,0.0\n").unwrap();
        let ds = load_csv(&good).unwrap();
        assert_eq!(ds.n(), 4);
        assert_eq!(ds.x[3], 3.0);
        assert!((ds.x_norm.min(), ds.x_norm.max()) == (0.0, 1.0));
        assert!((ds.y_norm.min(), ds.y_norm.max()) == (-1.0, 1.0));

        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "x,y\n0.0,1.0\nnot,anumber\n").unwrap();
        match load_csv(&bad) {
            Err(NsgpError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let headerless = dir.join("head.csv");
        std::fs::write(&headerless, "a,b\n1,2\n").unwrap();
        assert!(matches!(load_csv(&headerless), Err(NsgpError::Parse { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn normalization_round_trips(
            raw in proptest::collection::vec(-1e6f64..1e6, 2..40),
        ) {
            let x = DVector::from_fn(raw.len(), |i, _| i as f64 * 0.25 - 3.0);
            let y = DVector::from_column_slice(&raw);
            let ds = Dataset::from_raw("p", x.clone(), y.clone()).unwrap();
            for i in 0..raw.len() {
                let back_y = ds.norm.denormalize_y(ds.y_norm[i]);
                let back_x = ds.norm.denormalize_x(ds.x_norm[i]);
                prop_assert!((back_y - y[i]).abs() <= 1e-12 * y[i].abs().max(1.0));
                prop_assert!((back_x - x[i]).abs() <= 1e-12 * x[i].abs().max(1.0));
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ds.y_norm[i]));
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&ds.x_norm[i]));
            }
        }
    }
}
